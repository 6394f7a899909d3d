// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hif8/error.hpp"
#include "hif8/rounding.hpp"
#include "hif8/tensorops.hpp"

// Post-training calibration with per-tensor power-of-two scales.
//
// Pass 1 runs the model in FP32 and records every layer's matmul output.
// Pass 2 walks the layers again on quantized activations: for each
// (Ea, Ew) in [-4, 5]^2 it casts O_q^{l-1} * 2^Ea and W^l * 2^Ew with TA,
// multiplies, restores by 2^-(Ea+Ew) and scores the MSE against pass 1.
// The best pair is kept and its output, after the layer's vector op, feeds
// the next layer.

namespace hif8 {

enum class VectorOp : std::uint8_t { None, ReLU, Gelu, Bias };

inline std::string_view to_string(VectorOp op)
{
    switch (op) {
    case VectorOp::None: return "none";
    case VectorOp::ReLU: return "relu";
    case VectorOp::Gelu: return "gelu";
    case VectorOp::Bias: return "bias";
    }
    return "?";
}

inline std::optional<VectorOp> parseVectorOp(std::string_view s)
{
    if (s == "none") return VectorOp::None;
    if (s == "relu") return VectorOp::ReLU;
    if (s == "gelu") return VectorOp::Gelu;
    if (s == "bias") return VectorOp::Bias;
    return std::nullopt;
}

struct Layer {
    TensorF32 weight;  // [in x out]
    VectorOp op = VectorOp::None;
    std::vector<float> bias;  // [out], VectorOp::Bias only
};

struct LayerGraph {
    std::vector<Layer> layers;

    /// Throws EmptyModel / DimensionMismatch.
    void validate() const
    {
        if (layers.empty()) {
            throw Error(ErrorKind::EmptyModel, "model has no layers");
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& w = layers[l].weight;
            if (w.rank() != 2) {
                throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(l) + " weight is not rank 2");
            }
            if (l > 0 && layers[l - 1].weight.dims()[1] != w.dims()[0]) {
                throw Error(ErrorKind::DimensionMismatch,
                            "layer " + std::to_string(l) + " expects " + std::to_string(w.dims()[0]) +
                                " inputs, previous layer gives " + std::to_string(layers[l - 1].weight.dims()[1]));
            }
            if (layers[l].op == VectorOp::Bias && layers[l].bias.size() != w.dims()[1]) {
                throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(l) + " bias length");
            }
        }
    }

    std::size_t inputWidth() const { return layers.front().weight.dims()[0]; }
};

/// Vector ops run in FP32; GELU uses the tanh approximation.
inline void applyVectorOp(TensorF32& t, const Layer& layer)
{
    const std::size_t cols = t.dims()[1];
    auto data = t.data();
    switch (layer.op) {
    case VectorOp::None: return;
    case VectorOp::ReLU:
        for (float& x : data) {
            x = x > 0.0f ? x : 0.0f;
        }
        return;
    case VectorOp::Gelu:
        for (float& x : data) {
            const double v = x;
            const double inner = std::sqrt(2.0 / 3.14159265358979323846) * (v + 0.044715 * v * v * v);
            x = static_cast<float>(0.5 * v * (1.0 + std::tanh(inner)));
        }
        return;
    case VectorOp::Bias:
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] += layer.bias[i % cols];
        }
        return;
    }
}

inline constexpr int kSearchMin = -4;
inline constexpr int kSearchMax = 5;
inline constexpr int kSearchSpan = kSearchMax - kSearchMin + 1;

struct CalibrationOptions {
    RoundingSpec spec{};  // TA from FP32
    /// Cast the calibration batch itself before layer 1. When false, layer 1
    /// sees the FP32 batch (still scaled by 2^Ea, which is exact).
    bool quantizeFirstInput = true;
    std::string datasetId = "calib";
};

struct LayerCalibration {
    int ea = 0;
    int ew = 0;
    double minErr = 0.0;
    /// kSearchSpan x kSearchSpan, row = Ea - kSearchMin, column = Ew - kSearchMin.
    std::vector<double> grid;

    double errAt(int ea_, int ew_) const
    {
        return grid[static_cast<std::size_t>((ea_ - kSearchMin) * kSearchSpan + (ew_ - kSearchMin))];
    }
    double directCastErr() const { return errAt(0, 0); }

    friend bool operator==(const LayerCalibration&, const LayerCalibration&) = default;
};

struct CalibrationReport {
    std::string datasetId;
    RoundingMode mode = RoundingMode::TA;
    std::vector<LayerCalibration> layers;

    friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

struct CalibrationRun {
    CalibrationReport report;
    TensorF32 output;  // quantized O_q^L after the last vector op
    std::vector<TensorF32> reference;  // pass-1 matmul outputs O^l
};

namespace detail {

inline TensorF32 scaledCopy(const TensorF32& t, int scaleExp)
{
    std::vector<float> v(t.data().begin(), t.data().end());
    for (float& x : v) {
        x = static_cast<float>(std::ldexp(static_cast<double>(x), scaleExp));
    }
    return TensorF32(t.dims(), std::move(v));
}

/// One quantized layer matmul, before the vector op.
inline TensorF32 quantizedLayer(const TensorF32& input, const TensorF32& weight, int ea, int ew,
                                const RoundingSpec& spec, bool castInput)
{
    if (castInput) {
        return gemmFakeQuant(input, weight, spec, spec, ea, ew);
    }
    // Only the weight is cast; the input keeps FP32 precision.
    TensorF32 out = matmul(scaledCopy(input, ea), decodeCodes(quantizeTensor(weight, spec, ew)));
    for (float& x : out.data()) {
        x = static_cast<float>(std::ldexp(static_cast<double>(x), -(ea + ew)));
    }
    return out;
}

inline void checkInput(const LayerGraph& model, const TensorF32& input)
{
    model.validate();
    if (input.rank() != 2 || input.dims()[1] != model.inputWidth()) {
        throw Error(ErrorKind::DimensionMismatch, "input " + dimsToString(input.dims()) + " does not feed a " +
                                                      std::to_string(model.inputWidth()) + "-wide first layer");
    }
}

}  // namespace detail

/// FP32 forward pass.
inline TensorF32 forwardFp32(const LayerGraph& model, const TensorF32& input)
{
    detail::checkInput(model, input);
    TensorF32 a = input;
    for (const auto& layer : model.layers) {
        a = matmul(a, layer.weight);
        applyVectorOp(a, layer);
    }
    return a;
}

inline CalibrationRun calibrate(const LayerGraph& model, const TensorF32& calibData,
                                const CalibrationOptions& options = {})
{
    detail::checkInput(model, calibData);
    CalibrationRun run;
    run.report.datasetId = options.datasetId;
    run.report.mode = options.spec.mode;

    TensorF32 a = calibData;
    for (const auto& layer : model.layers) {
        run.reference.push_back(matmul(a, layer.weight));
        a = run.reference.back();
        applyVectorOp(a, layer);
    }

    TensorF32 aq = calibData;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        const bool castInput = l > 0 || options.quantizeFirstInput;
        LayerCalibration cal;
        cal.grid.reserve(kSearchSpan * kSearchSpan);
        cal.minErr = std::numeric_limits<double>::infinity();
        std::optional<TensorF32> best;
        for (int ea = kSearchMin; ea <= kSearchMax; ++ea) {
            for (int ew = kSearchMin; ew <= kSearchMax; ++ew) {
                TensorF32 oq = detail::quantizedLayer(aq, layer.weight, ea, ew, options.spec, castInput);
                const double err = errorStats(run.reference[l], oq).mse;
                cal.grid.push_back(err);
                // Strict comparison keeps the lexicographically smallest pair on ties;
                // the first grid point is always taken so a NaN score still yields a pick.
                if (!best || err < cal.minErr) {
                    cal.minErr = err;
                    cal.ea = ea;
                    cal.ew = ew;
                    best = std::move(oq);
                }
            }
        }
        aq = std::move(*best);
        applyVectorOp(aq, layer);
        run.report.layers.push_back(std::move(cal));
    }
    run.output = std::move(aq);
    return run;
}

/// Quantized forward pass with the stored per-layer scales.
inline TensorF32 applyCalibration(const LayerGraph& model, const CalibrationReport& report, const TensorF32& input,
                                  const CalibrationOptions& options = {})
{
    detail::checkInput(model, input);
    if (report.layers.size() != model.layers.size()) {
        throw Error(ErrorKind::ReportMismatch, "report has " + std::to_string(report.layers.size()) +
                                                   " layers, model has " + std::to_string(model.layers.size()));
    }
    TensorF32 aq = input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& cal = report.layers[l];
        if (cal.ea < kSearchMin || cal.ea > kSearchMax || cal.ew < kSearchMin || cal.ew > kSearchMax) {
            throw Error(ErrorKind::ReportMismatch, "layer " + std::to_string(l) + " scale outside [-4, 5]");
        }
        aq = detail::quantizedLayer(aq, model.layers[l].weight, cal.ea, cal.ew, options.spec,
                                    l > 0 || options.quantizeFirstInput);
        applyVectorOp(aq, model.layers[l]);
    }
    return aq;
}

/// Direct cast: every layer at (Ea, Ew) = (0, 0).
inline TensorF32 directCastForward(const LayerGraph& model, const TensorF32& input,
                                   const CalibrationOptions& options = {})
{
    CalibrationReport zeros;
    zeros.layers.resize(model.layers.size());
    return applyCalibration(model, zeros, input, options);
}

}  // namespace hif8
