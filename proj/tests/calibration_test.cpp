// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hif8/calibration.hpp"

namespace hif8 {
namespace {

TensorF32 gaussian(std::vector<std::size_t> dims, std::uint64_t seed, double scale)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<float> v(detail::checkedProduct(dims));
    for (auto& x : v) {
        x = static_cast<float>(n(rng) * scale);
    }
    return TensorF32(std::move(dims), std::move(v));
}

LayerGraph mlp(std::uint64_t seed, double wScale)
{
    LayerGraph g;
    g.layers.push_back({gaussian({16, 32}, seed, wScale), VectorOp::ReLU, {}});
    g.layers.push_back({gaussian({32, 32}, seed + 1, wScale), VectorOp::Gelu, {}});
    Layer last{gaussian({32, 8}, seed + 2, wScale), VectorOp::Bias, std::vector<float>(8, 0.25f)};
    g.layers.push_back(last);
    return g;
}

TEST(Calibration, GridShapeAndArgmin)
{
    const auto model = mlp(1, 1.0 / 16);
    const auto data = gaussian({64, 16}, 100, 1.0);
    const auto run = calibrate(model, data);
    ASSERT_EQ(run.report.layers.size(), 3U);
    for (const auto& l : run.report.layers) {
        ASSERT_EQ(l.grid.size(), 100U);
        const auto it = std::min_element(l.grid.begin(), l.grid.end());
        const auto idx = static_cast<int>(it - l.grid.begin());
        EXPECT_EQ(l.minErr, *it);
        EXPECT_EQ(l.ea, kSearchMin + idx / kSearchSpan);
        EXPECT_EQ(l.ew, kSearchMin + idx % kSearchSpan);
        EXPECT_LE(l.minErr, l.directCastErr());
        EXPECT_GE(l.ea, -4);
        EXPECT_LE(l.ea, 5);
    }
}

TEST(Calibration, ExactModelHasZeroError)
{
    LayerGraph g;
    g.layers.push_back({TensorF32({2, 2}, {1.0f, 0.5f, -2.0f, 0.25f}), VectorOp::None, {}});
    g.layers.push_back({TensorF32({2, 1}, {1.0f, 2.0f}), VectorOp::ReLU, {}});
    const TensorF32 data({2, 2}, {1.0f, 0.0f, 0.5f, 1.0f});
    const auto run = calibrate(g, data);
    for (const auto& l : run.report.layers) {
        EXPECT_EQ(l.directCastErr(), 0.0);
        EXPECT_EQ(l.minErr, 0.0);
    }
}

TEST(Calibration, TieBreakIsLexicographic)
{
    LayerGraph g;
    g.layers.push_back({TensorF32({1, 1}, {1.0f}), VectorOp::None, {}});
    const auto run = calibrate(g, TensorF32({1, 1}, {1.0f}));
    EXPECT_EQ(run.report.layers[0].ea, -4);
    EXPECT_EQ(run.report.layers[0].ew, -4);
}

TEST(Calibration, SmallWeightsPreferUpscaling)
{
    LayerGraph g;
    g.layers.push_back({gaussian({32, 16}, 7, 1.0 / 8), VectorOp::None, {}});
    const TensorF32 data = gaussian({64, 32}, 8, 1.0);
    const auto run = calibrate(g, data);
    const auto& l = run.report.layers[0];
    EXPECT_GE(l.ew, 1);
    EXPECT_LT(l.minErr, l.directCastErr());
}

TEST(Calibration, ApplyReproducesCalibrationOutput)
{
    const auto model = mlp(3, 1.0 / 16);
    const auto data = gaussian({32, 16}, 4, 1.0);
    for (const bool castFirst : {true, false}) {
        CalibrationOptions opts;
        opts.quantizeFirstInput = castFirst;
        const auto run = calibrate(model, data, opts);
        EXPECT_TRUE(applyCalibration(model, run.report, data, opts).bitEqual(run.output));
        const auto ref = forwardFp32(model, data);
        const double calErr = errorStats(ref, run.output).mse;
        const double directErr = errorStats(ref, directCastForward(model, data, opts)).mse;
        EXPECT_LE(calErr, directErr);
    }
}

TEST(Calibration, InputCastFlagMatters)
{
    LayerGraph g;
    g.layers.push_back({TensorF32({1, 1}, {1.0f}), VectorOp::None, {}});
    const TensorF32 data({1, 1}, {1.03f});
    CalibrationOptions keep;
    keep.quantizeFirstInput = false;
    EXPECT_GT(calibrate(g, data).report.layers[0].directCastErr(), 0.0);
    EXPECT_EQ(calibrate(g, data, keep).report.layers[0].directCastErr(), 0.0);
}

TEST(Calibration, ChainsQuantizedActivations)
{
    const auto model = mlp(5, 1.0 / 16);
    const auto data = gaussian({16, 16}, 6, 1.0);
    const auto run = calibrate(model, data);
    const auto& c0 = run.report.layers[0];
    TensorF32 a1 = detail::quantizedLayer(data, model.layers[0].weight, c0.ea, c0.ew, {}, true);
    applyVectorOp(a1, model.layers[0]);
    for (int ea = kSearchMin; ea <= kSearchMax; ea += 3) {
        for (int ew = kSearchMin; ew <= kSearchMax; ew += 4) {
            const auto o = detail::quantizedLayer(a1, model.layers[1].weight, ea, ew, {}, true);
            EXPECT_EQ(errorStats(run.reference[1], o).mse, run.report.layers[1].errAt(ea, ew));
        }
    }
    // Reference pass uses FP32 activations.
    TensorF32 r = matmul(data, model.layers[0].weight);
    applyVectorOp(r, model.layers[0]);
    EXPECT_TRUE(matmul(r, model.layers[1].weight).bitEqual(run.reference[1]));
}

TEST(Calibration, Errors)
{
    EXPECT_THROW(calibrate(LayerGraph{}, TensorF32({1, 1}, {1.0f})), Error);
    const auto model = mlp(1, 1.0);
    try {
        calibrate(model, TensorF32({2, 15}, std::vector<float>(30)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
    LayerGraph bad;
    bad.layers.push_back({TensorF32({2, 3}, std::vector<float>(6)), VectorOp::None, {}});
    bad.layers.push_back({TensorF32({4, 1}, std::vector<float>(4)), VectorOp::None, {}});
    EXPECT_THROW(bad.validate(), Error);

    const auto data = gaussian({4, 16}, 1, 1.0);
    CalibrationReport r = calibrate(model, data).report;
    r.layers.pop_back();
    try {
        applyCalibration(model, r, data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ReportMismatch);
    }
    r = calibrate(model, data).report;
    r.layers[0].ea = 6;
    EXPECT_THROW(applyCalibration(model, r, data), Error);
}

TEST(Calibration, VectorOps)
{
    Layer relu{TensorF32({1, 3}, {0, 0, 0}), VectorOp::ReLU, {}};
    TensorF32 t({1, 3}, {-1.0f, 0.0f, 2.0f});
    applyVectorOp(t, relu);
    EXPECT_EQ(t[0], 0.0f);
    EXPECT_EQ(t[2], 2.0f);
    Layer bias{TensorF32({1, 3}, {0, 0, 0}), VectorOp::Bias, {1.0f, 2.0f, 3.0f}};
    TensorF32 b({2, 3}, {0, 0, 0, 1, 1, 1});
    applyVectorOp(b, bias);
    EXPECT_EQ(b.at(1, 2), 4.0f);
    Layer gelu{TensorF32({1, 1}, {0}), VectorOp::Gelu, {}};
    TensorF32 g({1, 3}, {0.0f, 1.0f, -1.0f});
    applyVectorOp(g, gelu);
    EXPECT_EQ(g[0], 0.0f);
    EXPECT_NEAR(g[1], 0.841192f, 1e-5);
    EXPECT_NEAR(g[2], -0.158808f, 1e-5);
    EXPECT_EQ(parseVectorOp("gelu"), VectorOp::Gelu);
    EXPECT_FALSE(parseVectorOp("tanh"));
}

}  // namespace
}  // namespace hif8
