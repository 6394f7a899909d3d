// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hif8/codec.hpp"
#include "hif8/error.hpp"
#include "hif8/rounding.hpp"

namespace hif8 {

namespace detail {

inline std::size_t checkedProduct(const std::vector<std::size_t>& dims)
{
    if (dims.empty()) {
        throw Error(ErrorKind::DimensionMismatch, "tensor needs at least one dimension");
    }
    std::size_t n = 1;
    for (const std::size_t d : dims) {
        if (d == 0) {
            throw Error(ErrorKind::DimensionMismatch, "zero-sized dimension");
        }
        if (n > std::numeric_limits<std::size_t>::max() / d) {
            throw Error(ErrorKind::DimOverflow, "element count overflows");
        }
        n *= d;
    }
    return n;
}

inline std::string dimsToString(const std::vector<std::size_t>& dims)
{
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        s += (i ? "x" : "") + std::to_string(dims[i]);
    }
    return s + "]";
}

}  // namespace detail

/// Row-major FP32 tensor.
class TensorF32 {
public:
    TensorF32() : dims_{1}, data_(1, 0.0f) {}

    TensorF32(std::vector<std::size_t> dims, std::vector<float> data)
        : dims_(std::move(dims)), data_(std::move(data))
    {
        if (detail::checkedProduct(dims_) != data_.size()) {
            throw Error(ErrorKind::DimensionMismatch,
                        "dims " + detail::dimsToString(dims_) + " hold " +
                            std::to_string(detail::checkedProduct(dims_)) + " elements, got " +
                            std::to_string(data_.size()));
        }
    }

    static TensorF32 zeros(std::vector<std::size_t> dims)
    {
        const std::size_t n = detail::checkedProduct(dims);
        return TensorF32(std::move(dims), std::vector<float>(n, 0.0f));
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    /// Rank-2 access.
    float at(std::size_t row, std::size_t col) const { return data_[row * dims_[1] + col]; }
    float& at(std::size_t row, std::size_t col) { return data_[row * dims_[1] + col]; }

    /// Bitwise equality, so NaN payloads and signed zeros count.
    bool bitEqual(const TensorF32& other) const
    {
        if (dims_ != other.dims_) {
            return false;
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (std::bit_cast<std::uint32_t>(data_[i]) != std::bit_cast<std::uint32_t>(other.data_[i])) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<float> data_;
};

/// HiF8 codes for a tensor that was multiplied by 2^scaleExp before casting.
struct QuantizedTensor {
    std::vector<std::size_t> dims;
    std::vector<Hif8Code> codes;
    RoundingSpec spec;
    int scaleExp = 0;
};

inline constexpr int kMaxScaleExp = 127;

inline void checkScaleExp(int scaleExp)
{
    if (scaleExp < -kMaxScaleExp || scaleExp > kMaxScaleExp) {
        throw Error(ErrorKind::InvalidArgument, "scaleExp " + std::to_string(scaleExp) + " outside [-127, 127]");
    }
}

/// code_i = round(t_i * 2^scaleExp). The power-of-two scale is folded into the
/// exponent, so it never rounds by itself. Standard SR draws its threshold
/// from counterThreshold(seed, i).
inline QuantizedTensor quantizeTensor(const TensorF32& t, const RoundingSpec& spec, int scaleExp = 0)
{
    checkScaleExp(scaleExp);
    QuantizedTensor q{t.dims(), std::vector<Hif8Code>(t.size()), spec, scaleExp};
    const auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::uint64_t threshold =
            spec.mode == RoundingMode::SrStandard ? counterThreshold(spec.seed, i) : 0;
        q.codes[i] = roundToHif8(toSource(data[i], spec.source), spec, scaleExp, threshold);
    }
    return q;
}

inline float descale(Hif8Code code, int scaleExp)
{
    return static_cast<float>(std::ldexp(static_cast<double>(toFloat(code)), -scaleExp));
}

inline TensorF32 dequantizeTensor(const QuantizedTensor& q)
{
    std::vector<float> out(q.codes.size());
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
        out[i] = descale(q.codes[i], q.scaleExp);
    }
    return TensorF32(q.dims, std::move(out));
}

/// Decoded codes in the scaled domain (no descale).
inline TensorF32 decodeCodes(const QuantizedTensor& q)
{
    std::vector<float> v(q.codes.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = toFloat(q.codes[i]);
    }
    return TensorF32(q.dims, std::move(v));
}

inline TensorF32 fakeQuant(const TensorF32& t, const RoundingSpec& spec, int scaleExp = 0)
{
    return dequantizeTensor(quantizeTensor(t, spec, scaleExp));
}

/// Plain FP32 matmul, accumulation in ascending k per output element.
inline TensorF32 matmul(const TensorF32& a, const TensorF32& w)
{
    if (a.rank() != 2 || w.rank() != 2 || a.dims()[1] != w.dims()[0]) {
        throw Error(ErrorKind::DimensionMismatch,
                    "matmul " + detail::dimsToString(a.dims()) + " x " + detail::dimsToString(w.dims()));
    }
    const std::size_t m = a.dims()[0];
    const std::size_t k = a.dims()[1];
    const std::size_t n = w.dims()[1];
    TensorF32 out = TensorF32::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a.at(i, p) * w.at(p, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

/// O = (Aq x Wq) * 2^-(scaleA + scaleW), where Aq/Wq are the decoded codes of
/// the scaled operands.
inline TensorF32 gemmFakeQuant(const TensorF32& a, const TensorF32& w, const RoundingSpec& specA,
                               const RoundingSpec& specW, int scaleA = 0, int scaleW = 0)
{
    if (a.rank() != 2 || w.rank() != 2 || a.dims()[1] != w.dims()[0]) {
        throw Error(ErrorKind::DimensionMismatch,
                    "gemm " + detail::dimsToString(a.dims()) + " x " + detail::dimsToString(w.dims()));
    }
    TensorF32 out = matmul(decodeCodes(quantizeTensor(a, specA, scaleA)), decodeCodes(quantizeTensor(w, specW, scaleW)));
    const int restore = -(scaleA + scaleW);
    for (float& x : out.data()) {
        x = static_cast<float>(std::ldexp(static_cast<double>(x), restore));
    }
    return out;
}

struct ErrorStats {
    double mse = 0.0;
    double maxAbsErr = 0.0;
    double snrDb = 0.0;  // +inf when mse == 0
    double zeroFraction = 0.0;     // share of elements nonzero in reference, zero in test
    std::size_t overflowCount = 0;  // finite in reference, non-finite in test
};

inline ErrorStats errorStats(const TensorF32& reference, const TensorF32& test)
{
    if (reference.dims() != test.dims()) {
        throw Error(ErrorKind::DimensionMismatch,
                    detail::dimsToString(reference.dims()) + " vs " + detail::dimsToString(test.dims()));
    }
    ErrorStats s;
    double sq = 0.0;
    double signal = 0.0;
    std::size_t zeros = 0;
    const auto r = reference.data();
    const auto t = test.data();
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double ri = r[i];
        const double ti = t[i];
        const double diff = ri - ti;
        sq += diff * diff;
        signal += ri * ri;
        s.maxAbsErr = std::max(s.maxAbsErr, std::fabs(diff));
        if (ti == 0.0 && ri != 0.0) {
            ++zeros;
        }
        if (!std::isfinite(ti) && std::isfinite(ri)) {
            ++s.overflowCount;
        }
    }
    const auto n = static_cast<double>(r.size());
    s.mse = sq / n;
    s.zeroFraction = static_cast<double>(zeros) / n;
    s.snrDb = s.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10((signal / n) / s.mse);
    return s;
}

}  // namespace hif8
