// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "hif8/tensorops.hpp"
#include "test_support.hpp"

namespace hif8 {
namespace {

TensorF32 randomTensor(std::vector<std::size_t> dims, std::uint64_t seed, double lo = -8, double hi = 4)
{
    std::mt19937_64 rng(seed);
    const std::size_t n = detail::checkedProduct(dims);
    std::vector<float> v(n);
    for (auto& x : v) {
        x = testing::logUniform(rng, lo, hi);
    }
    return TensorF32(std::move(dims), std::move(v));
}

TEST(Tensor, ShapeValidation)
{
    EXPECT_THROW(TensorF32({2, 3}, std::vector<float>(5)), Error);
    EXPECT_THROW(TensorF32({}, {}), Error);
    EXPECT_THROW(TensorF32({0}, {}), Error);
    const TensorF32 t({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.rank(), 2U);
    EXPECT_EQ(t.at(1, 2), 6.0f);
}

TEST(Tensor, QuantizeExample)
{
    const TensorF32 t({3}, {1.0f, -1.5f, 0.0f});
    const auto q = quantizeTensor(t, {}, 0);
    ASSERT_EQ(q.codes.size(), 3U);
    EXPECT_EQ(q.codes[0], Hif8Code(0x08));
    EXPECT_EQ(q.codes[1], Hif8Code(0x8C));
    EXPECT_EQ(q.codes[2], Hif8Code(0x00));

    EXPECT_EQ(quantizeTensor(TensorF32({1}, {0.5f}), {}, 1).codes[0], Hif8Code(0x08));

    RoundingSpec sat;
    sat.overflow = OverflowPolicy::SaturateToBoundary;
    EXPECT_EQ(quantizeTensor(TensorF32({1}, {1e6f}), sat).codes[0], codes::kPosMaxNormal);
    EXPECT_THROW(quantizeTensor(t, {}, 128), Error);
    EXPECT_THROW(quantizeTensor(t, {}, -128), Error);
}

TEST(Tensor, DequantizeExamples)
{
    QuantizedTensor q{{1}, {codes::kPosMaxNormal}, {}, 3};
    EXPECT_EQ(dequantizeTensor(q)[0], 4096.0f);
    q = {{3}, {codes::kNaN, codes::kPosInf, codes::kNegInf}, {}, 0};
    const auto d = dequantizeTensor(q);
    EXPECT_TRUE(std::isnan(d[0]));
    EXPECT_EQ(d[1], std::numeric_limits<float>::infinity());
    EXPECT_EQ(d[2], -std::numeric_limits<float>::infinity());
}

TEST(Tensor, RepresentableRoundTrip)
{
    std::vector<float> v;
    for (const auto& e : testing::finiteTable()) {
        v.push_back(static_cast<float>(e.value));
    }
    const TensorF32 t({v.size()}, v);
    EXPECT_TRUE(fakeQuant(t, {}).bitEqual(t));
}

TEST(Tensor, FakeQuantIdempotent)
{
    const RoundingMode modes[] = {RoundingMode::TA, RoundingMode::TE, RoundingMode::SrStandard,
                                  RoundingMode::SrSimplified, RoundingMode::Hybrid};
    for (const auto m : modes) {
        RoundingSpec spec;
        spec.mode = m;
        spec.seed = 99;
        for (const int s : {0, 3, -2}) {
            const auto t = randomTensor({64, 17}, 5 + s);
            const auto once = fakeQuant(t, spec, s);
            EXPECT_TRUE(fakeQuant(once, spec, s).bitEqual(once)) << to_string(m);
        }
    }
}

TEST(Tensor, TAHalfUlpBound)
{
    const auto t = randomTensor({4096}, 21, -14, 14);
    const auto q = fakeQuant(t, {});
    for (std::size_t i = 0; i < t.size(); ++i) {
        int e = 0;
        std::frexp(static_cast<double>(t[i]), &e);
        const double ulp = std::ldexp(1.0, e - 1 - *fractionWidthAt(e - 1));
        EXPECT_LE(std::fabs(static_cast<double>(t[i]) - q[i]), 0.5 * ulp);
    }
}

TEST(Tensor, ScaleTransparency)
{
    std::vector<float> v;
    for (const auto& e : testing::finiteTable()) {
        if (std::fabs(e.value) >= 0.25 && std::fabs(e.value) < 8.0) {
            v.push_back(static_cast<float>(e.value));
        }
    }
    const TensorF32 t({v.size()}, v);
    // 3-bit-fraction values stay exact under shifts that keep them within |E| < 4.
    for (int s = -1; s <= 1; ++s) {
        EXPECT_TRUE(fakeQuant(t, {}, s).bitEqual(fakeQuant(t, {}, 0)));
    }
}

TEST(Tensor, ZerosPreserved)
{
    const auto z = TensorF32::zeros({5, 5});
    for (const auto m : {RoundingMode::TA, RoundingMode::TE, RoundingMode::SrStandard, RoundingMode::SrSimplified,
                         RoundingMode::Hybrid}) {
        RoundingSpec spec;
        spec.mode = m;
        for (const auto c : quantizeTensor(z, spec, 7).codes) {
            EXPECT_EQ(c, codes::kZero);
        }
    }
}

TEST(Tensor, StandardSrIsPositionKeyed)
{
    RoundingSpec spec;
    spec.mode = RoundingMode::SrStandard;
    spec.seed = 42;
    const auto t = randomTensor({1000}, 8);
    const auto a = quantizeTensor(t, spec);
    const auto b = quantizeTensor(t, spec);
    EXPECT_EQ(a.codes, b.codes);
    // The same element at the same index gets the same code in a smaller tensor.
    const TensorF32 head({10}, std::vector<float>(t.data().begin(), t.data().begin() + 10));
    const auto h = quantizeTensor(head, spec);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(h.codes[i], a.codes[i]);
    }
    spec.seed = 43;
    EXPECT_NE(quantizeTensor(t, spec).codes, a.codes);
}

TensorF32 scalarGemm(const TensorF32& a, const TensorF32& w, int sa, int sw)
{
    const std::size_t m = a.dims()[0];
    const std::size_t k = a.dims()[1];
    const std::size_t n = w.dims()[1];
    std::vector<float> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::size_t p = 0; p < k; ++p) {
                const float x = toFloat(roundTA(std::ldexp(a.at(i, p), sa)));
                const float y = toFloat(roundTA(std::ldexp(w.at(p, j), sw)));
                const float prod = x * y;
                acc = acc + prod;
            }
            out[i * n + j] = std::ldexp(acc, -(sa + sw));
        }
    }
    return TensorF32({m, n}, out);
}

TEST(Gemm, MatchesScalarReference)
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto a = randomTensor({8, 8}, seed * 2);
        const auto w = randomTensor({8, 8}, seed * 2 + 1);
        const int sa = static_cast<int>(seed % 5) - 2;
        const int sw = static_cast<int>(seed % 3) - 1;
        const auto got = gemmFakeQuant(a, w, {}, {}, sa, sw);
        EXPECT_TRUE(got.bitEqual(scalarGemm(a, w, sa, sw))) << seed;
        EXPECT_TRUE(got.bitEqual(gemmFakeQuant(a, w, {}, {}, sa, sw)));
    }
}

TEST(Gemm, ExactCases)
{
    EXPECT_EQ(gemmFakeQuant(TensorF32({1, 1}, {3.0f}), TensorF32({1, 1}, {5.0f}), {}, {})[0], 15.0f);
    std::vector<float> eye(16, 0.0f);
    for (int i = 0; i < 4; ++i) {
        eye[i * 5] = 1.0f;
    }
    const TensorF32 w({4, 4}, {1, 2, 3, 4, 0.5f, 0.25f, -1, -2, 6, 7, -8, 12, 0.125f, 1.5f, -3, 0});
    EXPECT_TRUE(gemmFakeQuant(TensorF32({4, 4}, eye), w, {}, {}).bitEqual(w));
    EXPECT_THROW(gemmFakeQuant(TensorF32({2, 3}, std::vector<float>(6)), w, {}, {}), Error);
}

TEST(ErrorStatsTest, Basics)
{
    const TensorF32 a({2}, {1.0f, 0.0f});
    const auto same = errorStats(a, a);
    EXPECT_EQ(same.mse, 0.0);
    EXPECT_EQ(same.snrDb, std::numeric_limits<double>::infinity());
    const auto s = errorStats(a, TensorF32({2}, {0.0f, 0.0f}));
    EXPECT_EQ(s.mse, 0.5);
    EXPECT_EQ(s.maxAbsErr, 1.0);
    EXPECT_EQ(s.zeroFraction, 0.5);
    EXPECT_THROW(errorStats(a, TensorF32({1, 2}, {0.0f, 0.0f})), Error);
    const auto o = errorStats(a, TensorF32({2}, {std::numeric_limits<float>::infinity(), 0.0f}));
    EXPECT_EQ(o.overflowCount, 1U);
}

TEST(ErrorStatsTest, RationalOracle)
{
    // Dyadic values: every difference and square is exact, so the rational
    // sum (3/8)^2 + (1/4)^2 + (5/16)^2 + 0 = 77/256, over 4 -> 77/1024.
    const TensorF32 ref({4}, {1.0f, 2.0f, -0.5f, 3.0f});
    const TensorF32 test({4}, {0.625f, 2.25f, -0.1875f, 3.0f});
    const auto s = errorStats(ref, test);
    EXPECT_EQ(s.mse, 77.0 / 1024.0);
    const double signal = (1.0 + 4.0 + 0.25 + 9.0) / 4.0;
    EXPECT_DOUBLE_EQ(s.snrDb, 10.0 * std::log10(signal / (77.0 / 1024.0)));
}

}  // namespace
}  // namespace hif8
