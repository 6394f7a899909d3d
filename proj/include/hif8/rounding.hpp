// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "hif8/codec.hpp"
#include "hif8/source_format.hpp"

// Conversion of FP32/FP16/BF16 values to HiF8.
//
// Every mode works on the same split of the source significand: K is the
// magnitude in units of the HiF8 ulp at the source exponent, F the discarded
// remainder as a binary fraction of that ulp. A mode only decides whether
// K or K + 1 is kept; a carry into the next binade re-encodes naturally.

namespace hif8 {

enum class RoundingMode : std::uint8_t {
    TA,             // round half away from zero
    TE,             // round half to even
    SrStandard,     // stochastic, uniform threshold from a generator
    SrSimplified,   // SR14 for FP32 sources, SR2 for FP16/BF16
    Hybrid,         // TA for |E| < 4, simplified SR otherwise
};

enum class OverflowPolicy : std::uint8_t { ToInfinity, SaturateToBoundary };
enum class NanPolicy : std::uint8_t { Propagate, SaturateToZero };

struct RoundingSpec {
    RoundingMode mode = RoundingMode::TA;
    SourceFormat source = SourceFormat::FP32;
    OverflowPolicy overflow = OverflowPolicy::ToInfinity;
    NanPolicy nan = NanPolicy::Propagate;
    std::uint64_t seed = 0;  // SrStandard only

    friend constexpr bool operator==(const RoundingSpec&, const RoundingSpec&) = default;
};

inline std::string_view to_string(RoundingMode m)
{
    switch (m) {
    case RoundingMode::TA: return "ta";
    case RoundingMode::TE: return "te";
    case RoundingMode::SrStandard: return "sr";
    case RoundingMode::SrSimplified: return "sr-simplified";
    case RoundingMode::Hybrid: return "hr";
    }
    return "?";
}

inline std::optional<RoundingMode> parseRoundingMode(std::string_view s)
{
    if (s == "ta") return RoundingMode::TA;
    if (s == "te") return RoundingMode::TE;
    if (s == "sr") return RoundingMode::SrStandard;
    if (s == "sr-simplified" || s == "sr14" || s == "sr2") return RoundingMode::SrSimplified;
    if (s == "hr") return RoundingMode::Hybrid;
    return std::nullopt;
}

/// Magnitude split at the HiF8 ulp for one source value.
struct RoundingWork {
    bool negative = false;
    int ulpExponent = 0;          // kept magnitude = kept * 2^ulpExponent
    std::uint32_t kept = 0;       // K
    std::uint64_t discarded = 0;  // F, left-aligned: F = discarded / 2^64 (+ sticky)
    bool sticky = false;          // nonzero bits below the 64-bit window
    std::uint32_t sourceFraction = 0;  // raw stored fraction, threshold source for SR14/SR2
    int sourceExponent = 0;       // unscaled, for the hybrid split

    constexpr bool exact() const { return discarded == 0 && !sticky; }
};

/// Split a finite source magnitude scaled by 2^scaleExp. Returns nullopt when
/// the scaled exponent already exceeds the HiF8 range.
constexpr std::optional<RoundingWork> splitAtUlp(const UnpackedSource& u, int scaleExp)
{
    const int e = u.exponent + scaleExp;
    if (e > kMaxExponent) {
        return std::nullopt;
    }
    // Below 2^-22 the ulp stays at 2^-22: candidates are 0 and the smallest denormal.
    const int ulp = e < kMinExponent ? kMinExponent : e - *fractionWidthAt(e);
    const int d = u.fractionBits + (ulp - e);  // number of discarded significand bits, >= 4
    const std::uint64_t sig = u.significand;

    RoundingWork w;
    w.negative = u.negative;
    w.ulpExponent = ulp;
    w.sourceFraction = u.storedFraction;
    w.sourceExponent = u.exponent;
    if (d < 64) {
        w.kept = static_cast<std::uint32_t>(sig >> d);
        w.discarded = (sig & ((std::uint64_t{1} << d) - 1U)) << (64 - d);
    } else if (d == 64) {
        w.discarded = sig;
    } else if (d - 64 < 64) {
        const int s = d - 64;
        w.discarded = sig >> s;
        w.sticky = (sig & ((std::uint64_t{1} << s) - 1U)) != 0;
    } else {
        w.sticky = sig != 0;
    }
    return w;
}

/// Round-half decisions on a split. TE keeps an even K on an exact tie.
constexpr bool roundsUpTA(const RoundingWork& w)
{
    return (w.discarded >> 63) != 0;
}

constexpr bool roundsUpTE(const RoundingWork& w)
{
    constexpr std::uint64_t half = std::uint64_t{1} << 63;
    if (w.discarded == half && !w.sticky) {
        return (w.kept & 1U) != 0;
    }
    return w.discarded >= half;
}

/// Up iff F >= T, T uniform on [0, 1) given as a 64-bit fixed-point draw.
/// Exact values never move.
constexpr bool roundsUpStochastic(const RoundingWork& w, std::uint64_t threshold)
{
    return !w.exact() && w.discarded >= threshold;
}

/// SR14: T = 14 LSBs of the FP32 fraction, F = 14 MSBs of the discarded bits.
constexpr bool roundsUpSr14(const RoundingWork& w)
{
    const std::uint32_t t14 = w.sourceFraction & 0x3FFFU;
    const auto f14 = static_cast<std::uint32_t>(w.discarded >> 50);
    return !w.exact() && f14 >= t14;
}

/// SR2: T = (source LSB, 1) read as a 2-bit fraction, so 0.25 or 0.75;
/// F = top 2 discarded bits.
constexpr bool roundsUpSr2(const RoundingWork& w)
{
    const std::uint32_t t2 = ((w.sourceFraction & 1U) << 1) | 1U;
    const auto f2 = static_cast<std::uint32_t>(w.discarded >> 62);
    return !w.exact() && f2 >= t2;
}

constexpr bool roundsUpSimplified(const RoundingWork& w, SourceFormat source)
{
    return source == SourceFormat::FP32 ? roundsUpSr14(w) : roundsUpSr2(w);
}

constexpr bool hybridUsesTA(int sourceExponent)
{
    return sourceExponent > -4 && sourceExponent < 4;
}

/// Code for a magnitude of `units * 2^ulpExponent`, or nullopt on overflow
/// (including landing on the 1.5 * 2^15 infinity pattern).
constexpr std::optional<Hif8Code> encodeUnits(bool negative, std::uint32_t units, int ulpExponent)
{
    if (units == 0) {
        return codes::kZero;
    }
    const int top = std::bit_width(units) - 1;
    const int exponent = ulpExponent + top;
    if (exponent > kMaxExponent) {
        return std::nullopt;
    }
    std::uint32_t fraction = units - (1U << top);
    const int width = *fractionWidthAt(exponent);
    // A carry into a coarser binade leaves only zero bits to drop.
    fraction = top >= width ? (fraction >> (top - width)) : (fraction << (width - top));
    if (exponent == kMaxExponent && fraction != 0) {
        return std::nullopt;
    }
    return assemble(negative, exponent, fraction);
}

constexpr Hif8Code overflowCode(bool negative, OverflowPolicy policy)
{
    if (policy == OverflowPolicy::SaturateToBoundary) {
        return negative ? codes::kNegMaxNormal : codes::kPosMaxNormal;
    }
    return negative ? codes::kNegInf : codes::kPosInf;
}

constexpr Hif8Code nanCode(NanPolicy policy)
{
    return policy == NanPolicy::SaturateToZero ? codes::kZero : codes::kNaN;
}

/// Policy application after magnitude rounding. `rounded` is nullopt when the
/// magnitude overflowed.
constexpr Hif8Code applyPolicies(std::optional<Hif8Code> rounded, bool negative, const RoundingSpec& spec)
{
    return rounded ? *rounded : overflowCode(negative, spec.overflow);
}

/// Full conversion. `threshold` is consumed only by SrStandard.
constexpr Hif8Code roundToHif8(SourceValue src, const RoundingSpec& spec, int scaleExp = 0,
                               std::uint64_t threshold = 0)
{
    const UnpackedSource u = unpack(src);
    switch (u.kind) {
    case SourceKind::Zero: return codes::kZero;
    case SourceKind::NaN: return nanCode(spec.nan);
    case SourceKind::Infinity: return overflowCode(u.negative, spec.overflow);
    case SourceKind::Finite: break;
    }
    const auto work = splitAtUlp(u, scaleExp);
    if (!work) {
        return applyPolicies(std::nullopt, u.negative, spec);
    }
    bool up = false;
    switch (spec.mode) {
    case RoundingMode::TA: up = roundsUpTA(*work); break;
    case RoundingMode::TE: up = roundsUpTE(*work); break;
    case RoundingMode::SrStandard: up = roundsUpStochastic(*work, threshold); break;
    case RoundingMode::SrSimplified: up = roundsUpSimplified(*work, src.format); break;
    case RoundingMode::Hybrid:
        up = hybridUsesTA(work->sourceExponent) ? roundsUpTA(*work)
                                                : roundsUpSimplified(*work, src.format);
        break;
    }
    const std::uint32_t units = work->kept + (up ? 1U : 0U);
    return applyPolicies(encodeUnits(work->negative, units, work->ulpExponent), work->negative, spec);
}

inline Hif8Code roundTA(float x, const RoundingSpec& spec = {})
{
    RoundingSpec s = spec;
    s.mode = RoundingMode::TA;
    return roundToHif8(toSource(x, s.source), s);
}

inline Hif8Code roundTE(float x, const RoundingSpec& spec = {})
{
    RoundingSpec s = spec;
    s.mode = RoundingMode::TE;
    return roundToHif8(toSource(x, s.source), s);
}

inline Hif8Code roundSrSimplified(float x, const RoundingSpec& spec = {})
{
    RoundingSpec s = spec;
    s.mode = RoundingMode::SrSimplified;
    return roundToHif8(toSource(x, s.source), s);
}

inline Hif8Code roundHybrid(float x, const RoundingSpec& spec = {})
{
    RoundingSpec s = spec;
    s.mode = RoundingMode::Hybrid;
    return roundToHif8(toSource(x, s.source), s);
}

/// Standard SR with a caller-owned generator; one draw per call.
template <std::uniform_random_bit_generator Gen>
    requires(std::numeric_limits<typename Gen::result_type>::digits == 64)
Hif8Code roundSrStandard(float x, Gen& gen, const RoundingSpec& spec = {})
{
    RoundingSpec s = spec;
    s.mode = RoundingMode::SrStandard;
    const std::uint64_t t = static_cast<std::uint64_t>(gen() - Gen::min());
    return roundToHif8(toSource(x, s.source), s, 0, t);
}

/// Counter-based threshold for element `index` of a batch: a splitmix64
/// finalizer over (seed, index), so batch results do not depend on traversal.
constexpr std::uint64_t counterThreshold(std::uint64_t seed, std::uint64_t index)
{
    auto mix = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(seed + 0x9E3779B97F4A7C15ULL) + index * 0x9E3779B97F4A7C15ULL);
}

}  // namespace hif8
