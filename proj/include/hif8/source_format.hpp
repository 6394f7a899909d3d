// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <string_view>

// High-precision IEEE formats that can be converted to HiF8.

namespace hif8 {

enum class SourceFormat : std::uint8_t { FP32, FP16, BF16 };

struct SourceLayout {
    int exponentBits;
    int fractionBits;
};

constexpr SourceLayout layoutOf(SourceFormat f)
{
    switch (f) {
    case SourceFormat::FP32: return {8, 23};
    case SourceFormat::FP16: return {5, 10};
    case SourceFormat::BF16: return {8, 7};
    }
    return {8, 23};
}

inline std::string_view to_string(SourceFormat f)
{
    switch (f) {
    case SourceFormat::FP32: return "fp32";
    case SourceFormat::FP16: return "fp16";
    case SourceFormat::BF16: return "bf16";
    }
    return "?";
}

/// A raw source pattern tagged with its format. For FP16/BF16 only the low
/// 16 bits are used.
struct SourceValue {
    SourceFormat format = SourceFormat::FP32;
    std::uint32_t bits = 0;

    static SourceValue fp32(float x) { return {SourceFormat::FP32, std::bit_cast<std::uint32_t>(x)}; }
    static constexpr SourceValue fp16(std::uint16_t b) { return {SourceFormat::FP16, b}; }
    static constexpr SourceValue bf16(std::uint16_t b) { return {SourceFormat::BF16, b}; }
};

enum class SourceKind : std::uint8_t { Zero, Finite, Infinity, NaN };

/// Normalized view: value = (-1)^negative * significand * 2^(exponent - fractionBits),
/// with significand in [2^fractionBits, 2^(fractionBits+1)) for Finite values.
/// Subnormal sources are renormalized, so exponent can fall below the format's
/// normal minimum.
struct UnpackedSource {
    SourceKind kind = SourceKind::Zero;
    bool negative = false;
    int exponent = 0;
    std::uint32_t significand = 0;
    int fractionBits = 0;
    std::uint32_t storedFraction = 0;  // raw fraction field, before renormalization
};

constexpr UnpackedSource unpack(SourceValue v)
{
    const SourceLayout l = layoutOf(v.format);
    const int total = 1 + l.exponentBits + l.fractionBits;
    const std::uint32_t bits = total == 32 ? v.bits : (v.bits & ((1U << total) - 1U));
    const std::uint32_t fracMask = (1U << l.fractionBits) - 1U;
    const std::uint32_t expMask = (1U << l.exponentBits) - 1U;
    const int bias = static_cast<int>(expMask >> 1);

    UnpackedSource u;
    u.negative = ((bits >> (total - 1)) & 1U) != 0;
    u.fractionBits = l.fractionBits;
    u.storedFraction = bits & fracMask;
    const std::uint32_t biased = (bits >> l.fractionBits) & expMask;
    if (biased == expMask) {
        u.kind = u.storedFraction != 0 ? SourceKind::NaN : SourceKind::Infinity;
        return u;
    }
    if (biased == 0) {
        if (u.storedFraction == 0) {
            u.kind = SourceKind::Zero;
            return u;
        }
        const int lead = std::bit_width(u.storedFraction) - 1;  // position of the leading 1
        const int shift = l.fractionBits - lead;
        u.kind = SourceKind::Finite;
        u.significand = u.storedFraction << shift;
        u.exponent = 1 - bias - shift;
        return u;
    }
    u.kind = SourceKind::Finite;
    u.significand = (1U << l.fractionBits) | u.storedFraction;
    u.exponent = static_cast<int>(biased) - bias;
    return u;
}

namespace detail {

/// FP32 -> narrower IEEE binary format, round to nearest even, NaN quieted.
constexpr std::uint16_t narrowFp32(std::uint32_t bits, SourceLayout target)
{
    const std::uint32_t sign = (bits >> 31) & 1U;
    const std::uint32_t expField = (bits >> 23) & 0xFFU;
    const std::uint32_t frac = bits & 0x7FFFFFU;
    const int tTotal = 1 + target.exponentBits + target.fractionBits;
    const std::uint32_t tSign = sign << (tTotal - 1);
    const std::uint32_t tExpMax = (1U << target.exponentBits) - 1U;
    const int tBias = static_cast<int>(tExpMax >> 1);

    if (expField == 0xFFU) {
        if (frac != 0) {
            return static_cast<std::uint16_t>(tSign | (tExpMax << target.fractionBits) |
                                              (1U << (target.fractionBits - 1)));
        }
        return static_cast<std::uint16_t>(tSign | (tExpMax << target.fractionBits));
    }
    if (expField == 0 && frac == 0) {
        return static_cast<std::uint16_t>(tSign);
    }
    int exponent = 0;
    std::uint32_t sig = 0;  // 24-bit significand
    if (expField == 0) {
        const int lead = std::bit_width(frac) - 1;
        sig = frac << (23 - lead);
        exponent = -126 - (23 - lead);
    } else {
        sig = (1U << 23) | frac;
        exponent = static_cast<int>(expField) - 127;
    }
    // Bits kept of the 24-bit significand, counting subnormal loss.
    int keep = target.fractionBits + 1;
    const int tMinExp = 1 - tBias;
    if (exponent < tMinExp) {
        keep -= (tMinExp - exponent);
    }
    std::uint64_t mag = 0;  // target magnitude as integer, exponent-field and fraction packed
    if (keep < 0) {
        return static_cast<std::uint16_t>(tSign);
    }
    const int drop = 24 - keep;
    std::uint32_t kept = drop >= 32 ? 0U : (sig >> drop);
    const std::uint32_t rem = drop >= 32 ? sig : (sig & ((1U << drop) - 1U));
    const std::uint32_t half = drop == 0 ? 0U : (1U << (drop - 1));
    if (drop > 0 && (rem > half || (rem == half && (kept & 1U) != 0))) {
        ++kept;
    }
    if (exponent < tMinExp) {
        // Subnormal target: kept counts units of 2^(tMinExp - fractionBits); a
        // carry into 2^fractionBits naturally becomes the smallest normal.
        mag = kept;
    } else {
        int e = exponent;
        if (kept >> (target.fractionBits + 1)) {
            kept >>= 1;
            ++e;
        }
        if (e > tBias) {
            return static_cast<std::uint16_t>(tSign | (tExpMax << target.fractionBits));
        }
        mag = (static_cast<std::uint64_t>(e + tBias) << target.fractionBits) |
              (kept & ((1U << target.fractionBits) - 1U));
    }
    return static_cast<std::uint16_t>(tSign | mag);
}

constexpr float widenTo32(std::uint16_t bits, SourceLayout l)
{
    const UnpackedSource u =
        unpack(SourceValue{l.fractionBits == 10 ? SourceFormat::FP16 : SourceFormat::BF16, bits});
    std::uint32_t out = u.negative ? 0x80000000U : 0U;
    switch (u.kind) {
    case SourceKind::Zero: break;
    case SourceKind::Infinity: out |= 0x7F800000U; break;
    case SourceKind::NaN: out |= 0x7FC00000U | (u.storedFraction << (23 - l.fractionBits)); break;
    case SourceKind::Finite:
        // Every FP16/BF16 finite value is an FP32 normal or (BF16 only) subnormal.
        if (u.exponent >= -126) {
            out |= (static_cast<std::uint32_t>(u.exponent + 127) << 23) |
                   ((u.significand << (23 - l.fractionBits)) & 0x7FFFFFU);
        } else {
            out |= (u.significand << (23 - l.fractionBits)) >> (-126 - u.exponent);
        }
        break;
    }
    return std::bit_cast<float>(out);
}

}  // namespace detail

inline std::uint16_t toFp16Bits(float x) { return detail::narrowFp32(std::bit_cast<std::uint32_t>(x), {5, 10}); }
inline std::uint16_t toBf16Bits(float x) { return detail::narrowFp32(std::bit_cast<std::uint32_t>(x), {8, 7}); }
inline float fromFp16Bits(std::uint16_t b) { return detail::widenTo32(b, {5, 10}); }
inline float fromBf16Bits(std::uint16_t b) { return detail::widenTo32(b, {8, 7}); }

/// FP32 carrier value -> source pattern in the requested format (RNE narrowing).
inline SourceValue toSource(float x, SourceFormat f)
{
    switch (f) {
    case SourceFormat::FP32: return SourceValue::fp32(x);
    case SourceFormat::FP16: return SourceValue::fp16(toFp16Bits(x));
    case SourceFormat::BF16: return SourceValue::bf16(toBf16Bits(x));
    }
    return SourceValue::fp32(x);
}

}  // namespace hif8
