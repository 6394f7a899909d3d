// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hif8/error.hpp"

// HiFloat8 storage format.
//
//   bit 7      sign S (1 = negative)
//   bits 6..   dot field, prefix coded: 11->4, 10->3, 01->2, 001->1, 0001->0, 0000->DML
//   next D     exponent Em = {Se, Mag[2..D]}; the magnitude MSB is an implicit 1
//   rest       mantissa M (3, 3, 3, 3, 2, 1 bits for DML, D = 0..4)
//
// Normal values are (-1)^S * 2^E * 1.M. Denormals (DML) are (-1)^S * 2^(M - 23)
// with M in [1, 7]. The two largest normal patterns (+-1.5 * 2^15) are the
// infinities; DML with M = 0 is Zero (S = 0) or NaN (S = 1).

namespace hif8 {

struct Hif8Code {
    std::uint8_t bits = 0;

    constexpr Hif8Code() = default;
    constexpr explicit Hif8Code(std::uint8_t b) : bits(b) {}

    constexpr bool negative() const { return (bits & 0x80U) != 0; }

    friend constexpr auto operator<=>(Hif8Code, Hif8Code) = default;
};

namespace codes {
inline constexpr Hif8Code kZero{0x00};
inline constexpr Hif8Code kNaN{0x80};
inline constexpr Hif8Code kPosInf{0x6F};
inline constexpr Hif8Code kNegInf{0xEF};
inline constexpr Hif8Code kPosMaxNormal{0x6E};
inline constexpr Hif8Code kNegMaxNormal{0xEE};
inline constexpr Hif8Code kPosMinNormal{0x7E};
inline constexpr Hif8Code kPosMinDenormal{0x01};
}  // namespace codes

inline constexpr int kMaxExponent = 15;
inline constexpr int kMinNormalExponent = -15;
inline constexpr int kMinExponent = -22;
inline constexpr int kDenormalBias = 23;

/// Fraction bits carried at a given binary exponent, or nullopt outside
/// [-22, 15]. Denormal exponents carry none.
constexpr std::optional<int> fractionWidthAt(int exponent)
{
    if (exponent > kMaxExponent || exponent < kMinExponent) {
        return std::nullopt;
    }
    if (exponent < kMinNormalExponent) {
        return 0;
    }
    const int mag = exponent < 0 ? -exponent : exponent;
    if (mag <= 3) {
        return 3;
    }
    if (mag <= 7) {
        return 2;
    }
    return 1;
}

enum class DotValue : std::uint8_t { D0, D1, D2, D3, D4, Denormal };

constexpr int exponentWidth(DotValue dot)
{
    return dot == DotValue::Denormal ? 0 : static_cast<int>(dot);
}

constexpr int dotWidth(DotValue dot)
{
    switch (dot) {
    case DotValue::D2:
    case DotValue::D3:
    case DotValue::D4: return 2;
    case DotValue::D1: return 3;
    case DotValue::D0:
    case DotValue::Denormal: return 4;
    }
    return 0;
}

constexpr int mantissaWidth(DotValue dot)
{
    return 7 - dotWidth(dot) - exponentWidth(dot);
}

/// Raw field view of a code.
struct Hif8Fields {
    bool sign = false;
    DotValue dot = DotValue::Denormal;
    std::uint8_t exponentStored = 0;  // Em, D bits
    bool exponentSign = false;        // Se
    int exponent = 0;                 // E, normal patterns only
    std::uint8_t mantissa = 0;
    int mantissaBits = 0;

    friend constexpr bool operator==(const Hif8Fields&, const Hif8Fields&) = default;
};

constexpr Hif8Fields fields(Hif8Code code)
{
    const unsigned b = code.bits;
    Hif8Fields f;
    f.sign = (b & 0x80U) != 0;
    switch ((b >> 5) & 0x3U) {
    case 0x3: f.dot = DotValue::D4; break;
    case 0x2: f.dot = DotValue::D3; break;
    case 0x1: f.dot = DotValue::D2; break;
    default:
        if ((b & 0x10U) != 0) {
            f.dot = DotValue::D1;
        } else if ((b & 0x08U) != 0) {
            f.dot = DotValue::D0;
        } else {
            f.dot = DotValue::Denormal;
        }
        break;
    }
    const int d = exponentWidth(f.dot);
    f.mantissaBits = mantissaWidth(f.dot);
    f.mantissa = static_cast<std::uint8_t>(b & ((1U << f.mantissaBits) - 1U));
    f.exponentStored = static_cast<std::uint8_t>((b >> f.mantissaBits) & ((1U << d) - 1U));
    if (d > 0) {
        f.exponentSign = ((f.exponentStored >> (d - 1)) & 1U) != 0;
        const unsigned lower = f.exponentStored & ((1U << (d - 1)) - 1U);
        const int mag = static_cast<int>((1U << (d - 1)) | lower);
        f.exponent = f.exponentSign ? -mag : mag;
    }
    return f;
}

enum class ValueKind : std::uint8_t { Zero, Finite, Infinity, NaN };

/// Exact value of a code. For Finite values:
///   value = (negative ? -1 : 1) * 2^exponent * (1 + fraction / 2^fractionWidth)
/// Denormals are reported in that normalized form with fractionWidth 0.
struct DecodedNumber {
    ValueKind kind = ValueKind::Zero;
    bool negative = false;
    int exponent = 0;
    std::uint32_t fraction = 0;
    int fractionWidth = 0;
    bool denormal = false;

    static constexpr DecodedNumber zero() { return {}; }
    static constexpr DecodedNumber nan() { return {ValueKind::NaN, true, 0, 0, 0, false}; }
    static constexpr DecodedNumber infinity(bool negative)
    {
        return {ValueKind::Infinity, negative, 0, 0, 0, false};
    }

    /// Exact in both double and float for every HiF8 code.
    double value() const
    {
        switch (kind) {
        case ValueKind::Zero: return negative ? -0.0 : 0.0;
        case ValueKind::NaN: return std::numeric_limits<double>::quiet_NaN();
        case ValueKind::Infinity:
            return negative ? -std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::infinity();
        case ValueKind::Finite: break;
        }
        const double significand =
            1.0 + std::ldexp(static_cast<double>(fraction), -fractionWidth);
        const double mag = std::ldexp(significand, exponent);
        return negative ? -mag : mag;
    }

    friend constexpr bool operator==(const DecodedNumber&, const DecodedNumber&) = default;
};

constexpr DecodedNumber decode(Hif8Code code)
{
    const Hif8Fields f = fields(code);
    DecodedNumber out;
    out.negative = f.sign;
    if (f.dot == DotValue::Denormal) {
        if (f.mantissa == 0) {
            return f.sign ? DecodedNumber::nan() : DecodedNumber::zero();
        }
        out.kind = ValueKind::Finite;
        out.exponent = static_cast<int>(f.mantissa) - kDenormalBias;
        out.denormal = true;
        return out;
    }
    if (f.dot == DotValue::D4 && f.exponent == kMaxExponent && f.mantissa == 1) {
        return DecodedNumber::infinity(f.sign);
    }
    out.kind = ValueKind::Finite;
    out.exponent = f.exponent;
    out.fraction = f.mantissa;
    out.fractionWidth = f.mantissaBits;
    return out;
}

/// Assemble the code for a finite magnitude 2^exponent * 1.fraction, where
/// fraction is already expressed at fractionWidthAt(exponent) bits. Includes
/// the infinity pattern (exponent 15, fraction 1); callers gate on it.
constexpr Hif8Code assemble(bool negative, int exponent, std::uint32_t fraction)
{
    const std::uint8_t sign = negative ? 0x80U : 0x00U;
    if (exponent < kMinNormalExponent) {
        return Hif8Code(static_cast<std::uint8_t>(sign | (exponent + kDenormalBias)));
    }
    const unsigned mag = static_cast<unsigned>(exponent < 0 ? -exponent : exponent);
    DotValue dot = DotValue::D0;
    unsigned dotCode = 0x1;
    if (mag >= 8) {
        dot = DotValue::D4;
        dotCode = 0x3;
    } else if (mag >= 4) {
        dot = DotValue::D3;
        dotCode = 0x2;
    } else if (mag >= 2) {
        dot = DotValue::D2;
        dotCode = 0x1;
    } else if (mag == 1) {
        dot = DotValue::D1;
        dotCode = 0x1;
    }
    const int d = exponentWidth(dot);
    const int mw = mantissaWidth(dot);
    unsigned em = 0;
    if (d > 0) {
        em = ((exponent < 0 ? 1U : 0U) << (d - 1)) | (mag & ((1U << (d - 1)) - 1U));
    }
    const unsigned body = (dotCode << (7 - dotWidth(dot))) | (em << mw) | (fraction & ((1U << mw) - 1U));
    return Hif8Code(static_cast<std::uint8_t>(sign | body));
}

/// Inverse of decode(). Negative zero is not distinguishable and maps to 0x00.
/// Throws NotRepresentable for anything outside the decode image.
inline Hif8Code encodeExact(const DecodedNumber& v)
{
    switch (v.kind) {
    case ValueKind::Zero: return codes::kZero;
    case ValueKind::NaN: return codes::kNaN;
    case ValueKind::Infinity: return v.negative ? codes::kNegInf : codes::kPosInf;
    case ValueKind::Finite: break;
    }
    const auto width = fractionWidthAt(v.exponent);
    if (!width || v.fractionWidth < 0 || v.fractionWidth > 31 || (v.fraction >> v.fractionWidth) != 0) {
        throw Error(ErrorKind::NotRepresentable,
                    "exponent " + std::to_string(v.exponent) + " outside [-22, 15]");
    }
    std::uint32_t fraction = v.fraction;
    if (v.fractionWidth > *width) {
        const int drop = v.fractionWidth - *width;
        if ((fraction & ((1U << drop) - 1U)) != 0) {
            throw Error(ErrorKind::NotRepresentable,
                        "fraction needs more than " + std::to_string(*width) + " bits at exponent " +
                            std::to_string(v.exponent));
        }
        fraction >>= drop;
    } else {
        fraction <<= (*width - v.fractionWidth);
    }
    if (v.exponent == kMaxExponent && fraction != 0) {
        throw Error(ErrorKind::NotRepresentable, "1.5 * 2^15 is reserved for infinity");
    }
    return assemble(v.negative, v.exponent, fraction);
}

/// Encode an exactly representable double. Throws NotRepresentable otherwise.
inline Hif8Code encodeExact(double x)
{
    if (std::isnan(x)) {
        return codes::kNaN;
    }
    if (std::isinf(x)) {
        return x < 0 ? codes::kNegInf : codes::kPosInf;
    }
    if (x == 0.0) {
        return codes::kZero;
    }
    int e2 = 0;
    const double m = std::frexp(std::fabs(x), &e2);  // m in [0.5, 1)
    const int exponent = e2 - 1;
    // 1.f scaled to 2^31 to capture any fraction with up to 31 bits.
    const double scaled = std::ldexp(m * 2.0 - 1.0, 31);
    if (scaled != std::floor(scaled)) {
        throw Error(ErrorKind::NotRepresentable, "value has too many significant bits");
    }
    DecodedNumber v;
    v.kind = ValueKind::Finite;
    v.negative = x < 0;
    v.exponent = exponent;
    v.fraction = static_cast<std::uint32_t>(scaled);
    v.fractionWidth = 31;
    return encodeExact(v);
}

enum class CodeClass : std::uint8_t { Zero, Normal, Denormal, Infinity, NaN };

inline const char* to_string(CodeClass c)
{
    switch (c) {
    case CodeClass::Zero: return "Zero";
    case CodeClass::Normal: return "Normal";
    case CodeClass::Denormal: return "Denormal";
    case CodeClass::Infinity: return "Infinity";
    case CodeClass::NaN: return "NaN";
    }
    return "?";
}

constexpr CodeClass classify(const DecodedNumber& d)
{
    switch (d.kind) {
    case ValueKind::Zero: return CodeClass::Zero;
    case ValueKind::NaN: return CodeClass::NaN;
    case ValueKind::Infinity: return CodeClass::Infinity;
    case ValueKind::Finite: break;
    }
    return d.denormal ? CodeClass::Denormal : CodeClass::Normal;
}

constexpr CodeClass classify(Hif8Code code)
{
    return classify(decode(code));
}

struct CodeEntry {
    Hif8Code code;
    DecodedNumber value;
};

/// All 256 codes in ascending raw-code order.
inline std::vector<CodeEntry> enumerateAll()
{
    std::vector<CodeEntry> out;
    out.reserve(256);
    for (unsigned b = 0; b < 256; ++b) {
        const Hif8Code c(static_cast<std::uint8_t>(b));
        out.push_back({c, decode(c)});
    }
    return out;
}

/// Decoded value as float, via a lazily built 256-entry table.
inline float toFloat(Hif8Code code)
{
    static const std::array<float, 256> table = [] {
        std::array<float, 256> t{};
        for (unsigned b = 0; b < 256; ++b) {
            t[b] = static_cast<float>(decode(Hif8Code(static_cast<std::uint8_t>(b))).value());
        }
        return t;
    }();
    return table[code.bits];
}

}  // namespace hif8
