// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hif8/codec.hpp"

// FP8-E4M3 / FP8-E5M2 reference codecs (OCP FP8 conventions) and the
// per-exponent precision profile shared by all three 8-bit formats.

namespace hif8 {

enum class Format : std::uint8_t { HiF8, E4M3, E5M2 };
enum class Fp8Variant : std::uint8_t { E4M3, E5M2 };

inline std::string_view to_string(Format f)
{
    switch (f) {
    case Format::HiF8: return "hif8";
    case Format::E4M3: return "e4m3";
    case Format::E5M2: return "e5m2";
    }
    return "?";
}

inline std::optional<Format> parseFormat(std::string_view s)
{
    if (s == "hif8") return Format::HiF8;
    if (s == "e4m3") return Format::E4M3;
    if (s == "e5m2") return Format::E5M2;
    return std::nullopt;
}

constexpr DecodedNumber decodeFp8(std::uint8_t code, Fp8Variant variant)
{
    const int expBits = variant == Fp8Variant::E4M3 ? 4 : 5;
    const int manBits = 7 - expBits;
    const int bias = (1 << (expBits - 1)) - 1;
    const unsigned expMax = (1U << expBits) - 1U;

    DecodedNumber d;
    d.negative = (code & 0x80U) != 0;
    const unsigned e = (code >> manBits) & expMax;
    const unsigned m = code & ((1U << manBits) - 1U);

    if (variant == Fp8Variant::E4M3) {
        if (e == expMax && m == 0x7U) {
            d.kind = ValueKind::NaN;
            return d;
        }
    } else if (e == expMax) {
        d.kind = m == 0 ? ValueKind::Infinity : ValueKind::NaN;
        return d;
    }
    if (e == 0) {
        if (m == 0) {
            d.kind = ValueKind::Zero;
            return d;
        }
        const int lead = std::bit_width(m) - 1;
        d.kind = ValueKind::Finite;
        d.denormal = true;
        d.exponent = 1 - bias - (manBits - lead);
        d.fraction = m & ((1U << lead) - 1U);
        d.fractionWidth = lead;
        return d;
    }
    d.kind = ValueKind::Finite;
    d.exponent = static_cast<int>(e) - bias;
    d.fraction = m;
    d.fractionWidth = manBits;
    return d;
}

inline DecodedNumber decodeAny(std::uint8_t code, Format format)
{
    switch (format) {
    case Format::HiF8: return decode(Hif8Code(code));
    case Format::E4M3: return decodeFp8(code, Fp8Variant::E4M3);
    case Format::E5M2: return decodeFp8(code, Fp8Variant::E5M2);
    }
    return {};
}

struct ProfileRow {
    int exponent;
    int fractionBits;

    friend constexpr bool operator==(const ProfileRow&, const ProfileRow&) = default;
};

struct FormatDescriptor {
    std::string name;
    int eMin = 0;    // smallest normal exponent
    int eMax = 0;
    int eMinD = 0;   // smallest exponent once denormals are normalized
    double maxFinite = 0.0;
    bool hasInfinity = false;
    std::vector<ProfileRow> profile;  // ascending exponent, eMinD..eMax

    int fractionWidth(int exponent) const
    {
        for (const auto& row : profile) {
            if (row.exponent == exponent) {
                return row.fractionBits;
            }
        }
        return -1;
    }
};

/// Built by enumerating the format's 256 codes, so the descriptor is a
/// consequence of the codec rather than a second copy of its tables.
inline FormatDescriptor describe(Format format)
{
    FormatDescriptor desc;
    desc.name = std::string(to_string(format));
    std::map<int, int> width;
    std::optional<int> eMinNormal;
    for (unsigned b = 0; b < 256; ++b) {
        const DecodedNumber d = decodeAny(static_cast<std::uint8_t>(b), format);
        if (d.kind == ValueKind::Infinity) {
            desc.hasInfinity = true;
        }
        if (d.kind != ValueKind::Finite) {
            continue;
        }
        auto [it, inserted] = width.try_emplace(d.exponent, d.fractionWidth);
        if (!inserted) {
            it->second = std::max(it->second, d.fractionWidth);
        }
        if (!d.denormal) {
            eMinNormal = eMinNormal ? std::min(*eMinNormal, d.exponent) : d.exponent;
        }
        desc.maxFinite = std::max(desc.maxFinite, d.value());
    }
    desc.eMinD = width.begin()->first;
    desc.eMax = width.rbegin()->first;
    desc.eMin = eMinNormal.value_or(desc.eMinD);
    for (const auto& [e, w] : width) {
        desc.profile.push_back({e, w});
    }
    return desc;
}

inline std::vector<ProfileRow> precisionProfile(const FormatDescriptor& desc)
{
    return desc.profile;
}

/// Value-level FP8 conversion, round to nearest even over the decode table.
/// Beyond max finite + half an ulp: E5M2 gives infinity, E4M3 NaN.
inline std::uint8_t roundToFp8(float x, Fp8Variant variant)
{
    struct Entry {
        double value;
        std::uint8_t code;
    };
    static const auto tables = [] {
        std::array<std::vector<Entry>, 2> t;
        for (int v = 0; v < 2; ++v) {
            for (unsigned b = 0; b < 128; ++b) {
                const auto d = decodeFp8(static_cast<std::uint8_t>(b), static_cast<Fp8Variant>(v));
                if (d.kind == ValueKind::Finite || d.kind == ValueKind::Zero) {
                    t[v].push_back({d.value(), static_cast<std::uint8_t>(b)});
                }
            }
            std::sort(t[v].begin(), t[v].end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
        }
        return t;
    }();
    const bool e4m3 = variant == Fp8Variant::E4M3;
    if (std::isnan(x)) {
        return 0x7FU;  // canonical NaN in both variants
    }
    const std::uint8_t sign = std::signbit(x) ? 0x80U : 0x00U;
    const double mag = std::fabs(static_cast<double>(x));
    const auto& table = tables[e4m3 ? 0 : 1];
    const double maxFinite = table.back().value;
    const double lastUlp = maxFinite - table[table.size() - 2].value;
    if (mag >= maxFinite + lastUlp / 2) {
        return e4m3 ? static_cast<std::uint8_t>(sign | 0x7FU) : static_cast<std::uint8_t>(sign | 0x7CU);
    }
    auto hi = std::lower_bound(table.begin(), table.end(), mag,
                               [](const Entry& e, double v) { return e.value < v; });
    if (hi == table.end()) {
        return static_cast<std::uint8_t>(sign | table.back().code);
    }
    if (hi->value == mag || hi == table.begin()) {
        return static_cast<std::uint8_t>(sign | hi->code);
    }
    const auto lo = hi - 1;
    const double dl = mag - lo->value;
    const double dh = hi->value - mag;
    std::uint8_t pick = 0;
    if (dl < dh) {
        pick = lo->code;
    } else if (dh < dl) {
        pick = hi->code;
    } else {
        pick = (lo->code & 1U) == 0 ? lo->code : hi->code;
    }
    return static_cast<std::uint8_t>(sign | pick);
}

}  // namespace hif8
