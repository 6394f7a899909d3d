// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

// Oracles shared by the unit tests and the acceptance binary. Written
// against the bit layout directly, without going through the library decoder.

namespace hif8::testing {

struct OracleFields {
    int sign = 0;
    int dot = -1;  // -1 for the denormal / special prefix
    int exponent = 0;
    int mantissa = 0;
    int mantissaBits = 0;
};

/// Field tuple read off the bit string, one bit at a time.
inline OracleFields oracleFields(std::uint8_t code)
{
    int bits[8];
    for (int i = 0; i < 8; ++i) {
        bits[i] = (code >> (7 - i)) & 1;
    }
    OracleFields f;
    f.sign = bits[0];
    int pos = 1;
    if (bits[1] == 1 && bits[2] == 1) { f.dot = 4; pos = 3; }
    else if (bits[1] == 1) { f.dot = 3; pos = 3; }
    else if (bits[2] == 1) { f.dot = 2; pos = 3; }
    else if (bits[3] == 1) { f.dot = 1; pos = 4; }
    else if (bits[4] == 1) { f.dot = 0; pos = 5; }
    else { f.dot = -1; pos = 5; }
    if (f.dot > 0) {
        const int se = bits[pos];
        int mag = 1;
        for (int i = 1; i < f.dot; ++i) {
            mag = mag * 2 + bits[pos + i];
        }
        pos += f.dot;
        f.exponent = se ? -mag : mag;
    }
    f.mantissaBits = 8 - pos;
    for (int i = pos; i < 8; ++i) {
        f.mantissa = f.mantissa * 2 + bits[i];
    }
    return f;
}

/// Value of a code from the field tuple; NaN and infinities included.
inline double oracleValue(std::uint8_t code)
{
    const OracleFields f = oracleFields(code);
    const double s = f.sign ? -1.0 : 1.0;
    if (f.dot < 0) {
        if (f.mantissa == 0) {
            return f.sign ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        }
        return s * std::pow(2.0, f.mantissa - 23);
    }
    if (f.dot == 4 && f.exponent == 15 && f.mantissa == 1) {
        return s * std::numeric_limits<double>::infinity();
    }
    return s * std::pow(2.0, f.exponent) * (1.0 + f.mantissa / std::pow(2.0, f.mantissaBits));
}

struct OracleEntry {
    double value;
    std::uint8_t code;
};

/// The 253 distinct finite values (zero once), ascending.
inline const std::vector<OracleEntry>& finiteTable()
{
    static const std::vector<OracleEntry> table = [] {
        std::vector<OracleEntry> t;
        for (unsigned b = 0; b < 256; ++b) {
            const double v = oracleValue(static_cast<std::uint8_t>(b));
            if (std::isfinite(v)) {
                t.push_back({v, static_cast<std::uint8_t>(b)});
            }
        }
        std::sort(t.begin(), t.end(), [](const OracleEntry& a, const OracleEntry& b) { return a.value < b.value; });
        return t;
    }();
    return table;
}

/// Brute-force nearest with ties away from zero over every finite value.
/// With `withInfinityCandidate` the 1.5 * 2^15 infinity pattern also competes,
/// standing in for the overflow-to-infinity boundary.
inline std::uint8_t nearestTiesAway(double x, bool withInfinityCandidate = false)
{
    const auto& table = finiteTable();
    double bestDist = std::numeric_limits<double>::infinity();
    double bestMag = -1.0;
    std::uint8_t best = 0;
    auto consider = [&](double v, std::uint8_t code) {
        const double d = std::fabs(x - v);
        if (d < bestDist || (d == bestDist && std::fabs(v) > bestMag)) {
            bestDist = d;
            bestMag = std::fabs(v);
            best = code;
        }
    };
    for (const auto& e : table) {
        consider(e.value, e.code);
    }
    if (withInfinityCandidate) {
        consider(49152.0, 0x6F);
        consider(-49152.0, 0xEF);
    }
    return best;
}

/// log-uniform magnitude in [2^lo, 2^hi), random sign.
inline float logUniform(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> e(lo, hi);
    const double mag = std::exp2(e(rng));
    const float x = static_cast<float>(mag);
    return (rng() & 1U) ? -x : x;
}

}  // namespace hif8::testing
