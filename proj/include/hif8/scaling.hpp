// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hif8/codec.hpp"
#include "hif8/error.hpp"
#include "hif8/rounding.hpp"
#include "hif8/tensorops.hpp"

// Training-time scale controllers. All of them are plain value types driven
// by one event per step; replaying a trace reproduces the state sequence.

namespace hif8 {

/// Loss scale = 2^scaleExp.
struct LossScaleState {
    int scaleExp = 0;
    std::size_t windowIndex = 0;
    std::uint64_t goodSteps = 0;
    int increaseCount = 0;
    int consecutiveDecreaseCount = 0;

    friend constexpr bool operator==(const LossScaleState&, const LossScaleState&) = default;
};

struct LossScaleConfig {
    std::vector<std::uint64_t> windows;  // ascending window lengths
    int initExp = 0;
    std::size_t initWindowIndex = 0;
    int minExp = -126;
    int maxExp = 127;
    int increasesPerWindowUp = 3;     // cumulative
    int decreasesPerWindowDown = 3;   // in a row
    bool decreaseResetsIncreaseCount = false;

    /// Fixed-window backward loss scaling: init 2^16, window 1000.
    static LossScaleConfig bls(std::uint64_t window = 1000, int initExp = 16)
    {
        LossScaleConfig c;
        c.windows = {window};
        c.initExp = initExp;
        return c;
    }

    /// Adaptive loss scaling: windows {1, 20, 50, 100, 200, 500, 1000}, init (2^32, 20).
    static LossScaleConfig als()
    {
        LossScaleConfig c;
        c.windows = {1, 20, 50, 100, 200, 500, 1000};
        c.initExp = 32;
        c.initWindowIndex = 1;
        return c;
    }

    LossScaleState initial() const
    {
        if (windows.empty() || initWindowIndex >= windows.size() || minExp > maxExp) {
            throw Error(ErrorKind::InvalidArgument, "loss-scale config: empty window list or bad bounds");
        }
        LossScaleState s;
        s.scaleExp = std::clamp(initExp, minExp, maxExp);
        s.windowIndex = initWindowIndex;
        return s;
    }

    std::uint64_t window(const LossScaleState& s) const { return windows[s.windowIndex]; }
};

/// Backward loss scaling with a single window: halve on overflow, double after
/// `window` consecutive clean steps.
inline LossScaleState blsStep(LossScaleState s, bool overflow, const LossScaleConfig& cfg)
{
    const std::uint64_t window = cfg.windows.front();
    if (overflow) {
        s.scaleExp = std::max(s.scaleExp - 1, cfg.minExp);
        s.goodSteps = 0;
        return s;
    }
    if (++s.goodSteps >= window) {
        s.scaleExp = std::min(s.scaleExp + 1, cfg.maxExp);
        s.goodSteps = 0;
    }
    return s;
}

/// Adaptive loss scaling. On top of blsStep: every `increasesPerWindowUp`
/// scale increases move one step up the window list, every
/// `decreasesPerWindowDown` decreases in a row move one step down. Only
/// actual scale changes count; an increase breaks a run of decreases.
inline LossScaleState alsStep(LossScaleState s, bool overflow, const LossScaleConfig& cfg)
{
    if (overflow) {
        s.goodSteps = 0;
        if (s.scaleExp > cfg.minExp) {
            --s.scaleExp;
            if (cfg.decreaseResetsIncreaseCount) {
                s.increaseCount = 0;
            }
            if (++s.consecutiveDecreaseCount >= cfg.decreasesPerWindowDown) {
                s.consecutiveDecreaseCount = 0;
                if (s.windowIndex > 0) {
                    --s.windowIndex;
                }
            }
        }
        return s;
    }
    if (++s.goodSteps < cfg.window(s)) {
        return s;
    }
    s.goodSteps = 0;
    if (s.scaleExp >= cfg.maxExp) {
        return s;
    }
    ++s.scaleExp;
    s.consecutiveDecreaseCount = 0;
    if (++s.increaseCount >= cfg.increasesPerWindowUp) {
        s.increaseCount = 0;
        if (s.windowIndex + 1 < cfg.windows.size()) {
            ++s.windowIndex;
        }
    }
    return s;
}

struct TraceEvent {
    std::uint64_t iteration = 0;
    bool overflow = false;

    friend constexpr bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct TimelineRow {
    std::uint64_t iteration = 0;
    bool overflow = false;
    int scaleExp = 0;
    std::uint64_t window = 0;

    friend constexpr bool operator==(const TimelineRow&, const TimelineRow&) = default;
};

/// State after each event of the trace.
inline std::vector<TimelineRow> simulateAls(const std::vector<TraceEvent>& trace,
                                            const LossScaleConfig& cfg = LossScaleConfig::als())
{
    std::vector<TimelineRow> rows;
    rows.reserve(trace.size());
    LossScaleState s = cfg.initial();
    for (const auto& ev : trace) {
        s = alsStep(s, ev.overflow, cfg);
        rows.push_back({ev.iteration, ev.overflow, s.scaleExp, cfg.window(s)});
    }
    return rows;
}

/// Overflow signal for the loss-scale controllers: the gradient is out of
/// HiF8 range before the cast, or non-finite after it.
inline bool gradientOverflow(const TensorF32& grad, const RoundingSpec& spec = {}, int scaleExp = 0)
{
    const double limit = std::ldexp(1.0, kMaxExponent);
    for (const float x : grad.data()) {
        if (!std::isfinite(x) || std::fabs(std::ldexp(static_cast<double>(x), scaleExp)) > limit) {
            return true;
        }
    }
    const TensorF32 q = fakeQuant(grad, spec, scaleExp);
    return std::any_of(q.data().begin(), q.data().end(), [](float x) { return !std::isfinite(x); });
}

enum class TensorRole : std::uint8_t { Activation = 0, Weight = 1, ActivationGrad = 2 };

inline constexpr std::size_t kRoleCount = 3;

/// Per-tensor power-of-two scales for the three GEMM inputs.
struct TensorScaleState {
    std::array<int, kRoleCount> scaleExp{0, 0, 0};
    std::array<float, kRoleCount> lastAmax{0.0f, 0.0f, 0.0f};

    int scale(TensorRole r) const { return scaleExp[static_cast<std::size_t>(r)]; }

    friend constexpr bool operator==(const TensorScaleState&, const TensorScaleState&) = default;
};

struct TensorScaleConfig {
    int updatePeriod = 10;
    int targetExp = 14;  // scaled Amax lands in (2^13, 2^14]
    int minExp = -kMaxScaleExp;
    int maxExp = kMaxScaleExp;
};

/// ceil(log2(x)) for finite x > 0, exact.
inline int ceilLog2(double x)
{
    int e = 0;
    const double m = std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
    return m == 0.5 ? e - 1 : e;
}

/// Scale exponent that moves `amax` to just below 2^targetExp.
inline int ptsScaleFor(float amax, const TensorScaleConfig& cfg)
{
    return std::clamp(cfg.targetExp - ceilLog2(amax), cfg.minExp, cfg.maxExp);
}

/// Scales are refreshed only on iterations that are multiples of the update
/// period; zero or non-finite Amax leaves that role's scale as it was.
inline TensorScaleState ptsUpdate(TensorScaleState s, const std::array<float, kRoleCount>& amax,
                                  std::uint64_t iteration, const TensorScaleConfig& cfg = {})
{
    if (cfg.updatePeriod <= 0 || iteration % static_cast<std::uint64_t>(cfg.updatePeriod) != 0) {
        return s;
    }
    for (std::size_t r = 0; r < kRoleCount; ++r) {
        if (amax[r] < 0.0f) {
            throw Error(ErrorKind::InvalidArgument, "negative amax");
        }
        s.lastAmax[r] = amax[r];
        if (amax[r] > 0.0f && std::isfinite(amax[r])) {
            s.scaleExp[r] = ptsScaleFor(amax[r], cfg);
        }
    }
    return s;
}

inline float amaxOf(const TensorF32& t)
{
    float m = 0.0f;
    for (const float x : t.data()) {
        m = std::max(m, std::fabs(x));
    }
    return m;
}

/// Scale by the role's 2^scaleExp, cast, and descale; scale and descale are exact.
inline TensorF32 scaledCastRoundtrip(const TensorF32& t, const TensorScaleState& s, TensorRole role,
                                     const RoundingSpec& spec = {})
{
    return fakeQuant(t, spec, s.scale(role));
}

}  // namespace hif8
