#pragma once

// Deterministic synthetic videos and degradations for tests and demos.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "segrefine/frame.hpp"

namespace segrefine::synthetic {

/// Smooth moving sinusoids over a drifting checkerboard; every channel
/// differs. Values stay in [0,1].
inline FrameSequence moving_pattern(std::size_t frames, std::size_t height, std::size_t width,
                                    std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    const double p0 = phase(rng), p1 = phase(rng), p2 = phase(rng);
    FrameSequence seq;
    for (std::size_t t = 0; t < frames; ++t) {
        Frame f(3, height, width);
        const double tt = static_cast<double>(t);
        for (std::size_t c = 0; c < 3; ++c) {
            const double cc = static_cast<double>(c);
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) {
                    const double X = static_cast<double>(x), Y = static_cast<double>(y);
                    double v = 0.5 + 0.22 * std::sin(0.31 * X + 0.17 * Y + 0.09 * tt + p0 + cc) +
                               0.14 * std::sin(0.73 * X - 0.52 * Y + 0.05 * tt * (cc + 1) + p1) +
                               0.06 * std::cos(1.3 * Y + 0.4 * cc + p2);
                    if (((x + t) / 8 + y / 8) % 2) v += 0.08;
                    f(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

/// Independent uniform noise frames in [lo, hi].
inline FrameSequence uniform_noise(std::size_t frames, std::size_t height, std::size_t width,
                                   float lo, float hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    FrameSequence seq;
    for (std::size_t t = 0; t < frames; ++t) {
        Frame f(3, height, width);
        for (float& v : f.values()) v = u(rng);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

/// Adds `offset` to every value, clamped to [0,1].
inline Frame brightness_offset(const Frame& f, float offset) {
    Frame g = f;
    for (float& v : g.values()) v = std::clamp(v + offset, 0.0f, 1.0f);
    return g;
}

inline FrameSequence brightness_offset(const FrameSequence& seq, float offset) {
    FrameSequence out{{}, seq.frame_rate};
    for (const auto& f : seq.frames) out.frames.push_back(brightness_offset(f, offset));
    return out;
}

/// 3x3 box blur (edges replicated) followed by uniform quantization to
/// `bits` bits per channel.
inline Frame blur_quantize(const Frame& f, unsigned bits) {
    const double levels = std::ldexp(1.0, static_cast<int>(bits)) - 1.0;
    Frame g(f.channels(), f.height(), f.width());
    const auto H = static_cast<std::ptrdiff_t>(f.height()), W = static_cast<std::ptrdiff_t>(f.width());
    for (std::size_t c = 0; c < f.channels(); ++c)
        for (std::ptrdiff_t y = 0; y < H; ++y)
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                double s = 0.0;
                for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
                    for (std::ptrdiff_t dx = -1; dx <= 1; ++dx)
                        s += f(c, static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + dy, 0, H - 1)),
                               static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + dx, 0, W - 1)));
                g(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                    static_cast<float>(std::round(s / 9.0 * levels) / levels);
            }
    return g;
}

inline FrameSequence blur_quantize(const FrameSequence& seq, unsigned bits) {
    FrameSequence out{{}, seq.frame_rate};
    for (const auto& f : seq.frames) out.frames.push_back(blur_quantize(f, bits));
    return out;
}

struct VideoPair {
    FrameSequence original;
    FrameSequence degraded;
};

/// Uniform-noise originals in [0.05, 0.75] brightened by `offset`; no value
/// reaches the clamp, so the degradation is a pure constant shift.
inline VideoPair offset_fixture(std::size_t frames = 8, std::size_t size = 16, float offset = 0.2f,
                                std::uint64_t seed = 1) {
    VideoPair p;
    p.original = uniform_noise(frames, size, size, 0.05f, 0.75f, seed);
    p.degraded = brightness_offset(p.original, offset);
    return p;
}

/// Two segments of `per_segment` frames: the first brightened by `delta`,
/// the second darkened by it. Originals sit in [0.2, 0.8].
inline VideoPair brighten_darken_fixture(std::size_t per_segment = 8, std::size_t size = 16,
                                         float delta = 0.15f, std::uint64_t seed = 1) {
    VideoPair p;
    p.original = uniform_noise(2 * per_segment, size, size, 0.2f, 0.8f, seed);
    p.degraded.frame_rate = p.original.frame_rate;
    for (std::size_t t = 0; t < p.original.size(); ++t)
        p.degraded.frames.push_back(
            brightness_offset(p.original.frames[t], t < per_segment ? delta : -delta));
    return p;
}

}  // namespace segrefine::synthetic
