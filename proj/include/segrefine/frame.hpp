#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "segrefine/tensor.hpp"

namespace segrefine {

/// One RGB frame: a 3 x height x width tensor with values in [0,1].
using Frame = Tensor<float>;

struct Rational {
    std::uint32_t num = 25;
    std::uint32_t den = 1;
    friend bool operator==(const Rational&, const Rational&) = default;
};

struct FrameSequence {
    std::vector<Frame> frames;
    Rational frame_rate{};

    std::size_t size() const noexcept { return frames.size(); }
    bool empty() const noexcept { return frames.empty(); }
    std::size_t width() const { return frames.empty() ? 0 : frames.front().width(); }
    std::size_t height() const { return frames.empty() ? 0 : frames.front().height(); }

    void validate() const {
        for (std::size_t t = 0; t < frames.size(); ++t) {
            const auto& f = frames[t];
            if (f.channels() != 3)
                throw std::invalid_argument("frame " + std::to_string(t + 1) + " has " +
                                            std::to_string(f.channels()) + " channels");
            if (!f.same_shape(frames.front()))
                throw std::invalid_argument("frame " + std::to_string(t + 1) +
                                            " dimensions differ from frame 1");
        }
    }
};

inline void require_same_geometry(const FrameSequence& a, const FrameSequence& b,
                                  const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": frame counts differ (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                    ")");
    if (!a.empty() && !a.frames.front().same_shape(b.frames.front()))
        throw std::invalid_argument(std::string(what) + ": frame dimensions differ (" +
                                    shape_string(a.frames.front()) + " vs " +
                                    shape_string(b.frames.front()) + ")");
}

}  // namespace segrefine
