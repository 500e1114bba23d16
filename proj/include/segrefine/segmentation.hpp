#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "segrefine/errors.hpp"
#include "segrefine/refiner.hpp"

namespace segrefine {

struct SegmentationConfig {
    std::size_t rho = 50;  // frames per segment

    void validate() const {
        if (rho < 1) throw std::invalid_argument("segment duration rho must be >= 1");
    }
};

/// Inclusive, 1-based frame range owned by one parameter set.
struct SegmentDescriptor {
    std::size_t index = 0;
    std::size_t start_frame = 1;
    std::size_t end_frame = 1;

    std::size_t length() const noexcept { return end_frame - start_frame + 1; }
    bool contains(std::size_t t) const noexcept { return start_frame <= t && t <= end_frame; }

    friend bool operator==(const SegmentDescriptor&, const SegmentDescriptor&) = default;
};

/// ceil(frame_count / rho) segments, all of length rho except possibly the
/// last, which keeps whatever frames remain.
inline std::vector<SegmentDescriptor> partition(std::size_t frame_count,
                                                const SegmentationConfig& config) {
    config.validate();
    if (frame_count == 0) throw std::invalid_argument("partition: frame_count must be >= 1");
    std::vector<SegmentDescriptor> out;
    out.reserve((frame_count + config.rho - 1) / config.rho);
    for (std::size_t start = 1, i = 0; start <= frame_count; start += config.rho, ++i)
        out.push_back({i, start, std::min(start + config.rho - 1, frame_count)});
    return out;
}

/// Append-only map from segments to parameter sets. Lookups are const and
/// may run concurrently with each other; appends need exclusive access.
class ParameterArray {
public:
    struct Entry {
        SegmentDescriptor segment;
        ParameterSet params;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    ParameterArray() = default;
    ParameterArray(SegmentationConfig config, std::uint64_t topology_id)
        : config_(config), topology_id_(topology_id) {
        config_.validate();
    }

    const SegmentationConfig& config() const noexcept { return config_; }
    std::uint64_t topology_id() const noexcept { return topology_id_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t last_frame() const noexcept {
        return entries_.empty() ? 0 : entries_.back().segment.end_frame;
    }
    const Entry& operator[](std::size_t k) const { return entries_.at(k); }

    void append_segment(const SegmentDescriptor& segment, ParameterSet params) {
        const std::size_t expected_start = last_frame() + 1;
        if (segment.start_frame != expected_start)
            throw TilingViolation("append_segment: segment starts at frame " +
                                  std::to_string(segment.start_frame) + ", expected " +
                                  std::to_string(expected_start));
        if (segment.end_frame < segment.start_frame)
            throw TilingViolation("append_segment: end_frame precedes start_frame");
        if (segment.length() > config_.rho)
            throw TilingViolation("append_segment: segment length " +
                                  std::to_string(segment.length()) + " exceeds rho " +
                                  std::to_string(config_.rho));
        if (segment.index != entries_.size())
            throw TilingViolation("append_segment: segment index " + std::to_string(segment.index) +
                                  ", expected " + std::to_string(entries_.size()));
        if (params.topology_id != topology_id_)
            throw std::invalid_argument("append_segment: parameter set topology mismatch");
        entries_.push_back({segment, std::move(params)});
    }

    /// Entry whose range contains frame t (1-based). Constant time when all
    /// preceding segments are full length.
    const Entry& lookup(std::size_t t) const {
        if (t < 1 || t > last_frame())
            throw std::out_of_range("lookup: frame " + std::to_string(t) + " outside [1, " +
                                    std::to_string(last_frame()) + "]");
        const std::size_t guess = (t - 1) / config_.rho;
        if (guess < entries_.size() && entries_[guess].segment.contains(t)) return entries_[guess];
        auto it = std::upper_bound(
            entries_.begin(), entries_.end(), t,
            [](std::size_t v, const Entry& e) { return v < e.segment.start_frame; });
        return *(it - 1);
    }

    friend bool operator==(const ParameterArray& a, const ParameterArray& b) {
        return a.config_.rho == b.config_.rho && a.topology_id_ == b.topology_id_ &&
               a.entries_ == b.entries_;
    }

private:
    SegmentationConfig config_{};
    std::uint64_t topology_id_ = 0;
    std::vector<Entry> entries_;
};

}  // namespace segrefine
