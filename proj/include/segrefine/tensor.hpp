#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace segrefine {

/// Dense (channel, row, column) array. Row-major, channel-planar.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
        : channels_(channels), height_(height), width_(width),
          data_(channels * height * width, fill) {
        if (channels == 0 || height == 0 || width == 0)
            throw std::invalid_argument("Tensor: all dimensions must be positive");
    }
    Tensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (channels == 0 || height == 0 || width == 0)
            throw std::invalid_argument("Tensor: all dimensions must be positive");
        if (data_.size() != channels * height * width)
            throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                        " != channels*height*width " +
                                        std::to_string(channels * height * width));
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * height_ + y) * width_ + x];
    }
    const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * height_ + y) * width_ + x];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const T> plane(std::size_t c) const {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const Tensor& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(channels_, height_, width_, std::move(out));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

template <typename T>
std::string shape_string(const Tensor<T>& t) {
    return std::to_string(t.channels()) + "x" + std::to_string(t.height()) + "x" +
           std::to_string(t.width());
}

}  // namespace segrefine
