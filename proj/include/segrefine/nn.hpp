#pragma once

// Minimal convolutional network primitives: same-padded stride-1 conv2d,
// ReLU, mean squared error and plain SGD. Everything is templated on the
// scalar type so the gradient checker can run the identical code in double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segrefine/tensor.hpp"

namespace segrefine {

/// One convolution layer. Stride is 1 and padding is kernel/2, so the
/// spatial size is preserved.
struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;

    std::size_t padding() const noexcept { return kernel / 2; }
    std::size_t weight_count() const noexcept {
        return out_channels * in_channels * kernel * kernel;
    }
    std::size_t parameter_count() const noexcept { return weight_count() + out_channels; }

    void validate() const {
        if (in_channels == 0 || out_channels == 0)
            throw std::invalid_argument("ConvSpec: channel counts must be positive");
        if (kernel == 0 || kernel % 2 == 0)
            throw std::invalid_argument("ConvSpec: kernel must be odd and positive, got " +
                                        std::to_string(kernel));
    }

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

template <typename T>
struct LayerGradients {
    std::vector<T> weight_grad;  // out x in x kernel x kernel
    std::vector<T> bias_grad;    // out
    Tensor<T> input_grad;
};

namespace detail {

template <typename T>
void check_conv_shapes(const char* op, const Tensor<T>& input, const ConvSpec& spec,
                       std::span<const T> weights, std::span<const T> bias) {
    spec.validate();
    if (input.channels() != spec.in_channels)
        throw std::invalid_argument(std::string(op) + ": input channel axis is " +
                                    std::to_string(input.channels()) + ", expected in_channels " +
                                    std::to_string(spec.in_channels));
    if (weights.size() != spec.weight_count())
        throw std::invalid_argument(std::string(op) + ": weight array has " +
                                    std::to_string(weights.size()) + " values, expected " +
                                    std::to_string(spec.weight_count()) + " (out x in x k x k)");
    if (bias.size() != spec.out_channels)
        throw std::invalid_argument(std::string(op) + ": bias axis is " +
                                    std::to_string(bias.size()) + ", expected out_channels " +
                                    std::to_string(spec.out_channels));
}

// Valid output range [lo, hi) along one axis for kernel tap `d`.
inline void tap_range(std::size_t extent, std::size_t pad, std::size_t d, std::size_t& lo,
                      std::size_t& hi) {
    lo = d < pad ? pad - d : 0;
    const std::size_t shift_hi = d > pad ? d - pad : 0;
    hi = extent > shift_hi ? extent - shift_hi : 0;
    if (hi < lo) hi = lo;
}

}  // namespace detail

/// out[c,y,x] = bias[c] + sum_{i,dy,dx} w[c,i,dy,dx] * in[i, y+dy-p, x+dx-p]
/// with zeros outside the input. Per-channel partial sums are folded into a
/// 64-bit accumulator.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvSpec& spec,
                         std::span<const T> weights, std::span<const T> bias) {
    detail::check_conv_shapes("conv2d_forward", input, spec, weights, bias);
    const std::size_t H = input.height(), W = input.width(), k = spec.kernel;
    const std::size_t pad = spec.padding();
    const std::size_t cin = spec.in_channels;

    Tensor<T> out(spec.out_channels, H, W);
    std::vector<double> acc(H * W);
    std::vector<T> part(H * W);

    for (std::size_t c = 0; c < spec.out_channels; ++c) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias[c]));
        for (std::size_t i = 0; i < cin; ++i) {
            std::fill(part.begin(), part.end(), T{});
            const T* src = input.plane(i).data();
            const T* wk = weights.data() + (c * cin + i) * k * k;
            for (std::size_t dy = 0; dy < k; ++dy) {
                std::size_t y0, y1;
                detail::tap_range(H, pad, dy, y0, y1);
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const T w = wk[dy * k + dx];
                    std::size_t x0, x1;
                    detail::tap_range(W, pad, dx, x0, x1);
                    const std::size_t n = x1 - x0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        T* dst = part.data() + y * W + x0;
                        const T* s = src + (y + dy - pad) * W + (x0 + dx - pad);
                        for (std::size_t x = 0; x < n; ++x) dst[x] += w * s[x];
                    }
                }
            }
            for (std::size_t j = 0; j < H * W; ++j) acc[j] += static_cast<double>(part[j]);
        }
        T* dst = out.plane(c).data();
        for (std::size_t j = 0; j < H * W; ++j) dst[j] = static_cast<T>(acc[j]);
    }
    return out;
}

/// Exact gradients of conv2d_forward with respect to weights, bias and input.
template <typename T>
LayerGradients<T> conv2d_backward(const Tensor<T>& input, const ConvSpec& spec,
                                  std::span<const T> weights, const Tensor<T>& upstream) {
    std::vector<T> dummy_bias(spec.out_channels);
    detail::check_conv_shapes<T>("conv2d_backward", input, spec, weights, dummy_bias);
    if (upstream.channels() != spec.out_channels || upstream.height() != input.height() ||
        upstream.width() != input.width())
        throw std::invalid_argument("conv2d_backward: upstream gradient shape " +
                                    shape_string(upstream) + " does not match output shape " +
                                    std::to_string(spec.out_channels) + "x" +
                                    std::to_string(input.height()) + "x" +
                                    std::to_string(input.width()));

    const std::size_t H = input.height(), W = input.width(), k = spec.kernel;
    const std::size_t pad = spec.padding();
    const std::size_t cin = spec.in_channels, cout = spec.out_channels;

    LayerGradients<T> g;
    g.weight_grad.assign(spec.weight_count(), T{});
    g.bias_grad.assign(cout, T{});
    g.input_grad = Tensor<T>(cin, H, W);

    for (std::size_t c = 0; c < cout; ++c) {
        double s = 0.0;
        for (T v : upstream.plane(c)) s += static_cast<double>(v);
        g.bias_grad[c] = static_cast<T>(s);
    }

    std::vector<double> acc(H * W);
    std::vector<T> part(H * W);
    for (std::size_t i = 0; i < cin; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const T* src = input.plane(i).data();
        for (std::size_t c = 0; c < cout; ++c) {
            std::fill(part.begin(), part.end(), T{});
            const T* up = upstream.plane(c).data();
            const T* wk = weights.data() + (c * cin + i) * k * k;
            T* gk = g.weight_grad.data() + (c * cin + i) * k * k;
            for (std::size_t dy = 0; dy < k; ++dy) {
                std::size_t y0, y1;
                detail::tap_range(H, pad, dy, y0, y1);
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const T w = wk[dy * k + dx];
                    std::size_t x0, x1;
                    detail::tap_range(W, pad, dx, x0, x1);
                    const std::size_t n = x1 - x0;
                    double wsum = 0.0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const T* u = up + y * W + x0;
                        const std::size_t off = (y + dy - pad) * W + (x0 + dx - pad);
                        const T* s = src + off;
                        T* d = part.data() + off;
                        T row = T{};
                        for (std::size_t x = 0; x < n; ++x) {
                            row += u[x] * s[x];
                            d[x] += w * u[x];
                        }
                        wsum += static_cast<double>(row);
                    }
                    gk[dy * k + dx] = static_cast<T>(wsum);
                }
            }
            for (std::size_t j = 0; j < H * W; ++j) acc[j] += static_cast<double>(part[j]);
        }
        T* dst = g.input_grad.plane(i).data();
        for (std::size_t j = 0; j < H * W; ++j) dst[j] = static_cast<T>(acc[j]);
    }
    return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out = input;
    for (T& v : out.values()) v = v > T{} ? v : T{};
    return out;
}

/// Passes upstream where input > 0; the subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
    if (!input.same_shape(upstream))
        throw std::invalid_argument("relu_backward: shape " + shape_string(upstream) +
                                    " != " + shape_string(input));
    Tensor<T> out = upstream;
    auto in = input.values();
    auto o = out.values();
    for (std::size_t j = 0; j < o.size(); ++j)
        if (!(in[j] > T{})) o[j] = T{};
    return out;
}

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;
};

/// Mean squared error and its gradient 2 (p - t) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
    if (!prediction.same_shape(target))
        throw std::invalid_argument("mse_loss: prediction " + shape_string(prediction) +
                                    " vs target " + shape_string(target));
    const std::size_t n = prediction.size();
    LossResult<T> r{0.0, Tensor<T>(prediction.channels(), prediction.height(), prediction.width())};
    auto p = prediction.values();
    auto t = target.values();
    auto g = r.grad.values();
    const double scale = 2.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = static_cast<double>(p[j]) - static_cast<double>(t[j]);
        sum += d * d;
        g[j] = static_cast<T>(scale * d);
    }
    r.loss = sum / static_cast<double>(n);
    return r;
}

/// In-place p -= lr * g.
template <typename T>
void sgd_update(std::span<T> parameters, std::span<const T> gradients, double learning_rate) {
    if (parameters.size() != gradients.size())
        throw std::invalid_argument("sgd_step: " + std::to_string(parameters.size()) +
                                    " parameters but " + std::to_string(gradients.size()) +
                                    " gradients");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("sgd_step: learning_rate must be positive");
    const T lr = static_cast<T>(learning_rate);
    for (std::size_t j = 0; j < parameters.size(); ++j) parameters[j] -= lr * gradients[j];
}

template <typename T>
std::vector<T> sgd_step(std::span<const T> parameters, std::span<const T> gradients,
                        double learning_rate) {
    std::vector<T> out(parameters.begin(), parameters.end());
    sgd_update<T>(out, gradients, learning_rate);
    return out;
}

}  // namespace segrefine
