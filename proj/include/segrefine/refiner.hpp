#pragma once

// The per-frame refiner network: topology, flat parameter container,
// initialization, and the forward/backward passes over the whole stack.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "segrefine/nn.hpp"
#include "segrefine/tensor.hpp"

namespace segrefine {

enum class RefineMode : std::uint8_t { Direct = 0, Residual = 1 };

inline std::string_view to_string(RefineMode m) {
    return m == RefineMode::Direct ? "direct" : "residual";
}

inline RefineMode parse_refine_mode(std::string_view s) {
    if (s == "direct") return RefineMode::Direct;
    if (s == "residual") return RefineMode::Residual;
    throw std::invalid_argument("unknown refine mode '" + std::string(s) +
                                "' (expected direct or residual)");
}

/// Ordered conv layers. ReLU follows every layer except the last.
struct RefinerTopology {
    std::vector<ConvSpec> layers;
    std::size_t hidden_width = 16;

    /// Four 5x5 layers followed by three 3x3 layers, 3 channels in and out.
    static RefinerTopology standard(std::size_t hidden_width = 16) {
        static constexpr std::size_t kernels[] = {5, 5, 5, 5, 3, 3, 3};
        return from_kernels(kernels, hidden_width);
    }

    static RefinerTopology from_kernels(std::span<const std::size_t> kernels,
                                        std::size_t hidden_width, std::size_t channels = 3) {
        if (kernels.empty()) throw std::invalid_argument("RefinerTopology: no layers");
        if (hidden_width == 0) throw std::invalid_argument("RefinerTopology: hidden_width must be positive");
        RefinerTopology t;
        t.hidden_width = hidden_width;
        for (std::size_t l = 0; l < kernels.size(); ++l) {
            const std::size_t in = l == 0 ? channels : hidden_width;
            const std::size_t out = l + 1 == kernels.size() ? channels : hidden_width;
            t.layers.push_back({in, out, kernels[l]});
        }
        t.validate();
        return t;
    }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("RefinerTopology: no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].validate();
            if (l + 1 < layers.size() && layers[l].out_channels != layers[l + 1].in_channels)
                throw std::invalid_argument("RefinerTopology: layer " + std::to_string(l) +
                                            " out_channels does not chain into layer " +
                                            std::to_string(l + 1));
        }
    }

    std::size_t in_channels() const { return layers.front().in_channels; }
    std::size_t out_channels() const { return layers.back().out_channels; }

    /// FNV-1a over the layer geometry. Binds a ParameterSet to its topology.
    std::uint64_t id() const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            for (int b = 0; b < 8; ++b) {
                h ^= (v >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        };
        mix(layers.size());
        for (const auto& s : layers) {
            mix(s.in_channels);
            mix(s.out_channels);
            mix(s.kernel);
        }
        return h;
    }

    friend bool operator==(const RefinerTopology& a, const RefinerTopology& b) {
        return a.layers == b.layers;
    }
};

inline std::size_t parameter_count(const RefinerTopology& topology) {
    std::size_t n = 0;
    for (const auto& s : topology.layers) n += s.parameter_count();
    return n;
}

/// Start index of each layer's block (weights then bias) in the flat list.
inline std::vector<std::size_t> layer_offsets(const RefinerTopology& topology) {
    std::vector<std::size_t> off;
    off.reserve(topology.layers.size() + 1);
    std::size_t at = 0;
    for (const auto& s : topology.layers) {
        off.push_back(at);
        at += s.parameter_count();
    }
    off.push_back(at);
    return off;
}

/// All weights and biases of one network, layer by layer (weights then
/// bias), tagged with the topology they belong to.
struct ParameterSet {
    std::vector<float> values;
    std::uint64_t topology_id = 0;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

inline void check_parameters(const ParameterSet& params, const RefinerTopology& topology) {
    if (params.topology_id != topology.id())
        throw std::invalid_argument("parameter set belongs to a different topology");
    if (params.values.size() != parameter_count(topology))
        throw std::invalid_argument("parameter set has " + std::to_string(params.values.size()) +
                                    " values, topology needs " +
                                    std::to_string(parameter_count(topology)));
}

/// He-normal weights, zero biases. In residual mode the last layer starts
/// at zero so the refiner is the identity before training.
inline ParameterSet init_parameters(const RefinerTopology& topology, RefineMode mode,
                                    std::uint64_t seed) {
    topology.validate();
    ParameterSet p;
    p.topology_id = topology.id();
    p.values.assign(parameter_count(topology), 0.0f);
    std::mt19937_64 rng(seed);
    const auto off = layer_offsets(topology);
    for (std::size_t l = 0; l < topology.layers.size(); ++l) {
        const auto& s = topology.layers[l];
        const bool zero = mode == RefineMode::Residual && l + 1 == topology.layers.size();
        if (zero) continue;
        std::normal_distribution<double> dist(
            0.0, std::sqrt(2.0 / static_cast<double>(s.in_channels * s.kernel * s.kernel)));
        for (std::size_t j = 0; j < s.weight_count(); ++j)
            p.values[off[l] + j] = static_cast<float>(dist(rng));
    }
    return p;
}

/// Per-layer activations kept by the forward pass for backpropagation.
template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> inputs;       // input to layer l
    std::vector<Tensor<T>> pre_activation;  // conv output of layer l
};

template <typename T>
Tensor<T> network_forward(const RefinerTopology& topology, std::span<const T> params,
                          const Tensor<T>& input, ForwardTrace<T>* trace = nullptr) {
    if (params.size() != parameter_count(topology))
        throw std::invalid_argument("network_forward: parameter count mismatch");
    const auto off = layer_offsets(topology);
    if (trace) {
        trace->inputs.clear();
        trace->pre_activation.clear();
    }
    Tensor<T> x = input;
    for (std::size_t l = 0; l < topology.layers.size(); ++l) {
        const auto& s = topology.layers[l];
        auto w = params.subspan(off[l], s.weight_count());
        auto b = params.subspan(off[l] + s.weight_count(), s.out_channels);
        Tensor<T> z = conv2d_forward<T>(x, s, w, b);
        const bool last = l + 1 == topology.layers.size();
        if (trace) {
            trace->inputs.push_back(std::move(x));
            trace->pre_activation.push_back(z);
        }
        x = last ? std::move(z) : relu_forward(z);
    }
    return x;
}

/// Gradient of the loss w.r.t. every parameter, given dLoss/dOutput.
template <typename T>
std::vector<T> network_backward(const RefinerTopology& topology, std::span<const T> params,
                                const ForwardTrace<T>& trace, const Tensor<T>& output_grad) {
    const std::size_t L = topology.layers.size();
    if (trace.inputs.size() != L || trace.pre_activation.size() != L)
        throw std::invalid_argument("network_backward: trace does not match topology");
    const auto off = layer_offsets(topology);
    std::vector<T> grads(params.size(), T{});
    Tensor<T> g = output_grad;
    for (std::size_t l = L; l-- > 0;) {
        const auto& s = topology.layers[l];
        if (l + 1 != L) g = relu_backward(trace.pre_activation[l], g);
        auto w = params.subspan(off[l], s.weight_count());
        LayerGradients<T> lg = conv2d_backward<T>(trace.inputs[l], s, w, g);
        std::copy(lg.weight_grad.begin(), lg.weight_grad.end(), grads.begin() + off[l]);
        std::copy(lg.bias_grad.begin(), lg.bias_grad.end(),
                  grads.begin() + off[l] + s.weight_count());
        if (l > 0) g = std::move(lg.input_grad);
    }
    return grads;
}

/// Unclamped network output R(frame) (the predicted residual in residual mode).
inline Tensor<float> raw_network_output(const ParameterSet& params, const RefinerTopology& topology,
                                        const Tensor<float>& frame) {
    check_parameters(params, topology);
    if (frame.channels() != topology.in_channels())
        throw std::invalid_argument("forward_refine: frame has " +
                                    std::to_string(frame.channels()) + " channels, network expects " +
                                    std::to_string(topology.in_channels()));
    return network_forward<float>(topology, params.values, frame);
}

/// Refined frame: clamp(R(x)) in direct mode, clamp(x - R(x)) in residual mode.
inline Tensor<float> forward_refine(const ParameterSet& params, const RefinerTopology& topology,
                                    const Tensor<float>& frame, RefineMode mode) {
    Tensor<float> out = raw_network_output(params, topology, frame);
    if (!out.same_shape(frame))
        throw std::invalid_argument("forward_refine: network output shape " + shape_string(out) +
                                    " differs from frame " + shape_string(frame));
    auto o = out.values();
    auto f = frame.values();
    for (std::size_t j = 0; j < o.size(); ++j) {
        const float v = mode == RefineMode::Residual ? f[j] - o[j] : o[j];
        o[j] = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

}  // namespace segrefine
