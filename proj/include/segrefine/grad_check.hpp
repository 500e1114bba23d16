#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "segrefine/errors.hpp"
#include "segrefine/nn.hpp"
#include "segrefine/refiner.hpp"

namespace segrefine {

struct GradCheckOptions {
    std::size_t sample_count = 128;  // parameters probed (all if fewer exist)
    std::uint64_t seed = 0x5eed;
    double denominator_floor = 1e-8;
    /// Applied to the analytic gradient before comparison. Used to verify
    /// that the checker actually catches a broken backward pass.
    std::function<void(const RefinerTopology&, std::span<double>)> tamper;
};

/// Worst relative error between backprop and central finite differences of
/// the MSE loss, over a random subsample of parameters. Runs in double.
inline double grad_check(const RefinerTopology& topology, std::span<const float> parameters,
                         const Tensor<float>& input, const Tensor<float>& target, double epsilon,
                         const GradCheckOptions& opts = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
    topology.validate();
    if (parameters.size() != parameter_count(topology))
        throw std::invalid_argument("grad_check: parameter count mismatch");

    std::vector<double> p(parameters.begin(), parameters.end());
    const Tensor<double> x = input.cast<double>();
    const Tensor<double> t = target.cast<double>();

    auto loss_at = [&](std::span<const double> params) {
        const double l = mse_loss(network_forward<double>(topology, params, x), t).loss;
        if (!std::isfinite(l)) throw NumericFailure(0, "grad_check: non-finite loss");
        return l;
    };

    ForwardTrace<double> trace;
    Tensor<double> out = network_forward<double>(topology, p, x, &trace);
    auto lr = mse_loss(out, t);
    if (!std::isfinite(lr.loss)) throw NumericFailure(0, "grad_check: non-finite loss");
    std::vector<double> analytic = network_backward<double>(topology, p, trace, lr.grad);
    if (opts.tamper) opts.tamper(topology, analytic);

    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.sample_count < idx.size()) {
        std::vector<std::size_t> picked;
        std::mt19937_64 rng(opts.seed);
        std::sample(idx.begin(), idx.end(), std::back_inserter(picked), opts.sample_count, rng);
        idx = std::move(picked);
    }

    double worst = 0.0;
    for (std::size_t j : idx) {
        const double saved = p[j];
        p[j] = saved + epsilon;
        const double up = loss_at(p);
        p[j] = saved - epsilon;
        const double down = loss_at(p);
        p[j] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[j];
        if (!std::isfinite(a)) throw NumericFailure(0, "grad_check: non-finite analytic gradient");
        const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace segrefine
