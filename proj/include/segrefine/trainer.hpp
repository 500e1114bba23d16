#pragma once

// Per-segment training: build (degraded, target) pairs, run plain SGD with
// one full frame per step, and assemble the parameter array for a video.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "segrefine/errors.hpp"
#include "segrefine/frame.hpp"
#include "segrefine/metrics.hpp"
#include "segrefine/nn.hpp"
#include "segrefine/refiner.hpp"
#include "segrefine/segmentation.hpp"

namespace segrefine {

struct TrainingConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    RefineMode mode = RefineMode::Residual;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("learning_rate must be positive");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    }
};

struct TrainingExample {
    Tensor<float> input;   // degraded frame
    Tensor<float> target;  // original frame (direct) or degraded - original (residual)
    std::size_t frame_index = 0;
};

struct TrainingReport {
    std::size_t segment_index = 0;
    std::vector<double> step_losses;
    std::size_t steps = 0;
    double final_loss = 0.0;  // mean loss over the segment after the last step
    double pre_psnr_db = 0.0;
    double post_psnr_db = 0.0;
    double wall_time_s = 0.0;

    double mean_epoch_loss(std::size_t epoch, std::size_t per_epoch) const {
        const auto first = step_losses.begin() + static_cast<std::ptrdiff_t>(epoch * per_epoch);
        return std::accumulate(first, first + static_cast<std::ptrdiff_t>(per_epoch), 0.0) /
               static_cast<double>(per_epoch);
    }
};

struct StepRecord {
    std::size_t segment = 0;
    std::size_t step = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// degraded - original, elementwise.
inline Tensor<float> residual_frame(const Frame& degraded, const Frame& original) {
    if (!degraded.same_shape(original))
        throw std::invalid_argument("residual_frame: dimensions differ");
    Tensor<float> r = degraded;
    auto o = original.values();
    auto v = r.values();
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= o[j];
    return r;
}

inline std::vector<TrainingExample> make_training_examples(std::span<const Frame> original,
                                                           std::span<const Frame> degraded,
                                                           RefineMode mode,
                                                           std::size_t first_frame = 1) {
    if (original.size() != degraded.size())
        throw std::invalid_argument("make_training_examples: " + std::to_string(original.size()) +
                                    " original frames vs " + std::to_string(degraded.size()) +
                                    " degraded");
    std::vector<TrainingExample> out;
    out.reserve(original.size());
    for (std::size_t t = 0; t < original.size(); ++t) {
        if (!original[t].same_shape(degraded[t]) ||
            (t > 0 && !original[t].same_shape(original[0])))
            throw std::invalid_argument("make_training_examples: frame " +
                                        std::to_string(first_frame + t) + " dimensions differ");
        out.push_back({degraded[t],
                       mode == RefineMode::Residual ? residual_frame(degraded[t], original[t])
                                                    : original[t],
                       first_frame + t});
    }
    return out;
}

namespace detail {

inline Frame original_from_example(const TrainingExample& ex, RefineMode mode) {
    return mode == RefineMode::Residual ? residual_frame(ex.input, ex.target) : ex.target;
}

inline double mean_psnr(std::span<const TrainingExample> examples, RefineMode mode,
                        const std::function<Frame(const Frame&)>& produce) {
    double s = 0.0;
    for (const auto& ex : examples) s += psnr(produce(ex.input), original_from_example(ex, mode));
    return s / static_cast<double>(examples.size());
}

}  // namespace detail

/// Trains one parameter set from scratch. steps = epochs x examples.
inline std::pair<ParameterSet, TrainingReport> train_segment(
    std::span<const TrainingExample> examples, const RefinerTopology& topology,
    const TrainingConfig& config, std::size_t segment_index = 0,
    const ProgressFn& progress = {}) {
    config.validate();
    topology.validate();
    if (examples.empty()) throw std::invalid_argument("train_segment: no examples");
    for (const auto& ex : examples)
        if (!ex.input.same_shape(examples[0].input) || !ex.target.same_shape(ex.input))
            throw std::invalid_argument("train_segment: example shapes differ");

    const auto t0 = std::chrono::steady_clock::now();
    ParameterSet params = init_parameters(topology, config.mode, config.seed);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainingReport report;
    report.segment_index = segment_index;
    report.step_losses.reserve(config.epochs * examples.size());

    const auto refine = [&](const Frame& f) {
        return forward_refine(params, topology, f, config.mode);
    };
    report.pre_psnr_db = detail::mean_psnr(examples, config.mode, [](const Frame& f) { return f; });

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ForwardTrace<float> trace;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t j : order) {
            const auto& ex = examples[j];
            Tensor<float> out = network_forward<float>(topology, params.values, ex.input, &trace);
            auto loss = mse_loss(out, ex.target);
            if (!std::isfinite(loss.loss))
                throw NumericFailure(step, "training diverged at step " + std::to_string(step) +
                                               " of segment " + std::to_string(segment_index));
            auto grads = network_backward<float>(topology, params.values, trace, loss.grad);
            sgd_update<float>(params.values, grads, config.learning_rate);
            report.step_losses.push_back(loss.loss);
            if (progress) progress({segment_index, step, epoch, loss.loss});
            ++step;
        }
    }
    if (!std::all_of(params.values.begin(), params.values.end(),
                     [](float v) { return std::isfinite(v); }))
        throw NumericFailure(step, "non-finite parameters after training segment " +
                                       std::to_string(segment_index));
    report.steps = step;

    double final_loss = 0.0;
    for (const auto& ex : examples)
        final_loss += mse_loss(network_forward<float>(topology, params.values, ex.input), ex.target).loss;
    report.final_loss = final_loss / static_cast<double>(examples.size());
    report.post_psnr_db = detail::mean_psnr(examples, config.mode, refine);
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(params), std::move(report)};
}

/// Seed for segment k, independent of training order.
inline std::uint64_t segment_seed(std::uint64_t master, std::size_t segment_index) {
    return master ^ static_cast<std::uint64_t>(segment_index);
}

struct VideoTrainingResult {
    ParameterArray array;
    std::vector<TrainingReport> reports;
};

/// Partitions the video and trains every segment independently, up to
/// `jobs` segments at a time. Result order follows segment order.
inline VideoTrainingResult train_video(const FrameSequence& original, const FrameSequence& degraded,
                                       const SegmentationConfig& seg_config,
                                       const TrainingConfig& train_config,
                                       const RefinerTopology& topology, std::size_t jobs = 1,
                                       const ProgressFn& progress = {}) {
    require_same_geometry(original, degraded, "train_video");
    original.validate();
    degraded.validate();
    train_config.validate();
    const auto segments = partition(original.size(), seg_config);

    std::vector<ParameterSet> params(segments.size());
    std::vector<TrainingReport> reports(segments.size());
    std::vector<std::exception_ptr> errors(segments.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < segments.size();) {
            const auto& seg = segments[k];
            try {
                std::span<const Frame> o(original.frames), d(degraded.frames);
                auto ex = make_training_examples(o.subspan(seg.start_frame - 1, seg.length()),
                                                 d.subspan(seg.start_frame - 1, seg.length()),
                                                 train_config.mode, seg.start_frame);
                TrainingConfig cfg = train_config;
                cfg.seed = segment_seed(train_config.seed, k);
                auto [p, r] = train_segment(ex, topology, cfg, k, progress);
                params[k] = std::move(p);
                reports[k] = std::move(r);
            } catch (const NumericFailure& e) {
                errors[k] = std::make_exception_ptr(
                    NumericFailure(e.step(), "segment " + std::to_string(k) + ": " + e.what()));
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };

    jobs = std::clamp<std::size_t>(jobs, 1, segments.size());
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    VideoTrainingResult result{ParameterArray(seg_config, topology.id()), std::move(reports)};
    for (std::size_t k = 0; k < segments.size(); ++k)
        result.array.append_segment(segments[k], std::move(params[k]));
    return result;
}

}  // namespace segrefine
