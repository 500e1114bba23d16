// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Optional arguments select criteria by id
// (e.g. `acceptance C2 C8`). Exit status is nonzero if any selected
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "segrefine/app.hpp"
#include "segrefine/grad_check.hpp"
#include "segrefine/synthetic.hpp"
#include "support/oracles.hpp"

using namespace segrefine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct TempDir {
    fs::path path = fs::temp_directory_path() /
                    ("segrefine_accept_" + std::to_string(std::random_device{}()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::uint64_t fnv1a_file(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c; is.get(c);) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    return h;
}

double mean_loss(const RefinerTopology& topo, const ParameterSet& p,
                 std::span<const TrainingExample> examples) {
    double s = 0.0;
    for (const auto& ex : examples)
        s += mse_loss(network_forward<float>(topo, p.values, ex.input), ex.target).loss;
    return s / static_cast<double>(examples.size());
}

Outcome gradient_correctness() {
    const auto topo = RefinerTopology::standard();
    const auto p = init_parameters(topo, RefineMode::Direct, 2024);
    std::mt19937_64 rng(1);
    const auto x = oracle::random_tensor(3, 8, 8, rng, 0.0f, 1.0f);
    const auto y = oracle::random_tensor(3, 8, 8, rng, 0.0f, 1.0f);
    const double err = grad_check(topo, p.values, x, y, 1e-6);
    return {err < 1e-3, fmt("max relative error %.3g over 128 sampled parameters (limit 1e-3)", err)};
}

Outcome convolution_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> ch(1, 8), dim(1, 24), kp(0, 3);
    const std::size_t kernels[] = {1, 3, 5, 7};
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ConvSpec spec{ch(rng), ch(rng), kernels[kp(rng)]};
        const std::size_t h = dim(rng), w = dim(rng);
        const auto in = oracle::random_tensor(spec.in_channels, h, w, rng);
        const auto wt = oracle::random_values(spec.weight_count(), rng);
        const auto b = oracle::random_values(spec.out_channels, rng);
        const auto out = conv2d_forward<float>(in, spec, wt, b);
        const auto ref = oracle::naive_conv(in.data(), spec.in_channels, h, w, wt, b,
                                            spec.out_channels, spec.kernel);
        if (out.size() != ref.size()) return {false, "output size differs from oracle"};
        for (std::size_t j = 0; j < ref.size(); ++j)
            worst = std::max(worst, std::abs(static_cast<double>(out[j]) - ref[j]));
    }
    return {worst <= 1e-5, fmt("max abs difference %.3g over 20 shapes (limit 1e-5)", worst)};
}

Outcome residual_safety() {
    const auto topo = RefinerTopology::standard();
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> dim(1, 40);
    std::size_t exact = 0;
    for (int i = 0; i < 10; ++i) {
        const auto f = oracle::random_tensor(3, dim(rng), dim(rng), rng, 0.0f, 1.0f);
        const auto p = init_parameters(topo, RefineMode::Residual, 100 + i);
        if (forward_refine(p, topo, f, RefineMode::Residual) == f) ++exact;
    }
    return {exact == 10, fmt("%zu of 10 frames reproduced bit-exactly", exact)};
}

Outcome desk_scale_learning() {
    const auto fx = synthetic::offset_fixture();
    const auto ex = make_training_examples(fx.original.frames, fx.degraded.frames, RefineMode::Residual);
    TrainingConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.epochs = 2000 / ex.size();
    const auto [p, r] = train_segment(ex, RefinerTopology::standard(), cfg);
    return {r.final_loss < 1e-4 && r.steps <= 2000,
            fmt("final MSE %.3g after %zu steps at lr 3e-2 (limit 1e-4 within 2000)", r.final_loss,
                r.steps)};
}

Outcome segment_specialization() {
    const std::size_t per = 8;
    const auto fx = synthetic::brighten_darken_fixture(per);
    const RunConfig defaults;
    const auto topo = defaults.topology();
    const auto res = train_video(fx.original, fx.degraded, SegmentationConfig{per}, defaults.training,
                                 topo, 2);
    if (res.array.size() != 2) return {false, "expected two segments"};
    std::span<const Frame> o(fx.original.frames), d(fx.degraded.frames);
    double loss[2][2];
    for (std::size_t seg = 0; seg < 2; ++seg) {
        const auto ex = make_training_examples(o.subspan(seg * per, per), d.subspan(seg * per, per),
                                               defaults.training.mode);
        for (std::size_t k = 0; k < 2; ++k) loss[k][seg] = mean_loss(topo, res.array[k].params, ex);
    }
    return {loss[0][0] < loss[1][0] && loss[1][1] < loss[0][1],
            fmt("segment 1: own %.3g vs other %.3g; segment 2: own %.3g vs other %.3g", loss[0][0],
                loss[1][0], loss[1][1], loss[0][1])};
}

Outcome end_to_end() {
    TempDir dir;
    const auto original = synthetic::moving_pattern(100, 64, 64, 1);
    write_y4m_file(dir / "original.y4m", original);
    write_y4m_file(dir / "degraded.y4m", synthetic::blur_quantize(original, 5));
    RunConfig cfg;
    cfg.original = dir / "original.y4m";
    cfg.degraded = dir / "degraded.y4m";
    cfg.sidecar = dir / "params.srf";
    cfg.out = dir / "refined.y4m";
    cfg.refined = cfg.out;
    std::ostringstream out, err;
    if (int rc = cmd_train(cfg, out, err); rc != kExitOk) return {false, "train failed: " + err.str()};
    if (int rc = cmd_refine(cfg, out, err); rc != kExitOk) return {false, "refine failed: " + err.str()};
    QualityReport rep;
    if (int rc = cmd_eval(cfg, out, err, &rep); rc != kExitOk) return {false, "eval failed: " + err.str()};
    const double gain = rep.mean_psnr_refined - rep.mean_psnr_degraded;
    return {gain >= 1.0 && rep.mean_ms_ssim_refined >= rep.mean_ms_ssim_degraded,
            fmt("PSNR %.3f -> %.3f dB (gain %.3f, need >= 1.0); MS-SSIM %.5f -> %.5f",
                rep.mean_psnr_degraded, rep.mean_psnr_refined, gain, rep.mean_ms_ssim_degraded,
                rep.mean_ms_ssim_refined)};
}

Outcome step_count() {
    const auto o = synthetic::uniform_noise(50, 8, 8, 0.1f, 0.9f, 4);
    const auto d = synthetic::brightness_offset(o, 0.05f);
    TrainingConfig cfg;
    cfg.epochs = 10;
    const auto res = train_video(o, d, SegmentationConfig{50}, cfg, RefinerTopology::standard());
    const std::size_t steps = res.reports.at(0).steps;
    return {res.reports.size() == 1 && steps == 500 && res.reports[0].step_losses.size() == 500,
            fmt("50 frames x 10 epochs -> %zu steps (expected 500)", steps)};
}

Outcome metrics_exactness() {
    const Frame zero(3, 32, 32, 0.0f);
    const double p_half = psnr(zero, Frame(3, 32, 32, 0.5f));
    const double p_lsb = psnr(zero, Frame(3, 32, 32, 1.0f / 255.0f));
    bool ok = std::abs(p_half - 6.0206) <= 1e-3 && std::abs(p_lsb - 48.1308) <= 1e-3;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> amp(0.01f, 0.5f);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        Frame a = i % 2 ? oracle::random_tensor(3, 256, 256, rng, 0.0f, 1.0f)
                        : synthetic::moving_pattern(1, 256, 256, rng()).frames[0];
        Frame b = a;
        const float noise = amp(rng);
        std::uniform_real_distribution<float> n(-noise, noise);
        for (float& v : b.values()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
        worst = std::max(worst, std::abs(ms_ssim(a, b) - oracle::naive_ms_ssim(a, b)));
    }
    ok = ok && worst <= 1e-3;
    return {ok, fmt("PSNR %.4f / %.4f dB; MS-SSIM max deviation %.3g over 10 pairs (limit 1e-3)",
                    p_half, p_lsb, worst)};
}

Outcome sidecar_properties() {
    const auto topo = RefinerTopology::standard();
    std::mt19937_64 rng(9);
    const SegmentationConfig seg{50};
    ParameterArray array(seg, topo.id());
    for (const auto& s : partition(230, seg)) {
        ParameterSet p{oracle::random_values(parameter_count(topo), rng), topo.id()};
        array.append_segment(s, std::move(p));
    }
    std::ostringstream os;
    write_sidecar(array, topo, RefineMode::Residual, os);
    const std::string bytes = os.str();
    std::istringstream is(bytes);
    const auto back = read_sidecar(is);
    bool ok = back.array == array;
    std::string detail = ok ? "round trip exact" : "round trip differs";

    std::size_t worst_touch = 0, budget = 0;
    for (std::size_t k = 0; k < array.size(); ++k) {
        std::istringstream one(bytes);
        ok = ok && read_segment_block(one, k).params == array[k].params;
        oracle::CountingBuf buf(bytes);
        std::istream counted(&buf);
        SidecarReader reader(counted);
        ok = ok && reader.block(k).params == array[k].params;
        budget = reader.header().size_bytes() + reader.header().block_size() + 64;
        worst_touch = std::max(worst_touch, buf.bytes_read());
    }
    const std::size_t payload = 4 * parameter_count(topo);
    ok = ok && worst_touch <= budget && payload == 102156 &&
         back.header.block_size() == payload + 16;
    return {ok, fmt("%s; block access read at most %zu of %zu allowed bytes; payload %zu bytes per "
                    "segment (expected 102156)",
                    detail.c_str(), worst_touch, budget, payload)};
}

Outcome determinism() {
    TempDir dir;
    const auto original = synthetic::moving_pattern(12, 16, 16, 3);
    write_y4m_file(dir / "o.y4m", original);
    write_y4m_file(dir / "d.y4m", synthetic::blur_quantize(original, 5));
    RunConfig cfg;
    cfg.original = dir / "o.y4m";
    cfg.degraded = dir / "d.y4m";
    cfg.segmentation.rho = 5;
    cfg.training.seed = 42;
    std::uint64_t hash[2];
    for (int run = 0; run < 2; ++run) {
        cfg.sidecar = dir / ("run" + std::to_string(run) + ".srf");
        std::ostringstream out, err;
        if (cmd_train(cfg, out, err) != kExitOk) return {false, "train failed: " + err.str()};
        hash[run] = fnv1a_file(cfg.sidecar);
    }
    return {hash[0] == hash[1],
            fmt("sidecar hashes %016llx and %016llx", static_cast<unsigned long long>(hash[0]),
                static_cast<unsigned long long>(hash[1]))};
}

Outcome partition_lookup() {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> frames(1, 5000);
    std::size_t checked = 0, mismatches = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = trial == 0 ? 5000 : frames(rng);
        const std::size_t rho = std::uniform_int_distribution<std::size_t>(1, trial % 4 ? 200 : n + 10)(rng);
        const SegmentationConfig cfg{rho};
        ParameterArray array(cfg, 1);
        for (const auto& s : partition(n, cfg)) array.append_segment(s, ParameterSet{{}, 1});
        for (std::size_t t = 1; t <= n; ++t, ++checked)
            if (array.lookup(t).segment.index != oracle::linear_lookup(array, t)) ++mismatches;
    }
    return {mismatches == 0, fmt("%zu lookups over 40 segmentations, %zu mismatches", checked, mismatches)};
}

struct Criterion {
    const char* id;
    const char* name;
    double time_limit_s;  // 0: no limit
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const Criterion criteria[] = {
        {"C1", "gradient correctness", 60, gradient_correctness},
        {"C2", "convolution oracle", 30, convolution_oracle},
        {"C3", "residual safety at init", 0, residual_safety},
        {"C4", "desk-scale learning", 120, desk_scale_learning},
        {"C5", "segment specialization", 300, segment_specialization},
        {"C6", "end-to-end improvement", 1200, end_to_end},
        {"C7", "step-count arithmetic", 0, step_count},
        {"C8", "metrics exactness", 0, metrics_exactness},
        {"C9", "sidecar round trip and locality", 0, sidecar_properties},
        {"C10", "training determinism", 0, determinism},
        {"C11", "partition and lookup", 0, partition_lookup},
    };
    const std::set<std::string> wanted(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.time_limit_s == 0 || s < c.time_limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::string timing = fmt("%.1f s", s);
        if (c.time_limit_s > 0) timing += fmt(" (limit %.0f s)", c.time_limit_s);
        std::printf("%s %-4s %s: %s; %s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
