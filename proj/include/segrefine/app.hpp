#pragma once

// The `segrefine` subcommands as library functions, so tests can drive them
// in-process. Each returns a process exit status:
//   0 success, 2 invalid arguments / geometry or topology mismatch,
//   3 I/O or corrupt sidecar, 4 numeric failure, 5 external codec failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"
#include "segrefine/errors.hpp"
#include "segrefine/log.hpp"
#include "segrefine/metrics.hpp"
#include "segrefine/refiner.hpp"
#include "segrefine/segmentation.hpp"
#include "segrefine/sidecar.hpp"
#include "segrefine/trainer.hpp"
#include "segrefine/video_io.hpp"

namespace segrefine {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitIo = 3,
    kExitNumeric = 4,
    kExitCodec = 5,
};

struct FrameRange {
    std::size_t first = 1;  // inclusive, 1-based
    std::size_t last = 1;   // inclusive
};

inline FrameRange parse_frame_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--range expects A:B, got '" + s + "'");
    FrameRange r;
    try {
        r.first = std::stoul(s.substr(0, colon));
        r.last = std::stoul(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("--range expects A:B, got '" + s + "'");
    }
    if (r.first < 1 || r.last < r.first) throw std::invalid_argument("--range needs 1 <= A <= B");
    return r;
}

struct RunConfig {
    std::string original;
    std::string degraded;
    std::string refined;
    std::string sidecar;
    std::string out;
    std::string report;
    SegmentationConfig segmentation{};
    TrainingConfig training{.learning_rate = 1e-2};
    std::optional<std::size_t> hidden_width;
    std::size_t jobs = 1;
    std::optional<FrameRange> range;
    std::string codec_cmd;
    std::string workdir = "segrefine_work";
    std::string encoded_name = "encoded.bin";

    RefinerTopology topology() const { return RefinerTopology::standard(hidden_width.value_or(16)); }
};

/// Outcome of a refine run beyond the exit status.
struct RefineStats {
    std::size_t frames_in = 0;
    std::size_t frames_written = 0;
    std::size_t blocks_read = 0;
};

namespace detail {

template <typename F>
int guarded(std::ostream& err, const char* cmd, F&& body) {
    try {
        return body();
    } catch (const CorruptionError& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericFailure& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitNumeric;
    } catch (const IoError& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitIo;
    } catch (const FormatError& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "segrefine " << cmd << ": " << e.what() << '\n';
        return kExitInternal;
    }
}

inline void require(const std::string& value, const char* flag) {
    if (value.empty()) throw std::invalid_argument(std::string("missing required ") + flag);
}

inline void require_readable(const std::string& path, const char* flag) {
    require(path, flag);
    if (!std::filesystem::exists(path) && path.find('%') == std::string::npos)
        throw std::invalid_argument(std::string(flag) + " path does not exist: " + path);
}

inline nlohmann::json report_json(const TrainingReport& r, const SegmentDescriptor& seg,
                                  std::size_t per_epoch, std::size_t epochs) {
    return {{"segment", r.segment_index},
            {"start_frame", seg.start_frame},
            {"end_frame", seg.end_frame},
            {"steps", r.steps},
            {"first_epoch_loss", r.mean_epoch_loss(0, per_epoch)},
            {"last_epoch_loss", r.mean_epoch_loss(epochs - 1, per_epoch)},
            {"final_loss", r.final_loss},
            {"pre_psnr_db", r.pre_psnr_db},
            {"post_psnr_db", r.post_psnr_db},
            {"wall_time_s", r.wall_time_s}};
}

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') q += "'\\''";
        else q += c;
    }
    return q + "'";
}

}  // namespace detail

/// Trains the parameter array and writes the sidecar plus a JSON training report.
inline int cmd_train(const RunConfig& cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr, Logger* logger = nullptr) {
    return detail::guarded(err, "train", [&] {
        detail::require_readable(cfg.original, "--original");
        detail::require_readable(cfg.degraded, "--degraded");
        detail::require(cfg.sidecar, "--sidecar");
        cfg.segmentation.validate();
        cfg.training.validate();
        const RefinerTopology topology = cfg.topology();

        Logger local(LogLevel::Quiet);
        Logger& log = logger ? *logger : local;
        const FrameSequence original = read_video(cfg.original);
        const FrameSequence degraded = read_video(cfg.degraded);
        require_same_geometry(original, degraded, "train");
        log.emit(LogLevel::Info, "train_start",
                 {{"frames", original.size()},
                  {"width", original.width()},
                  {"height", original.height()},
                  {"rho", cfg.segmentation.rho},
                  {"epochs", cfg.training.epochs},
                  {"lr", cfg.training.learning_rate},
                  {"mode", to_string(cfg.training.mode)},
                  {"parameters", parameter_count(topology)}});

        const ProgressFn progress = [&log](const StepRecord& s) {
            if (log.enabled(LogLevel::Debug) || (log.enabled(LogLevel::Info) && s.step % 50 == 0))
                log.emit(s.step % 50 == 0 ? LogLevel::Info : LogLevel::Debug, "step",
                         {{"segment", s.segment}, {"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}});
        };
        auto result = train_video(original, degraded, cfg.segmentation, cfg.training, topology,
                                  cfg.jobs, progress);

        std::ofstream sc(cfg.sidecar, std::ios::binary | std::ios::trunc);
        if (!sc) throw IoError("cannot create sidecar " + cfg.sidecar);
        const std::size_t bytes = write_sidecar(result.array, topology, cfg.training.mode, sc);
        sc.close();
        if (!sc) throw IoError("failed writing sidecar " + cfg.sidecar);

        nlohmann::json rep;
        rep["frames"] = original.size();
        rep["rho"] = cfg.segmentation.rho;
        rep["epochs"] = cfg.training.epochs;
        rep["learning_rate"] = cfg.training.learning_rate;
        rep["mode"] = to_string(cfg.training.mode);
        rep["seed"] = cfg.training.seed;
        rep["parameters_per_segment"] = parameter_count(topology);
        rep["sidecar_bytes"] = bytes;
        rep["sidecar_bpp"] = rate_overhead(bytes, original.size(), original.width(), original.height());
        rep["segments"] = nlohmann::json::array();
        for (std::size_t k = 0; k < result.reports.size(); ++k) {
            const auto& seg = result.array[k].segment;
            rep["segments"].push_back(
                detail::report_json(result.reports[k], seg, seg.length(), cfg.training.epochs));
            log.emit(LogLevel::Info, "segment_done",
                     {{"segment", k},
                      {"final_loss", result.reports[k].final_loss},
                      {"pre_psnr_db", result.reports[k].pre_psnr_db},
                      {"post_psnr_db", result.reports[k].post_psnr_db}});
        }
        const std::string report_path = cfg.report.empty() ? cfg.sidecar + ".train.json" : cfg.report;
        std::ofstream rf(report_path);
        if (!rf) throw IoError("cannot create report " + report_path);
        rf << rep.dump(2) << '\n';
        out << "wrote " << cfg.sidecar << " (" << result.array.size() << " segments, " << bytes
            << " bytes)\n";
        return kExitOk;
    });
}

/// Applies the per-segment refiners to `source`, loading each segment's
/// parameters only when the first frame of that segment is reached.
inline RefineStats refine_stream(FrameSource& source, SidecarReader& sidecar, Y4mWriter& sink,
                                 std::optional<FrameRange> range = std::nullopt,
                                 std::optional<std::uint64_t> expected_topology = std::nullopt) {
    const SidecarHeader& h = sidecar.header();
    if (expected_topology && *expected_topology != h.topology.id())
        throw std::invalid_argument("sidecar topology does not match the requested network");
    if (h.topology.in_channels() != 3 || h.topology.out_channels() != 3)
        throw std::invalid_argument("sidecar network is not 3-channel in and out");

    // Segment geometry comes from the offset-table order plus rho: segment k
    // covers frames [k*rho+1, min((k+1)*rho, last)]; the block header is
    // authoritative and checked on load.
    const std::size_t rho = h.rho;
    const std::size_t segments = h.segment_count();
    const std::size_t first = range ? range->first : 1;
    const std::size_t last_wanted = range ? range->last : 0;
    if (range && range->last > segments * rho)
        throw std::invalid_argument("--range ends past the frames covered by the sidecar");

    RefineStats stats;
    std::optional<SegmentBlock> current;
    std::size_t t = 0;
    while (auto frame = source.next()) {
        ++t;
        ++stats.frames_in;
        if (t < first) continue;
        if (range && t > last_wanted) break;
        if (!current || !current->segment.contains(t)) {
            const std::size_t k = (t - 1) / rho;
            if (k >= segments)
                throw std::invalid_argument("video has more frames than the sidecar covers (frame " +
                                            std::to_string(t) + ")");
            current = sidecar.block(k);
            ++stats.blocks_read;
            if (!current->segment.contains(t))
                throw FormatError("sidecar block " + std::to_string(k) + " does not cover frame " +
                                  std::to_string(t));
        }
        sink.write(forward_refine(current->params, h.topology, *frame, h.mode));
        ++stats.frames_written;
    }
    const std::size_t needed = range ? last_wanted : (segments - 1) * rho + 1;
    if (t < needed)
        throw std::invalid_argument("video has " + std::to_string(t) + " frames, sidecar expects " +
                                    (range ? std::to_string(needed)
                                           : "more than " + std::to_string((segments - 1) * rho)));
    if (!range && current && current->segment.end_frame != t)
        throw std::invalid_argument("video has " + std::to_string(t) +
                                    " frames but the sidecar's last segment ends at frame " +
                                    std::to_string(current->segment.end_frame));
    return stats;
}

inline int cmd_refine(const RunConfig& cfg, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr, RefineStats* stats_out = nullptr) {
    int rc = detail::guarded(err, "refine", [&] {
        detail::require_readable(cfg.degraded, "--degraded");
        detail::require_readable(cfg.sidecar, "--sidecar");
        detail::require(cfg.out, "--out");
        std::ifstream sc(cfg.sidecar, std::ios::binary);
        if (!sc) throw IoError("cannot open sidecar " + cfg.sidecar);
        SidecarReader sidecar(sc);
        VideoFile video(cfg.degraded);
        std::ofstream os(cfg.out, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot create " + cfg.out);
        Y4mWriter writer(os, video.width(), video.height(), video.frame_rate());
        std::optional<std::uint64_t> expect;
        if (cfg.hidden_width) expect = cfg.topology().id();
        const RefineStats stats = refine_stream(video, sidecar, writer, cfg.range, expect);
        os.close();
        if (!os) throw IoError("failed writing " + cfg.out);
        if (stats_out) *stats_out = stats;
        out << "wrote " << cfg.out << " (" << stats.frames_written << " frames, "
            << stats.blocks_read << " parameter blocks loaded)\n";
        return kExitOk;
    });
    if (rc != kExitOk && !cfg.out.empty()) {
        std::error_code ec;
        std::filesystem::remove(cfg.out, ec);
    }
    return rc;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr, QualityReport* report_out = nullptr) {
    return detail::guarded(err, "eval", [&] {
        detail::require_readable(cfg.original, "--original");
        detail::require_readable(cfg.degraded, "--degraded");
        detail::require_readable(cfg.refined, "--refined");
        std::size_t sidecar_bytes = 0;
        std::size_t rho = cfg.segmentation.rho;
        if (!cfg.sidecar.empty()) {
            std::ifstream sc(cfg.sidecar, std::ios::binary);
            if (!sc) throw IoError("cannot open sidecar " + cfg.sidecar);
            rho = SidecarReader(sc).header().rho;
            sidecar_bytes = std::filesystem::file_size(cfg.sidecar);
        }
        VideoFile o(cfg.original), d(cfg.degraded), r(cfg.refined);
        if (o.width() != d.width() || o.height() != d.height() || o.width() != r.width() ||
            o.height() != r.height())
            throw std::invalid_argument("original, degraded and refined dimensions differ");
        QualityAccumulator acc;
        for (;;) {
            auto fo = o.next();
            auto fd = d.next();
            auto fr = r.next();
            if (!fo && !fd && !fr) break;
            if (!fo || !fd || !fr)
                throw std::invalid_argument("original, degraded and refined frame counts differ");
            acc.add(*fo, *fd, *fr);
        }
        QualityReport rep = acc.finish(rho, sidecar_bytes);
        write_quality_report(out, rep);
        if (!cfg.report.empty()) {
            std::ofstream rf(cfg.report);
            if (!rf) throw IoError("cannot create report " + cfg.report);
            write_quality_report(rf, rep);
        }
        if (report_out) *report_out = std::move(rep);
        return kExitOk;
    });
}

/// Prints a summary of a sidecar's header.
inline int cmd_info(const RunConfig& cfg, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    return detail::guarded(err, "info", [&] {
        detail::require_readable(cfg.sidecar, "--sidecar");
        std::ifstream sc(cfg.sidecar, std::ios::binary);
        if (!sc) throw IoError("cannot open sidecar " + cfg.sidecar);
        const SidecarHeader h = SidecarReader(sc).header();
        out << "file\t" << cfg.sidecar << '\n'
            << "bytes\t" << std::filesystem::file_size(cfg.sidecar) << '\n'
            << "version\t" << h.version << '\n'
            << "rho\t" << h.rho << '\n'
            << "mode\t" << to_string(h.mode) << '\n'
            << "layers\t" << h.topology.layers.size() << '\n';
        for (std::size_t l = 0; l < h.topology.layers.size(); ++l) {
            const auto& s = h.topology.layers[l];
            out << "layer\t" << l << '\t' << s.in_channels << "->" << s.out_channels << '\t'
                << s.kernel << 'x' << s.kernel << '\n';
        }
        char id[17];
        std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(h.topology.id()));
        out << "topology_id\t" << id << '\n'
            << "parameters_per_segment\t" << parameter_count(h.topology) << '\n'
            << "header_bytes\t" << h.size_bytes() << '\n'
            << "block_bytes\t" << h.block_size() << '\n'
            << "segments\t" << h.segment_count() << '\n'
            << "frames_max\t" << h.segment_count() * h.rho << '\n';
        return kExitOk;
    });
}

struct CodecInvocation {
    std::string command;
    std::size_t encoded_size_bytes = 0;
};

/// Substitutes {input}, {output} and {encoded} (shell-quoted) into the template.
inline std::string expand_codec_template(std::string tmpl, const std::string& input,
                                         const std::string& output, const std::string& encoded) {
    const std::pair<const char*, std::string> subs[] = {{"{input}", detail::shell_quote(input)},
                                                        {"{output}", detail::shell_quote(output)},
                                                        {"{encoded}", detail::shell_quote(encoded)}};
    for (const auto& [key, val] : subs)
        for (std::size_t pos; (pos = tmpl.find(key)) != std::string::npos;)
            tmpl.replace(pos, std::string_view(key).size(), val);
    return tmpl;
}

/// Encode/decode through an external command, then train, refine and evaluate.
inline int cmd_pipeline(const RunConfig& cfg, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr, Logger* logger = nullptr,
                        QualityReport* report_out = nullptr) {
    namespace fs = std::filesystem;
    CodecInvocation codec;
    int rc = detail::guarded(err, "pipeline", [&] {
        detail::require_readable(cfg.original, "--original");
        detail::require(cfg.codec_cmd, "--codec-cmd");
        fs::create_directories(cfg.workdir);
        const fs::path work = fs::absolute(cfg.workdir);

        std::string input = cfg.original;
        if (fs::is_directory(input) || input.find('%') != std::string::npos ||
            fs::path(input).extension() != ".y4m") {
            input = (work / "original.y4m").string();
            write_y4m_file(input, read_video(cfg.original));
        }
        const std::string degraded = (work / "degraded.y4m").string();
        const std::string encoded = (work / cfg.encoded_name).string();
        const std::string log = (work / "codec.log").string();
        std::error_code ec;
        fs::remove(degraded, ec);
        fs::remove(encoded, ec);
        codec.command = expand_codec_template(cfg.codec_cmd, input, degraded, encoded);
        const std::string shell = "( " + codec.command + " ) > " + detail::shell_quote(log) + " 2>&1";
        const int status = std::system(shell.c_str());
        if (status != 0) {
            std::ifstream lf(log);
            std::stringstream text;
            text << lf.rdbuf();
            err << "segrefine pipeline: codec command failed (status " << status << "): "
                << codec.command << '\n'
                << text.str();
            return static_cast<int>(kExitCodec);
        }
        if (fs::exists(encoded)) codec.encoded_size_bytes = fs::file_size(encoded);

        RunConfig step = cfg;
        step.original = input;
        step.degraded = degraded;
        step.sidecar = (work / "params.srf").string();
        step.report = (work / "train.json").string();
        step.out = (work / "refined.y4m").string();
        step.refined = step.out;
        std::ostringstream quiet;
        if (int r = cmd_train(step, quiet, err, logger); r != kExitOk) return r;
        if (int r = cmd_refine(step, quiet, err); r != kExitOk) return r;
        step.report = cfg.report.empty() ? (work / "report.txt").string() : cfg.report;
        QualityReport rep;
        std::ostringstream report_text;
        if (int r = cmd_eval(step, report_text, err, &rep); r != kExitOk) return r;
        rep.encoded_bytes = codec.encoded_size_bytes;
        std::ofstream rf(step.report);
        if (!rf) throw IoError("cannot create report " + step.report);
        write_quality_report(rf, rep);
        write_quality_report(out, rep);
        if (rep.encoded_bytes == 0)
            out << "encoded_bytes\tunknown (template has no {encoded} output)\n";
        if (report_out) *report_out = std::move(rep);
        return static_cast<int>(kExitOk);
    });
    return rc;
}

}  // namespace segrefine
