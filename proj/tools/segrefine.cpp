// segrefine: train, apply and evaluate per-segment refiner networks.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "segrefine/app.hpp"

namespace {

void add_common(CLI::App& sub, segrefine::RunConfig& cfg) {
    sub.add_option("--original", cfg.original, "Original video (.y4m or numbered PPM sequence)");
    sub.add_option("--degraded", cfg.degraded, "Decoded (degraded) video");
    sub.add_option("--sidecar", cfg.sidecar, "Parameter sidecar file (.srf)");
    sub.add_option("--out", cfg.out, "Output video (.y4m)");
    sub.add_option("--report", cfg.report, "Report output path");
}

void add_training(CLI::App& sub, segrefine::RunConfig& cfg, std::string& mode) {
    sub.add_option("--rho", cfg.segmentation.rho, "Frames per segment")->check(CLI::PositiveNumber);
    sub.add_option("--epochs", cfg.training.epochs, "Passes over each segment")
        ->check(CLI::PositiveNumber);
    sub.add_option("--lr", cfg.training.learning_rate, "SGD learning rate")->check(CLI::PositiveNumber);
    sub.add_option("--mode", mode, "direct or residual")
        ->check(CLI::IsMember({"direct", "residual"}));
    sub.add_option("--seed", cfg.training.seed, "Master random seed");
    sub.add_option("--jobs", cfg.jobs, "Segments trained in parallel")->check(CLI::PositiveNumber);
    sub.add_flag("!--no-shuffle", cfg.training.shuffle, "Visit frames in order every epoch");
}

// Flat key=value files are read at the top level; keys without a section are
// handed to whichever subcommand is running.
class SubcommandConfig : public CLI::ConfigINI {
public:
    explicit SubcommandConfig(const std::string& target) : target_(target) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigINI::from_config(input);
        for (auto& item : items)
            if (item.parents.empty() && !target_.empty()) item.parents = {target_};
        return items;
    }

private:
    const std::string& target_;
};

}  // namespace

int main(int argc, char** argv) {
    using namespace segrefine;
    RunConfig cfg;
    std::string mode = "residual";
    std::size_t hidden_width = 16;
    std::string range;

    CLI::App app{"Per-segment CNN refinement of decoded video"};
    std::string active;
    app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
    app.config_formatter(std::make_shared<SubcommandConfig>(active));
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    auto* train = app.add_subcommand("train", "Train one refiner per segment and write the sidecar");
    add_common(*train, cfg);
    add_training(*train, cfg, mode);
    train->add_option("--hidden-width", hidden_width, "Hidden channels per layer");

    auto* refine = app.add_subcommand("refine", "Apply a sidecar to a degraded video");
    add_common(*refine, cfg);
    auto* refine_width = refine->add_option("--hidden-width", hidden_width,
                                            "Expected hidden width (checked against the sidecar)");
    refine->add_option("--range", range, "Refine only frames A:B (1-based, inclusive)");

    auto* eval = app.add_subcommand("eval", "Quality report of degraded and refined against original");
    add_common(*eval, cfg);
    eval->add_option("--refined", cfg.refined, "Refined video");
    eval->add_option("--rho", cfg.segmentation.rho, "Segment length for summaries when no sidecar is given");

    auto* pipeline = app.add_subcommand("pipeline", "Encode/decode with an external codec, then train, refine and eval");
    add_common(*pipeline, cfg);
    add_training(*pipeline, cfg, mode);
    pipeline->add_option("--hidden-width", hidden_width, "Hidden channels per layer");
    pipeline->add_option("--codec-cmd", cfg.codec_cmd,
                         "Shell template with {input} {output} and optional {encoded} placeholders");
    pipeline->add_option("--workdir", cfg.workdir, "Directory for intermediate files");
    pipeline->add_option("--encoded-name", cfg.encoded_name, "File name {encoded} expands to inside the workdir");

    auto* info = app.add_subcommand("info", "Print a sidecar header summary");
    info->add_option("--sidecar", cfg.sidecar, "Sidecar file")->required();

    for (auto* sub : app.get_subcommands({}))
        sub->preparse_callback([&active, sub](std::size_t) { active = sub->get_name(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        cfg.training.mode = parse_refine_mode(mode);
        if (hidden_width == 0) throw std::invalid_argument("--hidden-width must be positive");
        if (!*refine || refine_width->count() > 0) cfg.hidden_width = hidden_width;
        if (!range.empty()) cfg.range = parse_frame_range(range);
    } catch (const std::invalid_argument& e) {
        std::cerr << "segrefine: " << e.what() << '\n';
        return kExitUsage;
    }

    Logger logger;
    if (*train) return cmd_train(cfg, std::cout, std::cerr, &logger);
    if (*refine) return cmd_refine(cfg);
    if (*eval) return cmd_eval(cfg);
    if (*pipeline) return cmd_pipeline(cfg, std::cout, std::cerr, &logger);
    return cmd_info(cfg);
}
