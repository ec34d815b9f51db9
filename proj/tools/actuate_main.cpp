// Command-line front door: six pipeline stages behind one binary, with the
// error taxonomy mapped onto machine-parseable exit codes.
#include <exception>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "actuate/errors.hpp"
#include "actuate/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    int threads = 0;           // 0: keep the config's value
    std::int64_t seed = -1;    // -1: keep the config's value
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "pipeline config JSON")->required();
    cmd->add_option("--out", flags.out, "output directory (beats config and ACTUATE_RESULTS_DIR)");
    cmd->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", flags.seed, "override the config seed")
        ->check(CLI::NonNegativeNumber);
}

actuate::PipelineConfig load_with_overrides(const CommonFlags& flags) {
    actuate::PipelineConfig cfg = actuate::load_pipeline_config(flags.config);
    if (flags.threads > 0) cfg.threads = flags.threads;
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activation observation and steering pipeline"};
    app.require_subcommand(1);

    CommonFlags gen_flags, fit_flags, probe_flags, steer_flags, study_flags, report_flags;
    std::string study_name = "all";

    add_common(app.add_subcommand("gen-data", "expert demonstrations with recorded activations"),
               gen_flags);
    add_common(app.add_subcommand("fit-policy", "behavior-clone the action head"), fit_flags);
    add_common(app.add_subcommand("train-probes", "linear observers per feature and layer"),
               probe_flags);
    add_common(app.add_subcommand("steer", "closed-loop rollouts under a steering plan"),
               steer_flags);
    CLI::App* study = app.add_subcommand("study", "closed-loop studies and sweeps");
    add_common(study, study_flags);
    study->add_option("name", study_name,
                      "gripper | height | speed | classifier | sweep | all (default)");
    add_common(app.add_subcommand("report", "tables into plots and a summary"), report_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints its own message; fold usage errors into the config
        // exit code, keep --help at zero.
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto run = [&](const CommonFlags& flags,
                         const std::function<void(const actuate::PipelineConfig&,
                                                  const std::string&)>& body) -> int {
        try {
            const actuate::PipelineConfig cfg = load_with_overrides(flags);
            body(cfg, actuate::resolve_out_dir(flags.out, cfg));
            return 0;
        } catch (const actuate::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 2;
        } catch (const actuate::MissingArtifactError& e) {
            std::cerr << "missing artifact: " << e.what() << '\n';
            return 3;
        } catch (const actuate::NumericalError& e) {
            std::cerr << "numerical failure: " << e.what() << '\n';
            return 4;
        } catch (const std::exception& e) {
            std::cerr << "internal error: " << e.what() << '\n';
            return 1;
        }
    };

    if (app.got_subcommand("gen-data")) return run(gen_flags, actuate::cmd_gen_data);
    if (app.got_subcommand("fit-policy")) return run(fit_flags, actuate::cmd_fit_policy);
    if (app.got_subcommand("train-probes")) return run(probe_flags, actuate::cmd_train_probes);
    if (app.got_subcommand("steer")) return run(steer_flags, actuate::cmd_steer);
    if (app.got_subcommand("study")) {
        return run(study_flags, [&](const actuate::PipelineConfig& cfg, const std::string& out) {
            actuate::cmd_study(cfg, out, study_name);
        });
    }
    return run(report_flags, actuate::cmd_report);
}
