#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actuate/polnet.hpp"
#include "actuate/simworld.hpp"

namespace actuate {

// One JSON config file drives every pipeline stage, so a single hash pins an
// entire reproduction. Every section is optional except the global seed.

struct DatasetConfig {
    int seeds_per_pair = 3;        // episodes per (task, instruction)
    double exec_noise_std = 0.005; // demo jitter widens the state distribution
    std::uint64_t seed_base = 1000;
};

struct FitConfig {
    double lambda = 0.01;
    int eval_rollouts_per_task = 3;
    std::uint64_t seed_base = 3000;
};

struct ProbesConfig {
    double lambda = 0.01;
    int robustness_trials = 200;
};

struct SteerCmdConfig {
    std::string plan_path;  // file with a JSON plan array
    std::string plan_json;  // inline plan, wins over plan_path; "[]" means unsteered
    int episodes_per_task = 1;
    std::uint64_t seed_base = 4000;
};

struct StudyCmdConfig {
    int episodes_per_task = 10;
    int control_layer = 0;  // 0 -> the best probe layer for each study's feature
    double fixed_alpha = 2.0;
    int classifier_episodes = 20;
    std::string classifier_feature = "state_z";
    std::string sweep_feature = "action_dz";
    std::vector<double> sweep_alphas{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::size_t sweep_states = 200;
};

struct PipelineConfig {
    std::uint64_t seed = 0;  // mandatory: trunk init and split shuffles key off it
    std::string out_dir;     // optional; see resolve_out_dir
    int threads = 1;
    int d = 64;
    int T = 8;
    int h = 4;
    EnvParams env;
    int horizon_override = 0;  // 0 keeps each task's own horizon
    DatasetConfig dataset;
    FitConfig fit;
    ProbesConfig probes;
    SteerCmdConfig steer;
    StudyCmdConfig study;
    std::string config_text;  // raw config bytes; hashed into the manifest
};

// Parses and validates the config file. Unknown keys are rejected so typos
// fail loudly instead of silently running defaults.
PipelineConfig load_pipeline_config(const std::string& path);

// Output root resolution: --out beats config out_dir beats ACTUATE_RESULTS_DIR
// beats ./results.
std::string resolve_out_dir(const std::string& cli_out, const PipelineConfig& cfg);

// Pipeline stages. Each writes its artifacts under out_dir, refreshes
// manifest.json, and prints a one-line summary. Errors surface as the
// ConfigError / MissingArtifactError / NumericalError taxonomy.
void cmd_gen_data(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_fit_policy(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_train_probes(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_steer(const PipelineConfig& cfg, const std::string& out_dir);
// study_name: gripper | height | speed | classifier | sweep | all
void cmd_study(const PipelineConfig& cfg, const std::string& out_dir,
               const std::string& study_name);
void cmd_report(const PipelineConfig& cfg, const std::string& out_dir);

// 64-bit FNV-1a, hex-encoded; the manifest's config fingerprint.
std::string fnv1a_hex(const std::string& bytes);

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace actuate
