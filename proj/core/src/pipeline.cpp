#include "actuate/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "actuate/errors.hpp"
#include "actuate/expharness.hpp"
#include "actuate/observer.hpp"
#include "actuate/runtime.hpp"
#include "actuate/stats.hpp"
#include "actuate/steer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace actuate {

namespace {

constexpr Instruction kAllInstructions[] = {
    Instruction::Default, Instruction::Slow, Instruction::Fast,  Instruction::Low,
    Instruction::High,    Instruction::Open, Instruction::Closed,
};

// --- config parsing ---------------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end()) {
            throw ConfigError("config: unknown key '" + key + "' in " + where);
        }
    }
}

double get_num(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) {
        throw ConfigError("config: '" + std::string(key) + "' in " + where + " must be a number");
    }
    return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) {
        throw ConfigError("config: '" + std::string(key) + "' in " + where +
                          " must be an integer");
    }
    return j.at(key).get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback,
                      const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer()) {
        throw ConfigError("config: '" + std::string(key) + "' in " + where +
                          " must be a non-negative integer");
    }
    return j.at(key).get<std::uint64_t>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback,
                    const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) {
        throw ConfigError("config: '" + std::string(key) + "' in " + where + " must be a string");
    }
    return j.at(key).get<std::string>();
}

void parse_env(const json& j, EnvParams& env, int& horizon_override) {
    check_keys(j,
               {"dt", "max_step", "max_rot_step", "grasp_radius", "grasp_close_threshold",
                "grasp_open_threshold", "workspace_half", "start_xy_half", "start_z_lo",
                "start_z_hi", "expert_approach_gain", "expert_goal_gain", "expert_lift_gain", "expert_close_height",
                "expert_release_height", "expert_close_rate", "transport_altitude",
                "altitude_offset", "release_radius_frac", "horizon"},
               "env");
    env.dt = get_num(j, "dt", env.dt, "env");
    env.max_step = get_num(j, "max_step", env.max_step, "env");
    env.max_rot_step = get_num(j, "max_rot_step", env.max_rot_step, "env");
    env.grasp_radius = get_num(j, "grasp_radius", env.grasp_radius, "env");
    env.grasp_close_threshold = get_num(j, "grasp_close_threshold", env.grasp_close_threshold, "env");
    env.grasp_open_threshold = get_num(j, "grasp_open_threshold", env.grasp_open_threshold, "env");
    env.workspace_half = get_num(j, "workspace_half", env.workspace_half, "env");
    env.start_xy_half = get_num(j, "start_xy_half", env.start_xy_half, "env");
    env.start_z_lo = get_num(j, "start_z_lo", env.start_z_lo, "env");
    env.start_z_hi = get_num(j, "start_z_hi", env.start_z_hi, "env");
    env.expert_approach_gain = get_num(j, "expert_approach_gain", env.expert_approach_gain, "env");
    env.expert_goal_gain = get_num(j, "expert_goal_gain", env.expert_goal_gain, "env");
    env.expert_lift_gain = get_num(j, "expert_lift_gain", env.expert_lift_gain, "env");
    env.expert_close_height = get_num(j, "expert_close_height", env.expert_close_height, "env");
    env.expert_release_height = get_num(j, "expert_release_height", env.expert_release_height, "env");
    env.expert_close_rate = get_num(j, "expert_close_rate", env.expert_close_rate, "env");
    env.transport_altitude = get_num(j, "transport_altitude", env.transport_altitude, "env");
    env.altitude_offset = get_num(j, "altitude_offset", env.altitude_offset, "env");
    env.release_radius_frac = get_num(j, "release_radius_frac", env.release_radius_frac, "env");
    horizon_override = get_int(j, "horizon", horizon_override, "env");
    if (env.dt <= 0 || env.max_step <= 0) throw ConfigError("config: env dt/max_step must be positive");
    if (horizon_override != 0 && horizon_override < 20) {
        throw ConfigError("config: env horizon must be 0 (keep defaults) or >= 20");
    }
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();

    PipelineConfig cfg;
    cfg.config_text = buf.str();

    json j;
    try {
        j = json::parse(cfg.config_text);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config '" + path + "': expected a JSON object");
    check_keys(j, {"seed", "out_dir", "threads", "model", "env", "dataset", "fit", "probes",
                   "steer", "study"},
               "the top level");

    if (!j.contains("seed")) throw ConfigError("config '" + path + "': 'seed' is mandatory");
    cfg.seed = get_u64(j, "seed", 0, "the top level");
    cfg.out_dir = get_str(j, "out_dir", "", "the top level");
    cfg.threads = get_int(j, "threads", 1, "the top level");
    if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"d", "T", "h"}, "model");
        cfg.d = get_int(m, "d", cfg.d, "model");
        cfg.T = get_int(m, "T", cfg.T, "model");
        cfg.h = get_int(m, "h", cfg.h, "model");
    }
    if (cfg.d < 1 || cfg.T < 1 || cfg.h < 1 || cfg.d % cfg.h != 0) {
        throw ConfigError("config: model dims must be positive with d divisible by h");
    }

    if (j.contains("env")) parse_env(j.at("env"), cfg.env, cfg.horizon_override);

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"seeds_per_pair", "exec_noise_std", "seed_base"}, "dataset");
        cfg.dataset.seeds_per_pair = get_int(d, "seeds_per_pair", cfg.dataset.seeds_per_pair, "dataset");
        cfg.dataset.exec_noise_std = get_num(d, "exec_noise_std", cfg.dataset.exec_noise_std, "dataset");
        cfg.dataset.seed_base = get_u64(d, "seed_base", cfg.dataset.seed_base, "dataset");
        if (cfg.dataset.seeds_per_pair < 1) throw ConfigError("config: dataset seeds_per_pair must be >= 1");
        if (cfg.dataset.exec_noise_std < 0) throw ConfigError("config: dataset exec_noise_std must be >= 0");
    }

    if (j.contains("fit")) {
        const json& ft = j.at("fit");
        check_keys(ft, {"lambda", "eval_rollouts_per_task", "seed_base"}, "fit");
        cfg.fit.lambda = get_num(ft, "lambda", cfg.fit.lambda, "fit");
        cfg.fit.eval_rollouts_per_task =
            get_int(ft, "eval_rollouts_per_task", cfg.fit.eval_rollouts_per_task, "fit");
        cfg.fit.seed_base = get_u64(ft, "seed_base", cfg.fit.seed_base, "fit");
        if (cfg.fit.lambda <= 0) throw ConfigError("config: fit lambda must be positive");
        if (cfg.fit.eval_rollouts_per_task < 1) {
            throw ConfigError("config: fit eval_rollouts_per_task must be >= 1");
        }
    }

    if (j.contains("probes")) {
        const json& p = j.at("probes");
        check_keys(p, {"lambda", "robustness_trials"}, "probes");
        cfg.probes.lambda = get_num(p, "lambda", cfg.probes.lambda, "probes");
        cfg.probes.robustness_trials =
            get_int(p, "robustness_trials", cfg.probes.robustness_trials, "probes");
        if (cfg.probes.lambda <= 0) throw ConfigError("config: probes lambda must be positive");
        if (cfg.probes.robustness_trials < 1) {
            throw ConfigError("config: probes robustness_trials must be >= 1");
        }
    }

    if (j.contains("steer")) {
        const json& s = j.at("steer");
        check_keys(s, {"plan", "plan_path", "episodes_per_task", "seed_base"}, "steer");
        if (s.contains("plan")) {
            if (!s.at("plan").is_array()) throw ConfigError("config: steer plan must be an array");
            cfg.steer.plan_json = s.at("plan").dump();
        }
        cfg.steer.plan_path = get_str(s, "plan_path", "", "steer");
        if (!cfg.steer.plan_path.empty() && !fs::exists(cfg.steer.plan_path)) {
            throw ConfigError("config: steer plan_path does not exist: " + cfg.steer.plan_path);
        }
        cfg.steer.episodes_per_task = get_int(s, "episodes_per_task", cfg.steer.episodes_per_task, "steer");
        cfg.steer.seed_base = get_u64(s, "seed_base", cfg.steer.seed_base, "steer");
        if (cfg.steer.episodes_per_task < 1) {
            throw ConfigError("config: steer episodes_per_task must be >= 1");
        }
    }

    if (j.contains("study")) {
        const json& st = j.at("study");
        check_keys(st,
                   {"episodes_per_task", "control_layer", "fixed_alpha", "classifier_episodes",
                    "classifier_feature", "sweep_feature", "sweep_alphas", "sweep_states"},
                   "study");
        cfg.study.episodes_per_task = get_int(st, "episodes_per_task", cfg.study.episodes_per_task, "study");
        cfg.study.control_layer = get_int(st, "control_layer", cfg.study.control_layer, "study");
        cfg.study.fixed_alpha = get_num(st, "fixed_alpha", cfg.study.fixed_alpha, "study");
        cfg.study.classifier_episodes =
            get_int(st, "classifier_episodes", cfg.study.classifier_episodes, "study");
        cfg.study.classifier_feature =
            get_str(st, "classifier_feature", cfg.study.classifier_feature, "study");
        cfg.study.sweep_feature = get_str(st, "sweep_feature", cfg.study.sweep_feature, "study");
        if (st.contains("sweep_alphas")) {
            if (!st.at("sweep_alphas").is_array() || st.at("sweep_alphas").empty()) {
                throw ConfigError("config: study sweep_alphas must be a non-empty array");
            }
            cfg.study.sweep_alphas.clear();
            for (const json& a : st.at("sweep_alphas")) {
                if (!a.is_number() || !std::isfinite(a.get<double>())) {
                    throw ConfigError("config: study sweep_alphas must be finite numbers");
                }
                cfg.study.sweep_alphas.push_back(a.get<double>());
            }
        }
        const int states = get_int(st, "sweep_states", static_cast<int>(cfg.study.sweep_states), "study");
        if (states < 1) throw ConfigError("config: study sweep_states must be >= 1");
        cfg.study.sweep_states = static_cast<std::size_t>(states);
        if (cfg.study.episodes_per_task < 1) {
            throw ConfigError("config: study episodes_per_task must be >= 1");
        }
        if (cfg.study.control_layer < 0 || cfg.study.control_layer > cfg.T) {
            throw ConfigError("config: study control_layer must be in [0, T]");
        }
        if (!std::isfinite(cfg.study.fixed_alpha)) {
            throw ConfigError("config: study fixed_alpha must be finite");
        }
        if (cfg.study.classifier_episodes < 1) {
            throw ConfigError("config: study classifier_episodes must be >= 1");
        }
    }

    return cfg;
}

std::string resolve_out_dir(const std::string& cli_out, const PipelineConfig& cfg) {
    if (!cli_out.empty()) return cli_out;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("ACTUATE_RESULTS_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "results";
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

// --- artifact plumbing ------------------------------------------------------

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
    if (!fs::is_directory(dir)) {
        throw ConfigError("output path is not a directory: " + dir.string());
    }
}

void write_manifest(const PipelineConfig& cfg, const std::string& out_dir) {
    json m;
    m["config_hash"] = fnv1a_hex(cfg.config_text);
    m["seed"] = cfg.seed;
    m["version"] = kToolkitVersion;
    const fs::path path = fs::path(out_dir) / "manifest.json";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write manifest: " + path.string());
    f << m.dump(2) << '\n';
    if (!f.flush()) throw ConfigError("failed writing manifest: " + path.string());
}

std::string artifact(const std::string& out_dir, const std::string& rel) {
    return (fs::path(out_dir) / rel).string();
}

std::string require_artifact(const std::string& out_dir, const std::string& rel,
                             const std::string& producer) {
    const std::string path = artifact(out_dir, rel);
    if (!fs::exists(path)) {
        throw MissingArtifactError("missing " + rel + " under '" + out_dir + "'; run " + producer +
                                   " first");
    }
    return path;
}

std::vector<TaskSpec> load_task_artifact(const PipelineConfig& cfg, const std::string& out_dir) {
    auto tasks = load_tasks(require_artifact(out_dir, "tasks.json", "gen-data"));
    for (const TaskSpec& t : tasks) validate_task(t, cfg.env);
    return tasks;
}

int uniform_horizon(const std::vector<TaskSpec>& tasks) {
    const int horizon = tasks.front().horizon;
    for (const TaskSpec& t : tasks) {
        if (t.horizon != horizon) {
            throw ConfigError("tasks must share a horizon for plan window validation");
        }
    }
    return horizon;
}

bool in_interval(double value, double lo, double hi) {
    return value >= lo - 1e-9 && value <= hi + 1e-9;
}

}  // namespace

// --- commands ----------------------------------------------------------------

void cmd_gen_data(const PipelineConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    ensure_dir(fs::path(out_dir) / "raw");

    std::vector<TaskSpec> tasks = canonical_tasks();
    if (cfg.horizon_override != 0) {
        for (TaskSpec& t : tasks) t.horizon = cfg.horizon_override;
    }
    for (const TaskSpec& t : tasks) validate_task(t, cfg.env);
    save_tasks(artifact(out_dir, "tasks.json"), tasks);

    const TransformerWeights weights = init_random(cfg.seed, cfg.d, cfg.T, cfg.h);
    const std::size_t reps = static_cast<std::size_t>(cfg.dataset.seeds_per_pair);
    const std::size_t n = tasks.size() * std::size(kAllInstructions) * reps;
    std::vector<Episode> dataset(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const std::size_t ti = i / (std::size(kAllInstructions) * reps);
        const std::size_t rest = i % (std::size(kAllInstructions) * reps);
        TaskSpec task = tasks[ti];
        task.instruction = kAllInstructions[rest / reps];
        dataset[i] = demo_rollout(weights, task, cfg.dataset.seed_base + i,
                                  cfg.dataset.exec_noise_std, cfg.dataset.seed_base + 100000 + i,
                                  cfg.env);
    });

    std::size_t successes = 0;
    for (const Episode& ep : dataset) successes += ep.success ? 1 : 0;
    save_episodes(artifact(out_dir, "raw/dataset.jsonl"), dataset);
    write_manifest(cfg, out_dir);
    std::cout << "gen-data: " << n << " episodes (" << tasks.size() << " tasks x "
              << std::size(kAllInstructions) << " instructions x " << reps << " seeds), "
              << successes << " successful, at " << artifact(out_dir, "raw/dataset.jsonl") << "\n";
}

void cmd_fit_policy(const PipelineConfig& cfg, const std::string& out_dir) {
    const std::vector<TaskSpec> tasks = load_task_artifact(cfg, out_dir);
    const std::vector<Episode> dataset =
        load_episodes(require_artifact(out_dir, "raw/dataset.jsonl", "gen-data"));

    const DatasetSplit split = split_dataset(dataset.size(), cfg.seed);
    std::vector<Episode> train_eps, eval_eps;
    for (std::size_t i : split.train) train_eps.push_back(dataset[i]);
    for (std::size_t i : split.eval) eval_eps.push_back(dataset[i]);

    TransformerWeights weights = init_random(cfg.seed, cfg.d, cfg.T, cfg.h);
    weights = fit_action_head(weights, demos_from_dataset(train_eps, tasks), cfg.fit.lambda);
    save_weights(artifact(out_dir, "weights.bin"), weights);

    // Held-out action error against a predict-the-mean baseline.
    const auto eval_demos = demos_from_dataset(eval_eps, tasks);
    Action mean_action{};
    {
        const auto train_demos = demos_from_dataset(train_eps, tasks);
        for (const auto& [state, action] : train_demos) {
            for (std::size_t c = 0; c < mean_action.delta.size(); ++c) {
                mean_action.delta[c] += action.delta[c];
            }
        }
        for (double& v : mean_action.delta) v /= static_cast<double>(train_demos.size());
    }
    std::vector<double> mse_slots(eval_demos.size()), base_slots(eval_demos.size());
    parallel_for(eval_demos.size(), cfg.threads, [&](std::size_t i) {
        const auto& [state, target] = eval_demos[i];
        const Action pred = forward(weights, encode(state, cfg.env)).second;
        double se = 0.0, base_se = 0.0;
        for (std::size_t c = 0; c < target.delta.size(); ++c) {
            se += (pred.delta[c] - target.delta[c]) * (pred.delta[c] - target.delta[c]);
            base_se += (mean_action.delta[c] - target.delta[c]) *
                       (mean_action.delta[c] - target.delta[c]);
        }
        mse_slots[i] = se / static_cast<double>(target.delta.size());
        base_slots[i] = base_se / static_cast<double>(target.delta.size());
    });
    const double mse = mean(mse_slots);
    const double base_mse = mean(base_slots);

    // Cloned-policy competence on the canonical tasks.
    const std::size_t rolls = static_cast<std::size_t>(cfg.fit.eval_rollouts_per_task);
    std::vector<double> succ(tasks.size() * rolls);
    parallel_for(succ.size(), cfg.threads, [&](std::size_t i) {
        const std::size_t ti = i / rolls;
        const std::size_t r = i % rolls;
        const Episode ep = policy_rollout(weights, cfg.fit.seed_base + ti * 100 + r, tasks[ti], {},
                                          cfg.env);
        succ[i] = ep.success ? 1.0 : 0.0;
    });
    const double success_rate = mean(succ);

    ensure_dir(fs::path(out_dir) / "tables");
    {
        const std::string path = artifact(out_dir, "tables/fit_metrics.csv");
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot open '" + path + "' for writing");
        f << "metric,value\n"
          << "action_mse," << format_double(mse) << '\n'
          << "action_mse_baseline," << format_double(base_mse) << '\n'
          << "clone_success_rate," << format_double(success_rate) << '\n';
        if (!f.flush()) throw ConfigError("failed writing '" + path + "'");
    }
    write_manifest(cfg, out_dir);
    std::cout << "fit-policy: held-out action MSE " << mse << " (predict-mean baseline "
              << base_mse << "), cloned-policy success " << success_rate << " over "
              << succ.size() << " rollouts\n";
}

void cmd_train_probes(const PipelineConfig& cfg, const std::string& out_dir) {
    const std::vector<Episode> dataset =
        load_episodes(require_artifact(out_dir, "raw/dataset.jsonl", "gen-data"));

    ProbeConfig pc;
    pc.lambda = cfg.probes.lambda;
    pc.robustness_trials = cfg.probes.robustness_trials;
    pc.seed = cfg.seed;
    pc.threads = cfg.threads;
    const ProbeTrainResult result = run_probe_report(dataset, cfg.T, cfg.env.dt, pc);

    ensure_dir(fs::path(out_dir) / "observers");
    ensure_dir(fs::path(out_dir) / "tables");
    for (const Observer& obs : result.bank) {
        save_observers(artifact(out_dir, "observers/" + obs.feature.feature_id + "_layer" +
                                             std::to_string(obs.layer) + ".json"),
                       {obs});
    }
    save_observers(artifact(out_dir, "observers/bank.json"), result.bank);
    save_observers(artifact(out_dir, "observers/best.json"), best_observers(result));

    std::vector<ProbeReport> reports = result.reports;
    reports.insert(reports.end(), result.shuffled.begin(), result.shuffled.end());
    save_probe_report_csv(artifact(out_dir, "tables/probe_report.csv"), reports);

    write_manifest(cfg, out_dir);
    std::cout << "train-probes: " << result.bank.size() << " observers ("
              << result.reports.size() << " features x " << cfg.T << " layers); best layers:";
    for (const ProbeReport& rep : result.reports) {
        std::cout << ' ' << rep.feature_id << "=" << rep.best;
    }
    std::cout << '\n';
}

void cmd_steer(const PipelineConfig& cfg, const std::string& out_dir) {
    const std::vector<TaskSpec> tasks = load_task_artifact(cfg, out_dir);
    const TransformerWeights weights =
        load_weights(require_artifact(out_dir, "weights.bin", "fit-policy"));
    const std::vector<Observer> bank =
        load_observers(require_artifact(out_dir, "observers/bank.json", "train-probes"));
    const int horizon = uniform_horizon(tasks);

    SteeringPlan plan;
    if (!cfg.steer.plan_json.empty()) {
        plan = plan_from_json_text(cfg.steer.plan_json, bank, horizon);
    } else if (!cfg.steer.plan_path.empty()) {
        plan = load_plan(cfg.steer.plan_path, bank, horizon);
    } else {
        plan = plan_from_json_text("[]", bank, horizon);
    }

    const std::size_t reps = static_cast<std::size_t>(cfg.steer.episodes_per_task);
    std::vector<Episode> episodes(tasks.size() * reps);
    parallel_for(episodes.size(), cfg.threads, [&](std::size_t i) {
        const std::size_t ti = i / reps;
        const std::size_t ei = i % reps;
        episodes[i] = steered_rollout(weights, cfg.steer.seed_base + ti * 1000 + ei, tasks[ti],
                                      plan, cfg.env);
    });

    ensure_dir(fs::path(out_dir) / "raw");
    save_episodes(artifact(out_dir, "raw/steered.jsonl"), episodes);

    double success = 0.0;
    for (const Episode& ep : episodes) success += ep.success ? 1.0 : 0.0;
    success /= static_cast<double>(episodes.size());
    std::cout << "steer: " << episodes.size() << " episodes, " << plan.entries.size()
              << " plan entries, success " << success << '\n';
    for (std::size_t e = 0; e < plan.entries.size(); ++e) {
        const PlanEntry& entry = plan.entries[e];
        std::size_t armed = 0, satisfied = 0;
        for (const Episode& ep : episodes) {
            for (const StepLog& log : ep.logs) {
                if (!entry.in_window(log.step_index)) continue;
                ++armed;
                if (in_interval(log.entries[e].post_zeta, entry.phys_min, entry.phys_max)) {
                    ++satisfied;
                }
            }
        }
        std::cout << "  entry " << e << " (" << entry.feature().feature_id << "): " << armed
                  << " armed steps, observed satisfaction "
                  << (armed > 0 ? static_cast<double>(satisfied) / static_cast<double>(armed)
                                : 1.0)
                  << '\n';
    }
    write_manifest(cfg, out_dir);
}

namespace {

int best_layer_for(const std::vector<Observer>& best, const std::string& feature_id) {
    for (const Observer& o : best) {
        if (o.feature.feature_id == feature_id) return o.layer;
    }
    throw MissingArtifactError("no best-layer observer for feature '" + feature_id +
                               "'; run train-probes first");
}

}  // namespace

void cmd_study(const PipelineConfig& cfg, const std::string& out_dir,
               const std::string& study_name) {
    static const char* kNames[] = {"gripper", "height", "speed", "classifier", "sweep", "all"};
    if (std::find_if(std::begin(kNames), std::end(kNames), [&](const char* n) {
            return study_name == n;
        }) == std::end(kNames)) {
        std::string available;
        for (const char* n : kNames) {
            if (!available.empty()) available += ", ";
            available += n;
        }
        throw ConfigError("unknown study '" + study_name + "' (available: " + available + ")");
    }
    const bool all = study_name == "all";

    const std::vector<TaskSpec> tasks = load_task_artifact(cfg, out_dir);
    const TransformerWeights weights =
        load_weights(require_artifact(out_dir, "weights.bin", "fit-policy"));
    const std::vector<Observer> bank =
        load_observers(require_artifact(out_dir, "observers/bank.json", "train-probes"));
    const std::vector<Observer> best =
        load_observers(require_artifact(out_dir, "observers/best.json", "train-probes"));
    const std::vector<Episode> dataset =
        load_episodes(require_artifact(out_dir, "raw/dataset.jsonl", "gen-data"));

    ensure_dir(fs::path(out_dir) / "raw");
    ensure_dir(fs::path(out_dir) / "tables");

    if (all || study_name == "gripper" || study_name == "height" || study_name == "speed") {
        const double median_speed = dataset_median_speed(dataset, cfg.env.dt);
        std::vector<StudySpec> studies = default_studies(median_speed, cfg.env);
        for (StudySpec& spec : studies) {
            if (!all && spec.study_id != study_name) continue;
            spec.episodes_per_task = cfg.study.episodes_per_task;
            const int layer = cfg.study.control_layer > 0
                                  ? cfg.study.control_layer
                                  : best_layer_for(best, spec.feature_id);
            const StudyResult result =
                run_closed_loop_study(spec, tasks, weights, bank, layer, cfg.threads, cfg.env);
            save_tradeoff_csv(artifact(out_dir, "tables/study_" + spec.study_id + "_tradeoff.csv"),
                              result.points);
            save_violin_csv(artifact(out_dir, "tables/study_" + spec.study_id + "_violin.csv"),
                            result.violins);
            for (const MethodEpisodes& me : result.raw) {
                save_episodes(artifact(out_dir, "raw/study_" + spec.study_id + "_" + me.condition +
                                                    "_" + me.method + ".jsonl"),
                              me.episodes);
            }
            std::cout << "study " << spec.study_id << " (control layer " << layer << "):\n";
            for (const TradeoffPoint& pt : result.points) {
                std::cout << "  " << pt.condition << "/" << pt.method << ": success "
                          << pt.success_mean << ", physical sat " << pt.phys_sat_mean
                          << ", observed sat " << pt.obs_sat_mean << '\n';
            }
        }
    }

    if (all || study_name == "classifier") {
        const int layer = cfg.study.control_layer > 0
                              ? cfg.study.control_layer
                              : best_layer_for(best, cfg.study.classifier_feature);
        const Observer& obs = find_observer(bank, cfg.study.classifier_feature, layer);
        ClassifierImageConfig cc;
        cc.fixed_alpha = cfg.study.fixed_alpha;
        cc.episodes = cfg.study.classifier_episodes;
        cc.threads = cfg.threads;
        const ClassifierImageResult image =
            run_classifier_image(dataset, tasks, weights, obs, cc, cfg.env);
        save_classifier_csv(artifact(out_dir, "tables/classifier_image.csv"), image);
        std::cout << "study classifier: " << image.points.size() << " points, layer "
                  << image.layer << ", bounds [" << image.zeta_min << ", " << image.zeta_max
                  << "]\n";
    }

    if (all || study_name == "sweep") {
        SweepConfig sc;
        sc.feature_id = cfg.study.sweep_feature;
        sc.alphas = cfg.study.sweep_alphas;
        sc.max_states = cfg.study.sweep_states;
        sc.threads = cfg.threads;
        const SweepResult sweep = run_perturb_sweep(dataset, tasks, weights, bank, sc, cfg.env);
        save_sweep_csv(artifact(out_dir, "tables/perturb_sweep.csv"), sweep);
        std::cout << "study sweep: " << sweep.rows.size() << " rows over "
                  << sweep.layer_norms.size() << " layers for " << sweep.feature_id << '\n';
    }

    write_manifest(cfg, out_dir);
}

void cmd_report(const PipelineConfig& cfg, const std::string& out_dir) {
    summarize(out_dir);
    write_manifest(cfg, out_dir);
    std::cout << "report: plots under " << (fs::path(out_dir) / "plots").string()
              << ", summary tables under " << (fs::path(out_dir) / "tables").string() << '\n';
}

}  // namespace actuate
