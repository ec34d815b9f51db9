#include "actuate/expharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>

#include "actuate/errors.hpp"
#include "actuate/stats.hpp"
#include "actuate/steer.hpp"
#include "actuate/svg.hpp"

namespace actuate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slack applied to every finite satisfaction bound, so a value that sits on
// the boundary up to rounding still counts.
constexpr double kSatTol = 1e-9;

// Infinite bounds pass automatically: -inf - tol stays -inf.
bool within(double value, double lo, double hi) {
    return value >= lo - kSatTol && value <= hi + kSatTol;
}

int action_component(const std::string& feature_id) {
    if (feature_id == "action_dx") return 0;
    if (feature_id == "action_dy") return 1;
    if (feature_id == "action_dz") return 2;
    if (feature_id == "action_dg") return 6;
    return -1;
}

// The realized quantity after executing step's action: the post-step state
// for gripper and height, the displacement the action caused for speed.
double measure_value(const Episode& ep, std::size_t step, PhysMeasure measure, double dt) {
    const bool last = step + 1 >= ep.steps.size();
    switch (measure) {
        case PhysMeasure::GripperCloseness:
            return last ? ep.final_robot.gripper : ep.steps[step + 1].robot.gripper;
        case PhysMeasure::HeightAboveStart: {
            const double z0 = ep.steps.front().robot.position.z;
            const double z = last ? ep.final_robot.position.z : ep.steps[step + 1].robot.position.z;
            return z - z0;
        }
        case PhysMeasure::Speed:
            return extract_feature(ep, step, "speed", dt);
    }
    throw ConfigError("unknown physical measure");
}

void fisher_yates_u64(std::size_t n, Rng& rng, const std::function<void(std::size_t, std::size_t)>& swap_fn) {
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        swap_fn(i - 1, j);
    }
}

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                next.store(n);  // stop handing out work
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

DatasetSplit split_dataset(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    fisher_yates_u64(n, rng, [&](std::size_t a, std::size_t b) { std::swap(idx[a], idx[b]); });
    std::size_t n_eval = n / 5;
    if (n_eval == 0 && n >= 2) n_eval = 1;
    DatasetSplit split;
    split.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_eval));
    split.eval.assign(idx.end() - static_cast<std::ptrdiff_t>(n_eval), idx.end());
    // Sorted splits make downstream passes independent of the shuffle order.
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.eval.begin(), split.eval.end());
    return split;
}

Episode demo_rollout(const TransformerWeights& weights, const TaskSpec& task,
                     std::uint64_t env_seed, double exec_noise_std, std::uint64_t noise_seed,
                     const EnvParams& params) {
    Episode ep;
    ep.task_id = task.task_id;
    ep.instruction = task.instruction;
    ep.env_seed = env_seed;
    ep.observed_layers.resize(static_cast<std::size_t>(weights.config.T));
    std::iota(ep.observed_layers.begin(), ep.observed_layers.end(), 1);

    Rng noise(noise_seed);
    WorldState w = reset(env_seed, task, params);
    // Demos deliberately run the full horizon rather than stopping at first
    // success: the post-delivery hover — hand held open above the released
    // object — is where a clone learns that an open gripper at altitude
    // stays open. Cut the episodes at delivery and that regime all but
    // vanishes from the training data.
    while (w.step_index < task.horizon) {
        const Action action = expert_action(w, params);
        // The trunk only supplies activations here; the label is the expert's.
        auto fwd = forward(weights, encode(w, params));

        StepRecord rec;
        rec.robot = w.robot;
        rec.object_position = w.object_position;
        rec.object_grasped = w.object_grasped;
        rec.action = action;
        rec.activations = std::move(fwd.first.activations);

        Action executed = action;
        if (exec_noise_std > 0.0) {
            // Translation jitter thickens the visited tube around the nominal
            // path; the much larger grip jitter is what breaks the aperture
            // latch — it puts off-nominal apertures into the data with the
            // expert's corrective command attached, so a clone learns to obey
            // the state instead of parroting its own previous grip.
            const Vector jitter = rng_normal(noise, 4, 0.0, exec_noise_std);
            for (std::size_t c = 0; c < 3; ++c) executed.delta[c] += jitter[c];
            executed.delta[6] += kGripNoiseFactor * jitter[3];
        }
        w = step(w, executed, params);
        ep.steps.push_back(std::move(rec));
    }
    ep.final_robot = w.robot;
    ep.final_object = w.object_position;
    ep.success = is_success(w);
    return ep;
}

WorldState world_from_step(const Episode& ep, std::size_t step, const TaskSpec& task) {
    if (step >= ep.steps.size()) {
        throw ConfigError("world_from_step: step " + std::to_string(step) + " out of range for episode with " +
                          std::to_string(ep.steps.size()) + " steps");
    }
    const StepRecord& rec = ep.steps[step];
    WorldState w;
    w.robot = rec.robot;
    w.object_position = rec.object_position;
    w.object_grasped = rec.object_grasped;
    w.goal_region = task.goal;
    w.step_index = static_cast<int>(step);
    w.task = task;
    w.task.instruction = ep.instruction;
    return w;
}

std::vector<std::pair<WorldState, Action>> demos_from_dataset(
    const std::vector<Episode>& dataset, const std::vector<TaskSpec>& tasks) {
    std::vector<std::pair<WorldState, Action>> demos;
    for (const Episode& ep : dataset) {
        const TaskSpec& task = find_task(tasks, ep.task_id);
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            demos.emplace_back(world_from_step(ep, s, task), ep.steps[s].action);
        }
    }
    return demos;
}

double dataset_median_speed(const std::vector<Episode>& dataset, double dt) {
    std::vector<double> speeds;
    for (const Episode& ep : dataset) {
        const std::size_t cap = std::min<std::size_t>(ep.steps.size(), kSpeedWindowSteps);
        for (std::size_t s = 0; s < cap; ++s) {
            speeds.push_back(extract_feature(ep, s, "speed", dt));
        }
    }
    if (speeds.empty()) throw ConfigError("median speed: empty dataset");
    return median(std::move(speeds));
}

const TaskSpec& find_task(const std::vector<TaskSpec>& tasks, const std::string& task_id) {
    for (const TaskSpec& t : tasks) {
        if (t.task_id == task_id) return t;
    }
    throw ConfigError("unknown task_id '" + task_id + "'");
}

const Observer& find_observer(const std::vector<Observer>& bank, const std::string& feature_id,
                              int layer) {
    for (const Observer& o : bank) {
        if (o.feature.feature_id == feature_id && o.layer == layer) return o;
    }
    throw MissingArtifactError("no observer for feature '" + feature_id + "' at layer " +
                               std::to_string(layer));
}

// ---------------------------------------------------------------------------
// Probe report

ProbeTrainResult run_probe_report(const std::vector<Episode>& dataset, int T, double dt,
                                  const ProbeConfig& cfg) {
    if (dataset.size() < 2) throw ConfigError("probe report: need at least two episodes to split");
    if (T < 1) throw ConfigError("probe report: layer count must be positive");
    const std::vector<std::string> features = cfg.features.empty() ? known_feature_ids() : cfg.features;
    std::vector<int> layers = cfg.layers;
    if (layers.empty()) {
        layers.resize(static_cast<std::size_t>(T));
        std::iota(layers.begin(), layers.end(), 1);
    }
    for (int l : layers) {
        if (l < 1 || l > T) {
            throw ConfigError("probe report: layer " + std::to_string(l) + " outside [1, " +
                              std::to_string(T) + "]");
        }
    }

    const DatasetSplit split = split_dataset(dataset.size(), cfg.seed);
    std::vector<Episode> train_eps, eval_eps;
    train_eps.reserve(split.train.size());
    eval_eps.reserve(split.eval.size());
    for (std::size_t i : split.train) train_eps.push_back(dataset[i]);
    for (std::size_t i : split.eval) eval_eps.push_back(dataset[i]);

    // Normalization is fitted on the train split only; eval labels go
    // through the same map.
    std::vector<FeatureSpec> specs;
    specs.reserve(features.size());
    for (const std::string& f : features) {
        FeatureSpec spec = make_feature(f);
        fit_normalization(spec, train_eps, dt);
        specs.push_back(std::move(spec));
    }

    const std::size_t F = features.size();
    const std::size_t L = layers.size();
    struct Cell {
        Observer obs;
        LayerMetrics lm;
    };
    std::vector<Cell> cells(F * L);
    parallel_for(F * L, cfg.threads, [&](std::size_t j) {
        const std::size_t fi = j / L;
        const std::size_t li = j % L;
        const int layer = layers[li];
        const FeatureSpec& spec = specs[fi];
        const auto train_pairs = collect_pairs(train_eps, layer, spec, dt);
        const auto eval_pairs = collect_pairs(eval_eps, layer, spec, dt);
        Observer obs = train_observer(train_pairs, spec.kind, cfg.lambda);
        obs.layer = layer;
        obs.feature = spec;
        cells[j].lm.layer = layer;
        cells[j].lm.metrics = evaluate_observer(obs, eval_pairs);
        cells[j].obs = std::move(obs);
    });

    ProbeTrainResult result;
    result.bank.reserve(F * L);
    result.reports.reserve(F);
    for (std::size_t fi = 0; fi < F; ++fi) {
        ProbeReport rep;
        rep.feature_id = features[fi];
        rep.kind = specs[fi].kind;
        for (std::size_t li = 0; li < L; ++li) rep.per_layer.push_back(cells[fi * L + li].lm);
        rep.best = best_layer(rep.per_layer, rep.kind);
        result.reports.push_back(std::move(rep));
        for (std::size_t li = 0; li < L; ++li) result.bank.push_back(std::move(cells[fi * L + li].obs));
    }

    // Robustness at the best layer, probed on eval activations.
    for (std::size_t fi = 0; fi < F; ++fi) {
        ProbeReport& rep = result.reports[fi];
        const Observer& best = find_observer(result.bank, rep.feature_id, rep.best);
        auto eval_pairs = collect_pairs(eval_eps, rep.best, specs[fi], dt);
        std::vector<Vector> xs;
        xs.reserve(eval_pairs.size());
        for (auto& p : eval_pairs) xs.push_back(std::move(p.first));
        const double w_norm = l2_norm(best.w);
        for (std::size_t ei = 0; ei < cfg.robustness_epsilons.size(); ++ei) {
            RobustnessPoint pt;
            pt.epsilon = cfg.robustness_epsilons[ei];
            pt.delta = robustness_check(best, xs, pt.epsilon, cfg.robustness_trials,
                                        cfg.seed + 101 * (fi + 1) + ei);
            pt.bound = pt.epsilon * w_norm;
            rep.robustness.push_back(pt);
        }
    }

    // Negative control per feature: permuting the train labels breaks the
    // activation-label link while keeping both marginals. A probe that still
    // scores well on the true eval labels is reading dataset structure, not
    // the representation.
    result.shuffled.resize(F);
    parallel_for(F, cfg.threads, [&](std::size_t fi) {
        const ProbeReport& rep = result.reports[fi];
        auto train_pairs = collect_pairs(train_eps, rep.best, specs[fi], dt);
        const auto eval_pairs = collect_pairs(eval_eps, rep.best, specs[fi], dt);
        Rng rng(cfg.seed + 7919 * (fi + 1));
        fisher_yates_u64(train_pairs.size(), rng, [&](std::size_t a, std::size_t b) {
            std::swap(train_pairs[a].second, train_pairs[b].second);
        });
        Observer obs = train_observer(train_pairs, specs[fi].kind, cfg.lambda);
        obs.layer = rep.best;
        obs.feature = specs[fi];

        ProbeReport sh;
        sh.feature_id = rep.feature_id + "_shuffled";
        sh.kind = rep.kind;
        LayerMetrics lm;
        lm.layer = rep.best;
        lm.metrics = evaluate_observer(obs, eval_pairs);
        sh.per_layer.push_back(lm);
        sh.best = rep.best;
        result.shuffled[fi] = std::move(sh);
    });
    return result;
}

std::vector<Observer> best_observers(const ProbeTrainResult& result) {
    std::vector<Observer> best;
    best.reserve(result.reports.size());
    for (const ProbeReport& rep : result.reports) {
        best.push_back(find_observer(result.bank, rep.feature_id, rep.best));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Perturbation sweep

SweepResult run_perturb_sweep(const std::vector<Episode>& dataset,
                              const std::vector<TaskSpec>& tasks,
                              const TransformerWeights& weights,
                              const std::vector<Observer>& bank, const SweepConfig& cfg,
                              const EnvParams& params) {
    const int comp = action_component(cfg.feature_id);
    if (comp < 0) {
        throw ConfigError("perturbation sweep: feature '" + cfg.feature_id +
                          "' is not an action component; the sweep measures how the emitted action moves");
    }
    if (dataset.empty()) throw ConfigError("perturbation sweep: empty dataset");
    const int T = weights.config.T;

    std::vector<std::pair<std::size_t, std::size_t>> states;
    for (std::size_t e = 0; e < dataset.size(); ++e) {
        for (std::size_t s = 0; s < dataset[e].steps.size(); ++s) states.emplace_back(e, s);
    }
    if (states.size() > cfg.max_states) {
        Rng rng(cfg.seed);
        fisher_yates_u64(states.size(), rng,
                         [&](std::size_t a, std::size_t b) { std::swap(states[a], states[b]); });
        states.resize(cfg.max_states);
        std::sort(states.begin(), states.end());
    }

    const std::size_t A = cfg.alphas.size();
    const std::size_t S = states.size();
    const std::size_t Tz = static_cast<std::size_t>(T);
    std::vector<std::vector<double>> deltas(S);  // per state: layer-major x alpha
    std::vector<std::vector<double>> norms(S);   // per state: T entries
    parallel_for(S, cfg.threads, [&](std::size_t si) {
        const auto [e, s] = states[si];
        const TaskSpec& task = find_task(tasks, dataset[e].task_id);
        const TokenSequence tokens = encode(world_from_step(dataset[e], s, task), params);
        const auto base = forward(weights, tokens);

        norms[si].resize(Tz);
        for (std::size_t l = 0; l < Tz; ++l) norms[si][l] = l2_norm(base.first.activations[l]);

        deltas[si].assign(Tz * A, 0.0);
        for (int l = 1; l <= T; ++l) {
            const Observer& obs = find_observer(bank, cfg.feature_id, l);
            for (std::size_t ai = 0; ai < A; ++ai) {
                const double alpha = cfg.alphas[ai];
                HookSet hooks;
                hooks.observers_at = {l};
                hooks.controllers_at = {l};
                hooks.on_control = [&obs, alpha](int, const Vector& x) {
                    const Vector u = fixed_offset(obs, x, alpha);
                    Vector pushed = x;
                    for (std::size_t k = 0; k < pushed.size(); ++k) pushed[k] += u[k];
                    return pushed;
                };
                const auto pushed = forward(weights, tokens, hooks);
                deltas[si][static_cast<std::size_t>(l - 1) * A + ai] =
                    std::abs(pushed.second.delta[static_cast<std::size_t>(comp)] -
                             base.second.delta[static_cast<std::size_t>(comp)]);
            }
        }
    });

    SweepResult out;
    out.feature_id = cfg.feature_id;
    out.layer_norms.assign(Tz, 0.0);
    for (std::size_t si = 0; si < S; ++si) {
        for (std::size_t l = 0; l < Tz; ++l) out.layer_norms[l] += norms[si][l];
    }
    for (double& v : out.layer_norms) v /= static_cast<double>(S);
    out.rows.reserve(Tz * A);
    for (int l = 1; l <= T; ++l) {
        for (std::size_t ai = 0; ai < A; ++ai) {
            SweepRow row;
            row.layer = l;
            row.alpha = cfg.alphas[ai];
            double acc = 0.0;
            for (std::size_t si = 0; si < S; ++si) {
                acc += deltas[si][static_cast<std::size_t>(l - 1) * A + ai];
            }
            row.mean_abs_delta = acc / static_cast<double>(S);
            out.rows.push_back(row);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classifier image

ClassifierImageResult run_classifier_image(const std::vector<Episode>& dataset,
                                           const std::vector<TaskSpec>& tasks,
                                           const TransformerWeights& weights, const Observer& obs,
                                           const ClassifierImageConfig& cfg,
                                           const EnvParams& params) {
    if (obs.feature.kind != FeatureKind::Continuous) {
        throw ConfigError("classifier image: feature '" + obs.feature.feature_id +
                          "' is binary; the in-bounds statement needs a continuous observation");
    }
    if (tasks.empty()) throw ConfigError("classifier image: no tasks");
    if (cfg.episodes < 1) throw ConfigError("classifier image: episode count must be positive");

    // Bounds from the unsteered dataset distribution of the observation.
    std::vector<double> zetas;
    for (const Episode& ep : dataset) {
        const auto it = std::find(ep.observed_layers.begin(), ep.observed_layers.end(), obs.layer);
        if (it == ep.observed_layers.end()) continue;
        const std::size_t slot = static_cast<std::size_t>(it - ep.observed_layers.begin());
        for (const StepRecord& rec : ep.steps) zetas.push_back(observe(obs, rec.activations[slot]));
    }
    if (zetas.empty()) {
        throw MissingArtifactError("classifier image: dataset has no recorded activations at layer " +
                                   std::to_string(obs.layer));
    }

    ClassifierImageResult out;
    out.feature_id = obs.feature.feature_id;
    out.layer = obs.layer;
    out.zeta_min = percentile(zetas, cfg.lo_percentile);
    out.zeta_max = percentile(zetas, cfg.hi_percentile);
    if (!(out.zeta_min < out.zeta_max)) {
        throw NumericalError("classifier image: degenerate bounds from percentiles");
    }

    static const char* kMethods[] = {"none", "fixed", "control"};
    const std::size_t E = static_cast<std::size_t>(cfg.episodes);
    std::vector<std::vector<ClassifierPoint>> slots(E * 3);
    parallel_for(E * 3, cfg.threads, [&](std::size_t j) {
        const std::size_t e = j / 3;
        const std::size_t mi = j % 3;
        const TaskSpec& task = tasks[e % tasks.size()];
        const std::uint64_t env_seed = cfg.seed_base + e;

        Episode ep;
        if (mi == 2) {
            SteeringPlan plan;
            plan.entries.push_back(make_plan_entry({obs}, obs.feature.denormalize(out.zeta_min),
                                                   obs.feature.denormalize(out.zeta_max), 0,
                                                   task.horizon));
            ep = steered_rollout(weights, env_seed, task, plan, params);
        } else {
            HookSet hooks;
            hooks.observers_at = {obs.layer};
            if (mi == 1) {
                hooks.controllers_at = {obs.layer};
                hooks.on_control = [&](int, const Vector& x) {
                    const Vector u = fixed_offset(obs, x, cfg.fixed_alpha);
                    Vector pushed = x;
                    for (std::size_t k = 0; k < pushed.size(); ++k) pushed[k] += u[k];
                    return pushed;
                };
            }
            ep = policy_rollout(weights, env_seed, task, hooks, params);
        }

        // Zeta comes from the recorded (post-intervention) readout for every
        // method, so the three distributions are directly comparable.
        const auto it = std::find(ep.observed_layers.begin(), ep.observed_layers.end(), obs.layer);
        const std::size_t slot = static_cast<std::size_t>(it - ep.observed_layers.begin());
        std::vector<ClassifierPoint>& pts = slots[j];
        pts.reserve(ep.steps.size());
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            ClassifierPoint p;
            p.method = kMethods[mi];
            p.task_id = ep.task_id;
            p.episode = static_cast<int>(e);
            p.step = static_cast<int>(s);
            p.zeta = observe(obs, ep.steps[s].activations[slot]);
            pts.push_back(std::move(p));
        }
    });

    for (std::size_t mi = 0; mi < 3; ++mi) {
        for (std::size_t e = 0; e < E; ++e) {
            for (ClassifierPoint& p : slots[e * 3 + mi]) out.points.push_back(std::move(p));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-loop studies

std::vector<StudySpec> default_studies(double median_speed, const EnvParams& params) {
    if (!std::isfinite(median_speed) || median_speed <= 0.0) {
        throw ConfigError("studies: median speed must be positive and finite");
    }

    StudySpec gripper;
    gripper.study_id = "gripper";
    gripper.feature_id = "gripper_state";
    gripper.measure = PhysMeasure::GripperCloseness;
    gripper.window_start = 0;
    gripper.window_len = -1;
    gripper.seed_base = 5000;
    gripper.conditions = {
        {"closed", Instruction::Closed, 0.9, 1.0, 0.5, kInf},
        {"open", Instruction::Open, 0.0, 0.1, -kInf, 0.5},
    };

    StudySpec height;
    height.study_id = "height";
    height.feature_id = "action_dz";
    height.measure = PhysMeasure::HeightAboveStart;
    height.window_start = 0;
    height.window_len = kHeightWindowSteps;
    height.seed_base = 6000;
    height.conditions = {
        {"below", Instruction::Low, -params.max_step, 0.0, -kInf, 0.0},
        {"above", Instruction::High, 0.0, params.max_step, 0.0, kInf},
    };

    StudySpec speed;
    speed.study_id = "speed";
    speed.feature_id = "speed";
    speed.measure = PhysMeasure::Speed;
    speed.window_start = 0;
    speed.window_len = kSpeedWindowSteps;
    speed.seed_base = 7000;
    speed.conditions = {
        {"below", Instruction::Slow, 0.0, median_speed, 0.0, median_speed},
        {"above", Instruction::Fast, median_speed, kInf, median_speed, kInf},
    };

    return {gripper, height, speed};
}

StudyResult run_closed_loop_study(const StudySpec& spec, const std::vector<TaskSpec>& tasks,
                                  const TransformerWeights& weights,
                                  const std::vector<Observer>& bank, int control_layer,
                                  int threads, const EnvParams& params) {
    if (tasks.empty()) throw ConfigError("study '" + spec.study_id + "': no tasks");
    if (spec.conditions.empty()) throw ConfigError("study '" + spec.study_id + "': no conditions");
    if (spec.episodes_per_task < 1) {
        throw ConfigError("study '" + spec.study_id + "': episodes_per_task must be positive");
    }
    const Observer& obs = find_observer(bank, spec.feature_id, control_layer);

    static const char* kMethods[] = {"none", "prompting", "control"};
    const std::size_t C = spec.conditions.size();
    const std::size_t M = 3;
    const std::size_t N = tasks.size();
    const std::size_t E = static_cast<std::size_t>(spec.episodes_per_task);
    const std::size_t jobs = C * M * N * E;

    std::vector<Episode> episodes(jobs);
    parallel_for(jobs, threads, [&](std::size_t j) {
        std::size_t rest = j;
        const std::size_t ci = rest / (M * N * E);
        rest %= M * N * E;
        const std::size_t mi = rest / (N * E);
        rest %= N * E;
        const std::size_t ti = rest / E;
        const std::size_t ei = rest % E;
        const StudyCondition& cond = spec.conditions[ci];

        TaskSpec task = tasks[ti];
        task.instruction = mi == 1 ? cond.prompt : Instruction::Default;
        // Seeds pair the same initial pose across methods and conditions.
        const std::uint64_t env_seed = spec.seed_base + ti * 1000 + ei;
        const int win_len = spec.window_len < 0 ? task.horizon : spec.window_len;

        // The same plan shape for every method keeps the logs comparable;
        // only the control arm gets a live window.
        SteeringPlan plan;
        plan.entries.push_back(make_plan_entry({obs}, cond.target_min, cond.target_max,
                                               spec.window_start, mi == 2 ? win_len : 0));
        episodes[j] = steered_rollout(weights, env_seed, task, plan, params);
    });

    StudyResult out;
    out.spec = spec;
    out.points.reserve(C * M);
    out.raw.reserve(C * M);
    for (std::size_t ci = 0; ci < C; ++ci) {
        const StudyCondition& cond = spec.conditions[ci];
        for (std::size_t mi = 0; mi < M; ++mi) {
            std::vector<double> succ, phys_sat, obs_sat;
            MethodEpisodes raw;
            raw.condition = cond.name;
            raw.method = kMethods[mi];
            raw.episodes.reserve(N * E);
            for (std::size_t ti = 0; ti < N; ++ti) {
                for (std::size_t ei = 0; ei < E; ++ei) {
                    const std::size_t j = ((ci * M + mi) * N + ti) * E + ei;
                    const Episode& ep = episodes[j];
                    const int win_len =
                        spec.window_len < 0 ? static_cast<int>(ep.steps.size()) : spec.window_len;
                    int n_in = 0;
                    int n_phys = 0;
                    int n_obs = 0;
                    for (std::size_t s = 0; s < ep.steps.size(); ++s) {
                        const int si = static_cast<int>(s);
                        if (si < spec.window_start || si >= spec.window_start + win_len) continue;
                        ++n_in;
                        const double value = measure_value(ep, s, spec.measure, params.dt);
                        if (within(value, cond.sat_lo, cond.sat_hi)) ++n_phys;
                        // Logged observations are already in the entry's
                        // physical units, same as the targets.
                        if (within(ep.logs[s].entries.front().post_zeta, cond.target_min,
                                   cond.target_max)) {
                            ++n_obs;
                        }
                        ViolinRow row;
                        row.study_id = spec.study_id;
                        row.condition = cond.name;
                        row.method = kMethods[mi];
                        row.task_id = ep.task_id;
                        row.episode = static_cast<int>(ei);
                        row.step = si;
                        row.value = value;
                        out.violins.push_back(std::move(row));
                    }
                    succ.push_back(ep.success ? 1.0 : 0.0);
                    phys_sat.push_back(n_in > 0 ? static_cast<double>(n_phys) / n_in : 1.0);
                    obs_sat.push_back(n_in > 0 ? static_cast<double>(n_obs) / n_in : 1.0);
                    raw.episodes.push_back(std::move(episodes[j]));
                }
            }
            TradeoffPoint pt;
            pt.study_id = spec.study_id;
            pt.condition = cond.name;
            pt.method = kMethods[mi];
            pt.success_mean = mean(succ);
            pt.success_std = stddev(succ);
            pt.phys_sat_mean = mean(phys_sat);
            pt.phys_sat_std = stddev(phys_sat);
            pt.obs_sat_mean = mean(obs_sat);
            pt.obs_sat_std = stddev(obs_sat);
            out.points.push_back(std::move(pt));
            out.raw.push_back(std::move(raw));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table persistence

namespace {

std::ofstream open_table(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    return f;
}

void close_table(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace

void save_sweep_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream f = open_table(path);
    f << "feature_id,layer,alpha,mean_abs_delta,mean_norm\n";
    for (const SweepRow& r : sweep.rows) {
        f << sweep.feature_id << ',' << r.layer << ',' << format_double(r.alpha) << ','
          << format_double(r.mean_abs_delta) << ','
          << format_double(sweep.layer_norms[static_cast<std::size_t>(r.layer - 1)]) << '\n';
    }
    close_table(f, path);
}

void save_classifier_csv(const std::string& path, const ClassifierImageResult& image) {
    std::ofstream f = open_table(path);
    f << "feature_id,layer,zeta_min,zeta_max,method,task_id,episode,step,zeta\n";
    for (const ClassifierPoint& p : image.points) {
        f << image.feature_id << ',' << image.layer << ',' << format_double(image.zeta_min) << ','
          << format_double(image.zeta_max) << ',' << p.method << ',' << p.task_id << ','
          << p.episode << ',' << p.step << ',' << format_double(p.zeta) << '\n';
    }
    close_table(f, path);
}

void save_tradeoff_csv(const std::string& path, const std::vector<TradeoffPoint>& points) {
    std::ofstream f = open_table(path);
    f << "study_id,condition,method,success_mean,success_std,phys_sat_mean,phys_sat_std,"
         "obs_sat_mean,obs_sat_std\n";
    for (const TradeoffPoint& p : points) {
        f << p.study_id << ',' << p.condition << ',' << p.method << ','
          << format_double(p.success_mean) << ',' << format_double(p.success_std) << ','
          << format_double(p.phys_sat_mean) << ',' << format_double(p.phys_sat_std) << ','
          << format_double(p.obs_sat_mean) << ',' << format_double(p.obs_sat_std) << '\n';
    }
    close_table(f, path);
}

void save_violin_csv(const std::string& path, const std::vector<ViolinRow>& rows) {
    std::ofstream f = open_table(path);
    f << "study_id,condition,method,task_id,episode,step,value\n";
    for (const ViolinRow& r : rows) {
        f << r.study_id << ',' << r.condition << ',' << r.method << ',' << r.task_id << ','
          << r.episode << ',' << r.step << ',' << format_double(r.value) << '\n';
    }
    close_table(f, path);
}

// ---------------------------------------------------------------------------
// Report rendering

namespace {

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Our writers never quote or embed commas, so a plain split is a full parser
// for these files.
Table read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("cannot open table '" + path + "'");
    Table t;
    t.path = path;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        for (;;) {
            const std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(pos));
                break;
            }
            cells.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

std::size_t column(const Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    throw ConfigError("table '" + t.path + "': missing column '" + name + "'");
}

double cell_num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const char* method_color(const std::string& m) {
    if (m == "none") return "#7f7f7f";
    if (m == "prompting") return "#1f77b4";
    if (m == "control") return "#d62728";
    if (m == "fixed") return "#2ca02c";
    return "#9467bd";
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

// Pads a data range so points never sit on the frame.
std::pair<double, double> padded(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

// Frame, five ticks per axis, and axis labels. The scales' pixel ranges
// define the plot box; the y scale runs bottom-to-top.
void draw_axes(SvgCanvas& c, const LinearScale& sx, const LinearScale& sy,
               const std::string& xlabel, const std::string& ylabel) {
    const double left = sx.px_lo;
    const double right = sx.px_hi;
    const double bottom = sy.px_lo;
    const double top = sy.px_hi;
    c.rect(left, top, right - left, bottom - top, "none", "#999", 1.0);
    for (int k = 0; k <= 4; ++k) {
        const double fx = sx.data_lo + k * (sx.data_hi - sx.data_lo) / 4.0;
        const double px = sx(fx);
        c.line(px, bottom, px, bottom + 4, "#999");
        c.text(px, bottom + 16, tick_label(fx), 9, "middle", "#555");
        const double fy = sy.data_lo + k * (sy.data_hi - sy.data_lo) / 4.0;
        const double py = sy(fy);
        c.line(left - 4, py, left, py, "#999");
        c.text(left - 6, py + 3, tick_label(fy), 9, "end", "#555");
    }
    c.text((left + right) / 2.0, bottom + 30, xlabel, 10, "middle");
    c.text(left, top - 8, ylabel, 10, "start");
}

void draw_legend(SvgCanvas& c, double x, double y,
                 const std::vector<std::pair<std::string, std::string>>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double ly = y + 14.0 * static_cast<double>(i);
        c.rect(x, ly - 8, 10, 10, items[i].second);
        c.text(x + 14, ly, items[i].first, 9);
    }
}

void render_probe_layers(const Table& t, const std::string& path) {
    const std::size_t c_layer = column(t, "layer");
    const std::size_t c_feature = column(t, "feature_id");
    const std::size_t c_metric = column(t, "metric");
    const std::size_t c_value = column(t, "value");

    struct Series {
        std::string feature;
        bool binary = false;
        std::vector<std::pair<double, double>> pts;  // (layer, value)
    };
    std::vector<Series> series;
    for (const auto& row : t.rows) {
        const std::string& metric = row[c_metric];
        if (metric != "mae" && metric != "accuracy") continue;
        const std::string& feature = row[c_feature];
        if (feature.ends_with("_shuffled")) continue;
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const Series& s) { return s.feature == feature; });
        if (it == series.end()) {
            series.push_back({feature, metric == "accuracy", {}});
            it = series.end() - 1;
        }
        it->pts.emplace_back(cell_num(row[c_layer]), cell_num(row[c_value]));
    }
    for (Series& s : series) std::sort(s.pts.begin(), s.pts.end());

    double layer_lo = 1.0, layer_hi = 2.0, mae_hi = 0.0, acc_lo = 1.0;
    for (const Series& s : series) {
        for (const auto& [l, v] : s.pts) {
            layer_lo = std::min(layer_lo, l);
            layer_hi = std::max(layer_hi, l);
            if (s.binary) {
                acc_lo = std::min(acc_lo, v);
            } else {
                mae_hi = std::max(mae_hi, v);
            }
        }
    }

    SvgCanvas c(960, 400);
    c.text(480, 20, "probe quality by layer", 13, "middle");
    const LinearScale sx1(layer_lo, layer_hi, 60, 440);
    const LinearScale sy1(0.0, mae_hi > 0 ? mae_hi * 1.08 : 1.0, 340, 46);
    draw_axes(c, sx1, sy1, "layer", "eval MAE (raw units)");
    const LinearScale sx2(layer_lo, layer_hi, 560, 930);
    const LinearScale sy2(std::min(acc_lo, 0.5), 1.005, 340, 46);
    draw_axes(c, sx2, sy2, "layer", "eval accuracy");

    std::vector<std::pair<std::string, std::string>> legend_cont, legend_bin;
    std::size_t color_idx = 0;
    for (const Series& s : series) {
        const char* color = kPalette[color_idx++ % kPaletteSize];
        const LinearScale& sx = s.binary ? sx2 : sx1;
        const LinearScale& sy = s.binary ? sy2 : sy1;
        std::vector<std::pair<double, double>> px;
        px.reserve(s.pts.size());
        for (const auto& [l, v] : s.pts) px.emplace_back(sx(l), sy(v));
        c.polyline(px, color, 1.5);
        for (const auto& [x, y] : px) c.circle(x, y, 2.2, color);
        (s.binary ? legend_bin : legend_cont).emplace_back(s.feature, color);
    }
    draw_legend(c, 350, 60, legend_cont);
    draw_legend(c, 830, 60, legend_bin);
    c.save(path);
}

void render_layer_sweep(const Table& t, const std::string& path) {
    const std::size_t c_feature = column(t, "feature_id");
    const std::size_t c_layer = column(t, "layer");
    const std::size_t c_alpha = column(t, "alpha");
    const std::size_t c_delta = column(t, "mean_abs_delta");
    const std::size_t c_norm = column(t, "mean_norm");

    std::string feature = t.rows.empty() ? "action" : t.rows.front()[c_feature];
    std::vector<double> alphas;
    std::vector<std::pair<double, double>> norm_pts;  // (layer, norm), deduped
    double layer_lo = 1.0, layer_hi = 2.0, delta_hi = 0.0, norm_hi = 0.0;
    for (const auto& row : t.rows) {
        const double alpha = cell_num(row[c_alpha]);
        if (std::find(alphas.begin(), alphas.end(), alpha) == alphas.end()) alphas.push_back(alpha);
        const double layer = cell_num(row[c_layer]);
        layer_lo = std::min(layer_lo, layer);
        layer_hi = std::max(layer_hi, layer);
        delta_hi = std::max(delta_hi, cell_num(row[c_delta]));
        const double nv = cell_num(row[c_norm]);
        norm_hi = std::max(norm_hi, nv);
        if (std::find_if(norm_pts.begin(), norm_pts.end(), [&](const auto& p) {
                return p.first == layer;
            }) == norm_pts.end()) {
            norm_pts.emplace_back(layer, nv);
        }
    }
    std::sort(norm_pts.begin(), norm_pts.end());

    SvgCanvas c(960, 400);
    c.text(480, 20, "fixed push along the probe direction", 13, "middle");
    const LinearScale sx1(layer_lo, layer_hi, 60, 440);
    const LinearScale sy1(0.0, delta_hi > 0 ? delta_hi * 1.08 : 1.0, 340, 46);
    draw_axes(c, sx1, sy1, "pushed layer", "mean |change in " + feature + "|");
    std::vector<std::pair<std::string, std::string>> legend;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const char* color = kPalette[ai % kPaletteSize];
        std::vector<std::pair<double, double>> px;
        for (const auto& row : t.rows) {
            if (cell_num(row[c_alpha]) != alphas[ai]) continue;
            px.emplace_back(sx1(cell_num(row[c_layer])), sy1(cell_num(row[c_delta])));
        }
        std::sort(px.begin(), px.end());
        c.polyline(px, color, 1.5);
        for (const auto& [x, y] : px) c.circle(x, y, 2.0, color);
        legend.emplace_back("alpha=" + tick_label(alphas[ai]), color);
    }
    draw_legend(c, 70, 60, legend);

    const LinearScale sx2(layer_lo, layer_hi, 560, 930);
    const LinearScale sy2(0.0, norm_hi > 0 ? norm_hi * 1.08 : 1.0, 340, 46);
    draw_axes(c, sx2, sy2, "layer", "mean representation norm");
    std::vector<std::pair<double, double>> px;
    px.reserve(norm_pts.size());
    for (const auto& [l, v] : norm_pts) px.emplace_back(sx2(l), sy2(v));
    c.polyline(px, "#d62728", 1.5);
    for (const auto& [x, y] : px) c.circle(x, y, 2.2, "#d62728");
    c.save(path);
}

void render_classifier_image(const Table& t, const std::string& path) {
    const std::size_t c_zmin = column(t, "zeta_min");
    const std::size_t c_zmax = column(t, "zeta_max");
    const std::size_t c_method = column(t, "method");
    const std::size_t c_step = column(t, "step");
    const std::size_t c_zeta = column(t, "zeta");
    const std::size_t c_feature = column(t, "feature_id");
    const std::size_t c_layer = column(t, "layer");
    if (t.rows.empty()) throw ConfigError("table '" + t.path + "': no data rows");

    const double zmin = cell_num(t.rows.front()[c_zmin]);
    const double zmax = cell_num(t.rows.front()[c_zmax]);
    double step_hi = 1.0, v_lo = zmin, v_hi = zmax;
    for (const auto& row : t.rows) {
        step_hi = std::max(step_hi, cell_num(row[c_step]));
        v_lo = std::min(v_lo, cell_num(row[c_zeta]));
        v_hi = std::max(v_hi, cell_num(row[c_zeta]));
    }
    const auto [lo, hi] = padded(v_lo, v_hi);

    SvgCanvas c(640, 420);
    c.text(320, 20, t.rows.front()[c_feature] + " observation at layer " + t.rows.front()[c_layer],
           13, "middle");
    const LinearScale sx(0.0, step_hi, 60, 610);
    const LinearScale sy(lo, hi, 360, 46);
    draw_axes(c, sx, sy, "step", "observation (normalized units)");
    c.line(sx(0.0), sy(zmin), sx(step_hi), sy(zmin), "#333", 1.0);
    c.line(sx(0.0), sy(zmax), sx(step_hi), sy(zmax), "#333", 1.0);
    c.text(sx(step_hi) - 4, sy(zmax) - 4, "target bounds", 9, "end", "#333");

    std::vector<std::pair<std::string, std::string>> legend;
    for (const auto& row : t.rows) {
        const std::string& method = row[c_method];
        const char* color = method_color(method);
        c.circle(sx(cell_num(row[c_step])), sy(cell_num(row[c_zeta])), 1.8, color, 0.45);
        if (std::find_if(legend.begin(), legend.end(), [&](const auto& item) {
                return item.first == method;
            }) == legend.end()) {
            legend.emplace_back(method, color);
        }
    }
    draw_legend(c, 70, 60, legend);
    c.save(path);
}

void render_tradeoff(const Table& t, const std::string& study_id, const std::string& path) {
    const std::size_t c_cond = column(t, "condition");
    const std::size_t c_method = column(t, "method");
    const std::size_t c_succ = column(t, "success_mean");
    const std::size_t c_succ_std = column(t, "success_std");
    const std::size_t c_phys = column(t, "phys_sat_mean");
    const std::size_t c_phys_std = column(t, "phys_sat_std");

    SvgCanvas c(640, 420);
    c.text(320, 20, "study " + study_id + ": constraint satisfaction vs task success", 13,
           "middle");
    const LinearScale sx(0.0, 1.02, 60, 610);
    const LinearScale sy(0.0, 1.05, 360, 46);
    draw_axes(c, sx, sy, "physical satisfaction rate", "success rate");

    const double px_per_x = (sx(1.0) - sx(0.0));
    const double px_per_y = (sy(0.0) - sy(1.0));
    std::vector<std::pair<std::string, std::string>> legend;
    for (const auto& row : t.rows) {
        const std::string& method = row[c_method];
        const char* color = method_color(method);
        const double cx = sx(cell_num(row[c_phys]));
        const double cy = sy(cell_num(row[c_succ]));
        const double rx = std::max(2.0, cell_num(row[c_phys_std]) * px_per_x);
        const double ry = std::max(2.0, cell_num(row[c_succ_std]) * px_per_y);
        c.ellipse(cx, cy, rx, ry, 0.0, color, 1.5, "none", 0.85);
        c.circle(cx, cy, 2.5, color);
        c.text(cx + 6, cy - 6, row[c_cond], 9, "start", color);
        if (std::find_if(legend.begin(), legend.end(), [&](const auto& item) {
                return item.first == method;
            }) == legend.end()) {
            legend.emplace_back(method, color);
        }
    }
    draw_legend(c, 70, 60, legend);
    c.save(path);
}

void render_violin(const Table& t, const std::string& study_id, const std::string& path) {
    const std::size_t c_cond = column(t, "condition");
    const std::size_t c_method = column(t, "method");
    const std::size_t c_value = column(t, "value");

    struct Group {
        std::string condition;
        std::string method;
        std::vector<double> values;
    };
    std::vector<Group> groups;
    double v_lo = kInf, v_hi = -kInf;
    for (const auto& row : t.rows) {
        const double v = cell_num(row[c_value]);
        v_lo = std::min(v_lo, v);
        v_hi = std::max(v_hi, v);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return g.condition == row[c_cond] && g.method == row[c_method];
        });
        if (it == groups.end()) {
            groups.push_back({row[c_cond], row[c_method], {}});
            it = groups.end() - 1;
        }
        it->values.push_back(v);
    }
    if (groups.empty()) throw ConfigError("table '" + t.path + "': no data rows");
    const auto [lo, hi] = padded(v_lo, v_hi);

    SvgCanvas c(640, 440);
    c.text(320, 20, "study " + study_id + ": realized measure in the constraint window", 13,
           "middle");
    const double G = static_cast<double>(groups.size());
    const LinearScale sx(0.0, G, 60, 610);
    const LinearScale sy(lo, hi, 360, 46);
    draw_axes(c, sx, sy, "", "measured value");

    constexpr int kBins = 24;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        Group& g = groups[gi];
        const double cx = sx(static_cast<double>(gi) + 0.5);
        const double half_max = 0.42 * (sx(1.0) - sx(0.0));
        std::vector<int> counts(kBins, 0);
        for (double v : g.values) {
            int b = static_cast<int>((v - lo) / (hi - lo) * kBins);
            b = std::clamp(b, 0, kBins - 1);
            ++counts[static_cast<std::size_t>(b)];
        }
        const int peak = *std::max_element(counts.begin(), counts.end());
        if (peak == 0) continue;

        // Mirrored histogram outline: up the left flank, down the right.
        std::vector<std::pair<double, double>> pts;
        pts.emplace_back(cx, sy(lo));
        for (int b = 0; b < kBins; ++b) {
            const double w = half_max * counts[static_cast<std::size_t>(b)] / peak;
            const double y0 = sy(lo + (hi - lo) * b / kBins);
            const double y1 = sy(lo + (hi - lo) * (b + 1) / kBins);
            pts.emplace_back(cx - w, y0);
            pts.emplace_back(cx - w, y1);
        }
        pts.emplace_back(cx, sy(hi));
        for (int b = kBins - 1; b >= 0; --b) {
            const double w = half_max * counts[static_cast<std::size_t>(b)] / peak;
            const double y0 = sy(lo + (hi - lo) * b / kBins);
            const double y1 = sy(lo + (hi - lo) * (b + 1) / kBins);
            pts.emplace_back(cx + w, y1);
            pts.emplace_back(cx + w, y0);
        }
        const char* color = method_color(g.method);
        c.polygon(pts, color, 0.55);
        const double med = median(std::move(g.values));
        c.line(cx - half_max * 0.5, sy(med), cx + half_max * 0.5, sy(med), "#333", 1.2);
        c.text(cx, 376, g.condition, 9, "middle");
        c.text(cx, 388, g.method, 9, "middle", color);
    }
    c.save(path);
}

void append_violin_summary(std::ofstream& out, const Table& t, const std::string& study_id) {
    const std::size_t c_cond = column(t, "condition");
    const std::size_t c_method = column(t, "method");
    const std::size_t c_value = column(t, "value");
    std::vector<std::pair<std::pair<std::string, std::string>, std::vector<double>>> groups;
    for (const auto& row : t.rows) {
        const auto key = std::make_pair(row[c_cond], row[c_method]);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == key; });
        if (it == groups.end()) {
            groups.push_back({key, {}});
            it = groups.end() - 1;
        }
        it->second.push_back(cell_num(row[c_value]));
    }
    for (auto& [key, values] : groups) {
        out << study_id << ',' << key.first << ',' << key.second << ',' << values.size() << ','
            << format_double(mean(values)) << ',' << format_double(percentile(values, 25.0)) << ','
            << format_double(median(values)) << ',' << format_double(percentile(values, 75.0))
            << '\n';
    }
}

}  // namespace

void summarize(const std::string& results_dir) {
    namespace fs = std::filesystem;
    const fs::path tables = fs::path(results_dir) / "tables";
    const fs::path plots = fs::path(results_dir) / "plots";

    std::vector<std::string> missing;
    const auto need = [&](const fs::path& p) {
        if (!fs::exists(p)) missing.push_back(p.string());
        return p.string();
    };
    const std::string probe_path = need(tables / "probe_report.csv");
    const std::string sweep_path = need(tables / "perturb_sweep.csv");
    const std::string image_path = need(tables / "classifier_image.csv");

    std::vector<std::string> study_ids;
    if (fs::is_directory(tables)) {
        const std::string prefix = "study_";
        const std::string suffix = "_tradeoff.csv";
        for (const auto& entry : fs::directory_iterator(tables)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > prefix.size() + suffix.size() && name.starts_with(prefix) &&
                name.ends_with(suffix)) {
                study_ids.push_back(
                    name.substr(prefix.size(), name.size() - prefix.size() - suffix.size()));
            }
        }
        std::sort(study_ids.begin(), study_ids.end());
    }
    if (study_ids.empty()) missing.push_back((tables / "study_<id>_tradeoff.csv").string());
    for (const std::string& id : study_ids) need(tables / ("study_" + id + "_violin.csv"));

    if (!missing.empty()) {
        std::string msg = "report inputs missing:";
        for (const std::string& m : missing) msg += ' ' + m;
        throw MissingArtifactError(msg);
    }

    fs::create_directories(plots);
    render_probe_layers(read_csv(probe_path), (plots / "probe_layers.svg").string());
    render_layer_sweep(read_csv(sweep_path), (plots / "layer_sweep.svg").string());
    render_classifier_image(read_csv(image_path), (plots / "classifier_image.svg").string());

    const std::string summary_path = (tables / "violin_summary.csv").string();
    std::ofstream summary = open_table(summary_path);
    summary << "study_id,condition,method,count,mean,p25,median,p75\n";
    for (const std::string& id : study_ids) {
        const Table tr = read_csv((tables / ("study_" + id + "_tradeoff.csv")).string());
        const Table vi = read_csv((tables / ("study_" + id + "_violin.csv")).string());
        render_tradeoff(tr, id, (plots / ("tradeoff_" + id + ".svg")).string());
        render_violin(vi, id, (plots / ("violin_" + id + ".svg")).string());
        append_violin_summary(summary, vi, id);
    }
    close_table(summary, summary_path);
}

}  // namespace actuate
