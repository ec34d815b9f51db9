#include "actuate/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "actuate/errors.hpp"
#include "actuate/stats.hpp"

namespace actuate {

std::vector<int> PlanEntry::layers() const {
    std::vector<int> out;
    out.reserve(observers.size());
    for (const Observer& o : observers) out.push_back(o.layer);
    return out;
}

PlanEntry make_plan_entry(std::vector<Observer> observers, double phys_min, double phys_max,
                          int window_start, int window_len) {
    if (observers.empty()) throw ConfigError("plan entry: needs at least one observer");
    std::sort(observers.begin(), observers.end(),
              [](const Observer& a, const Observer& b) { return a.layer < b.layer; });
    for (const Observer& o : observers) {
        if (o.feature.feature_id != observers.front().feature.feature_id) {
            throw ConfigError("plan entry: observers mix features");
        }
    }
    PlanEntry e;
    e.target = physical_to_normalized(observers.front().feature, phys_min, phys_max);
    e.observers = std::move(observers);
    e.phys_min = phys_min;
    e.phys_max = phys_max;
    e.window_start = window_start;
    e.window_len = window_len;
    return e;
}

void validate_plan(const SteeringPlan& plan, int T, int horizon) {
    std::vector<std::pair<int, std::string>> seen;
    for (const PlanEntry& e : plan.entries) {
        if (e.observers.empty()) throw ConfigError("plan entry: no observers");
        validate_target(e.target);
        if (e.window_start < 0 || e.window_len < 0) {
            throw ConfigError("plan entry: negative window");
        }
        if (e.window_len > 0 && e.window_start >= horizon) {
            throw ConfigError("plan entry: window starts at step " +
                              std::to_string(e.window_start) + ", beyond horizon " +
                              std::to_string(horizon));
        }
        for (const Observer& o : e.observers) {
            if (o.layer < 1 || o.layer > T) {
                throw ConfigError("plan entry: layer " + std::to_string(o.layer) +
                                  " outside [1, " + std::to_string(T) + "]");
            }
            if (l2_norm(o.w) == 0.0) {
                throw NumericalError("plan entry: observer '" + o.feature.feature_id +
                                     "' at layer " + std::to_string(o.layer) +
                                     " has zero weights (unobservable direction)");
            }
            const auto key = std::make_pair(o.layer, o.feature.feature_id);
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
                throw ConfigError("plan: duplicate controller for feature '" + key.second +
                                  "' at layer " + std::to_string(key.first));
            }
            seen.push_back(key);
        }
    }
    for (int l : plan.observe_only) {
        if (l < 1 || l > T) {
            throw ConfigError("plan observe_only: layer " + std::to_string(l) +
                              " outside [1, " + std::to_string(T) + "]");
        }
    }
}

std::vector<int> plan_observed_layers(const SteeringPlan& plan) {
    std::vector<int> layers = plan.observe_only;
    for (const PlanEntry& e : plan.entries) {
        for (const Observer& o : e.observers) layers.push_back(o.layer);
    }
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    return layers;
}

namespace {

double to_physical(const Observer& obs, double zeta_norm) {
    if (obs.feature.kind == FeatureKind::Binary) {
        return 1.0 / (1.0 + std::exp(-zeta_norm));
    }
    return obs.feature.denormalize(zeta_norm);
}

struct SteerState {
    const SteeringPlan* plan = nullptr;
    int step_index = 0;
    StepLog log;
    double steering_seconds = 0.0;
};

// Applies every entry that controls or observes this layer, editing x in
// place; returns whether anything changed.
bool apply_layer(SteerState& st, int layer, Vector& x) {
    bool changed = false;
    for (std::size_t ei = 0; ei < st.plan->entries.size(); ++ei) {
        const PlanEntry& e = st.plan->entries[ei];
        for (const Observer& obs : e.observers) {
            if (obs.layer != layer) continue;
            EntryLog& el = st.log.entries[ei];
            if (e.in_window(st.step_index)) {
                const Intervention iv = minimal_intervention(obs, x, e.target);
                if (iv.active) {
                    for (std::size_t i = 0; i < x.size(); ++i) x[i] += iv.u[i];
                    changed = true;
                }
                el.pre_zeta = to_physical(obs, iv.pre_zeta);
                el.post_zeta = to_physical(obs, iv.post_zeta);
                el.u_norm = std::sqrt(el.u_norm * el.u_norm + dot(iv.u, iv.u));
                el.active = el.active || iv.active;
            } else {
                const double zeta = to_physical(obs, dot(obs.w, x) + obs.b);
                el.pre_zeta = zeta;
                el.post_zeta = zeta;
            }
        }
    }
    return changed;
}

// Shared engine for the two public entry points: one steered pass returning
// the action, the log, and the full trace.
std::tuple<Action, StepLog, LayerTrace> steered_pass(const TransformerWeights& weights,
                                                     const TokenSequence& tokens,
                                                     const SteeringPlan& plan, int step_index,
                                                     const std::vector<int>& observed) {
    using clock = std::chrono::steady_clock;

    SteerState st;
    st.plan = &plan;
    st.step_index = step_index;
    st.log.step_index = step_index;
    st.log.entries.resize(plan.entries.size());

    HookSet hooks;
    hooks.observers_at = observed;
    for (const PlanEntry& e : plan.entries) {
        for (const Observer& o : e.observers) hooks.controllers_at.push_back(o.layer);
    }
    std::sort(hooks.controllers_at.begin(), hooks.controllers_at.end());
    hooks.controllers_at.erase(
        std::unique(hooks.controllers_at.begin(), hooks.controllers_at.end()),
        hooks.controllers_at.end());
    if (!hooks.controllers_at.empty()) {
        hooks.on_control = [&st](int layer, const Vector& readout) {
            const auto t0 = clock::now();
            Vector x = readout;
            apply_layer(st, layer, x);
            st.steering_seconds += std::chrono::duration<double>(clock::now() - t0).count();
            return x;
        };
    }

    const auto start = clock::now();
    auto [trace, action] = forward(weights, tokens, hooks);
    st.log.forward_seconds = std::chrono::duration<double>(clock::now() - start).count();
    st.log.steering_seconds = st.steering_seconds;
    st.log.action = action;
    return {action, std::move(st.log), std::move(trace)};
}

}  // namespace

std::pair<Action, StepLog> steered_forward(const TransformerWeights& weights,
                                           const TokenSequence& tokens, const SteeringPlan& plan,
                                           int step_index) {
    auto [action, log, trace] =
        steered_pass(weights, tokens, plan, step_index, plan_observed_layers(plan));
    return {action, std::move(log)};
}

Episode steered_rollout(const TransformerWeights& weights, std::uint64_t env_seed,
                        const TaskSpec& task, const SteeringPlan& plan, const EnvParams& params) {
    validate_plan(plan, weights.config.T, task.horizon);
    const std::vector<int> observed = plan_observed_layers(plan);

    Episode ep;
    ep.task_id = task.task_id;
    ep.instruction = task.instruction;
    ep.env_seed = env_seed;
    ep.observed_layers = observed;

    WorldState w = reset(env_seed, task, params);
    // Terminates like every other rollout: first success or horizon.
    while (w.step_index < task.horizon && !is_success(w)) {
        auto [action, log, trace] =
            steered_pass(weights, encode(w, params), plan, w.step_index, observed);

        StepRecord rec;
        rec.robot = w.robot;
        rec.object_position = w.object_position;
        rec.object_grasped = w.object_grasped;
        rec.action = action;
        rec.activations.reserve(observed.size());
        for (int l : observed) {
            rec.activations.push_back(
                std::move(trace.activations[static_cast<std::size_t>(l - 1)]));
        }
        ep.steps.push_back(std::move(rec));
        ep.logs.push_back(std::move(log));
        w = step(w, action, params);
    }
    ep.final_robot = w.robot;
    ep.final_object = w.object_position;
    ep.success = is_success(w);
    return ep;
}

std::pair<double, double> overhead_benchmark(const TransformerWeights& weights,
                                             const SteeringPlan& plan, int n_passes) {
    if (n_passes < 100) throw ConfigError("overhead_benchmark: need at least 100 passes");
    validate_plan(plan, weights.config.T, std::numeric_limits<int>::max());

    // A representative mid-task state; any fixed input works since both
    // timings share it.
    const TaskSpec task = canonical_tasks().front();
    const WorldState w = reset(12345, task, EnvParams{});
    const TokenSequence tokens = encode(w);

    // Pick a step inside every entry's window so controllers actually run.
    int step_index = 0;
    for (const PlanEntry& e : plan.entries) {
        if (e.window_len > 0) step_index = std::max(step_index, e.window_start);
    }

    using clock = std::chrono::steady_clock;
    std::vector<double> base(static_cast<std::size_t>(n_passes));
    std::vector<double> steered(static_cast<std::size_t>(n_passes));
    for (int i = 0; i < n_passes; ++i) {
        const auto t0 = clock::now();
        (void)forward(weights, tokens);
        const auto t1 = clock::now();
        (void)steered_forward(weights, tokens, plan, step_index);
        const auto t2 = clock::now();
        base[static_cast<std::size_t>(i)] = std::chrono::duration<double>(t1 - t0).count();
        steered[static_cast<std::size_t>(i)] = std::chrono::duration<double>(t2 - t1).count();
    }
    return {median(base), median(steered)};
}

namespace {

const Observer& find_observer(const std::vector<Observer>& bank, const std::string& feature_id,
                              int layer) {
    for (const Observer& o : bank) {
        if (o.feature.feature_id == feature_id && o.layer == layer) return o;
    }
    throw ConfigError("plan references observer '" + feature_id + "' at layer " +
                      std::to_string(layer) + ", not present in the bank");
}

double bound_from_json(const nlohmann::json& j, const char* key, double open_value) {
    if (!j.contains(key) || j.at(key).is_null()) return open_value;
    return j.at(key).get<double>();
}

}  // namespace

SteeringPlan plan_from_json_text(const std::string& text, const std::vector<Observer>& bank,
                                 int horizon) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("steering plan: invalid JSON: ") + e.what());
    }
    if (!root.is_array()) throw ConfigError("steering plan: expected a JSON array of entries");

    constexpr double inf = std::numeric_limits<double>::infinity();
    SteeringPlan plan;
    for (const auto& j : root) {
        std::string feature_id;
        std::vector<int> layers;
        try {
            feature_id = j.at("feature_id").get<std::string>();
            if (j.contains("layers")) {
                if (j.at("layers").is_array()) {
                    layers = j.at("layers").get<std::vector<int>>();
                } else {
                    layers.push_back(j.at("layers").get<int>());
                }
            } else if (j.contains("layer")) {
                layers.push_back(j.at("layer").get<int>());
            } else {
                throw ConfigError("steering plan entry for '" + feature_id +
                                  "': missing 'layer' or 'layers'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("steering plan entry: ") + e.what());
        }

        std::vector<Observer> observers;
        for (int l : layers) observers.push_back(find_observer(bank, feature_id, l));

        const double lo = bound_from_json(j, "zeta_min", -inf);
        const double hi = bound_from_json(j, "zeta_max", inf);
        int window_start = 0;
        int window_len = horizon;
        try {
            if (j.contains("window_start")) window_start = j.at("window_start").get<int>();
            if (j.contains("window_len")) window_len = j.at("window_len").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("steering plan window: ") + e.what());
        }
        plan.entries.push_back(
            make_plan_entry(std::move(observers), lo, hi, window_start, window_len));
    }
    return plan;
}

SteeringPlan load_plan(const std::string& path, const std::vector<Observer>& bank, int horizon) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("steering plan not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return plan_from_json_text(ss.str(), bank, horizon);
}

// ---------------------------------------------------------------------------
// Episode persistence: JSONL metadata plus a binary activation sidecar.

namespace {

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("episode file: expected 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json robot_json(const RobotState& r) {
    return {{"pos", vec3_json(r.position)},
            {"rpy", vec3_json(r.orientation)},
            {"grip", r.gripper}};
}

RobotState robot_from(const nlohmann::json& j) {
    RobotState r;
    r.position = vec3_from(j.at("pos"));
    r.orientation = vec3_from(j.at("rpy"));
    r.gripper = j.at("grip").get<double>();
    return r;
}

void put_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64_le(const std::string& buf, std::size_t off) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + static_cast<std::size_t>(i)]))
                << (8 * i);
    }
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

std::string sidecar_path(const std::string& jsonl_path) { return jsonl_path + ".bin"; }

}  // namespace

void save_episodes(const std::string& jsonl_path, const std::vector<Episode>& episodes) {
    std::string payload;
    std::ofstream f(jsonl_path, std::ios::binary);
    if (!f) throw ConfigError("cannot write episode file: " + jsonl_path);

    for (const Episode& ep : episodes) {
        nlohmann::json header = {{"type", "episode"},
                                 {"task_id", ep.task_id},
                                 {"instruction", to_string(ep.instruction)},
                                 {"env_seed", ep.env_seed},
                                 {"observed_layers", ep.observed_layers},
                                 {"steps", ep.steps.size()},
                                 {"success", ep.success},
                                 {"final_robot", robot_json(ep.final_robot)},
                                 {"final_object", vec3_json(ep.final_object)}};
        f << header.dump() << "\n";

        const bool logged = !ep.logs.empty();
        if (logged && ep.logs.size() != ep.steps.size()) {
            throw ConfigError("save_episodes: steps and logs disagree in length");
        }
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            const StepRecord& rec = ep.steps[s];
            std::size_t count = 0;
            const std::size_t offset = payload.size();
            for (const Vector& a : rec.activations) {
                for (double v : a) put_f64_le(payload, v);
                count += a.size();
            }
            nlohmann::json line = {{"type", "step"},
                                   {"step", s},
                                   {"robot", robot_json(rec.robot)},
                                   {"object", vec3_json(rec.object_position)},
                                   {"grasped", rec.object_grasped},
                                   {"action", rec.action.delta},
                                   {"act_offset", offset},
                                   {"act_count", count}};
            if (logged) {
                nlohmann::json logs = nlohmann::json::array();
                for (const EntryLog& el : ep.logs[s].entries) {
                    logs.push_back({{"pre_zeta", el.pre_zeta},
                                    {"post_zeta", el.post_zeta},
                                    {"u_norm", el.u_norm},
                                    {"active", el.active}});
                }
                line["log"] = std::move(logs);
            }
            f << line.dump() << "\n";
        }
    }
    if (!f) throw ConfigError("short write on episode file: " + jsonl_path);

    std::ofstream sf(sidecar_path(jsonl_path), std::ios::binary);
    if (!sf) throw ConfigError("cannot write activation sidecar for: " + jsonl_path);
    sf.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!sf) throw ConfigError("short write on activation sidecar for: " + jsonl_path);
}

std::vector<Episode> load_episodes(const std::string& jsonl_path) {
    std::ifstream f(jsonl_path, std::ios::binary);
    if (!f) throw MissingArtifactError("episode file not found: " + jsonl_path);
    std::ifstream sf(sidecar_path(jsonl_path), std::ios::binary);
    if (!sf) throw MissingArtifactError("activation sidecar not found for: " + jsonl_path);
    std::string payload((std::istreambuf_iterator<char>(sf)), std::istreambuf_iterator<char>());

    std::vector<Episode> episodes;
    std::string line;
    std::size_t line_no = 0;
    std::size_t steps_expected = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(jsonl_path + ":" + std::to_string(line_no) + ": invalid JSON: " +
                              e.what());
        }
        try {
            const std::string type = j.at("type").get<std::string>();
            if (type == "episode") {
                if (!episodes.empty() && episodes.back().steps.size() != steps_expected) {
                    throw ConfigError(jsonl_path + ": truncated episode block");
                }
                Episode ep;
                ep.task_id = j.at("task_id").get<std::string>();
                ep.instruction = instruction_from_string(j.at("instruction").get<std::string>());
                ep.env_seed = j.at("env_seed").get<std::uint64_t>();
                ep.observed_layers = j.at("observed_layers").get<std::vector<int>>();
                ep.success = j.at("success").get<bool>();
                ep.final_robot = robot_from(j.at("final_robot"));
                ep.final_object = vec3_from(j.at("final_object"));
                steps_expected = j.at("steps").get<std::size_t>();
                episodes.push_back(std::move(ep));
            } else if (type == "step") {
                if (episodes.empty()) {
                    throw ConfigError(jsonl_path + ": step line before any episode header");
                }
                Episode& ep = episodes.back();
                StepRecord rec;
                rec.robot = robot_from(j.at("robot"));
                rec.object_position = vec3_from(j.at("object"));
                rec.object_grasped = j.at("grasped").get<bool>();
                const auto delta = j.at("action").get<std::vector<double>>();
                if (delta.size() != rec.action.delta.size()) {
                    throw ConfigError(jsonl_path + ": action must have 7 components");
                }
                std::copy(delta.begin(), delta.end(), rec.action.delta.begin());

                const auto offset = j.at("act_offset").get<std::size_t>();
                const auto count = j.at("act_count").get<std::size_t>();
                if (offset > payload.size() || count > (payload.size() - offset) / 8) {
                    throw ConfigError(jsonl_path + ": activation sidecar truncated");
                }
                const std::size_t n_layers = ep.observed_layers.size();
                if (n_layers > 0) {
                    if (count % n_layers != 0) {
                        throw ConfigError(jsonl_path + ": activation count not divisible by layers");
                    }
                    const std::size_t per = count / n_layers;
                    rec.activations.resize(n_layers);
                    std::size_t off = offset;
                    for (std::size_t li = 0; li < n_layers; ++li) {
                        rec.activations[li].resize(per);
                        for (std::size_t k = 0; k < per; ++k, off += 8) {
                            rec.activations[li][k] = get_f64_le(payload, off);
                        }
                    }
                } else if (count != 0) {
                    throw ConfigError(jsonl_path + ": activations present without observed layers");
                }

                if (j.contains("log")) {
                    StepLog sl;
                    sl.step_index = static_cast<int>(j.at("step").get<std::size_t>());
                    sl.action = rec.action;
                    for (const auto& lj : j.at("log")) {
                        EntryLog el;
                        el.pre_zeta = lj.at("pre_zeta").get<double>();
                        el.post_zeta = lj.at("post_zeta").get<double>();
                        el.u_norm = lj.at("u_norm").get<double>();
                        el.active = lj.at("active").get<bool>();
                        sl.entries.push_back(el);
                    }
                    ep.logs.push_back(std::move(sl));
                }
                ep.steps.push_back(std::move(rec));
            } else {
                throw ConfigError(jsonl_path + ": unknown line type '" + type + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(jsonl_path + ":" + std::to_string(line_no) + ": bad record: " +
                              e.what());
        }
    }
    if (!episodes.empty() && episodes.back().steps.size() != steps_expected) {
        throw ConfigError(jsonl_path + ": truncated final episode block");
    }
    return episodes;
}

}  // namespace actuate
