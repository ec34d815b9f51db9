#include "actuate/observer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "actuate/errors.hpp"

namespace actuate {

const char* to_string(FeatureKind kind) {
    return kind == FeatureKind::Binary ? "binary" : "continuous";
}

FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "binary") return FeatureKind::Binary;
    if (s == "continuous") return FeatureKind::Continuous;
    throw ConfigError("unknown feature kind: '" + s + "'");
}

std::vector<std::string> known_feature_ids() {
    return {"state_x",   "state_y",   "state_z",   "gripper_state", "action_dx",
            "action_dy", "action_dz", "action_dg", "speed"};
}

FeatureSpec make_feature(const std::string& feature_id) {
    const auto known = known_feature_ids();
    if (std::find(known.begin(), known.end(), feature_id) == known.end()) {
        throw ConfigError("unknown feature_id: '" + feature_id + "'");
    }
    FeatureSpec spec;
    spec.feature_id = feature_id;
    spec.kind = feature_id == "gripper_state" ? FeatureKind::Binary : FeatureKind::Continuous;
    return spec;
}

double extract_feature(const Episode& ep, std::size_t step, const std::string& feature_id,
                       double dt) {
    if (step >= ep.steps.size()) throw ConfigError("extract_feature: step out of range");
    const StepRecord& rec = ep.steps[step];
    if (feature_id == "state_x") return rec.robot.position.x;
    if (feature_id == "state_y") return rec.robot.position.y;
    if (feature_id == "state_z") return rec.robot.position.z;
    if (feature_id == "gripper_state") return rec.robot.gripper >= 0.5 ? 1.0 : 0.0;
    if (feature_id == "action_dx") return rec.action.delta[0];
    if (feature_id == "action_dy") return rec.action.delta[1];
    if (feature_id == "action_dz") return rec.action.delta[2];
    if (feature_id == "action_dg") return rec.action.delta[6];
    if (feature_id == "speed") {
        // Realized displacement: clipping and execution jitter included.
        const Vec3 next = step + 1 < ep.steps.size() ? ep.steps[step + 1].robot.position
                                                     : ep.final_robot.position;
        return distance(next, rec.robot.position) / dt;
    }
    throw ConfigError("unknown feature_id: '" + feature_id + "'");
}

void fit_normalization(FeatureSpec& spec, const std::vector<Episode>& episodes, double dt) {
    if (spec.kind == FeatureKind::Binary) {
        spec.norm_mean = 0.0;
        spec.norm_std = 1.0;
        return;
    }
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const Episode& ep : episodes) {
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            const double v = extract_feature(ep, s, spec.feature_id, dt);
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    }
    if (n == 0) throw ConfigError("fit_normalization: no steps in training episodes");
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sum_sq / static_cast<double>(n) - mean * mean, 0.0);
    spec.norm_mean = mean;
    // A constant feature keeps unit scale so normalization stays invertible.
    spec.norm_std = var > 1e-24 ? std::sqrt(var) : 1.0;
}

namespace {

std::size_t layer_slot(const Episode& ep, int layer) {
    const auto it = std::find(ep.observed_layers.begin(), ep.observed_layers.end(), layer);
    if (it == ep.observed_layers.end()) {
        throw ConfigError("episode for task '" + ep.task_id + "' did not record layer " +
                          std::to_string(layer));
    }
    return static_cast<std::size_t>(it - ep.observed_layers.begin());
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double observe(const Observer& obs, const Vector& x) {
    if (x.size() != obs.w.size()) throw ConfigError("observe: activation dimension mismatch");
    const double z = dot(obs.w, x) + obs.b;
    return obs.feature.kind == FeatureKind::Binary ? sigmoid(z) : z;
}

double observe_raw(const Observer& obs, const Vector& x) {
    const double v = observe(obs, x);
    return obs.feature.kind == FeatureKind::Binary ? v : obs.feature.denormalize(v);
}

std::vector<LabeledPair> collect_pairs(const std::vector<Episode>& episodes, int layer,
                                       const FeatureSpec& feature, double dt) {
    std::vector<LabeledPair> pairs;
    for (const Episode& ep : episodes) {
        if (ep.steps.empty()) continue;
        const std::size_t slot = layer_slot(ep, layer);
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            const double raw = extract_feature(ep, s, feature.feature_id, dt);
            pairs.emplace_back(ep.steps[s].activations[slot], feature.normalize(raw));
        }
    }
    return pairs;
}

namespace {

struct Centered {
    Matrix x;        // n x d, mean removed
    Vector x_mean;   // d
    Vector labels;   // n
};

Centered center_pairs(const std::vector<LabeledPair>& pairs) {
    const std::size_t n = pairs.size();
    const std::size_t d = pairs.front().first.size();
    Centered c;
    c.x = Matrix(n, d);
    c.x_mean.assign(d, 0.0);
    c.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pairs[i].first.size() != d) {
            throw ConfigError("train_observer: inconsistent activation dimensions");
        }
        for (std::size_t j = 0; j < d; ++j) {
            c.x.at(i, j) = pairs[i].first[j];
            c.x_mean[j] += pairs[i].first[j];
        }
        c.labels[i] = pairs[i].second;
    }
    for (double& v : c.x_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) c.x.at(i, j) -= c.x_mean[j];
    }
    return c;
}

Observer train_continuous(const Centered& c, double lambda) {
    const std::size_t n = c.x.rows;
    const std::size_t d = c.x.cols;
    double y_mean = 0.0;
    for (double v : c.labels) y_mean += v;
    y_mean /= static_cast<double>(n);

    Matrix y(n, 1);
    for (std::size_t i = 0; i < n; ++i) y.at(i, 0) = c.labels[i] - y_mean;

    const Matrix w = ridge_solve(c.x, y, lambda);
    Observer obs;
    obs.w.resize(d);
    for (std::size_t j = 0; j < d; ++j) obs.w[j] = w.at(j, 0);
    obs.b = y_mean - dot(obs.w, c.x_mean);
    return obs;
}

Observer train_binary(const Centered& c, double lambda) {
    const std::size_t n = c.x.rows;
    const std::size_t d = c.x.cols;

    std::size_t ones = 0;
    for (double v : c.labels) {
        if (v != 0.0 && v != 1.0) {
            throw ConfigError("train_observer: binary labels must be 0 or 1");
        }
        if (v == 1.0) ++ones;
    }
    if (ones == 0 || ones == n) {
        throw ConfigError("train_observer: binary data has a single class");
    }

    // Newton / IRLS on theta = (w, b), penalty lambda||w||^2 (bias free).
    Vector theta(d + 1, 0.0);
    Vector p(n), grad(d + 1);
    constexpr int kMaxIters = 100;
    constexpr double kGradTol = 1e-8;
    double grad_norm = 0.0;

    for (int iter = 0; iter <= kMaxIters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double z = theta[d];
            const double* xi = c.x.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) z += theta[j] * xi[j];
            p[i] = sigmoid(z);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = p[i] - c.labels[i];
            const double* xi = c.x.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) grad[j] += r * xi[j];
            grad[d] += r;
        }
        for (std::size_t j = 0; j < d; ++j) grad[j] += lambda * theta[j];
        grad_norm = l2_norm(grad);
        if (grad_norm <= kGradTol) break;
        if (iter == kMaxIters) {
            throw NumericalError("train_observer: IRLS did not converge in " +
                                 std::to_string(kMaxIters) +
                                 " iterations; final gradient norm " + format_double(grad_norm));
        }

        Matrix h(d + 1, d + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::max(p[i] * (1.0 - p[i]), 1e-10);
            const double* xi = c.x.row_ptr(i);
            for (std::size_t a = 0; a < d; ++a) {
                const double sa = s * xi[a];
                double* ha = h.row_ptr(a);
                for (std::size_t bcol = a; bcol < d; ++bcol) ha[bcol] += sa * xi[bcol];
                ha[d] += sa;
            }
            h.at(d, d) += s;
        }
        for (std::size_t a = 0; a < d; ++a) {
            h.at(a, a) += lambda;
            for (std::size_t bcol = a + 1; bcol <= d; ++bcol) h.at(bcol, a) = h.at(a, bcol);
        }

        const Vector delta = solve_spd(std::move(h), grad, "train_observer");
        for (std::size_t j = 0; j <= d; ++j) theta[j] -= delta[j];
    }

    Observer obs;
    obs.w.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
    obs.b = theta[d] - dot(obs.w, c.x_mean);
    return obs;
}

}  // namespace

Observer train_observer(const std::vector<LabeledPair>& pairs, FeatureKind kind, double lambda) {
    if (pairs.size() < 2) throw ConfigError("train_observer: need at least 2 pairs");
    if (lambda < 0.0) throw ConfigError("train_observer: lambda must be nonnegative");
    const Centered c = center_pairs(pairs);
    Observer obs = kind == FeatureKind::Binary ? train_binary(c, lambda)
                                               : train_continuous(c, lambda);
    obs.feature.kind = kind;
    ensure_finite(obs.w, "observer weights");
    return obs;
}

ObserverMetrics evaluate_observer(const Observer& obs, const std::vector<LabeledPair>& pairs) {
    if (pairs.empty()) throw ConfigError("evaluate_observer: no pairs");
    ObserverMetrics m;
    if (obs.feature.kind == FeatureKind::Binary) {
        std::size_t correct = 0, ones = 0;
        for (const auto& [x, label] : pairs) {
            const bool pred = observe(obs, x) >= 0.5;
            const bool truth = label >= 0.5;
            if (pred == truth) ++correct;
            if (truth) ++ones;
        }
        const double n = static_cast<double>(pairs.size());
        m.value = static_cast<double>(correct) / n;
        const double p1 = static_cast<double>(ones) / n;
        m.baseline = std::max(p1, 1.0 - p1);
        return m;
    }
    // Labels arrive normalized; scale the errors back to raw units so MAE is
    // comparable across features. The baseline predicts the training mean,
    // i.e. zero in normalized units.
    double err = 0.0, base = 0.0;
    for (const auto& [x, label] : pairs) {
        err += std::abs(observe(obs, x) - label);
        base += std::abs(label);
    }
    const double n = static_cast<double>(pairs.size());
    m.value = obs.feature.norm_std * err / n;
    m.baseline = obs.feature.norm_std * base / n;
    return m;
}

double robustness_check(const Observer& obs, const std::vector<Vector>& activations,
                        double epsilon, int trials, std::uint64_t seed) {
    if (epsilon < 0.0) throw ConfigError("robustness_check: epsilon must be nonnegative");
    if (trials < 1) throw ConfigError("robustness_check: trials must be >= 1");
    if (activations.empty()) throw ConfigError("robustness_check: no activations");

    const std::size_t d = obs.w.size();
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Vector& x = activations[static_cast<std::size_t>(t) % activations.size()];
        Vector dir = rng_normal(rng, d, 0.0, 1.0);
        const double nrm = l2_norm(dir);
        if (nrm == 0.0) continue;
        Vector moved(x);
        for (std::size_t j = 0; j < d; ++j) moved[j] += epsilon * dir[j] / nrm;
        // Linear observation value for both kinds; the Lipschitz bound
        // eps*||w|| is exact for this map.
        const double before = dot(obs.w, x) + obs.b;
        const double after = dot(obs.w, moved) + obs.b;
        worst = std::max(worst, std::abs(after - before));
    }
    return worst;
}

int best_layer(const std::vector<LayerMetrics>& reports, FeatureKind kind) {
    if (reports.empty()) throw ConfigError("best_layer: no layer metrics");
    const LayerMetrics* best = &reports.front();
    for (const LayerMetrics& r : reports) {
        const bool better = kind == FeatureKind::Binary
                                ? r.metrics.value > best->metrics.value
                                : r.metrics.value < best->metrics.value;
        const bool tie_smaller = r.metrics.value == best->metrics.value && r.layer < best->layer;
        if (better || tie_smaller) best = &r;
    }
    return best->layer;
}

namespace {

nlohmann::json observer_to_json(const Observer& obs) {
    return {{"feature_id", obs.feature.feature_id},
            {"kind", to_string(obs.feature.kind)},
            {"layer", obs.layer},
            {"b", obs.b},
            {"norm_params", {{"mean", obs.feature.norm_mean}, {"std", obs.feature.norm_std}}},
            {"W", obs.w}};
}

Observer observer_from_json(const nlohmann::json& j) {
    Observer obs;
    try {
        obs.feature.feature_id = j.at("feature_id").get<std::string>();
        obs.feature.kind = feature_kind_from_string(j.at("kind").get<std::string>());
        obs.layer = j.at("layer").get<int>();
        obs.b = j.at("b").get<double>();
        obs.feature.norm_mean = j.at("norm_params").at("mean").get<double>();
        obs.feature.norm_std = j.at("norm_params").at("std").get<double>();
        obs.w = j.at("W").get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("observer JSON: ") + e.what());
    }
    if (obs.feature.norm_std <= 0.0) throw ConfigError("observer JSON: norm std must be > 0");
    return obs;
}

}  // namespace

void save_observers(const std::string& path, const std::vector<Observer>& observers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Observer& obs : observers) arr.push_back(observer_to_json(obs));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write observers file: " + path);
    f << arr.dump(2) << "\n";
}

std::vector<Observer> load_observers(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("observers file not found: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("observers file " + path + ": invalid JSON: " + e.what());
    }
    std::vector<Observer> out;
    if (j.is_object()) {
        out.push_back(observer_from_json(j));
    } else if (j.is_array()) {
        for (const auto& item : j) out.push_back(observer_from_json(item));
    } else {
        throw ConfigError("observers file " + path + ": expected object or array");
    }
    return out;
}

void save_probe_report_csv(const std::string& path, const std::vector<ProbeReport>& reports) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write probe report: " + path);
    f << "layer,feature_id,metric,value,baseline\n";
    for (const ProbeReport& r : reports) {
        const char* metric = r.kind == FeatureKind::Binary ? "accuracy" : "mae";
        for (const LayerMetrics& lm : r.per_layer) {
            f << lm.layer << "," << r.feature_id << "," << metric << ","
              << format_double(lm.metrics.value) << "," << format_double(lm.metrics.baseline)
              << "\n";
        }
        for (const RobustnessPoint& p : r.robustness) {
            f << r.best << "," << r.feature_id << ",robust_delta," << format_double(p.delta)
              << "," << format_double(p.bound) << "\n";
        }
    }
}

}  // namespace actuate
