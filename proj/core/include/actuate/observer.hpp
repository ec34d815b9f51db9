#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "actuate/episode.hpp"
#include "actuate/numkit.hpp"

namespace actuate {

enum class FeatureKind { Continuous, Binary };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

// A named rule turning an episode step into a scalar label, plus the affine
// normalization fitted on training labels (identity for binary features).
// Known feature_ids: state_x, state_y, state_z, gripper_state (binary,
// aperture thresholded at 0.5), action_dx, action_dy, action_dz, action_dg,
// and speed (realized displacement norm over dt).
struct FeatureSpec {
    std::string feature_id;
    FeatureKind kind = FeatureKind::Continuous;
    double norm_mean = 0.0;
    double norm_std = 1.0;

    double normalize(double raw) const { return (raw - norm_mean) / norm_std; }
    double denormalize(double z) const { return z * norm_std + norm_mean; }
};

FeatureSpec make_feature(const std::string& feature_id);
std::vector<std::string> known_feature_ids();

double extract_feature(const Episode& ep, std::size_t step, const std::string& feature_id,
                       double dt);

// Fits norm_mean/norm_std on the raw labels of the given episodes. Binary
// features keep the identity map so labels remain exactly {0, 1}.
void fit_normalization(FeatureSpec& spec, const std::vector<Episode>& episodes, double dt);

struct Observer {
    int layer = 0;
    FeatureSpec feature;
    Vector w;   // d entries
    double b = 0.0;
};

// Observation in normalized label units: w'x + b for continuous features,
// sigmoid(w'x + b) (a probability) for binary ones.
double observe(const Observer& obs, const Vector& x);
// Continuous observations mapped back to raw feature units; binary
// observations stay probabilities.
double observe_raw(const Observer& obs, const Vector& x);

using LabeledPair = std::pair<Vector, double>;

// One (activation, normalized label) pair per step of every episode.
std::vector<LabeledPair> collect_pairs(const std::vector<Episode>& episodes, int layer,
                                       const FeatureSpec& feature, double dt);

// Continuous: ridge regression with the penalty on w only (bias via
// centering). Binary: logistic regression by iteratively reweighted least
// squares, ridge penalty on w, at most 100 Newton steps, gradient-norm stop
// at 1e-8. The returned Observer carries w and b only; the caller attaches
// layer and feature.
Observer train_observer(const std::vector<LabeledPair>& pairs, FeatureKind kind, double lambda);

struct ObserverMetrics {
    double value = 0.0;     // MAE in raw units, or accuracy
    double baseline = 0.0;  // train-mean-prediction MAE, or majority-class rate
};

ObserverMetrics evaluate_observer(const Observer& obs, const std::vector<LabeledPair>& pairs);

// Max |f(x + eps d) - f(x)| over unit-norm random directions d, with f the
// linear observation w'x + b; always bounded by eps * ||w||.
double robustness_check(const Observer& obs, const std::vector<Vector>& activations,
                        double epsilon, int trials, std::uint64_t seed);

struct LayerMetrics {
    int layer = 0;
    ObserverMetrics metrics;
};

// Argmin validation MAE (continuous) or argmax accuracy (binary); ties go to
// the smaller layer index.
int best_layer(const std::vector<LayerMetrics>& reports, FeatureKind kind);

struct RobustnessPoint {
    double epsilon = 0.0;
    double delta = 0.0;
    double bound = 0.0;  // epsilon * ||w|| at the probed layer
};

struct ProbeReport {
    std::string feature_id;
    FeatureKind kind = FeatureKind::Continuous;
    std::vector<LayerMetrics> per_layer;
    int best = 0;
    std::vector<RobustnessPoint> robustness;
};

// JSON object per observer: {feature_id, kind, layer, b, norm_params, W};
// files hold either one object or an array of them.
void save_observers(const std::string& path, const std::vector<Observer>& observers);
std::vector<Observer> load_observers(const std::string& path);

// CSV with header layer,feature_id,metric,value,baseline. Metric rows are
// mae/accuracy per layer plus one robust_delta row per robustness point
// (the baseline column holds the eps*||w|| bound).
void save_probe_report_csv(const std::string& path, const std::vector<ProbeReport>& reports);

}  // namespace actuate
