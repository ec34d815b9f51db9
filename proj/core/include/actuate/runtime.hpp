#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "actuate/episode.hpp"
#include "actuate/observer.hpp"
#include "actuate/polnet.hpp"
#include "actuate/steer.hpp"

namespace actuate {

// One steering constraint: keep a feature inside physical bounds while the
// step index lies in [window_start, window_start + window_len). Multi-layer
// entries carry one observer per controlled layer (same feature, per-layer
// weights); the single-layer form is the default everywhere.
struct PlanEntry {
    std::vector<Observer> observers;  // ascending layer order
    double phys_min = 0.0;            // user-facing units; +/-inf for one-sided
    double phys_max = 0.0;
    TargetInterval target;            // normalized; derived from the physical bounds
    int window_start = 0;
    int window_len = 0;               // 0 disarms the entry (observe-only logging)

    bool in_window(int step) const {
        return step >= window_start && step - window_start < window_len;
    }
    const FeatureSpec& feature() const { return observers.front().feature; }
    std::vector<int> layers() const;
};

struct SteeringPlan {
    std::vector<PlanEntry> entries;
    std::vector<int> observe_only;  // extra recorded layers without control
};

// Builds an entry with the normalized target derived from physical bounds.
PlanEntry make_plan_entry(std::vector<Observer> observers, double phys_min, double phys_max,
                          int window_start, int window_len);

void validate_plan(const SteeringPlan& plan, int T, int horizon);

// All layers the plan touches (entry layers + observe_only), sorted unique.
std::vector<int> plan_observed_layers(const SteeringPlan& plan);

// One steered forward pass: observations at every entry layer, least-norm
// interventions for entries whose window contains step_index, and a log with
// per-entry pre/post values in physical units. Multi-layer entries log the
// deepest layer's values; u_norm is the norm of the stacked interventions.
std::pair<Action, StepLog> steered_forward(const TransformerWeights& weights,
                                           const TokenSequence& tokens, const SteeringPlan& plan,
                                           int step_index = 0);

// Closed-loop rollout where every forward pass runs through the plan.
// Episode.logs holds one StepLog per step.
Episode steered_rollout(const TransformerWeights& weights, std::uint64_t env_seed,
                        const TaskSpec& task, const SteeringPlan& plan,
                        const EnvParams& params = {});

// Median seconds per forward pass without and with the plan, on identical
// inputs. n_passes must be at least 100.
std::pair<double, double> overhead_benchmark(const TransformerWeights& weights,
                                             const SteeringPlan& plan, int n_passes);

// Steering plan list persistence: JSON array of records
// {feature_id, layers, zeta_min, zeta_max, window_start, window_len} with
// bounds in physical units ("layers" also accepts a single integer, and null
// bounds mean one-sided). Observers are resolved from the bank by
// (feature_id, layer).
SteeringPlan load_plan(const std::string& path, const std::vector<Observer>& bank, int horizon);
SteeringPlan plan_from_json_text(const std::string& text, const std::vector<Observer>& bank,
                                 int horizon);

}  // namespace actuate
