#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "actuate/episode.hpp"
#include "actuate/observer.hpp"
#include "actuate/polnet.hpp"
#include "actuate/runtime.hpp"
#include "actuate/simworld.hpp"

namespace actuate {

// Runs fn(0..n-1) across up to `threads` workers. Results must go into
// pre-sized slots indexed by i so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Deterministic 80/20 shuffle split by episode index.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
};
DatasetSplit split_dataset(std::size_t n, std::uint64_t seed);

// Scripted-expert rollout that also runs the trunk on every visited state and
// records the readout activation at each of the T layers. This is the probe
// training data: labels come from the expert's world, activations from the
// network the probes will later read.
//
// exec_noise_std > 0 jitters the *executed* action (recorded labels stay the
// expert's command for the state actually visited): Gaussian per translation
// component, and kGripNoiseFactor times that on the grip channel. The grip
// jitter matters for cloning — without it, demonstrations never show an
// aperture out of phase with the task, and an imitator learns to copy its own
// gripper instead of correcting it.
inline constexpr double kGripNoiseFactor = 4.0;
Episode demo_rollout(const TransformerWeights& weights, const TaskSpec& task,
                     std::uint64_t env_seed, double exec_noise_std = 0.0,
                     std::uint64_t noise_seed = 0, const EnvParams& params = {});

// (state, expert action) pairs for behavior cloning, reconstructed from
// dataset episodes. Episodes may override their task's instruction, so the
// lookup keeps the episode's token.
WorldState world_from_step(const Episode& ep, std::size_t step, const TaskSpec& task);
std::vector<std::pair<WorldState, Action>> demos_from_dataset(
    const std::vector<Episode>& dataset, const std::vector<TaskSpec>& tasks);

// Constraint windows used by the height and speed studies. The speed median
// below is computed over the same window so the reference point describes
// the moving phase of an episode, not the parked tail after delivery.
inline constexpr int kHeightWindowSteps = 15;
inline constexpr int kSpeedWindowSteps = 25;

// Median realized speed over the dataset steps that fall inside the speed
// window; the reference point the speed studies split on.
double dataset_median_speed(const std::vector<Episode>& dataset, double dt);

const TaskSpec& find_task(const std::vector<TaskSpec>& tasks, const std::string& task_id);
const Observer& find_observer(const std::vector<Observer>& bank, const std::string& feature_id,
                              int layer);

// ---------------------------------------------------------------------------
// Probe report: train an observer per (feature, layer) on the train split,
// score on the eval split, and attach robustness + shuffled-label controls.

struct ProbeConfig {
    std::vector<std::string> features;  // empty -> all known features
    std::vector<int> layers;            // empty -> 1..T
    double lambda = 1e-2;
    std::vector<double> robustness_epsilons{0.01, 0.1, 1.0};
    int robustness_trials = 200;
    std::uint64_t seed = 17;  // split shuffle, robustness directions, label shuffle
    int threads = 1;
};

struct ProbeTrainResult {
    std::vector<ProbeReport> reports;   // one per feature
    // Negative controls: per feature, a probe trained on shuffled labels at
    // the best layer, reported under "<feature>_shuffled".
    std::vector<ProbeReport> shuffled;
    std::vector<Observer> bank;         // every trained (feature, layer) observer
};

ProbeTrainResult run_probe_report(const std::vector<Episode>& dataset, int T, double dt,
                                  const ProbeConfig& cfg);

// Best-layer observer per feature, in the bank's feature order.
std::vector<Observer> best_observers(const ProbeTrainResult& result);

// ---------------------------------------------------------------------------
// Perturbation sweep: push the readout at one layer by a fixed offset along
// the probe direction and measure how much the emitted action's feature
// moves, plus the mean representation norm per layer.

struct SweepConfig {
    std::string feature_id = "action_dz";  // must be action-derived
    std::vector<double> alphas{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::size_t max_states = 200;
    std::uint64_t seed = 23;
    int threads = 1;
};

struct SweepRow {
    int layer = 0;
    double alpha = 0.0;
    double mean_abs_delta = 0.0;  // raw feature units
};

struct SweepResult {
    std::string feature_id;
    std::vector<SweepRow> rows;      // layer-major, alphas in config order
    std::vector<double> layer_norms; // mean ||x_l||, index l-1
};

SweepResult run_perturb_sweep(const std::vector<Episode>& dataset,
                              const std::vector<TaskSpec>& tasks,
                              const TransformerWeights& weights,
                              const std::vector<Observer>& bank, const SweepConfig& cfg,
                              const EnvParams& params = {});

// ---------------------------------------------------------------------------
// Classifier image: the observed value at a controlled layer under no
// intervention, a fixed offset, and least-norm control, with bounds picked
// from the unsteered distribution. Continuous features only; zeta is in
// normalized units, where the in-bounds guarantee is stated.

struct ClassifierImageConfig {
    double fixed_alpha = 2.0;
    int episodes = 20;  // total, spread round-robin over tasks
    std::uint64_t seed_base = 9000;
    double lo_percentile = 25.0;
    double hi_percentile = 75.0;
    int threads = 1;
};

struct ClassifierPoint {
    std::string method;  // none | fixed | control
    std::string task_id;
    int episode = 0;
    int step = 0;
    double zeta = 0.0;  // normalized units
};

struct ClassifierImageResult {
    std::string feature_id;
    int layer = 0;
    double zeta_min = 0.0;  // normalized bounds from the unsteered percentiles
    double zeta_max = 0.0;
    std::vector<ClassifierPoint> points;
};

ClassifierImageResult run_classifier_image(const std::vector<Episode>& dataset,
                                           const std::vector<TaskSpec>& tasks,
                                           const TransformerWeights& weights, const Observer& obs,
                                           const ClassifierImageConfig& cfg,
                                           const EnvParams& params = {});

// ---------------------------------------------------------------------------
// Closed-loop studies: none vs prompting vs control on paired episodes.

// The realized quantity a study checks, measured per step from the world.
enum class PhysMeasure {
    GripperCloseness,  // aperture, 1 = closed
    HeightAboveStart,  // z minus the episode's starting z
    Speed,             // realized displacement norm over dt
};

struct StudyCondition {
    std::string name;          // e.g. "closed", "below"
    Instruction prompt = Instruction::Default;  // prompting method's token
    double target_min = 0.0;   // steering target, physical probe units
    double target_max = 0.0;
    double sat_lo = 0.0;       // satisfaction interval on the measured value
    double sat_hi = 0.0;
};

struct StudySpec {
    std::string study_id;
    std::string feature_id;  // probe driving the control method
    PhysMeasure measure = PhysMeasure::GripperCloseness;
    int window_start = 0;
    int window_len = -1;  // -1 -> the episode's full horizon
    std::vector<StudyCondition> conditions;
    int episodes_per_task = 10;
    std::uint64_t seed_base = 5000;
};

// The gripper / height / speed studies with their standard windows (full
// episode, kHeightWindowSteps, kSpeedWindowSteps) and targets. median_speed
// feeds the speed thresholds; max_step bounds the height targets.
std::vector<StudySpec> default_studies(double median_speed, const EnvParams& params = {});

struct TradeoffPoint {
    std::string study_id;
    std::string condition;
    std::string method;  // none | prompting | control
    double success_mean = 0.0;
    double success_std = 0.0;
    double phys_sat_mean = 0.0;  // realized-world constraint satisfaction
    double phys_sat_std = 0.0;
    double obs_sat_mean = 0.0;   // observed-zeta satisfaction (the guarantee)
    double obs_sat_std = 0.0;
};

struct ViolinRow {
    std::string study_id;
    std::string condition;
    std::string method;
    std::string task_id;
    int episode = 0;
    int step = 0;
    double value = 0.0;  // the realized physical measure at that step
};

// One method's episodes, kept for raw persistence.
struct MethodEpisodes {
    std::string condition;
    std::string method;
    std::vector<Episode> episodes;
};

struct StudyResult {
    StudySpec spec;
    std::vector<TradeoffPoint> points;   // condition-major, methods in fixed order
    std::vector<ViolinRow> violins;
    std::vector<MethodEpisodes> raw;
};

StudyResult run_closed_loop_study(const StudySpec& spec, const std::vector<TaskSpec>& tasks,
                                  const TransformerWeights& weights,
                                  const std::vector<Observer>& bank, int control_layer,
                                  int threads, const EnvParams& params = {});

// ---------------------------------------------------------------------------
// Table persistence. All CSVs use shortest round-trip number formatting, so
// equal runs produce equal bytes.

void save_sweep_csv(const std::string& path, const SweepResult& sweep);
void save_classifier_csv(const std::string& path, const ClassifierImageResult& image);
void save_tradeoff_csv(const std::string& path, const std::vector<TradeoffPoint>& points);
void save_violin_csv(const std::string& path, const std::vector<ViolinRow>& rows);

// Report step: reads the tables under results_dir/tables, recomputes the
// violin summary, and renders the SVG plots under results_dir/plots. Missing
// inputs raise one error naming all of them.
void summarize(const std::string& results_dir);

}  // namespace actuate
