#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actuate/numkit.hpp"
#include "actuate/simworld.hpp"

namespace actuate {

// One control step as seen by the policy: the world before the action, the
// action it emitted, and the readout-position residual-stream vectors that
// were recorded while computing it.
struct StepRecord {
    RobotState robot;          // state the action was computed from
    Vec3 object_position;
    bool object_grasped = false;
    Action action;
    // One vector per entry of Episode::observed_layers, in the same order.
    // Empty when the rollout recorded no activations.
    std::vector<Vector> activations;
};

// What one steering-plan entry did (or observed) during a single forward
// pass. Zeta values are in the entry's user-facing units: raw feature units
// for continuous observers, probabilities for binary ones.
struct EntryLog {
    double pre_zeta = 0.0;
    double post_zeta = 0.0;  // equals pre_zeta when inactive
    double u_norm = 0.0;
    bool active = false;
};

struct StepLog {
    int step_index = 0;
    std::vector<EntryLog> entries;  // one per plan entry, plan order
    Action action;
    // Wall-clock measurements; not persisted (meaningless across machines).
    double forward_seconds = 0.0;
    double steering_seconds = 0.0;
};

struct Episode {
    std::string task_id;
    Instruction instruction = Instruction::Default;
    std::uint64_t env_seed = 0;
    std::vector<int> observed_layers;  // sorted, each in [1, T]
    std::vector<StepRecord> steps;
    std::vector<StepLog> logs;  // parallel to steps for steered rollouts, else empty
    RobotState final_robot;     // state after the last step
    Vec3 final_object;
    bool success = false;
};

// Persistence lives in runtime.cpp: a JSONL file holds everything except the
// activation payload, which goes to a flat binary sidecar next to it.
void save_episodes(const std::string& jsonl_path, const std::vector<Episode>& episodes);
std::vector<Episode> load_episodes(const std::string& jsonl_path);

}  // namespace actuate
