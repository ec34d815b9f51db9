#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "actuate/numkit.hpp"

namespace actuate {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const = default;
};

double norm(const Vec3& v);
double distance(const Vec3& a, const Vec3& b);

/// Instruction vocabulary. The expert genuinely obeys each token, so the
/// prompting baseline in the studies is a real competitor.
enum class Instruction { Default = 0, Slow, Fast, Low, High, Open, Closed };

constexpr std::size_t kInstructionCount = 7;

const char* to_string(Instruction ins);
Instruction instruction_from_string(const std::string& s);

struct RobotState {
    Vec3 position;                       // meters, inside the workspace box
    Vec3 orientation;                    // roll/pitch/yaw, wrapped to [0, 2pi)
    double gripper = 0.0;                // aperture in [0, 1]; 0 open, 1 closed
};

/// Relative displacement (dx, dy, dz, droll, dpitch, dyaw, dgrip).
struct Action {
    std::array<double, 7> delta{};

    Vec3 translation() const { return {delta[0], delta[1], delta[2]}; }
    double dgrip() const { return delta[6]; }
};

struct GoalRegion {
    Vec3 center;
    double radius = 0.0;
};

struct TaskSpec {
    std::string task_id;
    Instruction instruction = Instruction::Default;
    Vec3 object_start;
    GoalRegion goal;
    int horizon = 60;
};

struct WorldState {
    RobotState robot;
    Vec3 object_position;
    bool object_grasped = false;
    GoalRegion goal_region;
    int step_index = 0;
    TaskSpec task;
};

/// Environment constants. The defaults give the 15- and 25-step constraint
/// windows used by the studies room to bind without making tasks impossible.
struct EnvParams {
    double dt = 0.1;            // seconds per step
    double max_step = 0.05;     // translational clip per component, meters
    double max_rot_step = 0.2;  // rotational clip per component, radians
    double grasp_radius = 0.05;
    double grasp_close_threshold = 0.8;  // grasp engages above this aperture
    double grasp_open_threshold = 0.2;   // grasp releases below this aperture
    double workspace_half = 1.0;         // box [-1, 1]^3

    // Position channels in the token encoding are divided by this, not by
    // workspace_half: tasks play out within ~0.35 m of the origin, and
    // normalizing by the legal box would park every position channel near
    // zero, wasting the encoder's dynamic range. Scaled by the play
    // envelope, the channels genuinely span roughly [-1, 1].
    double token_pos_scale = 0.4;

    // Start box for randomized robot poses.
    double start_xy_half = 0.10;
    double start_z_lo = 0.15;
    double start_z_hi = 0.30;

    // Scripted expert tuning. The expert superimposes two proportional pulls
    // — a strong one toward the object and a weak one toward the drop pose
    // that only acts while the object is held — and keys the gripper on
    // height instead of on distance to anything. Every term is a simple
    // function of quantities a policy can read straight off its input
    // tokens (positions, aperture, instruction — a carry announces itself
    // as the object riding at the hand), so there is no hidden phase switch
    // for an imitator to infer: the phases emerge from the state. While the
    // object is held it coincides with the end effector and the object pull
    // cancels, handing control to the carry pull; the climb to transport
    // altitude doubles as the release cue; and after the drop the object
    // pull re-centers on the released object itself, anchoring the robot in
    // place with the gripper line holding it open. Since height is the
    // release cue, the climb must be the last leg to converge: the lateral
    // pull is geared several times stronger than the lift so the drop pose
    // is reached in xy well before z crosses the release line, even when
    // per-step clipping slows long lateral carries.
    double expert_approach_gain = 1.8;  // pull toward the object
    double expert_goal_gain = 0.30;     // lateral carry pull toward the drop pose
    double expert_lift_gain = 0.12;     // vertical carry pull toward altitude
    double expert_close_height = 0.10;     // open gripper closes below this z
    double expert_release_height = 0.195;  // closed gripper opens above this z
    double expert_close_rate = 25.0;       // grip command per meter of height error
    double transport_altitude = 0.22;
    double altitude_offset = 0.15;     // low/high instruction shift
    double release_radius_frac = 0.6;  // over-goal switch radius, as a fraction of goal radius
};

WorldState reset(std::uint64_t seed, const TaskSpec& task, const EnvParams& params = {});

/// Kinematic update: clip and integrate the displacement, wrap angles,
/// clamp the aperture, then run the grasp hysteresis. A grasped object
/// tracks the end-effector. Throws on a finished episode.
WorldState step(const WorldState& w, const Action& a, const EnvParams& params = {});

/// Scripted pick-and-place policy: approach, close, carry to the drop pose,
/// release inside the goal region, then hold station at the released object
/// for the rest of the episode. Proportional control throughout — commands
/// are emitted unclipped and the world saturates them — with the gripper
/// keyed on height. The instruction token modulates gain (slow/fast), carry
/// altitude (low/high), and the preferred aperture where the task permits
/// (open/closed).
Action expert_action(const WorldState& w, const EnvParams& params = {});

/// True iff the object is inside the goal region and released.
bool is_success(const WorldState& w);

/// Validates manifest-level constraints (vocabulary token, horizon >= 20,
/// placements inside the workspace).
void validate_task(const TaskSpec& task, const EnvParams& params = {});

/// The ten canonical tasks used by the default dataset and the studies.
std::vector<TaskSpec> canonical_tasks();

std::string tasks_to_json(const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> tasks_from_json(const std::string& text);
void save_tasks(const std::string& path, const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> load_tasks(const std::string& path);

}  // namespace actuate
