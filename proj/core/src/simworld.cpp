#include "actuate/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "actuate/errors.hpp"

namespace actuate {

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

const char* to_string(Instruction ins) {
    switch (ins) {
        case Instruction::Default: return "default";
        case Instruction::Slow: return "slow";
        case Instruction::Fast: return "fast";
        case Instruction::Low: return "low";
        case Instruction::High: return "high";
        case Instruction::Open: return "open";
        case Instruction::Closed: return "closed";
    }
    return "default";
}

Instruction instruction_from_string(const std::string& s) {
    if (s == "default") return Instruction::Default;
    if (s == "slow") return Instruction::Slow;
    if (s == "fast") return Instruction::Fast;
    if (s == "low") return Instruction::Low;
    if (s == "high") return Instruction::High;
    if (s == "open") return Instruction::Open;
    if (s == "closed") return Instruction::Closed;
    throw ConfigError("unknown instruction token: '" + s + "'");
}

namespace {

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a < 0.0) a += two_pi;
    return a;
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Vec3 clamp_box(const Vec3& p, double half) {
    return {clamp(p.x, -half, half), clamp(p.y, -half, half), clamp(p.z, -half, half)};
}

}  // namespace

WorldState reset(std::uint64_t seed, const TaskSpec& task, const EnvParams& params) {
    Rng rng(seed);
    WorldState w;
    w.robot.position.x = rng.uniform(-params.start_xy_half, params.start_xy_half);
    w.robot.position.y = rng.uniform(-params.start_xy_half, params.start_xy_half);
    w.robot.position.z = rng.uniform(params.start_z_lo, params.start_z_hi);
    w.robot.orientation = {0.0, 0.0, 0.0};
    w.robot.gripper = 0.0;
    w.object_position = task.object_start;
    w.object_grasped = false;
    w.goal_region = task.goal;
    w.step_index = 0;
    w.task = task;
    return w;
}

WorldState step(const WorldState& w, const Action& a, const EnvParams& params) {
    if (w.step_index >= w.task.horizon) {
        throw ConfigError("step: episode already finished (step " +
                          std::to_string(w.step_index) + " of horizon " +
                          std::to_string(w.task.horizon) + ")");
    }
    WorldState n = w;

    Vec3 dpos{clamp(a.delta[0], -params.max_step, params.max_step),
              clamp(a.delta[1], -params.max_step, params.max_step),
              clamp(a.delta[2], -params.max_step, params.max_step)};
    n.robot.position = clamp_box(w.robot.position + dpos, params.workspace_half);

    n.robot.orientation.x =
        wrap_angle(w.robot.orientation.x + clamp(a.delta[3], -params.max_rot_step, params.max_rot_step));
    n.robot.orientation.y =
        wrap_angle(w.robot.orientation.y + clamp(a.delta[4], -params.max_rot_step, params.max_rot_step));
    n.robot.orientation.z =
        wrap_angle(w.robot.orientation.z + clamp(a.delta[5], -params.max_rot_step, params.max_rot_step));

    n.robot.gripper = clamp(w.robot.gripper + clamp(a.delta[6], -1.0, 1.0), 0.0, 1.0);

    // Grasp hysteresis: engage above the close threshold when near the
    // object, release below the open threshold. The world is kinematic
    // throughout — a released object keeps the pose it was released at, the
    // same way the robot holds any pose without support — so delivery means
    // carrying the object into the goal region and opening there.
    if (!n.object_grasped && n.robot.gripper > params.grasp_close_threshold &&
        distance(n.robot.position, n.object_position) < params.grasp_radius) {
        n.object_grasped = true;
    } else if (n.object_grasped && n.robot.gripper < params.grasp_open_threshold) {
        n.object_grasped = false;
    }
    if (n.object_grasped) n.object_position = n.robot.position;

    n.step_index = w.step_index + 1;
    return n;
}

namespace {

double carry_altitude_for(Instruction ins, const EnvParams& params) {
    double alt = params.transport_altitude;
    if (ins == Instruction::Low) alt -= params.altitude_offset;
    if (ins == Instruction::High) alt += params.altitude_offset;
    return alt;
}

}  // namespace

Action expert_action(const WorldState& w, const EnvParams& params) {
    const Instruction ins = w.task.instruction;
    const Vec3& r = w.robot.position;
    const double z = r.z;
    const double g = w.robot.gripper;

    // Shifted-altitude carries cannot end at the goal on their own — the
    // goal sits at the standard transport altitude — so once the carry is
    // over the goal they hand delivery back to the standard drop pose: the
    // low carry pops up, the high carry descends.
    double alt = carry_altitude_for(ins, params);
    bool terminal = false;
    if (alt != params.transport_altitude && w.object_grasped) {
        const double dx = r.x - w.goal_region.center.x;
        const double dy = r.y - w.goal_region.center.y;
        const double rs = params.release_radius_frac * w.goal_region.radius;
        terminal = dx * dx + dy * dy <= rs * rs;
        if (terminal) alt = params.transport_altitude;
    }
    const Vec3 drop{w.goal_region.center.x, w.goal_region.center.y, alt};

    // Translation: two superimposed proportional pulls. While the hand is
    // empty only the object pull acts, so the approach heads straight at
    // the object with nothing dragging it off target — a missed grasp just
    // retries, since the attractor sits on the object itself. Once the
    // object is held it coincides with the end effector, the object pull
    // cancels identically, and the carry pull homes on the drop pose. The
    // gate is the grasp, which a policy can read off its own tokens as the
    // object riding at the hand; after the release it re-centers the
    // object pull on the floating object, anchoring the robot at the
    // delivery point. The command is deliberately left unclipped — the
    // world saturates it to max_step per component, which caps travel
    // speed without bending the law the action encodes.
    Vec3 v = (w.object_position - r) * params.expert_approach_gain;
    if (w.object_grasped) {
        v.x += (drop.x - r.x) * params.expert_goal_gain;
        v.y += (drop.y - r.y) * params.expert_goal_gain;
        v.z += (drop.z - r.z) * params.expert_lift_gain;
    }

    double speed_mult = 1.0;
    if (ins == Instruction::Slow) speed_mult = 0.5;
    if (ins == Instruction::Fast) speed_mult = 2.0;
    v = v * speed_mult;

    // Gripper: height-keyed hysteresis. An open gripper closes below
    // close_height; a closed one holds until release_height. Because the
    // carry's climb is geared slower than its lateral pull, height doubles
    // as a progress gauge — by the time z crosses release_height the
    // lateral error has decayed through several more half-lives, so the
    // release happens over the goal. The same line keeps the hand open at
    // the post-delivery hover,
    // which sits above the close height by construction. The high
    // instruction shifts the line up with its altitude until its terminal
    // descent, which pins the hand shut down to the standard drop pose.
    double shift = 0.0;
    if (ins == Instruction::High && w.object_grasped && !terminal) {
        shift = params.altitude_offset;
    }
    const double hold = params.expert_release_height - params.expert_close_height;
    double grip = params.expert_close_rate *
                  (params.expert_close_height + shift + hold * g - z);
    if (ins == Instruction::High && terminal &&
        z > params.transport_altitude + 0.01) {
        grip = 1.0;
    }

    if (ins == Instruction::Closed) {
        // Hold shut wherever the task permits. It does not permit a pin
        // during the release and the post-delivery hover: without those the
        // object could never be let go, or would be snatched right back.
        const double rel = params.expert_release_height + shift - 0.02;
        const bool near_object =
            distance(r, w.object_position) < params.grasp_radius;
        const bool delivering = z >= rel && (w.object_grasped || near_object);
        if (!delivering) grip = 1.0;
    } else if (ins == Instruction::Open) {
        // Hold open wherever the task permits — everywhere except the
        // grasp itself (the final descent closes a touch later than the
        // default line would) and the carry, which need the hand shut.
        if (!w.object_grasped && z >= params.expert_close_height - 0.02) {
            grip = -1.0;
        }
    }

    Action a;
    a.delta = {v.x, v.y, v.z, 0.0, 0.0, 0.0, std::clamp(grip, -1.0, 1.0)};
    return a;
}

bool is_success(const WorldState& w) {
    return !w.object_grasped &&
           distance(w.object_position, w.goal_region.center) <= w.goal_region.radius;
}

void validate_task(const TaskSpec& task, const EnvParams& params) {
    if (task.task_id.empty()) throw ConfigError("task: empty task_id");
    if (task.horizon < 20) {
        throw ConfigError("task '" + task.task_id + "': horizon must be >= 20");
    }
    const double h = params.workspace_half;
    auto inside = [h](const Vec3& p) {
        return p.x >= -h && p.x <= h && p.y >= -h && p.y <= h && p.z >= -h && p.z <= h;
    };
    if (!inside(task.object_start)) {
        throw ConfigError("task '" + task.task_id + "': object_start outside workspace");
    }
    if (!inside(task.goal.center)) {
        throw ConfigError("task '" + task.task_id + "': goal_center outside workspace");
    }
    if (task.goal.radius <= 0.0) {
        throw ConfigError("task '" + task.task_id + "': goal_radius must be positive");
    }
}

std::vector<TaskSpec> canonical_tasks() {
    struct Row {
        const char* id;
        Vec3 obj;
        Vec3 goal;
        double radius;
    };
    // Goal centers sit just under the transport altitude with enough radius
    // that a release anywhere along the final approach-and-climb lands
    // inside — imitators overshoot the altitude a little before their
    // gripper line trips, and the region absorbs that. Objects start well
    // below the centers, so no task begins satisfied. Carry distances stay
    // around 0.3 m: even the half-speed gait delivers well before the
    // horizon, leaving a parked tail in every episode.
    const Row rows[] = {
        {"t01", {0.20, 0.00, 0.05}, {-0.10, 0.05, 0.21}, 0.10},
        {"t02", {0.15, 0.15, 0.06}, {-0.08, 0.02, 0.21}, 0.10},
        {"t03", {0.00, 0.22, 0.04}, {0.05, -0.08, 0.21}, 0.10},
        {"t04", {-0.18, 0.12, 0.05}, {0.10, 0.05, 0.21}, 0.10},
        {"t05", {-0.15, -0.15, 0.06}, {0.10, 0.08, 0.21}, 0.10},
        {"t06", {0.08, -0.20, 0.05}, {-0.06, 0.06, 0.21}, 0.10},
        {"t07", {0.22, 0.08, 0.04}, {-0.05, -0.05, 0.21}, 0.10},
        {"t08", {-0.22, 0.00, 0.05}, {0.08, 0.08, 0.21}, 0.10},
        {"t09", {0.10, 0.18, 0.06}, {0.02, -0.12, 0.21}, 0.10},
        {"t10", {-0.08, -0.18, 0.04}, {0.14, 0.02, 0.21}, 0.10},
    };
    std::vector<TaskSpec> tasks;
    for (const Row& r : rows) {
        TaskSpec t;
        t.task_id = r.id;
        t.instruction = Instruction::Default;
        t.object_start = r.obj;
        t.goal = {r.goal, r.radius};
        t.horizon = 60;
        tasks.push_back(t);
    }
    return tasks;
}

namespace {

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string tasks_to_json(const std::vector<TaskSpec>& tasks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TaskSpec& t : tasks) {
        arr.push_back({{"task_id", t.task_id},
                       {"instruction", to_string(t.instruction)},
                       {"object_start", vec3_to_json(t.object_start)},
                       {"goal_center", vec3_to_json(t.goal.center)},
                       {"goal_radius", t.goal.radius},
                       {"horizon", t.horizon}});
    }
    nlohmann::json root = {{"tasks", arr}};
    return root.dump(2) + "\n";
}

std::vector<TaskSpec> tasks_from_json(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("task manifest: invalid JSON: ") + e.what());
    }
    if (!root.contains("tasks") || !root["tasks"].is_array()) {
        throw ConfigError("task manifest: missing 'tasks' array");
    }
    std::vector<TaskSpec> tasks;
    for (const auto& j : root["tasks"]) {
        TaskSpec t;
        try {
            t.task_id = j.at("task_id").get<std::string>();
            t.instruction = instruction_from_string(j.at("instruction").get<std::string>());
            t.object_start = vec3_from_json(j.at("object_start"));
            t.goal.center = vec3_from_json(j.at("goal_center"));
            t.goal.radius = j.at("goal_radius").get<double>();
            t.horizon = j.at("horizon").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("task manifest: bad task record: ") + e.what());
        }
        validate_task(t);
        tasks.push_back(t);
    }
    if (tasks.empty()) throw ConfigError("task manifest: no tasks");
    return tasks;
}

void save_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write task manifest: " + path);
    f << tasks_to_json(tasks);
}

std::vector<TaskSpec> load_tasks(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("task manifest not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return tasks_from_json(ss.str());
}

}  // namespace actuate
