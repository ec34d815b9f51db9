#include "actuate/polnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "actuate/errors.hpp"

namespace actuate {

namespace {

constexpr double kRmsEps = 1e-6;
constexpr char kWeightsMagic[17] = "ACTUATEWEIGHTSv1";  // 16 bytes on disk

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Matrix rmsnorm_rows(const Matrix& x, const Vector& gain) {
    Matrix out(x.rows, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double ms = 0.0;
        const double* src = x.row_ptr(r);
        for (std::size_t c = 0; c < x.cols; ++c) ms += src[c] * src[c];
        ms /= static_cast<double>(x.cols);
        const double inv = 1.0 / std::sqrt(ms + kRmsEps);
        double* dst = out.row_ptr(r);
        for (std::size_t c = 0; c < x.cols; ++c) dst[c] = src[c] * inv * gain[c];
    }
    return out;
}

Matrix attention(const Matrix& xn, const LayerWeights& lw, int heads) {
    const Matrix q = matmul(xn, lw.wq);
    const Matrix k = matmul(xn, lw.wk);
    const Matrix v = matmul(xn, lw.wv);
    const std::size_t n = xn.rows;
    const std::size_t d = xn.cols;
    const std::size_t hd = d / static_cast<std::size_t>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Matrix mixed(n, d);
    std::vector<double> scores(n);
    for (int head = 0; head < heads; ++head) {
        const std::size_t off = static_cast<std::size_t>(head) * hd;
        for (std::size_t i = 0; i < n; ++i) {
            double maxs = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                const double* qi = q.row_ptr(i) + off;
                const double* kj = k.row_ptr(j) + off;
                for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
                scores[j] = s * scale;
                maxs = std::max(maxs, scores[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                scores[j] = std::exp(scores[j] - maxs);
                denom += scores[j];
            }
            double* out = mixed.row_ptr(i) + off;
            for (std::size_t c = 0; c < hd; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += scores[j] * v.at(j, off + c);
                out[c] = acc / denom;
            }
        }
    }
    return matmul(mixed, lw.wo);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Matrix mlp(const Matrix& xn, const LayerWeights& lw) {
    Matrix hidden = matmul(xn, lw.w1);
    for (double& v : hidden.data) v = gelu(v);
    return matmul(hidden, lw.w2);
}

Action head_action(const TransformerWeights& w, const Vector& readout,
                   const EnvParams& bounds) {
    Action a;
    for (int c = 0; c < kActionDim; ++c) {
        double acc = w.action_head_b[static_cast<std::size_t>(c)];
        for (std::size_t r = 0; r < w.action_head_w.rows; ++r) {
            acc += readout[r] * w.action_head_w.at(r, static_cast<std::size_t>(c));
        }
        a.delta[static_cast<std::size_t>(c)] = acc;
    }
    for (int c = 0; c < 3; ++c) {
        a.delta[static_cast<std::size_t>(c)] =
            clampd(a.delta[static_cast<std::size_t>(c)], -bounds.max_step, bounds.max_step);
    }
    for (int c = 3; c < 6; ++c) {
        a.delta[static_cast<std::size_t>(c)] = clampd(a.delta[static_cast<std::size_t>(c)],
                                                      -bounds.max_rot_step, bounds.max_rot_step);
    }
    a.delta[6] = clampd(a.delta[6], -1.0, 1.0);
    return a;
}

bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

Matrix draw_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std) {
    Matrix m(rows, cols);
    m.data = rng_normal(rng, rows * cols, 0.0, std);
    return m;
}

}  // namespace

void validate_hooks(const HookSet& hooks, int T) {
    for (int l : hooks.observers_at) {
        if (l < 1 || l > T) {
            throw ConfigError("hook: observer layer " + std::to_string(l) +
                              " outside [1, " + std::to_string(T) + "]");
        }
    }
    for (int l : hooks.controllers_at) {
        if (!contains(hooks.observers_at, l)) {
            throw ConfigError("hook: controller at layer " + std::to_string(l) +
                              " has no matching observer (controllers need observations)");
        }
    }
    if (!hooks.controllers_at.empty() && !hooks.on_control) {
        throw ConfigError("hook: controller layers given but no control callback");
    }
}

TokenSequence encode(const WorldState& w, const EnvParams& params) {
    TokenSequence t;
    t.features = Matrix(kTokenCount, kTokenChannels, 0.0);
    Matrix& f = t.features;

    const int ins = static_cast<int>(w.task.instruction);
    f.at(0, static_cast<std::size_t>(ins)) = 1.0;

    // Per-field affine maps into roughly [-1, 1]: positions by the play
    // envelope, angles from [0, 2pi) shifted about pi, aperture from [0, 1].
    const double inv_h = 1.0 / params.token_pos_scale;
    f.at(1, 0) = w.robot.position.x * inv_h;
    f.at(1, 1) = w.robot.position.y * inv_h;
    f.at(1, 2) = w.robot.position.z * inv_h;
    f.at(1, 3) = w.robot.orientation.x / std::numbers::pi - 1.0;
    f.at(1, 4) = w.robot.orientation.y / std::numbers::pi - 1.0;
    f.at(1, 5) = w.robot.orientation.z / std::numbers::pi - 1.0;
    f.at(1, 6) = 2.0 * w.robot.gripper - 1.0;

    f.at(2, 0) = w.object_position.x * inv_h;
    f.at(2, 1) = w.object_position.y * inv_h;
    f.at(2, 2) = w.object_position.z * inv_h;

    f.at(3, 0) = w.goal_region.center.x * inv_h;
    f.at(3, 1) = w.goal_region.center.y * inv_h;
    f.at(3, 2) = w.goal_region.center.z * inv_h;
    f.at(3, 3) = w.goal_region.radius * inv_h;

    // Row kReadoutToken stays zero: the readout slot carries no world input,
    // only its positional embedding.
    return t;
}

TransformerWeights init_random(std::uint64_t seed, int d, int T, int h) {
    if (d <= 0 || T < 2 || h <= 0 || d % h != 0) {
        throw ConfigError("init_random: need T >= 2 and d divisible by h");
    }
    TransformerWeights w;
    w.config = {d, T, h, seed};

    Rng rng(seed);
    const auto du = static_cast<std::size_t>(d);
    const double attn_std = 1.0 / std::sqrt(static_cast<double>(d));
    const double mlp_std = 1.0 / std::sqrt(static_cast<double>(4 * d));
    // The embedding is deliberately an order of magnitude quieter than the
    // positional table. Content then rides the residual stream as a small
    // perturbation of a fixed carrier, which a random pre-norm trunk
    // propagates near-linearly — so state stays linearly decodable (and a
    // linear action head viable) all the way to the readout. Sweeping this
    // scale showed forward passes stay well-conditioned across random inputs
    // while decodability degrades steadily as the embedding scale grows.
    const double embed_std = 0.1;

    w.embed = draw_matrix(rng, kTokenChannels, du, embed_std);
    w.pos = draw_matrix(rng, kTokenCount, du, 1.0);
    w.layers.resize(static_cast<std::size_t>(T));
    for (LayerWeights& lw : w.layers) {
        lw.attn_gain.assign(du, 1.0);
        lw.wq = draw_matrix(rng, du, du, attn_std);
        lw.wk = draw_matrix(rng, du, du, attn_std);
        lw.wv = draw_matrix(rng, du, du, attn_std);
        lw.wo = draw_matrix(rng, du, du, attn_std);
        lw.mlp_gain.assign(du, 1.0);
        lw.w1 = draw_matrix(rng, du, 4 * du, mlp_std);
        lw.w2 = draw_matrix(rng, 4 * du, du, mlp_std);
    }
    w.action_head_w = Matrix(du, kActionDim, 0.0);
    w.action_head_b.assign(kActionDim, 0.0);
    w.head_fitted = false;
    return w;
}

std::pair<LayerTrace, Action> forward(const TransformerWeights& weights,
                                      const TokenSequence& tokens, const HookSet& hooks) {
    const ModelConfig& cfg = weights.config;
    validate_hooks(hooks, cfg.T);
    if (tokens.features.rows != kTokenCount || tokens.features.cols != kTokenChannels) {
        throw ConfigError("forward: token sequence has wrong shape");
    }

    Matrix x = matmul(tokens.features, weights.embed);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) x.at(r, c) += weights.pos.at(r, c);
    }

    LayerTrace trace;
    trace.activations.resize(static_cast<std::size_t>(cfg.T));
    for (int l = 1; l <= cfg.T; ++l) {
        const LayerWeights& lw = weights.layers[static_cast<std::size_t>(l - 1)];
        {
            const Matrix attn_out = attention(rmsnorm_rows(x, lw.attn_gain), lw, cfg.h);
            for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += attn_out.data[i];
        }
        {
            const Matrix mlp_out = mlp(rmsnorm_rows(x, lw.mlp_gain), lw);
            for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += mlp_out.data[i];
        }

        double* readout = x.row_ptr(kReadoutToken);
        const auto du = static_cast<std::size_t>(cfg.d);
        if (hooks.on_control && contains(hooks.controllers_at, l)) {
            Vector current(readout, readout + du);
            Vector replacement = hooks.on_control(l, current);
            if (replacement.size() != du) {
                throw ConfigError("forward: controller returned a vector of wrong size");
            }
            std::copy(replacement.begin(), replacement.end(), readout);
        }
        Vector& slot = trace.activations[static_cast<std::size_t>(l - 1)];
        slot.assign(readout, readout + du);
        if (hooks.on_observe && contains(hooks.observers_at, l)) hooks.on_observe(l, slot);
    }

    ensure_finite(x, "forward activations");
    const Vector& final_readout = trace.activations.back();
    return {std::move(trace), head_action(weights, final_readout, EnvParams{})};
}

TransformerWeights fit_action_head(TransformerWeights weights,
                                   const std::vector<std::pair<WorldState, Action>>& demos,
                                   double lambda) {
    if (demos.empty()) throw ConfigError("fit_action_head: no demonstrations");
    const auto n = demos.size();
    const auto du = static_cast<std::size_t>(weights.config.d);

    Matrix x(n, du);
    Matrix y(n, kActionDim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [trace, unused] = forward(weights, encode(demos[i].first));
        const Vector& readout = trace.activations.back();
        std::copy(readout.begin(), readout.end(), x.row_ptr(i));
        for (int c = 0; c < kActionDim; ++c) {
            y.at(i, static_cast<std::size_t>(c)) = demos[i].second.delta[static_cast<std::size_t>(c)];
        }
    }

    // Center both sides so the penalty touches only the linear map; the bias
    // is recovered from the means.
    Vector x_mean(du, 0.0), y_mean(kActionDim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < du; ++c) x_mean[c] += x.at(i, c);
        for (std::size_t c = 0; c < kActionDim; ++c) y_mean[c] += y.at(i, c);
    }
    for (double& v : x_mean) v /= static_cast<double>(n);
    for (double& v : y_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < du; ++c) x.at(i, c) -= x_mean[c];
        for (std::size_t c = 0; c < kActionDim; ++c) y.at(i, c) -= y_mean[c];
    }

    weights.action_head_w = ridge_solve(x, y, lambda);
    weights.action_head_b.assign(kActionDim, 0.0);
    for (std::size_t c = 0; c < kActionDim; ++c) {
        double acc = y_mean[c];
        for (std::size_t r = 0; r < du; ++r) acc -= x_mean[r] * weights.action_head_w.at(r, c);
        weights.action_head_b[c] = acc;
    }
    weights.head_fitted = true;
    return weights;
}

namespace {

Episode run_episode(const TaskSpec& task, std::uint64_t env_seed, const EnvParams& params,
                    const std::vector<int>& observed_layers,
                    const std::function<std::pair<Action, std::vector<Vector>>(const WorldState&)>& act,
                    double exec_noise_std, std::uint64_t noise_seed, bool stop_on_success) {
    Episode ep;
    ep.task_id = task.task_id;
    ep.instruction = task.instruction;
    ep.env_seed = env_seed;
    ep.observed_layers = observed_layers;

    Rng noise(noise_seed);
    WorldState w = reset(env_seed, task, params);
    // Policy episodes end at the first success or at the horizon, whichever
    // comes first — delivery is terminal. A zero-horizon (or already
    // satisfied) task yields no steps and success reduces to the initial
    // predicate. Expert episodes run the whole horizon; see demo_rollout for
    // why the post-delivery tail is kept.
    while (w.step_index < task.horizon && !(stop_on_success && is_success(w))) {
        auto [action, acts] = act(w);
        StepRecord rec;
        rec.robot = w.robot;
        rec.object_position = w.object_position;
        rec.object_grasped = w.object_grasped;
        rec.action = action;
        rec.activations = std::move(acts);

        Action executed = action;
        if (exec_noise_std > 0.0) {
            const Vector jitter = rng_normal(noise, 3, 0.0, exec_noise_std);
            for (int c = 0; c < 3; ++c) executed.delta[static_cast<std::size_t>(c)] += jitter[static_cast<std::size_t>(c)];
        }
        w = step(w, executed, params);
        ep.steps.push_back(std::move(rec));
    }
    ep.final_robot = w.robot;
    ep.final_object = w.object_position;
    ep.success = is_success(w);
    return ep;
}

}  // namespace

Episode policy_rollout(const TransformerWeights& weights, std::uint64_t env_seed,
                       const TaskSpec& task, const HookSet& hooks, const EnvParams& params) {
    validate_hooks(hooks, weights.config.T);
    std::vector<int> observed = hooks.observers_at;
    std::sort(observed.begin(), observed.end());

    auto act = [&](const WorldState& w) -> std::pair<Action, std::vector<Vector>> {
        auto [trace, action] = forward(weights, encode(w, params), hooks);
        std::vector<Vector> acts;
        acts.reserve(observed.size());
        for (int l : observed) acts.push_back(std::move(trace.activations[static_cast<std::size_t>(l - 1)]));
        return {action, std::move(acts)};
    };
    return run_episode(task, env_seed, params, observed, act, 0.0, 0, true);
}

Episode expert_rollout(const TaskSpec& task, std::uint64_t env_seed, double exec_noise_std,
                       std::uint64_t noise_seed, const EnvParams& params) {
    auto act = [&](const WorldState& w) -> std::pair<Action, std::vector<Vector>> {
        return {expert_action(w, params), {}};
    };
    return run_episode(task, env_seed, params, {}, act, exec_noise_std, noise_seed, false);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
}

void put_span(std::string& out, const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_f64(out, p[i]);
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ConfigError("weights file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }
    void span(double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = f64();
    }
};

}  // namespace

void save_weights(const std::string& path, const TransformerWeights& w) {
    std::string out;
    out.append(kWeightsMagic, 16);
    put_u32(out, static_cast<std::uint32_t>(w.config.d));
    put_u32(out, static_cast<std::uint32_t>(w.config.T));
    put_u32(out, static_cast<std::uint32_t>(w.config.h));
    put_u64(out, w.config.seed);

    put_span(out, w.embed.data.data(), w.embed.data.size());
    put_span(out, w.pos.data.data(), w.pos.data.size());
    for (const LayerWeights& lw : w.layers) {
        put_span(out, lw.attn_gain.data(), lw.attn_gain.size());
        put_span(out, lw.wq.data.data(), lw.wq.data.size());
        put_span(out, lw.wk.data.data(), lw.wk.data.size());
        put_span(out, lw.wv.data.data(), lw.wv.data.size());
        put_span(out, lw.wo.data.data(), lw.wo.data.size());
        put_span(out, lw.mlp_gain.data(), lw.mlp_gain.size());
        put_span(out, lw.w1.data.data(), lw.w1.data.size());
        put_span(out, lw.w2.data.data(), lw.w2.data.size());
    }
    put_span(out, w.action_head_w.data.data(), w.action_head_w.data.size());
    put_span(out, w.action_head_b.data(), w.action_head_b.size());
    put_f64(out, w.head_fitted ? 1.0 : 0.0);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write weights file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ConfigError("short write on weights file: " + path);
}

TransformerWeights load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("weights file not found: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 16 || buf.compare(0, 16, kWeightsMagic, 16) != 0) {
        throw ConfigError("weights file has wrong magic: " + path);
    }
    ByteReader r{buf, 16};
    const int d = static_cast<int>(r.u32());
    const int T = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    const std::uint64_t seed = r.u64();
    if (d <= 0 || T < 2 || h <= 0 || d % h != 0) {
        throw ConfigError("weights file has inconsistent header: " + path);
    }

    TransformerWeights w;
    w.config = {d, T, h, seed};
    const auto du = static_cast<std::size_t>(d);
    auto read_matrix = [&](std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        r.span(m.data.data(), m.data.size());
        return m;
    };
    w.embed = read_matrix(kTokenChannels, du);
    w.pos = read_matrix(kTokenCount, du);
    w.layers.resize(static_cast<std::size_t>(T));
    for (LayerWeights& lw : w.layers) {
        lw.attn_gain.resize(du);
        r.span(lw.attn_gain.data(), du);
        lw.wq = read_matrix(du, du);
        lw.wk = read_matrix(du, du);
        lw.wv = read_matrix(du, du);
        lw.wo = read_matrix(du, du);
        lw.mlp_gain.resize(du);
        r.span(lw.mlp_gain.data(), du);
        lw.w1 = read_matrix(du, 4 * du);
        lw.w2 = read_matrix(4 * du, du);
    }
    w.action_head_w = read_matrix(du, kActionDim);
    w.action_head_b.resize(kActionDim);
    r.span(w.action_head_b.data(), kActionDim);
    w.head_fitted = r.f64() != 0.0;
    if (r.pos != buf.size()) throw ConfigError("weights file has trailing bytes: " + path);

    ensure_finite(w.embed, "weights embed");
    ensure_finite(w.action_head_w, "weights action head");
    return w;
}

}  // namespace actuate
