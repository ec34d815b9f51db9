#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "actuate/episode.hpp"
#include "actuate/numkit.hpp"
#include "actuate/simworld.hpp"

namespace actuate {

// Fixed token layout: instruction one-hot, robot state, object position,
// goal, and a dedicated readout slot whose residual-stream value carries the
// policy's decision. Every token is padded to kTokenChannels input channels
// so a single embedding matrix serves all five.
inline constexpr int kTokenCount = 5;
inline constexpr int kTokenChannels = 7;
inline constexpr int kReadoutToken = 4;
inline constexpr int kActionDim = 7;

struct ModelConfig {
    int d = 64;  // residual stream width, divisible by h
    int T = 8;   // residual blocks
    int h = 4;   // attention heads
    std::uint64_t seed = 0;
};

struct LayerWeights {
    Vector attn_gain;  // d, RMS-norm gain ahead of attention
    Matrix wq, wk, wv, wo;  // d x d
    Vector mlp_gain;   // d, RMS-norm gain ahead of the MLP
    Matrix w1;         // d x 4d
    Matrix w2;         // 4d x d
};

struct TransformerWeights {
    ModelConfig config;
    Matrix embed;          // kTokenChannels x d
    Matrix pos;            // kTokenCount x d, additive positional table
    std::vector<LayerWeights> layers;  // config.T entries
    Matrix action_head_w;  // d x kActionDim
    Vector action_head_b;  // kActionDim
    bool head_fitted = false;
};

struct TokenSequence {
    Matrix features;  // kTokenCount x kTokenChannels
};

// Readout-position residual stream after each block; activations[l-1] is the
// value layer l+1 consumes (interventions included).
struct LayerTrace {
    std::vector<Vector> activations;
};

// Layer indices are 1-based block outputs in [1, T]. Controllers may only sit
// where an observer sits. on_control receives the current readout vector and
// returns its replacement; on_observe sees the value after any replacement.
struct HookSet {
    std::vector<int> observers_at;
    std::vector<int> controllers_at;
    std::function<void(int layer, const Vector& readout)> on_observe;
    std::function<Vector(int layer, const Vector& readout)> on_control;
};

void validate_hooks(const HookSet& hooks, int T);

TokenSequence encode(const WorldState& w, const EnvParams& params = {});

// Deterministic random trunk. Scales: attention 1/sqrt(d), MLP 1/sqrt(4d),
// embedding 0.1, positional table 1.0 (the quiet embedding keeps token
// content a near-linear perturbation of the positional carrier, which is what
// makes readout activations linearly decodable); RMS gains start at one; the
// action head starts zeroed. Draw order (row-major, one matrix after
// another): embed, pos, then per layer wq, wk, wv, wo, w1, w2.
TransformerWeights init_random(std::uint64_t seed, int d = 64, int T = 8, int h = 4);

std::pair<LayerTrace, Action> forward(const TransformerWeights& weights,
                                      const TokenSequence& tokens,
                                      const HookSet& hooks = {});

// Ridge fit of the action head on (final-layer readout activation, expert
// action) pairs; the penalty spares the bias by centering. Trunk untouched.
TransformerWeights fit_action_head(TransformerWeights weights,
                                   const std::vector<std::pair<WorldState, Action>>& demos,
                                   double lambda);

// Closed loop: encode -> forward -> step for the full horizon, recording
// activations at hooks.observers_at. Success is judged on the final state.
Episode policy_rollout(const TransformerWeights& weights, std::uint64_t env_seed,
                       const TaskSpec& task, const HookSet& hooks = {},
                       const EnvParams& params = {});

// Scripted-expert rollout for demonstration data. exec_noise_std > 0 jitters
// the executed translation (not the recorded action) with draws from
// Rng(noise_seed), so demonstrations cover states slightly off the expert's
// nominal path.
Episode expert_rollout(const TaskSpec& task, std::uint64_t env_seed,
                       double exec_noise_std = 0.0, std::uint64_t noise_seed = 0,
                       const EnvParams& params = {});

// Flat binary format: 16-byte magic "ACTUATEWEIGHTSv1", little-endian header
// u32 d, u32 T, u32 h, u64 seed, then little-endian f64 payload: embed, pos,
// per layer (attn_gain, wq, wk, wv, wo, mlp_gain, w1, w2), action_head_w,
// action_head_b, and a final 0/1 flag marking the head as fitted.
void save_weights(const std::string& path, const TransformerWeights& w);
TransformerWeights load_weights(const std::string& path);

}  // namespace actuate
