#pragma once

#include <cstdint>
#include <vector>

#include "qrrn/rng.hpp"
#include "qrrn/roadnet.hpp"

namespace qrrn {

enum class ObsEncoding { one_hot, index };

struct EnvConfig {
    double r_base = 1.0;
    double r_loopback = 0.0;
    double crosswalk_std = 1.0;
    int episode_cap = 1000;
    ObsEncoding obs_encoding = ObsEncoding::one_hot;

    /// Throws ConfigError when r_base <= 0, r_loopback < 0, crosswalk_std <= 0
    /// or episode_cap < 1.
    void validate() const;
};

using Observation = std::vector<double>;

/// Single-owner episode state. `map` must outlive it.
struct EnvState {
    const GraphMap* map = nullptr;
    NodeId current = 0;
    NodeId prev = 0;
    int steps = 0;
    Rng rng;
    bool done = false;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
};

/// Deterministic, injective encoding of a node id over |S| states.
Observation encode_state(int num_states, ObsEncoding enc, NodeId state);

/// Deterministic, injective state encoding.
Observation observe(const GraphMap& map, const EnvConfig& cfg, NodeId state);

/// Fresh episode at map.start() with an rng seeded from `seed`.
EnvState reset(const GraphMap& map, const EnvConfig& cfg, std::uint64_t seed, Observation* obs = nullptr);

/// Advances one step in place. Throws EpisodeFinished / InvalidAction.
StepResult step(EnvState& env, const EnvConfig& cfg, ActionIndex action);

/// Reward for arriving at `next` from `prev`. Precedence: goal (0), then
/// loopback (-(r_base + r_loopback)), then crosswalk (truncated normal with
/// mean -r_base on [-2 r_base, 0]), otherwise -r_base.
double reward_sample(const GraphMap& map, NodeId next, NodeId prev, const EnvConfig& cfg, Rng& rng);

/// Normal(mean, std) conditioned on [lo, hi] by rejection. Throws
/// InternalError after 10^6 rejected attempts.
double trunc_normal(double mean, double std, double lo, double hi, Rng& rng);

}  // namespace qrrn
