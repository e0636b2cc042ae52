#include "qrrn/env.hpp"

#include <string>

#include "qrrn/errors.hpp"

namespace qrrn {

void EnvConfig::validate() const {
    if (!(r_base > 0.0)) throw ConfigError("r_base must be > 0");
    if (!(r_loopback >= 0.0)) throw ConfigError("r_loopback must be >= 0");
    if (!(crosswalk_std > 0.0)) throw ConfigError("crosswalk_std must be > 0");
    if (episode_cap < 1) throw ConfigError("episode_cap must be >= 1");
}

Observation encode_state(int num_states, ObsEncoding enc, NodeId state) {
    if (state < 0 || state >= num_states) throw InvalidState("state " + std::to_string(state));
    if (enc == ObsEncoding::index) return {static_cast<double>(state)};
    Observation v(num_states, 0.0);
    v[state] = 1.0;
    return v;
}

Observation observe(const GraphMap& map, const EnvConfig& cfg, NodeId state) {
    return encode_state(map.num_states(), cfg.obs_encoding, state);
}

EnvState reset(const GraphMap& map, const EnvConfig& cfg, std::uint64_t seed, Observation* obs) {
    EnvState env;
    env.map = &map;
    env.current = map.start();
    env.prev = map.start();
    env.steps = 0;
    env.rng.reseed(seed);
    env.done = false;
    if (obs) *obs = observe(map, cfg, env.current);
    return env;
}

StepResult step(EnvState& env, const EnvConfig& cfg, ActionIndex action) {
    if (env.done) throw EpisodeFinished("step called on a finished episode");
    const GraphMap& map = *env.map;
    const NodeId next = transition(map, env.current, action);
    StepResult out;
    out.reward = reward_sample(map, next, env.current, cfg, env.rng);
    env.prev = env.current;
    env.current = next;
    ++env.steps;
    env.done = map.is_goal(next) || env.steps >= cfg.episode_cap;
    out.done = env.done;
    out.obs = observe(map, cfg, next);
    return out;
}

double reward_sample(const GraphMap& map, NodeId next, NodeId prev, const EnvConfig& cfg, Rng& rng) {
    if (map.is_goal(next)) return 0.0;
    if (next == prev) return -(cfg.r_base + cfg.r_loopback);
    if (map.is_crosswalk(next))
        return trunc_normal(-cfg.r_base, cfg.crosswalk_std, -2.0 * cfg.r_base, 0.0, rng);
    return -cfg.r_base;
}

double trunc_normal(double mean, double std, double lo, double hi, Rng& rng) {
    constexpr int kMaxAttempts = 1'000'000;
    for (int i = 0; i < kMaxAttempts; ++i) {
        const double x = mean + std * rng.normal();
        if (x >= lo && x <= hi) return x;
    }
    throw InternalError("truncated normal rejection sampler exceeded attempt cap");
}

}  // namespace qrrn
