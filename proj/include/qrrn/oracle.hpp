#pragma once

// Reference computations used to check the learner. Nothing in here calls
// into the learner or the quantile-distribution statistics; agreement with
// those modules is therefore evidence rather than a tautology.

#include <cstdint>
#include <vector>

#include "qrrn/env.hpp"
#include "qrrn/quantdist.hpp"
#include "qrrn/roadnet.hpp"

namespace qrrn::oracle {

struct QTable {
    int num_states = 0;
    int action_dim = 0;
    std::vector<double> values;  // row-major |S| x |A|

    double at(NodeId s, ActionIndex a) const {
        return values[static_cast<std::size_t>(s) * action_dim + a];
    }
    double& at(NodeId s, ActionIndex a) { return values[static_cast<std::size_t>(s) * action_dim + a]; }
    /// argmax over actions at s, lowest index on ties.
    ActionIndex best_action(NodeId s) const;
};

/// Bellman optimality iteration with expected rewards; goal states are
/// absorbing with value 0. Stops when the sup-norm change drops below `tol`.
QTable value_iteration(const GraphMap& map, const EnvConfig& cfg, double gamma, double tol = 1e-10);

/// Follows best_action from map.start() until a goal or |S| steps.
Route greedy_rollout(const GraphMap& map, const QTable& q);

/// Copy of `map` with every crosswalk turned into an ordinary state.
GraphMap strip_crosswalks(const GraphMap& map);

/// Sorted discounted-return samples.
struct EmpiricalDist {
    std::vector<double> samples;
};

/// Rollouts of a fixed per-state action map. Episode e uses the env stream
/// derive_seed(seed, e). Throws NonterminatingPolicy when more than half the
/// rollouts hit cfg.episode_cap.
EmpiricalDist mc_returns(const GraphMap& map, const EnvConfig& cfg, const std::vector<ActionIndex>& policy,
                         NodeId start, double gamma, int episodes, std::uint64_t seed);

/// Per-state actions that walk `route` (other states take action 0).
std::vector<ActionIndex> route_policy(const GraphMap& map, const Route& route);

/// Quantiles at the midpoints (2i - 1) / (2N), interpolating linearly between
/// order statistics placed at (k + 0.5) / n. Throws TooFewSamples.
QuantileDist empirical_quantiles(const EmpiricalDist& d, int n);

double sample_mean(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

/// Brute-force second-order dominance: accumulates both CDFs cell by cell on
/// a uniform grid over [min atom - 1, max atom + 1] and compares the running
/// integrals at every grid point with tolerance 1e-6 * range.
bool ssd_grid_check(const QuantileDist& a, const QuantileDist& b, int grid_points);

}  // namespace qrrn::oracle
