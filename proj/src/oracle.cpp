#include "qrrn/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "qrrn/errors.hpp"

namespace qrrn::oracle {

ActionIndex QTable::best_action(NodeId s) const {
    ActionIndex best = 0;
    for (ActionIndex a = 1; a < action_dim; ++a)
        if (at(s, a) > at(s, best)) best = a;
    return best;
}

namespace {

// Expected one-step reward. The crosswalk draw is symmetric about -r_base on
// [-2 r_base, 0], so its expectation is the base reward.
double mean_reward(const GraphMap& map, NodeId next, NodeId prev, const EnvConfig& cfg) {
    if (map.is_goal(next)) return 0.0;
    if (next == prev) return -(cfg.r_base + cfg.r_loopback);
    return -cfg.r_base;
}

}  // namespace

QTable value_iteration(const GraphMap& map, const EnvConfig& cfg, double gamma, double tol) {
    const int ns = map.num_states();
    const int na = map.action_dim();
    QTable q{ns, na, std::vector<double>(static_cast<std::size_t>(ns) * na, 0.0)};
    std::vector<double> v(ns, 0.0);
    for (;;) {
        double change = 0.0;
        for (NodeId s = 0; s < ns; ++s) {
            if (map.is_goal(s)) continue;
            for (ActionIndex a = 0; a < na; ++a) {
                const NodeId t = transition(map, s, a);
                const double next_value = map.is_goal(t) ? 0.0 : v[t];
                const double updated = mean_reward(map, t, s, cfg) + gamma * next_value;
                change = std::max(change, std::abs(updated - q.at(s, a)));
                q.at(s, a) = updated;
            }
        }
        for (NodeId s = 0; s < ns; ++s) {
            if (map.is_goal(s)) continue;
            double best = q.at(s, 0);
            for (ActionIndex a = 1; a < na; ++a) best = std::max(best, q.at(s, a));
            v[s] = best;
        }
        if (change < tol) break;
    }
    return q;
}

Route greedy_rollout(const GraphMap& map, const QTable& q) {
    Route r{{map.start()}};
    NodeId s = map.start();
    for (int k = 0; k < map.num_states() && !map.is_goal(s); ++k) {
        s = transition(map, s, q.best_action(s));
        r.nodes.push_back(s);
    }
    return r;
}

GraphMap strip_crosswalks(const GraphMap& map) {
    std::vector<Node> nodes = map.nodes();
    for (Node& n : nodes) n.crosswalk = false;
    return GraphMap(map.name() + "-no-crosswalk", std::move(nodes), map.edges(), map.action_dim(),
                    map.start(), map.goals(), {});
}

EmpiricalDist mc_returns(const GraphMap& map, const EnvConfig& cfg, const std::vector<ActionIndex>& policy,
                         NodeId start, double gamma, int episodes, std::uint64_t seed) {
    if (static_cast<int>(policy.size()) != map.num_states())
        throw BadParams("policy must assign an action to every state");
    if (episodes < 1) throw BadParams("episodes must be >= 1");
    EmpiricalDist out;
    out.samples.reserve(static_cast<std::size_t>(episodes));
    int capped = 0;
    for (int e = 0; e < episodes; ++e) {
        EnvState env = reset(map, cfg, derive_seed(seed, static_cast<std::uint64_t>(e)));
        env.current = env.prev = start;
        double ret = 0.0;
        double discount = 1.0;
        while (!map.is_goal(env.current) && env.steps < cfg.episode_cap) {
            const StepResult res = step(env, cfg, policy[env.current]);
            ret += discount * res.reward;
            discount *= gamma;
        }
        if (!map.is_goal(env.current)) ++capped;
        out.samples.push_back(ret);
    }
    if (2 * capped > episodes)
        throw NonterminatingPolicy(std::to_string(capped) + " of " + std::to_string(episodes) +
                                   " rollouts hit the episode cap");
    std::sort(out.samples.begin(), out.samples.end());
    return out;
}

std::vector<ActionIndex> route_policy(const GraphMap& map, const Route& route) {
    validate_route(map, route);
    std::vector<ActionIndex> policy(map.num_states(), 0);
    for (std::size_t i = 1; i < route.nodes.size(); ++i) {
        const NodeId from = route.nodes[i - 1];
        for (ActionIndex a = 0; a < map.action_dim(); ++a)
            if (map.edge_target(from, a) == route.nodes[i]) {
                policy[from] = a;
                break;
            }
    }
    return policy;
}

QuantileDist empirical_quantiles(const EmpiricalDist& d, int n) {
    if (n < 1) throw BadN("N must be >= 1");
    const auto& xs = d.samples;
    if (static_cast<int>(xs.size()) < n)
        throw TooFewSamples("need at least " + std::to_string(n) + " samples");
    const double count = static_cast<double>(xs.size());
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) {
        const double tau = (2.0 * i + 1.0) / (2.0 * n);
        const double pos = std::clamp(tau * count - 0.5, 0.0, count - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, xs.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        q[i] = xs[lo] + frac * (xs[hi] - xs[lo]);
    }
    return QuantileDist(std::move(q));
}

double sample_mean(const std::vector<double>& xs) {
    long double acc = 0.0L;
    for (double x : xs) acc += x;
    return static_cast<double>(acc / static_cast<long double>(xs.size()));
}

double sample_std(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    long double acc = 0.0L;
    for (double x : xs) acc += static_cast<long double>(x - m) * (x - m);
    return std::sqrt(static_cast<double>(acc / static_cast<long double>(xs.size())));
}

bool ssd_grid_check(const QuantileDist& a, const QuantileDist& b, int grid_points) {
    if (grid_points < 100) throw BadParams("grid_points must be >= 100");
    const auto sa = a.sorted();
    const auto sb = b.sorted();
    const double lo = std::min(sa.front(), sb.front()) - 1.0;
    const double hi = std::max(sa.back(), sb.back()) + 1.0;
    const double range = hi - lo;
    const double h = range / (grid_points - 1);
    const double tol = 1e-6 * range;

    // Integral of a step CDF over [x0, x1]: each atom at p contributes
    // (x1 - max(x0, p)) / n when p < x1.
    auto cell_integral = [](const std::vector<double>& atoms, double x0, double x1) {
        double acc = 0.0;
        for (double p : atoms) {
            if (p >= x1) break;
            acc += x1 - std::max(x0, p);
        }
        return acc / static_cast<double>(atoms.size());
    };

    double ia = 0.0, ib = 0.0;
    for (int k = 1; k < grid_points; ++k) {
        const double x0 = lo + (k - 1) * h;
        const double x1 = k + 1 == grid_points ? hi : lo + k * h;
        ia += cell_integral(sa, x0, x1);
        ib += cell_integral(sb, x0, x1);
        if (ia > ib + tol) return false;
    }
    return true;
}

}  // namespace qrrn::oracle
