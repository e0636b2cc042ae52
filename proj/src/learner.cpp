#include "qrrn/learner.hpp"

#include <algorithm>
#include <cmath>

#include "qrrn/errors.hpp"

namespace qrrn {

std::string_view to_string(Backend b) { return b == Backend::tabular ? "tabular" : "network"; }
std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::adam ? "adam" : "sgd"; }

Backend parse_backend(std::string_view s) {
    if (s == "tabular") return Backend::tabular;
    if (s == "network") return Backend::network;
    throw ConfigError("unknown backend '" + std::string(s) + "'");
}

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

void AgentConfig::validate() const {
    if (n_quantiles < 1) throw ConfigError("n_quantiles must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (buffer_size < 1) throw ConfigError("buffer_size must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (gradient_steps < 1) throw ConfigError("gradient_steps must be >= 1");
    if (!(exploration_fraction > 0.0 && exploration_fraction <= 1.0))
        throw ConfigError("exploration_fraction must lie in (0, 1]");
    if (!(exploration_final_eps >= 0.0 && exploration_final_eps <= 1.0))
        throw ConfigError("exploration_final_eps must lie in [0, 1]");
    if (target_sync_interval < 0) throw ConfigError("target_sync_interval must be >= 0");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be >= 1");
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
    items_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(const Transition& t) {
    if (static_cast<int>(items_.size()) < capacity_) {
        items_.push_back(t);
        return;
    }
    items_[cursor_] = t;
    cursor_ = (cursor_ + 1) % items_.size();
}

std::vector<Transition> ReplayBuffer::sample(int k, Rng& rng) const {
    if (items_.empty()) throw EmptyBuffer("cannot sample from an empty replay buffer");
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(k));
    // Index in oldest-first order so a restored buffer samples identically.
    for (int i = 0; i < k; ++i) out.push_back(items_[(cursor_ + rng.below(items_.size())) % items_.size()]);
    return out;
}

std::vector<Transition> ReplayBuffer::ordered() const {
    std::vector<Transition> out;
    out.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(items_[(cursor_ + i) % items_.size()]);
    return out;
}

void ReplayBuffer::restore(std::vector<Transition> oldest_first) {
    if (static_cast<int>(oldest_first.size()) > capacity_)
        throw CorruptCheckpoint("replay buffer holds more items than its capacity");
    items_ = std::move(oldest_first);
    items_.reserve(static_cast<std::size_t>(capacity_));
    cursor_ = 0;
}

// ---------------------------------------------------------------------------

double epsilon(std::int64_t step, std::int64_t total_steps, const AgentConfig& cfg) {
    const double horizon = cfg.exploration_fraction * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (horizon <= 0.0 || s >= horizon) return cfg.exploration_final_eps;
    return 1.0 + (cfg.exploration_final_eps - 1.0) * (s / horizon);
}

Agent::Agent(const AgentConfig& cfg, int num_states, int action_dim, ObsEncoding encoding,
             std::uint64_t init_seed)
    : cfg_(cfg),
      num_states_(num_states),
      action_dim_(action_dim),
      encoding_(encoding),
      buffer_(cfg.buffer_size) {
    cfg_.validate();
    if (num_states < 1 || action_dim < 1) throw BadDims("agent needs at least one state and action");
    const int out = action_dim * cfg.n_quantiles;
    if (backend_is_net()) {
        std::vector<int> dims;
        dims.push_back(encoding == ObsEncoding::one_hot ? num_states : 1);
        dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
        dims.push_back(out);
        net_ = init_net(dims, init_seed);
        target_net_ = net_;
        adam_ = AdamState(net_.num_params());
    } else {
        table_.assign(static_cast<std::size_t>(num_states) * out, 0.0);
        target_table_ = table_;
        adam_ = AdamState(table_.size());
    }
}

std::vector<double> Agent::quantiles(NodeId s) const {
    if (s < 0 || s >= num_states_) throw InvalidState("state " + std::to_string(s));
    if (backend_is_net()) return net_.forward(encode_state(num_states_, encoding_, s));
    const auto begin = table_.begin() + static_cast<std::ptrdiff_t>(table_index(s, 0));
    return {begin, begin + static_cast<std::ptrdiff_t>(action_dim_) * cfg_.n_quantiles};
}

std::vector<double> Agent::target_quantiles(NodeId s) const {
    if (s < 0 || s >= num_states_) throw InvalidState("state " + std::to_string(s));
    if (backend_is_net()) return target_net_.forward(encode_state(num_states_, encoding_, s));
    const auto begin = target_table_.begin() + static_cast<std::ptrdiff_t>(table_index(s, 0));
    return {begin, begin + static_cast<std::ptrdiff_t>(action_dim_) * cfg_.n_quantiles};
}

namespace {

ActionDists split_actions(const std::vector<double>& flat, int actions, int n) {
    ActionDists out;
    out.reserve(static_cast<std::size_t>(actions));
    for (int a = 0; a < actions; ++a)
        out.emplace_back(std::vector<double>(flat.begin() + a * n, flat.begin() + (a + 1) * n));
    return out;
}

}  // namespace

ActionDists Agent::dists(NodeId s) const {
    return split_actions(quantiles(s), action_dim_, cfg_.n_quantiles);
}

ActionDists Agent::target_dists(NodeId s) const {
    return split_actions(target_quantiles(s), action_dim_, cfg_.n_quantiles);
}

void Agent::set_quantiles(NodeId s, ActionIndex a, std::span<const double> atoms) {
    if (backend_is_net()) throw ConfigError("set_quantiles requires the tabular backend");
    if (s < 0 || s >= num_states_) throw InvalidState("state " + std::to_string(s));
    if (a < 0 || a >= action_dim_) throw InvalidAction("action " + std::to_string(a));
    if (static_cast<int>(atoms.size()) != cfg_.n_quantiles) throw BadN("atom count differs from N");
    std::copy(atoms.begin(), atoms.end(), table_.begin() + static_cast<std::ptrdiff_t>(table_index(s, a)));
    std::copy(atoms.begin(), atoms.end(),
              target_table_.begin() + static_cast<std::ptrdiff_t>(table_index(s, a)));
}

std::span<double> Agent::online_params() noexcept {
    return backend_is_net() ? net_.params() : std::span<double>(table_);
}
std::span<const double> Agent::online_params() const noexcept {
    return backend_is_net() ? net_.params() : std::span<const double>(table_);
}
std::span<double> Agent::target_params() noexcept {
    return backend_is_net() ? target_net_.params() : std::span<double>(target_table_);
}
std::span<const double> Agent::target_params() const noexcept {
    return backend_is_net() ? target_net_.params() : std::span<const double>(target_table_);
}

void Agent::sync_target() {
    if (backend_is_net())
        target_net_ = net_;
    else
        target_table_ = table_;
}

// ---------------------------------------------------------------------------

ActionIndex behavior_action(const Agent& agent, NodeId s, std::int64_t step, std::int64_t total_steps,
                            Rng& rng) {
    const double eps = epsilon(step, total_steps, agent.config());
    if (rng.uniform() < eps) return static_cast<ActionIndex>(rng.below(agent.action_dim()));
    return greedy_action(agent.dists(s));
}

std::vector<std::vector<double>> td_deltas(std::span<const Transition> batch, const Agent& agent) {
    const int n = agent.n_quantiles();
    const double gamma = agent.config().gamma;
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const Transition& t : batch) {
        std::vector<double> target(n, t.r);
        if (!t.done) {
            const std::vector<double> next = agent.target_quantiles(t.s_next);
            const ActionIndex best =
                greedy_action(split_actions(next, agent.action_dim(), n));
            for (int j = 0; j < n; ++j) target[j] += gamma * next[best * n + j];
        }
        const std::vector<double> cur = agent.quantiles(t.s);
        std::vector<double> delta(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) delta[i * n + j] = target[j] - cur[t.a * n + i];
        out.push_back(std::move(delta));
    }
    return out;
}

double qr_update(Agent& agent, std::span<const Transition> batch) {
    if (batch.empty()) throw EmptyBatch("qr_update needs at least one transition");
    const AgentConfig& cfg = agent.cfg_;
    const int n = cfg.n_quantiles;
    const auto taus = midpoints(n);
    const auto deltas = td_deltas(batch, agent);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> grads(agent.online_params().size(), 0.0);
    std::vector<double> grad_out;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = batch[b];
        const std::vector<double>& d = deltas[b];
        grad_out.assign(static_cast<std::size_t>(agent.action_dim()) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            double g = 0.0;
            for (int j = 0; j < n; ++j) {
                const double u = d[i * n + j];
                loss += quantile_huber(u, taus[i], cfg.kappa) * inv_n * inv_b;
                // d(delta)/d(theta_i) = -1
                g -= quantile_huber_grad(u, taus[i], cfg.kappa);
            }
            grad_out[t.a * n + i] = g * inv_n * inv_b;
        }
        if (agent.backend_is_net()) {
            agent.net_.backward_accumulate(encode_state(agent.num_states_, agent.encoding_, t.s),
                                           grad_out, grads);
        } else {
            const std::size_t base = agent.table_index(t.s, 0);
            for (std::size_t k = 0; k < grad_out.size(); ++k) grads[base + k] += grad_out[k];
        }
    }

    auto params = agent.online_params();
    if (cfg.optimizer == OptimizerKind::adam)
        adam_step(params, grads, agent.adam_, cfg.lr);
    else
        sgd_step(params, grads, cfg.lr);
    ++agent.updates_;
    return loss;
}

}  // namespace qrrn
