#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrrn/env.hpp"
#include "qrrn/nn.hpp"
#include "qrrn/policies.hpp"
#include "qrrn/quantdist.hpp"
#include "qrrn/rng.hpp"
#include "qrrn/roadnet.hpp"

namespace qrrn {

enum class Backend { tabular, network };
enum class OptimizerKind { adam, sgd };

std::string_view to_string(Backend b);
std::string_view to_string(OptimizerKind o);
Backend parse_backend(std::string_view s);
OptimizerKind parse_optimizer(std::string_view s);

struct AgentConfig {
    int n_quantiles = 4;
    double gamma = 0.99;
    double lr = 5e-4;
    int buffer_size = 2048;
    int batch_size = 64;
    int gradient_steps = 1;
    double exploration_fraction = 0.02;
    double exploration_final_eps = 0.1;
    int target_sync_interval = 0;  // 0 = backend default (tabular 1, network 1000)
    Backend backend = Backend::tabular;
    double kappa = 1.0;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::vector<int> hidden{64, 64};  // network backend only

    int effective_sync_interval() const {
        if (target_sync_interval > 0) return target_sync_interval;
        return backend == Backend::tabular ? 1 : 1000;
    }
    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct Transition {
    NodeId s = 0;
    ActionIndex a = 0;
    double r = 0.0;
    NodeId s_next = 0;
    bool done = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity = 1);

    void push(const Transition& t);
    /// k uniform draws with replacement. Throws EmptyBuffer.
    std::vector<Transition> sample(int k, Rng& rng) const;

    int size() const noexcept { return static_cast<int>(items_.size()); }
    int capacity() const noexcept { return capacity_; }
    /// Oldest first.
    std::vector<Transition> ordered() const;
    void restore(std::vector<Transition> oldest_first);

    friend bool operator==(const ReplayBuffer& a, const ReplayBuffer& b) {
        return a.capacity_ == b.capacity_ && a.ordered() == b.ordered();
    }

private:
    int capacity_;
    std::size_t cursor_ = 0;  // next slot to overwrite once full
    std::vector<Transition> items_;
};

/// Linear decay from 1 to exploration_final_eps over the first
/// exploration_fraction * total_steps steps, constant afterwards.
double epsilon(std::int64_t step, std::int64_t total_steps, const AgentConfig& cfg);

/// QR-DQN learner state: online and target quantile parameters (a
/// |S| x |A| x N table or a dense network with action-major output), the
/// replay buffer and optimizer state.
class Agent {
public:
    Agent(const AgentConfig& cfg, int num_states, int action_dim,
          ObsEncoding encoding = ObsEncoding::one_hot, std::uint64_t init_seed = 0);

    const AgentConfig& config() const noexcept { return cfg_; }
    int num_states() const noexcept { return num_states_; }
    int action_dim() const noexcept { return action_dim_; }
    int n_quantiles() const noexcept { return cfg_.n_quantiles; }
    ObsEncoding encoding() const noexcept { return encoding_; }

    /// Flat |A| * N quantiles at `s`, action-major.
    std::vector<double> quantiles(NodeId s) const;
    std::vector<double> target_quantiles(NodeId s) const;
    ActionDists dists(NodeId s) const;
    ActionDists target_dists(NodeId s) const;

    /// Tabular backend only: overwrite the online (and target) atoms at (s, a).
    void set_quantiles(NodeId s, ActionIndex a, std::span<const double> atoms);

    ReplayBuffer& buffer() noexcept { return buffer_; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }

    /// Flat online / target parameters (tabular table or network params).
    std::span<double> online_params() noexcept;
    std::span<const double> online_params() const noexcept;
    std::span<double> target_params() noexcept;
    std::span<const double> target_params() const noexcept;
    const DenseNet* online_net() const noexcept { return backend_is_net() ? &net_ : nullptr; }

    AdamState& adam() noexcept { return adam_; }
    const AdamState& adam() const noexcept { return adam_; }

    std::int64_t updates() const noexcept { return updates_; }
    void set_updates(std::int64_t n) noexcept { updates_ = n; }

    void sync_target();

private:
    bool backend_is_net() const noexcept { return cfg_.backend == Backend::network; }
    std::size_t table_index(NodeId s, ActionIndex a) const {
        return (static_cast<std::size_t>(s) * action_dim_ + a) * cfg_.n_quantiles;
    }

    AgentConfig cfg_;
    int num_states_;
    int action_dim_;
    ObsEncoding encoding_;
    std::vector<double> table_;
    std::vector<double> target_table_;
    DenseNet net_;
    DenseNet target_net_;
    AdamState adam_;
    ReplayBuffer buffer_;
    std::int64_t updates_ = 0;

    friend double qr_update(Agent& agent, std::span<const Transition> batch);
};

/// epsilon-greedy on the online means.
ActionIndex behavior_action(const Agent& agent, NodeId s, std::int64_t step,
                            std::int64_t total_steps, Rng& rng);

/// Quantile TD errors: entry [b][i * N + j] is
/// r + gamma * theta_target_j(s', a*) - theta_i(s, a), with a* the greedy
/// action of the target parameters at s'; on terminal transitions the
/// bootstrap term is dropped.
std::vector<std::vector<double>> td_deltas(std::span<const Transition> batch, const Agent& agent);

/// One optimizer step on the quantile regression loss
/// mean_b sum_i (1/N) sum_j rho_{tau_i}^kappa(delta_ij). Returns the loss
/// evaluated before the step. Throws EmptyBatch.
double qr_update(Agent& agent, std::span<const Transition> batch);

}  // namespace qrrn
