#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "qrrn/env.hpp"
#include "qrrn/errors.hpp"
#include "qrrn/learner.hpp"
#include "qrrn/oracle.hpp"
#include "test_support.hpp"

using namespace qrrn;

namespace {

AgentConfig tabular_cfg(int n) {
    AgentConfig c;
    c.n_quantiles = n;
    return c;
}

std::vector<double> as_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Epsilon, Schedule) {
    const AgentConfig c;
    const std::int64_t total = 100'000;
    EXPECT_EQ(epsilon(0, total, c), 1.0);
    EXPECT_NEAR(epsilon(2000, total, c), 0.1, 1e-12);
    EXPECT_NEAR(epsilon(1000, total, c), 0.55, 1e-12);
    EXPECT_EQ(epsilon(50'000, total, c), 0.1);
    EXPECT_EQ(epsilon(total, total, c), 0.1);
    for (std::int64_t s = 1; s <= 2000; ++s) EXPECT_LE(epsilon(s, total, c), epsilon(s - 1, total, c));
}

TEST(ReplayBuffer, FifoOverwrite) {
    ReplayBuffer buf(2);
    const Transition t1{0, 0, -1, 1, false}, t2{1, 0, -2, 2, false}, t3{2, 0, -3, 3, true};
    buf.push(t1);
    buf.push(t2);
    buf.push(t3);
    EXPECT_EQ(buf.size(), 2);
    EXPECT_EQ(buf.ordered(), (std::vector<Transition>{t2, t3}));
    buf.push(t1);
    EXPECT_EQ(buf.ordered(), (std::vector<Transition>{t3, t1}));
}

TEST(ReplayBuffer, SampleWithReplacement) {
    ReplayBuffer buf(10);
    Rng rng(1);
    EXPECT_THROW(buf.sample(1, rng), EmptyBuffer);
    const Transition t{3, 1, -2, 4, false};
    buf.push(t);
    const auto s = buf.sample(64, rng);
    ASSERT_EQ(s.size(), 64u);
    for (const Transition& x : s) EXPECT_EQ(x, t);
}

TEST(ReplayBuffer, SampleFrequenciesUniform) {
    const int k = 8, draws = 100'000;
    ReplayBuffer buf(k);
    for (int i = 0; i < k; ++i) buf.push({i, 0, 0, 0, false});
    Rng rng(2);
    std::vector<int> counts(k, 0);
    for (const Transition& t : buf.sample(draws, rng)) ++counts[t.s];
    const double expect = static_cast<double>(draws) / k;
    const double sigma = std::sqrt(draws * (1.0 / k) * (1 - 1.0 / k));
    double chi2 = 0;
    for (int c : counts) {
        EXPECT_LE(std::abs(c - expect), 3 * sigma);
        chi2 += (c - expect) * (c - expect) / expect;
    }
    EXPECT_LT(chi2, 24.3);  // chi-square 7 dof, p = 0.001
}

TEST(BehaviorAction, PureExplorationIsUniform) {
    AgentConfig c;
    c.exploration_final_eps = 1.0;
    const Agent agent(c, 3, 4);
    Rng rng(3);
    const int draws = 100'000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < draws; ++i) ++counts[behavior_action(agent, 0, 50'000, 100'000, rng)];
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (int cnt : counts) EXPECT_LE(std::abs(cnt - draws / 4.0), 3 * sigma);
}

TEST(BehaviorAction, NoExplorationIsGreedy) {
    AgentConfig c;
    c.exploration_final_eps = 0.0;
    Agent agent(c, 2, 3);
    const std::vector<double> hi{-1, -1, -1, -1}, lo{-5, -5, -5, -5};
    agent.set_quantiles(0, 0, lo);
    agent.set_quantiles(0, 1, lo);
    agent.set_quantiles(0, 2, hi);
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(behavior_action(agent, 0, 90'000, 100'000, rng), 2);
}

TEST(BehaviorAction, Reproducible) {
    const Agent agent(AgentConfig{}, 2, 3);
    Rng a(5), b(5);
    for (int i = 0; i < 500; ++i)
        EXPECT_EQ(behavior_action(agent, 0, i, 1000, a), behavior_action(agent, 0, i, 1000, b));
}

TEST(TdDeltas, ConvergedTerminal) {
    Agent agent(tabular_cfg(4), 2, 1);
    const std::vector<double> atoms{-3, -3, -3, -3};
    agent.set_quantiles(0, 0, atoms);
    const std::vector<Transition> batch{{0, 0, -3, 1, true}};
    const auto deltas = td_deltas(batch, agent);
    for (double d : deltas[0]) EXPECT_EQ(d, 0.0);
}

TEST(TdDeltas, SingleQuantile) {
    Agent agent(tabular_cfg(1), 2, 1);
    agent.set_quantiles(0, 0, std::vector<double>{-5});
    agent.set_quantiles(1, 0, std::vector<double>{-10});
    const std::vector<Transition> batch{{0, 0, -1, 1, false}};
    EXPECT_NEAR(td_deltas(batch, agent)[0][0], -5.9, 1e-12);
}

TEST(TdDeltas, TwoQuantilesHandExpanded) {
    AgentConfig c = tabular_cfg(2);
    c.gamma = 0.5;
    Agent agent(c, 2, 2);
    agent.set_quantiles(0, 1, std::vector<double>{-4, -2});
    // At s' action 1 has the larger mean and is the bootstrap action.
    agent.set_quantiles(1, 0, std::vector<double>{-20, -20});
    agent.set_quantiles(1, 1, std::vector<double>{-10, -6});
    const std::vector<Transition> batch{{0, 1, -1, 1, false}};
    // targets: -1 + 0.5 * {-10, -6} = {-6, -4}
    EXPECT_EQ(td_deltas(batch, agent)[0], (std::vector<double>{-2, 0, -4, -2}));
}

TEST(TdDeltas, UsesTargetParameters) {
    AgentConfig c = tabular_cfg(1);
    c.target_sync_interval = 100;
    Agent agent(c, 2, 1);
    agent.set_quantiles(1, 0, std::vector<double>{-10});
    agent.online_params()[1] = -50;  // online only
    const std::vector<Transition> batch{{0, 0, 0, 1, false}};
    EXPECT_NEAR(td_deltas(batch, agent)[0][0], 0.99 * -10, 1e-12);
    agent.sync_target();
    EXPECT_NEAR(td_deltas(batch, agent)[0][0], 0.99 * -50, 1e-12);
}

TEST(QrUpdate, EmptyBatch) {
    Agent agent(tabular_cfg(4), 2, 1);
    EXPECT_THROW(qr_update(agent, std::span<const Transition>{}), EmptyBatch);
}

TEST(QrUpdate, ZeroTdIsFixedPoint) {
    for (OptimizerKind opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
        AgentConfig c = tabular_cfg(4);
        c.optimizer = opt;
        Agent agent(c, 3, 2);
        const std::vector<double> atoms{-3, -3, -3, -3};
        agent.set_quantiles(0, 1, atoms);
        const auto before = as_vec(agent.online_params());
        const std::vector<Transition> batch{{0, 1, -3, 2, true}, {0, 1, -3, 2, true}};
        EXPECT_EQ(qr_update(agent, batch), 0.0);
        EXPECT_EQ(as_vec(agent.online_params()), before);
    }
}

TEST(QrUpdate, LossMatchesDefinition) {
    AgentConfig c = tabular_cfg(2);
    c.gamma = 0.5;
    Agent agent(c, 2, 2);
    agent.set_quantiles(0, 1, std::vector<double>{-4, -2});
    agent.set_quantiles(1, 0, std::vector<double>{-20, -20});
    agent.set_quantiles(1, 1, std::vector<double>{-10, -6});
    const std::vector<Transition> batch{{0, 1, -1, 1, false}};
    // deltas {-2, 0, -4, -2}, taus {0.25, 0.75}
    const double expect = 0.5 * (0.75 * 1.5 + 0.0) + 0.5 * (0.25 * 3.5 + 0.25 * 1.5);
    EXPECT_NEAR(qr_update(agent, batch), expect, 1e-12);
}

TEST(QrUpdate, TargetUntouched) {
    AgentConfig c = tabular_cfg(4);
    c.target_sync_interval = 10;
    Agent agent(c, 2, 1);
    const auto target = as_vec(agent.target_params());
    const std::vector<Transition> batch{{0, 0, -1, 1, true}};
    qr_update(agent, batch);
    EXPECT_EQ(as_vec(agent.target_params()), target);
    EXPECT_NE(as_vec(agent.online_params()), target);
}

TEST(QrUpdate, PointMassBandit) {
    AgentConfig c = tabular_cfg(4);
    c.lr = 1e-2;
    Agent agent(c, 2, 1);
    const std::vector<Transition> batch(64, Transition{0, 0, -1, 1, true});
    for (int k = 0; k < 10'000; ++k) qr_update(agent, batch);
    for (double q : agent.quantiles(0)) EXPECT_NEAR(q, -1.0, 1e-2);
}

TEST(QrUpdate, TabularMatchesLinearNet) {
    const int states = 4, actions = 2, n = 3;
    AgentConfig tc = tabular_cfg(n);
    tc.optimizer = OptimizerKind::sgd;
    tc.lr = 0.1;
    AgentConfig nc = tc;
    nc.backend = Backend::network;
    nc.hidden = {};
    Agent tab(tc, states, actions);
    Agent net(nc, states, actions, ObsEncoding::one_hot, 1);

    // Same starting quantiles: table entry (s, a, i) is weight column s.
    Rng rng(6);
    const LayerShape& L = net.online_net()->layers()[0];
    auto tp = tab.online_params();
    auto np = net.online_params();
    std::fill(np.begin(), np.end(), 0.0);
    for (int s = 0; s < states; ++s)
        for (int o = 0; o < actions * n; ++o) {
            const double v = -10 * rng.uniform();
            tp[static_cast<std::size_t>(s) * actions * n + o] = v;
            np[L.weight_offset + static_cast<std::size_t>(o) * states + s] = v;
        }
    tab.sync_target();
    net.sync_target();
    for (int s = 0; s < states; ++s) ASSERT_EQ(tab.quantiles(s), net.quantiles(s));

    const std::vector<Transition> batch{
        {0, 1, -1, 1, false}, {1, 0, -3, 2, false}, {2, 1, -2.5, 3, true}, {0, 0, -1, 2, false}};
    const auto tab_before = as_vec(tab.online_params());
    const auto net_before = as_vec(net.online_params());
    EXPECT_NEAR(qr_update(tab, batch), qr_update(net, batch), 1e-12);
    for (int s = 0; s < states; ++s)
        for (int o = 0; o < actions * n; ++o) {
            const std::size_t ti = static_cast<std::size_t>(s) * actions * n + o;
            const std::size_t ni = L.weight_offset + static_cast<std::size_t>(o) * states + s;
            EXPECT_NEAR(tab.online_params()[ti] - tab_before[ti], net.online_params()[ni] - net_before[ni], 1e-8);
        }
}

TEST(QrUpdate, SingleQuantileChainMatchesValueIteration) {
    const GraphMap m = oracle::strip_crosswalks(generate_scenario(ScenarioKind::two_route, {3, 4, 0}));
    EnvConfig env;
    env.r_base = 1;
    env.r_loopback = 0.5;
    AgentConfig c = tabular_cfg(1);
    c.optimizer = OptimizerKind::sgd;
    c.lr = 1.0;
    Agent agent(c, m.num_states(), m.action_dim());

    std::vector<Transition> sweep;
    Rng rng(0);
    for (NodeId s = 0; s < m.num_states(); ++s) {
        if (m.is_goal(s)) continue;
        for (ActionIndex a = 0; a < m.action_dim(); ++a) {
            const NodeId next = transition(m, s, a);
            sweep.push_back({s, a, reward_sample(m, next, s, env, rng), next, m.is_goal(next)});
        }
    }
    for (int it = 0; it < 3000; ++it)
        for (const Transition& t : sweep) {
            qr_update(agent, std::span<const Transition>(&t, 1));
            agent.sync_target();
        }

    const oracle::QTable q = oracle::value_iteration(m, env, c.gamma);
    for (NodeId s = 0; s < m.num_states(); ++s) {
        if (m.is_goal(s)) continue;
        for (ActionIndex a = 0; a < m.action_dim(); ++a)
            EXPECT_NEAR(agent.quantiles(s)[a], q.at(s, a), 1e-2) << s << "," << a;
    }
}

TEST(QrUpdate, DeterministicLossTrajectory) {
    auto run = [] {
        AgentConfig c;
        c.backend = Backend::network;
        c.hidden = {8};
        Agent agent(c, 5, 2, ObsEncoding::one_hot, 3);
        Rng rng(9);
        std::vector<double> losses;
        for (int k = 0; k < 200; ++k) {
            std::vector<Transition> batch;
            for (int b = 0; b < 8; ++b) {
                const NodeId s = static_cast<NodeId>(rng.below(4));
                batch.push_back({s, static_cast<ActionIndex>(rng.below(2)), -rng.uniform(), s + 1, s == 3});
            }
            losses.push_back(qr_update(agent, batch));
        }
        return losses;
    };
    EXPECT_EQ(run(), run());
}

TEST(SyncTarget, TabularDefaultKeepsTargetEqual) {
    AgentConfig c;
    EXPECT_EQ(c.effective_sync_interval(), 1);
    c.backend = Backend::network;
    EXPECT_EQ(c.effective_sync_interval(), 1000);
}

TEST(SyncTarget, NetworkDivergesThenEqualizes) {
    AgentConfig c;
    c.backend = Backend::network;
    c.hidden = {16};
    c.lr = 1e-3;
    Agent agent(c, 4, 2, ObsEncoding::one_hot, 2);
    Rng rng(4);
    auto gap = [&] {
        double g = 0;
        for (std::size_t i = 0; i < agent.online_params().size(); ++i)
            g += std::abs(agent.online_params()[i] - agent.target_params()[i]);
        return g;
    };
    std::vector<double> gaps;
    for (int step = 1; step <= 2000; ++step) {
        std::vector<Transition> batch;
        for (int b = 0; b < 4; ++b) {
            const NodeId s = static_cast<NodeId>(rng.below(3));
            batch.push_back({s, static_cast<ActionIndex>(rng.below(2)), -1.0, s + 1, s == 2});
        }
        qr_update(agent, batch);
        if (step == 999 || step == 1999) gaps.push_back(gap());
        if (step % c.effective_sync_interval() == 0) {
            agent.sync_target();
            EXPECT_EQ(gap(), 0.0);
        }
    }
    ASSERT_EQ(gaps.size(), 2u);
    EXPECT_GT(gaps[0], 0.0);
    EXPECT_GT(gaps[1], 0.0);
    // After a sync, td_deltas do not depend on which copy is read.
    const std::vector<Transition> batch{{0, 1, -1, 1, false}};
    const auto d = td_deltas(batch, agent);
    EXPECT_EQ(agent.quantiles(1), agent.target_quantiles(1));
    EXPECT_EQ(d.size(), 1u);
}

namespace {

// Root of the sample-average quantile Huber gradient in theta, by bisection.
double huber_quantile(const std::vector<double>& xs, double tau, double kappa) {
    double lo = -10, hi = 5;
    for (int it = 0; it < 60; ++it) {
        const double theta = 0.5 * (lo + hi);
        double g = 0;
        for (double x : xs) {
            const double u = x - theta;
            g += std::abs(tau - (u < 0 ? 1.0 : 0.0)) * std::clamp(u, -kappa, kappa) / kappa;
        }
        (g > 0 ? lo : hi) = theta;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(QrUpdate, BanditAtomsMinimizeHuberQuantileLoss) {
    Rng draw(12);
    std::vector<double> xs(200'000);
    for (double& x : xs) x = trunc_normal(-3, 1, -6, 0, draw);
    const auto taus = midpoints(4);
    for (double kappa : {1.0, 0.01}) {
        AgentConfig c = tabular_cfg(4);
        c.lr = 1e-3;
        c.kappa = kappa;
        Agent agent(c, 2, 1);
        Rng rng(13);
        std::vector<Transition> batch(64, Transition{0, 0, 0, 1, true});
        for (int k = 0; k < 30'000; ++k) {
            for (Transition& t : batch) t.r = trunc_normal(-3, 1, -6, 0, rng);
            qr_update(agent, batch);
        }
        const auto q = agent.quantiles(0);
        for (int i = 0; i < 4; ++i) {
            EXPECT_NEAR(q[i], huber_quantile(xs, taus[i], kappa), 0.03) << "kappa " << kappa << " atom " << i;
            if (kappa < 0.1)
                EXPECT_NEAR(q[i], qrrn::testing::trunc_normal_quantile(taus[i], -3, 1, -6, 0), 0.03);
        }
    }
}
