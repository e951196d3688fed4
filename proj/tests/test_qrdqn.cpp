#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "qdrl/mdp.hpp"
#include "qdrl/nn.hpp"
#include "qdrl/qrdqn.hpp"
#include "qdrl/quantile_loss.hpp"
#include "qdrl/rng.hpp"

using namespace qdrl;

namespace {

/// One non-terminal state whose single action ends the episode with reward 2.
FiniteMdp single_step_mdp() {
    FiniteMdp mdp(2, 1, 0.9);
    mdp.add_transition(0, 0, 1, 1.0, 2.0);
    mdp.make_terminal(1);
    mdp.validate();
    return mdp;
}

/// Hand-built net for 2 states x 2 actions x 2 quantiles: at state 1 the
/// output is (1, 2, 3, 4), i.e. action 0 has mean 1.5 and action 1 mean 3.5.
MlpParams explicit_net() {
    MlpParams net = MlpParams::zeros(std::vector<std::size_t>{2, 4});
    for (std::size_t o = 0; o < 4; ++o) net.layers[0].w[o * 2 + 1] = static_cast<double>(o + 1);
    return net;
}

}  // namespace

TEST_CASE("replay buffer is a ring that overwrites the oldest entries") {
    ReplayBuffer buffer(3);
    CHECK(buffer.capacity() == 3);
    CHECK(buffer.size() == 0);
    Rng rng(1);
    CHECK_THROWS_AS(buffer.sample(rng), std::invalid_argument);
    for (StateIndex s = 1; s <= 5; ++s) buffer.push({s, 0, 0.0, 0, false});
    CHECK(buffer.size() == 3);
    std::set<StateIndex> seen;
    for (std::size_t i = 0; i < 200; ++i) seen.insert(buffer.sample(rng).state);
    CHECK(seen == std::set<StateIndex>{3, 4, 5});
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("one_hot basis vectors") {
    const std::vector<double> f = one_hot(1, 3);
    CHECK(f == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(one_hot(3, 3), std::invalid_argument);
}

TEST_CASE("greedy_action compares row means and breaks ties low") {
    const std::vector<double> rows{0.0, 1.0, 2.0, 0.0};  // means 0.5 and 1.0
    CHECK(greedy_action(rows, 2, 2) == 1);
    const std::vector<double> tied{0.0, 1.0, 2.0, -1.0};  // both means 0.5
    CHECK(greedy_action(tied, 2, 2) == 0);
    CHECK_THROWS_AS(greedy_action(tied, 2, 3), std::invalid_argument);
}

TEST_CASE("epsilon_greedy interpolates between greedy and uniform") {
    const std::vector<double> rows{0.0, 0.0, 5.0, 5.0};
    Rng rng(8);
    for (std::size_t i = 0; i < 50; ++i) CHECK(epsilon_greedy(rows, 2, 2, 0.0, rng) == 1);
    std::size_t zeros = 0;
    constexpr std::size_t kDraws = 20000;
    for (std::size_t i = 0; i < kDraws; ++i)
        if (epsilon_greedy(rows, 2, 2, 1.0, rng) == 0) ++zeros;
    CHECK(std::abs(static_cast<double>(zeros) - 0.5 * kDraws) < 3.0 * std::sqrt(kDraws * 0.25));
    CHECK_THROWS_AS(epsilon_greedy(rows, 2, 2, 1.5, rng), std::invalid_argument);
}

TEST_CASE("bellman_target bootstraps from the target net's greedy row") {
    const MlpParams net = explicit_net();
    const TransitionSample done{0, 0, 0.5, 1, true};
    CHECK(bellman_target(net, done, 0.5, 2, 2, 2) == std::vector<double>{0.5, 0.5});
    const TransitionSample step{0, 0, 0.5, 1, false};
    const std::vector<double> targets = bellman_target(net, step, 0.5, 2, 2, 2);
    // greedy row at state 1 is action 1 = (3, 4): targets 0.5 + 0.5 * (3, 4)
    REQUIRE(targets.size() == 2);
    CHECK(targets[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(targets[1] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("qrdqn_loss hand values at kappa zero") {
    const std::vector<double> pred{0.0, 0.0};
    const std::vector<double> targets{0.0, 1.0};
    const QrdqnLossResult r = qrdqn_loss(pred, targets, 0.0);
    CHECK(r.loss == doctest::Approx(0.5).epsilon(1e-15));
    REQUIRE(r.grad.size() == 2);
    CHECK(r.grad[0] == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(r.grad[1] == doctest::Approx(-0.75).epsilon(1e-15));

    const std::vector<double> one_pred{0.0};
    const std::vector<double> one_target{1.0};
    const QrdqnLossResult single = qrdqn_loss(one_pred, one_target, 0.0);
    CHECK(single.loss == doctest::Approx(0.5).epsilon(1e-15));  // rho_{0.5}(1)
    CHECK(single.grad[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("qrdqn_loss huber values and gradient consistency") {
    const std::vector<double> pred{0.0};
    const std::vector<double> targets{2.0};
    const QrdqnLossResult r = qrdqn_loss(pred, targets, 1.0);
    CHECK(r.loss == doctest::Approx(0.75).epsilon(1e-15));  // 0.5 * huber(2)
    CHECK(r.grad[0] == doctest::Approx(-0.5).epsilon(1e-15));

    // finite-difference check away from the kinks
    const std::vector<double> p0{0.3, 1.7};
    const std::vector<double> ts{-0.9, 0.8, 2.6};
    const QrdqnLossResult at = qrdqn_loss(p0, ts, 1.0);
    constexpr double kStep = 1e-6;
    for (std::size_t i = 0; i < p0.size(); ++i) {
        std::vector<double> up = p0;
        std::vector<double> down = p0;
        up[i] += kStep;
        down[i] -= kStep;
        const double fd =
            (qrdqn_loss(up, ts, 1.0).loss - qrdqn_loss(down, ts, 1.0).loss) / (2.0 * kStep);
        CHECK(at.grad[i] == doctest::Approx(fd).epsilon(1e-6));
    }

    CHECK_THROWS_AS(qrdqn_loss(std::vector<double>{}, targets, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(qrdqn_loss(pred, std::vector<double>{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(qrdqn_loss(pred, targets, -1.0), std::invalid_argument);
}

TEST_CASE("greedy_policy reads row means per state") {
    const MlpParams net = explicit_net();
    FiniteMdp mdp(2, 2, 0.9);
    mdp.add_transition(0, 0, 1, 1.0, 0.0);
    mdp.add_transition(0, 1, 1, 1.0, 0.0);
    mdp.make_terminal(1);
    const Policy pi = greedy_policy(net, mdp, 2);
    CHECK(pi.action_at(1) == 1);
}

TEST_CASE("evaluate_greedy_return on the chain is exact for fixed nets") {
    const ChainMdp chain = build_chain_mdp();
    Rng rng(3);
    // 2 states x 2 actions x 1 quantile; make action 1 look better at state 0
    MlpParams right = MlpParams::zeros(std::vector<std::size_t>{2, 2});
    right.layers[0].w = {0.0, 0.0, 1.0, 0.0};  // theta(a1) = 1 at state 0
    CHECK(evaluate_greedy_return(right, chain.mdp, chain.start, 5, 100, 1, rng) == 1.0);
    MlpParams left = MlpParams::zeros(std::vector<std::size_t>{2, 2});
    left.layers[0].w = {1.0, 0.0, 0.0, 0.0};
    CHECK(evaluate_greedy_return(left, chain.mdp, chain.start, 3, 50, 1, rng) == 0.0);
}

TEST_CASE("training fits the single-step reward for both kappa settings") {
    const FiniteMdp mdp = single_step_mdp();
    for (double kappa : {0.0, 1.0}) {
        AgentConfig config;
        config.n_quantiles = 3;
        config.kappa = kappa;
        config.hidden_sizes = {16};
        config.lr = 1e-2;
        config.batch_size = 16;
        config.warmup_steps = 32;
        config.train_steps = 1500;
        config.epsilon_decay_steps = 500;
        config.target_sync_period = 50;
        config.eval_period = 500;
        config.eval_episodes = 4;
        config.seed = 19;

        Rng rng(derive_seed(config.seed, 0));
        const TrainResult result = train_qrdqn(mdp, 0, config, rng);
        const std::vector<double> theta = mlp_forward(result.params, one_hot(0, 2));
        REQUIRE(theta.size() == 3);
        for (double v : theta) CHECK(v == doctest::Approx(2.0).epsilon(0.025));
        REQUIRE(!result.curve.empty());
        CHECK(result.curve.back().step == 1500);
        CHECK(result.curve.back().greedy_return == 2.0);
        CHECK(std::isfinite(result.curve.back().loss));
        CHECK(result.curve.back().loss < result.curve.front().loss);
    }
}

TEST_CASE("training solves the chain control problem") {
    const ChainMdp chain = build_chain_mdp();
    AgentConfig config;
    config.n_quantiles = 8;
    config.hidden_sizes = {24};
    config.lr = 5e-3;
    config.batch_size = 32;
    config.warmup_steps = 100;
    config.buffer_capacity = 2000;
    config.train_steps = 3000;
    config.epsilon_decay_steps = 1500;
    config.target_sync_period = 100;
    config.eval_period = 1000;
    config.eval_episodes = 5;
    config.seed = 7;

    Rng rng(derive_seed(config.seed, 0));
    const TrainResult result = train_qrdqn(chain.mdp, chain.start, config, rng);
    const Policy learned = greedy_policy(result.params, chain.mdp, config.n_quantiles);
    CHECK(learned.action_at(chain.start) == 1);
    CHECK(result.curve.back().greedy_return == 1.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const FiniteMdp mdp = single_step_mdp();
    AgentConfig config;
    config.n_quantiles = 2;
    config.hidden_sizes = {8};
    config.train_steps = 300;
    config.warmup_steps = 32;
    config.batch_size = 8;
    config.eval_period = 100;
    config.eval_episodes = 2;
    config.seed = 5;

    Rng rng_a(derive_seed(11, 0));
    Rng rng_b(derive_seed(11, 0));
    const TrainResult a = train_qrdqn(mdp, 0, config, rng_a);
    const TrainResult b = train_qrdqn(mdp, 0, config, rng_b);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].greedy_return == b.curve[i].greedy_return);
        CHECK(a.curve[i].loss == b.curve[i].loss);
    }
    for (std::size_t l = 0; l < a.params.layers.size(); ++l)
        CHECK(a.params.layers[l].w == b.params.layers[l].w);
}

TEST_CASE("train_qrdqn validates start state and config") {
    const FiniteMdp mdp = single_step_mdp();
    Rng rng(1);
    AgentConfig config;
    CHECK_THROWS_AS(train_qrdqn(mdp, 5, config, rng), std::invalid_argument);
    CHECK_THROWS_AS(train_qrdqn(mdp, 1, config, rng), std::invalid_argument);
    AgentConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_qrdqn(mdp, 0, bad, rng), std::invalid_argument);
    AgentConfig bad_gamma;
    bad_gamma.gamma = 1.5;
    CHECK_THROWS_AS(train_qrdqn(mdp, 0, bad_gamma, rng), std::invalid_argument);
}
