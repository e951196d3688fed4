#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qdrl/distribution.hpp"
#include "qdrl/rng.hpp"

namespace qdrl {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// One environment step as seen by a learner.
struct TransitionSample {
    StateIndex state = 0;
    ActionIndex action = 0;
    double reward = 0.0;
    StateIndex next_state = 0;
    bool done = false;
};

/// Finite Markov decision process with dense transition and reward tensors.
///
/// Rewards are deterministic given (state, action, next state). Terminal
/// states absorb: they self-loop with probability 1 and reward 0, which the
/// builders install via make_terminal(). gamma lies in [0, 1]; operators that
/// require a strict discount (exact_value, policy_iteration, fixed points)
/// check gamma < 1 themselves.
class FiniteMdp {
public:
    static constexpr double kRowSumTol = 1e-12;

    FiniteMdp(std::size_t n_states, std::size_t n_actions, double gamma);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    bool terminal(StateIndex x) const { return terminal_[check_state(x)] != 0; }

    /// Adds probability mass p to (x, a) -> x2 and sets its reward.
    void add_transition(StateIndex x, ActionIndex a, StateIndex x2, double p, double r);
    /// Marks x terminal and installs the absorbing self-loop for all actions.
    void make_terminal(StateIndex x);

    double transition(StateIndex x, ActionIndex a, StateIndex x2) const;
    double reward(StateIndex x, ActionIndex a, StateIndex x2) const;
    /// Expected one-step reward from (x, a).
    double expected_reward(StateIndex x, ActionIndex a) const;

    /// Checks every row sums to 1 within 1e-12 and probabilities lie in
    /// [0, 1]; throws std::invalid_argument otherwise.
    void validate() const;

private:
    std::size_t check_state(StateIndex x) const;
    std::size_t row_index(StateIndex x, ActionIndex a) const;

    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    double gamma_ = 0.0;
    std::vector<double> transition_;
    std::vector<double> reward_;
    std::vector<unsigned char> terminal_;
};

/// Stationary stochastic policy; rows are distributions over actions.
class Policy {
public:
    Policy(std::size_t n_states, std::size_t n_actions);

    static Policy uniform(std::size_t n_states, std::size_t n_actions);
    static Policy deterministic(std::size_t n_states, std::size_t n_actions,
                                std::span<const ActionIndex> actions);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double action_prob(StateIndex x, ActionIndex a) const;
    void set_action_prob(StateIndex x, ActionIndex a, double p);
    /// Greedy arm of a deterministic policy; throws if the row is stochastic.
    ActionIndex action_at(StateIndex x) const;
    ActionIndex sample(StateIndex x, Rng& rng) const;
    void validate() const;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> probs_;
};

/// Draws (reward, next state, done) from the model. Throws on invalid
/// indices or when x is terminal.
TransitionSample sample_transition(const FiniteMdp& mdp, StateIndex x, ActionIndex a, Rng& rng);

/// Exact Q and V for a fixed policy, solved iteratively to Bellman residual
/// below 1e-10. Requires gamma < 1.
struct ExactValues {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> q;  // row-major (state, action)
    std::vector<double> v;

    double action_value(StateIndex x, ActionIndex a) const { return q[x * n_actions + a]; }
    double state_value(StateIndex x) const { return v[x]; }
};
ExactValues exact_value(const FiniteMdp& mdp, const Policy& policy);

/// Exact policy iteration; returns an optimal deterministic policy, breaking
/// argmax ties toward the lowest action index. Requires gamma < 1.
Policy policy_iteration(const FiniteMdp& mdp);

/// Two-room windy gridworld.
///
/// 12 columns by 8 rows. A wall fills column 6 except for a doorway at row 4.
/// Wind pushes north after each move, with per-column strengths
/// (0,0,0,1,1,1,0,1,2,2,1,0) read from the departure column; pushes into
/// walls or off the grid stop early. Each action moves one cell in the chosen
/// compass direction with probability 0.9 (blocked moves stay put); with
/// probability 0.1 the agent moves in a uniformly random direction instead,
/// and that move ignores wind. Reaching the goal pays reward 1; every other
/// step pays 0; the goal is terminal. gamma = 0.99.
struct WindyGridworld {
    FiniteMdp mdp;
    StateIndex start = 0;
    StateIndex goal = 0;
    std::size_t n_cols = 0;
    std::size_t n_rows = 0;
    /// -1 for wall cells, otherwise the state index of (col, row).
    std::vector<int> cell_state;

    int state_at(std::size_t col, std::size_t row) const {
        return cell_state[row * n_cols + col];
    }
};
WindyGridworld build_windy_gridworld();

/// Two-state chain with gamma = 0.9. State 0 is the start, state 1 the
/// terminal goal. Action 0 (left) self-loops at the start with reward 0;
/// action 1 (right) enters the goal with reward 1. Optimal values are
/// Q*(0, right) = 1 and Q*(0, left) = 0.9, so control has a 0.1 margin.
struct ChainMdp {
    FiniteMdp mdp;
    StateIndex start = 0;
    StateIndex goal = 1;
};
ChainMdp build_chain_mdp();

/// Single-action MDP on which the projected distributional optimality
/// backup expands the maximal p-Wasserstein metric: from x the chain moves
/// to x1 with probability 2/3 and x2 with probability 1/3, all rewards are
/// zero and gamma = 1. The paired tables z and y differ by distance
/// 2^(-1/p) before one projected backup and by 1 after it.
struct CounterexampleMdp {
    FiniteMdp mdp;
    StateIndex initial = 0;  // x
    ValueDistributionTable z;
    ValueDistributionTable y;
};
CounterexampleMdp build_counterexample_mdp();

}  // namespace qdrl
