#include "qdrl/mdp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace qdrl {

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, double gamma)
    : n_states_(n_states), n_actions_(n_actions), gamma_(gamma) {
    if (n_states == 0 || n_actions == 0)
        throw std::invalid_argument("FiniteMdp needs positive state and action counts");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("FiniteMdp needs gamma in [0, 1]");
    transition_.assign(n_states * n_actions * n_states, 0.0);
    reward_.assign(n_states * n_actions * n_states, 0.0);
    terminal_.assign(n_states, 0);
}

std::size_t FiniteMdp::check_state(StateIndex x) const {
    if (x >= n_states_) throw std::invalid_argument("state index out of range");
    return x;
}

std::size_t FiniteMdp::row_index(StateIndex x, ActionIndex a) const {
    if (x >= n_states_ || a >= n_actions_)
        throw std::invalid_argument("state or action index out of range");
    return (x * n_actions_ + a) * n_states_;
}

void FiniteMdp::add_transition(StateIndex x, ActionIndex a, StateIndex x2, double p, double r) {
    const std::size_t row = row_index(x, a);
    check_state(x2);
    if (!(p >= 0.0 && p <= 1.0 + kRowSumTol))
        throw std::invalid_argument("transition probability must lie in [0, 1]");
    transition_[row + x2] += p;
    reward_[row + x2] = r;
}

void FiniteMdp::make_terminal(StateIndex x) {
    check_state(x);
    terminal_[x] = 1;
    for (ActionIndex a = 0; a < n_actions_; ++a) {
        const std::size_t row = row_index(x, a);
        for (StateIndex x2 = 0; x2 < n_states_; ++x2) {
            transition_[row + x2] = (x2 == x) ? 1.0 : 0.0;
            reward_[row + x2] = 0.0;
        }
    }
}

double FiniteMdp::transition(StateIndex x, ActionIndex a, StateIndex x2) const {
    return transition_[row_index(x, a) + check_state(x2)];
}

double FiniteMdp::reward(StateIndex x, ActionIndex a, StateIndex x2) const {
    return reward_[row_index(x, a) + check_state(x2)];
}

double FiniteMdp::expected_reward(StateIndex x, ActionIndex a) const {
    const std::size_t row = row_index(x, a);
    double r = 0.0;
    for (StateIndex x2 = 0; x2 < n_states_; ++x2) r += transition_[row + x2] * reward_[row + x2];
    return r;
}

void FiniteMdp::validate() const {
    for (StateIndex x = 0; x < n_states_; ++x)
        for (ActionIndex a = 0; a < n_actions_; ++a) {
            const std::size_t row = (x * n_actions_ + a) * n_states_;
            double sum = 0.0;
            for (StateIndex x2 = 0; x2 < n_states_; ++x2) {
                const double p = transition_[row + x2];
                if (!(p >= 0.0 && p <= 1.0 + kRowSumTol))
                    throw std::invalid_argument("transition probability outside [0, 1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw std::invalid_argument("transition row does not sum to 1");
            if (terminal_[x]) {
                if (std::abs(transition_[row + x] - 1.0) > kRowSumTol ||
                    reward_[row + x] != 0.0)
                    throw std::invalid_argument("terminal state must self-loop with reward 0");
            }
        }
}

Policy::Policy(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states), n_actions_(n_actions), probs_(n_states * n_actions, 0.0) {
    if (n_states == 0 || n_actions == 0)
        throw std::invalid_argument("Policy needs positive state and action counts");
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
    Policy pi(n_states, n_actions);
    const double p = 1.0 / static_cast<double>(n_actions);
    std::fill(pi.probs_.begin(), pi.probs_.end(), p);
    return pi;
}

Policy Policy::deterministic(std::size_t n_states, std::size_t n_actions,
                             std::span<const ActionIndex> actions) {
    if (actions.size() != n_states)
        throw std::invalid_argument("deterministic policy needs one action per state");
    Policy pi(n_states, n_actions);
    for (StateIndex x = 0; x < n_states; ++x) pi.set_action_prob(x, actions[x], 1.0);
    return pi;
}

double Policy::action_prob(StateIndex x, ActionIndex a) const {
    if (x >= n_states_ || a >= n_actions_)
        throw std::invalid_argument("policy index out of range");
    return probs_[x * n_actions_ + a];
}

void Policy::set_action_prob(StateIndex x, ActionIndex a, double p) {
    if (x >= n_states_ || a >= n_actions_)
        throw std::invalid_argument("policy index out of range");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("action probability outside [0, 1]");
    probs_[x * n_actions_ + a] = p;
}

ActionIndex Policy::action_at(StateIndex x) const {
    for (ActionIndex a = 0; a < n_actions_; ++a)
        if (action_prob(x, a) == 1.0) return a;
    throw std::invalid_argument("policy row is not deterministic");
}

ActionIndex Policy::sample(StateIndex x, Rng& rng) const {
    const double u = rng.uniform();
    double run = 0.0;
    ActionIndex last = 0;
    for (ActionIndex a = 0; a < n_actions_; ++a) {
        const double p = action_prob(x, a);
        if (p == 0.0) continue;
        run += p;
        last = a;
        if (u < run) return a;
    }
    return last;
}

void Policy::validate() const {
    for (StateIndex x = 0; x < n_states_; ++x) {
        double sum = 0.0;
        for (ActionIndex a = 0; a < n_actions_; ++a) sum += action_prob(x, a);
        if (std::abs(sum - 1.0) > FiniteMdp::kRowSumTol)
            throw std::invalid_argument("policy row does not sum to 1");
    }
}

TransitionSample sample_transition(const FiniteMdp& mdp, StateIndex x, ActionIndex a, Rng& rng) {
    if (x >= mdp.n_states() || a >= mdp.n_actions())
        throw std::invalid_argument("state or action index out of range");
    if (mdp.terminal(x)) throw std::invalid_argument("cannot step from a terminal state");
    const double u = rng.uniform();
    double run = 0.0;
    StateIndex next = x;
    bool found = false;
    for (StateIndex x2 = 0; x2 < mdp.n_states(); ++x2) {
        const double p = mdp.transition(x, a, x2);
        if (p == 0.0) continue;
        run += p;
        next = x2;
        found = true;
        if (u < run) break;
    }
    if (!found) throw std::invalid_argument("transition row is empty");
    return {x, a, mdp.reward(x, a, next), next, mdp.terminal(next)};
}

ExactValues exact_value(const FiniteMdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    if (!(mdp.gamma() < 1.0)) throw std::invalid_argument("exact_value needs gamma < 1");
    const std::size_t n = mdp.n_states();
    const std::size_t m = mdp.n_actions();
    constexpr double kResidualTol = 1e-10;
    constexpr std::size_t kMaxIterations = 2000000;

    std::vector<double> q(n * m, 0.0);
    std::vector<double> v(n, 0.0);
    std::vector<double> next_q(n * m, 0.0);
    for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
        for (StateIndex x = 0; x < n; ++x) {
            double vx = 0.0;
            for (ActionIndex a = 0; a < m; ++a) vx += policy.action_prob(x, a) * q[x * m + a];
            v[x] = vx;
        }
        double diff = 0.0;
        for (StateIndex x = 0; x < n; ++x)
            for (ActionIndex a = 0; a < m; ++a) {
                double t = 0.0;
                for (StateIndex x2 = 0; x2 < n; ++x2) {
                    const double p = mdp.transition(x, a, x2);
                    if (p == 0.0) continue;
                    t += p * (mdp.reward(x, a, x2) + mdp.gamma() * v[x2]);
                }
                next_q[x * m + a] = t;
                diff = std::max(diff, std::abs(t - q[x * m + a]));
            }
        q.swap(next_q);
        if (diff < kResidualTol) {
            ExactValues out;
            out.n_states = n;
            out.n_actions = m;
            out.q = std::move(q);
            out.v.resize(n);
            for (StateIndex x = 0; x < n; ++x) {
                double vx = 0.0;
                for (ActionIndex a = 0; a < m; ++a)
                    vx += policy.action_prob(x, a) * out.q[x * m + a];
                out.v[x] = vx;
            }
            return out;
        }
    }
    throw std::runtime_error("exact_value did not reach the residual tolerance");
}

Policy policy_iteration(const FiniteMdp& mdp) {
    if (!(mdp.gamma() < 1.0)) throw std::invalid_argument("policy_iteration needs gamma < 1");
    const std::size_t n = mdp.n_states();
    const std::size_t m = mdp.n_actions();
    std::vector<ActionIndex> actions(n, 0);
    constexpr std::size_t kMaxSweeps = 10000;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const Policy pi = Policy::deterministic(n, m, actions);
        const ExactValues values = exact_value(mdp, pi);
        bool changed = false;
        for (StateIndex x = 0; x < n; ++x) {
            ActionIndex best = 0;
            double best_q = -std::numeric_limits<double>::infinity();
            for (ActionIndex a = 0; a < m; ++a) {
                double t = 0.0;
                for (StateIndex x2 = 0; x2 < n; ++x2) {
                    const double p = mdp.transition(x, a, x2);
                    if (p == 0.0) continue;
                    t += p * (mdp.reward(x, a, x2) + mdp.gamma() * values.state_value(x2));
                }
                if (t > best_q + 1e-13) {
                    best_q = t;
                    best = a;
                }
            }
            if (best != actions[x]) {
                actions[x] = best;
                changed = true;
            }
        }
        if (!changed) return Policy::deterministic(n, m, actions);
    }
    throw std::runtime_error("policy_iteration did not converge");
}

namespace {

constexpr std::size_t kGridCols = 12;
constexpr std::size_t kGridRows = 8;
constexpr std::array<int, kGridCols> kWind = {0, 0, 0, 1, 1, 1, 0, 1, 2, 2, 1, 0};
constexpr std::size_t kDoorRow = 4;
constexpr std::size_t kWallCol = 6;

struct Cell {
    int col = 0;
    int row = 0;
};

bool cell_open(int col, int row) {
    if (col < 0 || row < 0 || col >= static_cast<int>(kGridCols) ||
        row >= static_cast<int>(kGridRows))
        return false;
    if (col == static_cast<int>(kWallCol) && row != static_cast<int>(kDoorRow)) return false;
    return true;
}

/// Single-cell move; blocked moves (wall or off-grid) stay put.
Cell step_direction(Cell c, int dcol, int drow) {
    const Cell t{c.col + dcol, c.row + drow};
    return cell_open(t.col, t.row) ? t : c;
}

/// Northward wind push of the given strength; stops at walls and edges.
Cell apply_wind(Cell c, int strength) {
    for (int k = 0; k < strength; ++k) {
        const Cell t{c.col, c.row + 1};
        if (!cell_open(t.col, t.row)) break;
        c = t;
    }
    return c;
}

}  // namespace

WindyGridworld build_windy_gridworld() {
    std::vector<int> cell_state(kGridCols * kGridRows, -1);
    std::size_t n_states = 0;
    for (std::size_t row = 0; row < kGridRows; ++row)
        for (std::size_t col = 0; col < kGridCols; ++col)
            if (cell_open(static_cast<int>(col), static_cast<int>(row)))
                cell_state[row * kGridCols + col] = static_cast<int>(n_states++);
    const auto state_of = [&](int col, int row) {
        return cell_state[static_cast<std::size_t>(row) * kGridCols +
                          static_cast<std::size_t>(col)];
    };

    // Actions 0..3 = north, east, south, west.
    constexpr std::array<int, 4> kDCol = {0, 1, 0, -1};
    constexpr std::array<int, 4> kDRow = {1, 0, -1, 0};

    FiniteMdp mdp(n_states, 4, 0.99);
    const StateIndex start = static_cast<StateIndex>(state_of(0, 0));
    const StateIndex goal = static_cast<StateIndex>(state_of(10, 6));

    for (std::size_t row = 0; row < kGridRows; ++row)
        for (std::size_t col = 0; col < kGridCols; ++col) {
            const int s = state_of(static_cast<int>(col), static_cast<int>(row));
            if (s < 0 || static_cast<StateIndex>(s) == goal) continue;
            const Cell here{static_cast<int>(col), static_cast<int>(row)};
            for (ActionIndex a = 0; a < 4; ++a) {
                // probability mass per successor cell
                std::map<int, double> mass;
                const Cell intended =
                    apply_wind(step_direction(here, kDCol[a], kDRow[a]), kWind[col]);
                mass[state_of(intended.col, intended.row)] += 0.9;
                for (std::size_t d = 0; d < 4; ++d) {
                    const Cell random_move = step_direction(here, kDCol[d], kDRow[d]);
                    mass[state_of(random_move.col, random_move.row)] += 0.1 / 4.0;
                }
                for (const auto& [next, p] : mass) {
                    const double r = (static_cast<StateIndex>(next) == goal) ? 1.0 : 0.0;
                    mdp.add_transition(static_cast<StateIndex>(s), a,
                                       static_cast<StateIndex>(next), p, r);
                }
            }
        }
    mdp.make_terminal(goal);
    mdp.validate();
    return {std::move(mdp), start, goal, kGridCols, kGridRows, std::move(cell_state)};
}

ChainMdp build_chain_mdp() {
    FiniteMdp mdp(2, 2, 0.9);
    mdp.add_transition(0, 0, 0, 1.0, 0.0);  // left: stay
    mdp.add_transition(0, 1, 1, 1.0, 1.0);  // right: reach the goal
    mdp.make_terminal(1);
    mdp.validate();
    return {std::move(mdp), 0, 1};
}

CounterexampleMdp build_counterexample_mdp() {
    FiniteMdp mdp(3, 1, 1.0);
    mdp.add_transition(0, 0, 1, 2.0 / 3.0, 0.0);
    mdp.add_transition(0, 0, 2, 1.0 / 3.0, 0.0);
    mdp.make_terminal(1);
    mdp.make_terminal(2);
    mdp.validate();

    ValueDistributionTable z(3, 1);
    ValueDistributionTable y(3, 1);
    z.at(0, 0) = FiniteDistribution::dirac(0.0);
    y.at(0, 0) = FiniteDistribution::dirac(0.0);
    z.at(1, 0) = FiniteDistribution({{0.0, 0.5}, {2.0, 0.5}});
    y.at(1, 0) = FiniteDistribution({{1.0, 0.5}, {2.0, 0.5}});
    z.at(2, 0) = FiniteDistribution({{3.0, 0.5}, {5.0, 0.5}});
    y.at(2, 0) = FiniteDistribution({{4.0, 0.5}, {5.0, 0.5}});
    return {std::move(mdp), 0, std::move(z), std::move(y)};
}

}  // namespace qdrl
