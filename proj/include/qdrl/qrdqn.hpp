#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qdrl/mdp.hpp"
#include "qdrl/nn.hpp"
#include "qdrl/rng.hpp"

namespace qdrl {

/// Uniform-sampling experience replay ring buffer.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    void push(const TransitionSample& t);
    const TransitionSample& sample(Rng& rng) const;

private:
    std::size_t capacity_ = 0;
    std::size_t write_pos_ = 0;
    std::vector<TransitionSample> items_;
};

struct AgentConfig {
    std::size_t n_quantiles = 32;
    double kappa = 1.0;
    std::vector<std::size_t> hidden_sizes = {64, 64};
    double lr = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 0.01 / 32.0;
    std::size_t batch_size = 32;
    std::size_t buffer_capacity = 10000;
    std::size_t target_sync_period = 200;
    double epsilon_start = 1.0;
    double epsilon_end = 0.01;
    std::size_t epsilon_decay_steps = 5000;  // linear decay horizon in env steps
    std::optional<double> gamma;             // defaults to the environment's
    std::size_t train_steps = 20000;         // total environment steps
    std::size_t warmup_steps = 500;          // env steps before training starts
    std::size_t episode_cap = 500;           // env steps per episode before reset
    std::size_t eval_period = 1000;          // env steps between greedy evaluations
    std::size_t eval_episodes = 20;
    // Reset episodes from a uniformly drawn non-terminal state instead of the
    // given start; evaluation still begins at the start state.  This keeps the
    // replay buffer covering the whole state space when rewards are too sparse
    // for a random walk from one corner to ever find them.
    bool exploring_starts = false;
    std::uint64_t seed = 1;
};

/// One-hot feature vector for a state.
std::vector<double> one_hot(StateIndex x, std::size_t n_states);

/// Action with the largest mean of its quantile row; theta is the flattened
/// (n_actions x n_quantiles) network output, ties go to the lowest index.
ActionIndex greedy_action(std::span<const double> theta, std::size_t n_actions,
                          std::size_t n_quantiles);

/// Greedy with probability 1 - epsilon, otherwise uniformly random.
ActionIndex epsilon_greedy(std::span<const double> theta, std::size_t n_actions,
                           std::size_t n_quantiles, double epsilon, Rng& rng);

/// Distributional targets for one transition: r + gamma * theta_target(x', a*)
/// where a* maximizes the mean of the target network's output at x'; all
/// targets collapse to r when the transition terminates.
std::vector<double> bellman_target(const MlpParams& target_net, const TransitionSample& t,
                                   double gamma, std::size_t n_states, std::size_t n_actions,
                                   std::size_t n_quantiles);

/// Quantile-Huber training loss between one predicted quantile row and the
/// target samples, plus its gradient with respect to the predictions:
/// loss = sum_i (1/n) sum_j rho^kappa_{tau_hat_i}(targets_j - pred_i).
struct QrdqnLossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d pred_i
};
QrdqnLossResult qrdqn_loss(std::span<const double> pred, std::span<const double> targets,
                           double kappa);

struct TrainCurvePoint {
    std::size_t step = 0;
    double greedy_return = 0.0;  // mean over eval episodes
    double loss = 0.0;           // mean training loss since the last record
};

struct TrainResult {
    MlpParams params;
    std::vector<TrainCurvePoint> curve;
};

/// DQN-style control loop: epsilon-greedy acting, uniform replay, Adam on
/// the quantile-Huber loss against a periodically synced target network.
TrainResult train_qrdqn(const FiniteMdp& env, StateIndex start, const AgentConfig& config,
                        Rng& rng);

/// Deterministic greedy policy induced by a trained network.
Policy greedy_policy(const MlpParams& params, const FiniteMdp& env, std::size_t n_quantiles);

/// Mean discounted return of greedy episodes from start (episodes capped).
double evaluate_greedy_return(const MlpParams& params, const FiniteMdp& env, StateIndex start,
                              std::size_t episodes, std::size_t episode_cap,
                              std::size_t n_quantiles, Rng& rng);

}  // namespace qdrl
