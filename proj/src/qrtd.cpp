#include "qdrl/qrtd.hpp"

#include <cmath>
#include <stdexcept>

namespace qdrl {

QuantileTable::QuantileTable(std::size_t n_states, std::size_t n_quantiles, double init)
    : n_states_(n_states),
      n_quantiles_(n_quantiles),
      theta_(n_states * n_quantiles, init),
      targets_(quantile_midpoints(n_quantiles)) {
    if (n_states == 0) throw std::invalid_argument("QuantileTable needs at least one state");
}

std::size_t QuantileTable::index(StateIndex x, std::size_t i) const {
    if (x >= n_states_ || i >= n_quantiles_)
        throw std::invalid_argument("QuantileTable index out of range");
    return x * n_quantiles_ + i;
}

double QuantileTable::value(StateIndex x, std::size_t i) const { return theta_[index(x, i)]; }

void QuantileTable::set_value(StateIndex x, std::size_t i, double v) { theta_[index(x, i)] = v; }

FiniteDistribution QuantileTable::distribution(StateIndex x) const {
    index(x, 0);
    std::vector<double> row(theta_.begin() + static_cast<std::ptrdiff_t>(x * n_quantiles_),
                            theta_.begin() + static_cast<std::ptrdiff_t>((x + 1) * n_quantiles_));
    return QuantileDistribution(std::move(row)).to_distribution();
}

double QuantileTable::mean(StateIndex x) const {
    index(x, 0);
    double m = 0.0;
    for (std::size_t i = 0; i < n_quantiles_; ++i) m += theta_[x * n_quantiles_ + i];
    return m / static_cast<double>(n_quantiles_);
}

double ValueTable::value(StateIndex x) const {
    if (x >= v_.size()) throw std::invalid_argument("ValueTable index out of range");
    return v_[x];
}

void ValueTable::set_value(StateIndex x, double v) {
    if (x >= v_.size()) throw std::invalid_argument("ValueTable index out of range");
    v_[x] = v;
}

void qrtd_update(QuantileTable& table, StateIndex x, double r, StateIndex next_state,
                 double z_next, double alpha, bool done, double gamma) {
    if (next_state >= table.n_states())
        throw std::invalid_argument("qrtd_update next_state out of range");
    const double g = done ? r : r + gamma * z_next;
    const std::size_t n = table.n_quantiles();
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = table.value(x, i);
        const double indicator = g < theta ? 1.0 : 0.0;
        table.set_value(x, i, theta + alpha * (table.targets().midpoints[i] - indicator));
    }
}

void qrtd_all_pairs_update(QuantileTable& table, StateIndex x, double r, StateIndex next_state,
                           double alpha, bool done, double gamma) {
    if (next_state >= table.n_states())
        throw std::invalid_argument("qrtd_all_pairs_update next_state out of range");
    const std::size_t n = table.n_quantiles();
    std::vector<double> targets(n);
    for (std::size_t j = 0; j < n; ++j)
        targets[j] = done ? r : r + gamma * table.value(next_state, j);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = table.value(x, i);
        double step = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            step += table.targets().midpoints[i] - (targets[j] < theta ? 1.0 : 0.0);
        table.set_value(x, i, theta + alpha * inv_n * step);
    }
}

void td0_update(ValueTable& table, StateIndex x, double r, StateIndex next_state, double alpha,
                bool done, double gamma) {
    const double target = done ? r : r + gamma * table.value(next_state);
    table.set_value(x, table.value(x) + alpha * (target - table.value(x)));
}

PolicyEvalResult run_policy_evaluation(const FiniteMdp& mdp, const Policy& policy,
                                       EvalAlgorithm algo, std::size_t episodes,
                                       const PolicyEvalConfig& config, StateIndex eval_state,
                                       const FiniteDistribution& ground_truth, Rng& rng,
                                       const EvalSnapshotFn& on_episode) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    if (eval_state >= mdp.n_states())
        throw std::invalid_argument("eval_state out of range");
    if (config.n_quantiles == 0 || config.halve_every == 0 || config.episode_cap == 0)
        throw std::invalid_argument("invalid policy evaluation config");

    const double true_mean = ground_truth.mean();
    PolicyEvalResult result{
        {}, QuantileTable(mdp.n_states(), config.n_quantiles), ValueTable(mdp.n_states()),
        std::vector<std::size_t>(mdp.n_states(), 0)};
    result.curve.reserve(episodes);

    for (std::size_t episode = 0; episode < episodes; ++episode) {
        const double alpha =
            config.alpha0 * std::pow(0.5, static_cast<double>(episode / config.halve_every));
        StateIndex x = eval_state;
        for (std::size_t step = 0; step < config.episode_cap && !mdp.terminal(x); ++step) {
            const ActionIndex a = policy.sample(x, rng);
            const TransitionSample t = sample_transition(mdp, x, a, rng);
            switch (algo) {
                case EvalAlgorithm::kTd0:
                    td0_update(result.values, x, t.reward, t.next_state, alpha, t.done,
                               mdp.gamma());
                    break;
                case EvalAlgorithm::kQrtd: {
                    const std::size_t j = rng.uniform_index(config.n_quantiles);
                    qrtd_update(result.theta, x, t.reward, t.next_state,
                                result.theta.value(t.next_state, j), alpha, t.done,
                                mdp.gamma());
                    break;
                }
                case EvalAlgorithm::kQrtdAllPairs:
                    qrtd_all_pairs_update(result.theta, x, t.reward, t.next_state, alpha,
                                          t.done, mdp.gamma());
                    break;
            }
            ++result.update_counts[x];
            x = t.next_state;
        }

        EvalCurvePoint point;
        point.episode = episode + 1;
        if (algo == EvalAlgorithm::kTd0) {
            const double v = result.values.value(eval_state);
            point.sq_mean_err = (v - true_mean) * (v - true_mean);
            point.w1_err = wasserstein_p(ground_truth, FiniteDistribution::dirac(v), 1.0);
        } else {
            const double v = result.theta.mean(eval_state);
            point.sq_mean_err = (v - true_mean) * (v - true_mean);
            point.w1_err =
                wasserstein_p(ground_truth, result.theta.distribution(eval_state), 1.0);
        }
        result.curve.push_back(point);
        if (on_episode) on_episode(episode + 1, result.theta, result.values);
    }
    return result;
}

}  // namespace qdrl
