#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "qdrl/distribution.hpp"
#include "qdrl/mdp.hpp"
#include "qdrl/rng.hpp"

namespace qdrl {

/// Tabular quantile estimates: n_quantiles adjustable locations per state.
class QuantileTable {
public:
    QuantileTable(std::size_t n_states, std::size_t n_quantiles, double init = 0.0);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_quantiles() const { return n_quantiles_; }
    double value(StateIndex x, std::size_t i) const;
    void set_value(StateIndex x, std::size_t i, double v);
    const QuantileTargets& targets() const { return targets_; }
    /// Uniform mixture over the row's locations.
    FiniteDistribution distribution(StateIndex x) const;
    double mean(StateIndex x) const;

private:
    std::size_t index(StateIndex x, std::size_t i) const;
    std::size_t n_states_ = 0;
    std::size_t n_quantiles_ = 0;
    std::vector<double> theta_;
    QuantileTargets targets_;
};

/// Tabular scalar value estimates, for the TD(0) baseline.
class ValueTable {
public:
    ValueTable(std::size_t n_states, double init = 0.0) : v_(n_states, init) {}
    std::size_t n_states() const { return v_.size(); }
    double value(StateIndex x) const;
    void set_value(StateIndex x, double v);

private:
    std::vector<double> v_;
};

/// One stochastic quantile-regression TD update at state x: every theta_i(x)
/// moves by alpha * (tau_hat_i - 1[g < theta_i(x)]) where the bootstrapped
/// target is g = r + gamma * z_next, or g = r when done. z_next should be a
/// sample from the estimated next-state distribution (one theta_j(x') drawn
/// uniformly); next_state is validated against the table.
void qrtd_update(QuantileTable& table, StateIndex x, double r, StateIndex next_state,
                 double z_next, double alpha, bool done, double gamma);

/// Deterministic variant averaging the update over all n targets
/// g_j = r + gamma * theta_j(x'), instead of sampling one.
void qrtd_all_pairs_update(QuantileTable& table, StateIndex x, double r, StateIndex next_state,
                           double alpha, bool done, double gamma);

/// Classic expected-value TD(0): v(x) += alpha * (r + gamma * v(x') - v(x)).
void td0_update(ValueTable& table, StateIndex x, double r, StateIndex next_state, double alpha,
                bool done, double gamma);

enum class EvalAlgorithm { kTd0, kQrtd, kQrtdAllPairs };

struct PolicyEvalConfig {
    std::size_t n_quantiles = 32;
    double alpha0 = 0.1;
    std::size_t halve_every = 2000;  // episodes per halving of the step size
    std::size_t episode_cap = 5000;  // step cap within one episode
};

struct EvalCurvePoint {
    std::size_t episode = 0;  // 1-based, recorded after the episode finishes
    double sq_mean_err = 0.0;
    double w1_err = 0.0;
};

struct PolicyEvalResult {
    std::vector<EvalCurvePoint> curve;
    QuantileTable theta;
    ValueTable values;
    std::vector<std::size_t> update_counts;  // per state
};

/// Called after each episode with the episode number (1-based) and the
/// current estimates; used for checkpoint dumps.
using EvalSnapshotFn = std::function<void(std::size_t, const QuantileTable&, const ValueTable&)>;

/// Runs episodic on-policy evaluation from eval_state for the given number
/// of episodes and records, per episode, the squared error of the mean
/// estimate and the 1-Wasserstein distance to ground_truth (for TD(0) the
/// estimate is treated as a Dirac). Step size: alpha0 halved every
/// halve_every episodes.
PolicyEvalResult run_policy_evaluation(const FiniteMdp& mdp, const Policy& policy,
                                       EvalAlgorithm algo, std::size_t episodes,
                                       const PolicyEvalConfig& config, StateIndex eval_state,
                                       const FiniteDistribution& ground_truth, Rng& rng,
                                       const EvalSnapshotFn& on_episode = {});

}  // namespace qdrl
