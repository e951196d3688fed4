#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qdrl/distribution.hpp"
#include "qdrl/mdp.hpp"
#include "qdrl/rng.hpp"

namespace qdrl {

/// Empirical distribution of discounted returns from x under the policy;
/// episodes are truncated at step_cap steps (gamma^5000 < 1e-21 at
/// gamma = 0.99, so the truncation bias is negligible).
FiniteDistribution monte_carlo_distribution(const FiniteMdp& mdp, const Policy& policy,
                                            StateIndex x, std::size_t rollouts, Rng& rng,
                                            std::size_t step_cap = 5000);

/// Exact one-step distributional backup: entry (x, a) becomes the law of
/// r(x, a, X') + gamma * Z(X', A') with X' ~ P(.|x, a), A' ~ policy(.|X').
/// Atoms closer than merge_tol are clustered (weights summed, location the
/// weighted average, which preserves the mean); entries exceeding max_atoms
/// are cut back in one pass that merges the smallest-gap adjacent runs.
ValueDistributionTable apply_distributional_bellman(const FiniteMdp& mdp, const Policy& policy,
                                                    const ValueDistributionTable& table,
                                                    double merge_tol = 1e-9,
                                                    std::size_t max_atoms = 100000);

/// Iterates the distributional backup from Dirac-at-zero tables until the
/// sup-Wasserstein distance between successive iterates drops below tol.
/// Throws std::runtime_error (citing the last residual) if the iteration cap
/// is reached first. Requires gamma < 1.
ValueDistributionTable exact_distributional_fixed_point(const FiniteMdp& mdp,
                                                        const Policy& policy,
                                                        std::size_t iterations = 100000,
                                                        double merge_tol = 1e-9,
                                                        double tol = 1e-6,
                                                        std::size_t max_atoms = 100000);

/// Policy-conditioned state distribution: sum_a policy(a|x) * table(x, a).
FiniteDistribution policy_state_distribution(const ValueDistributionTable& table,
                                             const Policy& policy, StateIndex x);

/// Outcome of one verification harness.
struct VerifyReport {
    std::string name;
    std::uint64_t trials = 0;
    std::uint64_t violations = 0;
    double max_ratio = 0.0;
    std::vector<std::string> failing_instances;  // JSON object per failure
    std::vector<std::string> lines;              // human-readable summary lines

    bool ok() const { return violations == 0; }
};

/// Random MDP for property trials: 2-6 states, 1-3 actions, dense rows drawn
/// from a flat simplex, rewards uniform in [-1, 1], no terminal states.
FiniteMdp random_mdp(Rng& rng, double gamma);
/// Random stochastic policy with flat-simplex rows.
Policy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng);
/// Table whose entries are uniform n_quantile-atom distributions with
/// locations uniform in [-2, 2].
ValueDistributionTable random_quantile_table(std::size_t n_states, std::size_t n_actions,
                                             std::size_t n_quantiles, Rng& rng);

/// Projected-backup contraction in sup-Wasserstein: random (MDP, Z1, Z2, N)
/// trials checking that the quantile-projected policy backup contracts with
/// modulus gamma; reports the max observed ratio lhs / d(Z1, Z2).
VerifyReport verify_projected_contraction(std::size_t trials, Rng& rng);

/// Single-Dirac tau-quantile projection is a non-expansion even at gamma = 1
/// with zero rewards; random trials over MDPs, Dirac tables, and tau.
VerifyReport verify_single_dirac_case(std::size_t trials, Rng& rng);

/// The fixed two-terminal MDP on which one projected backup expands the
/// maximal p-Wasserstein distance from 2^(-1/p) to 1, for each given p.
VerifyReport verify_non_expansion_counterexample(const std::vector<double>& p_values);

/// Projection sup-distance identity: the infinity-Wasserstein distance of two
/// n-quantile projections equals the max midpoint-quantile gap.
VerifyReport verify_winf_identity(std::size_t pairs, Rng& rng);

/// Random finite distribution with 1-8 atoms for property trials: locations
/// uniform in [-2, 2], weights from a flat simplex.
FiniteDistribution random_distribution(Rng& rng, std::size_t max_atoms = 8);

}  // namespace qdrl
