#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "qdrl/rng.hpp"

namespace qdrl {

/// One point mass: a support location and its probability weight.
struct Atom {
    double location = 0.0;
    double weight = 0.0;
};

/// Probability distribution with finite support on the reals.
///
/// Canonical form: atoms sorted by location, locations closer than 1e-12
/// merged (weights summed), zero-weight atoms dropped. Weights must sum to 1
/// within 1e-12; the stored cumulative sums are clamped so the last one is
/// exactly 1, which keeps inverse-CDF and transport computations total on
/// (0, 1].
class FiniteDistribution {
public:
    static constexpr double kLocationMergeTol = 1e-12;
    static constexpr double kWeightSumTol = 1e-12;
    static constexpr double kCdfTol = 1e-12;

    /// Default: the Dirac at zero.
    FiniteDistribution() : atoms_{{0.0, 1.0}}, cumulative_{1.0} {}

    /// Canonicalizes and validates. Throws std::invalid_argument on negative
    /// weights, empty input, non-finite entries, or weights not summing to 1.
    explicit FiniteDistribution(std::vector<Atom> atoms);

    static FiniteDistribution dirac(double location);

    /// Empirical distribution: weight 1/n per sample (equal values merge).
    static FiniteDistribution from_samples(std::span<const double> values);

    const std::vector<Atom>& atoms() const { return atoms_; }
    /// Cumulative weights aligned with atoms(); last entry is exactly 1.
    const std::vector<double>& cumulative() const { return cumulative_; }
    std::size_t size() const { return atoms_.size(); }

    double mean() const;
    double min_location() const { return atoms_.front().location; }
    double max_location() const { return atoms_.back().location; }

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
};

/// True when both canonical forms have the same atoms within the given
/// tolerances on location and weight.
bool approx_equal(const FiniteDistribution& a, const FiniteDistribution& b,
                  double location_tol = 1e-12, double weight_tol = 1e-12);

/// Generalized inverse CDF at omega in (0, 1]: the smallest support location
/// whose cumulative weight reaches omega (cumulative compared with a 1e-12
/// slack so boundary quantiles resolve to the lower atom). As a convenience,
/// omega == 0 returns the smallest location. Throws std::invalid_argument for
/// omega outside [0, 1].
double inverse_cdf(const FiniteDistribution& d, double omega);

/// Draws one sample by inverse-CDF transform of a uniform variate.
double sample(const FiniteDistribution& d, Rng& rng);

/// p-Wasserstein distance, p >= 1: the L^p norm of the difference of inverse
/// CDFs, integrated exactly over the merged cumulative breakpoints of the two
/// step functions (no quadrature).
double wasserstein_p(const FiniteDistribution& u, const FiniteDistribution& y, double p);

/// infinity-Wasserstein: the largest gap between the two inverse CDFs.
/// Cumulative segments no wider than FiniteDistribution::kCdfTol are treated
/// as coincident breakpoints and excluded from the sup.
double wasserstein_inf(const FiniteDistribution& u, const FiniteDistribution& y);

/// Midpoint quantile levels tau_hat_i = (2i - 1) / (2n), i = 1..n.
struct QuantileTargets {
    std::vector<double> midpoints;
    std::size_t size() const { return midpoints.size(); }
};
QuantileTargets quantile_midpoints(std::size_t n);

/// Uniform mixture of n Diracs, represented by its sorted location vector.
/// Duplicate locations are allowed (weights accumulate in to_distribution()).
class QuantileDistribution {
public:
    explicit QuantileDistribution(std::vector<double> locations);
    const std::vector<double>& locations() const { return locations_; }
    std::size_t size() const { return locations_.size(); }
    FiniteDistribution to_distribution() const;

private:
    std::vector<double> locations_;
};

/// 1-Wasserstein-optimal projection onto uniform n-atom distributions:
/// theta_i = inverse_cdf(y, (2i - 1) / (2n)).
QuantileDistribution quantile_projection(const FiniteDistribution& y, std::size_t n);

/// Categorical projection onto a fixed strictly increasing support grid:
/// each source atom is clipped to the grid range and its weight split
/// linearly between the two neighboring grid points.
FiniteDistribution c51_projection(const FiniteDistribution& y, std::span<const double> support);

/// Returns (lhs, rhs) where lhs is the infinity-Wasserstein distance between
/// the two n-quantile projections and rhs is max_i of the absolute difference
/// of the inverse CDFs at the midpoint levels. The two agree exactly; both
/// are exposed so callers can check the identity.
std::pair<double, double> projection_winf_identity(const FiniteDistribution& a,
                                                   const FiniteDistribution& b,
                                                   std::size_t n);

/// Distribution of shift + scale * X for X ~ d (scale >= 0).
FiniteDistribution affine_transform(const FiniteDistribution& d, double scale, double shift);

/// Finite mixture sum_k weights[k] * parts[k]; weights must be nonnegative
/// and sum to 1 within 1e-12.
FiniteDistribution mixture(std::span<const double> weights,
                           std::span<const FiniteDistribution* const> parts);

/// One value distribution per (state, action) pair.
class ValueDistributionTable {
public:
    ValueDistributionTable(std::size_t n_states, std::size_t n_actions,
                           FiniteDistribution init = FiniteDistribution::dirac(0.0));

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    FiniteDistribution& at(std::size_t state, std::size_t action);
    const FiniteDistribution& at(std::size_t state, std::size_t action) const;

private:
    std::size_t index(std::size_t state, std::size_t action) const;
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<FiniteDistribution> entries_;
};

/// Maximal form of the Wasserstein metric over a table: the supremum over all
/// (state, action) entries. Pass p = infinity for the sup-metric variant.
/// Tables must have identical dimensions.
double maximal_wasserstein(const ValueDistributionTable& a, const ValueDistributionTable& b,
                           double p);

}  // namespace qdrl
