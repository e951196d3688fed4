#include "qdrl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdrl {

namespace {

/// Sorts, drops zero weights, merges locations within the canonical
/// tolerance, and returns the cleaned atom list. Throws on invalid input.
std::vector<Atom> canonicalize(std::vector<Atom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("distribution needs at least one atom");
    double total = 0.0;
    for (const Atom& a : atoms) {
        if (!std::isfinite(a.location) || !std::isfinite(a.weight))
            throw std::invalid_argument("distribution atoms must be finite");
        if (a.weight < 0.0) throw std::invalid_argument("atom weights must be nonnegative");
        total += a.weight;
    }
    if (std::abs(total - 1.0) > FiniteDistribution::kWeightSumTol)
        throw std::invalid_argument("atom weights must sum to 1");
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& lhs, const Atom& rhs) { return lhs.location < rhs.location; });
    std::vector<Atom> merged;
    merged.reserve(atoms.size());
    for (const Atom& a : atoms) {
        if (a.weight == 0.0) continue;
        if (!merged.empty() &&
            a.location - merged.back().location <= FiniteDistribution::kLocationMergeTol) {
            merged.back().weight += a.weight;
        } else {
            merged.push_back(a);
        }
    }
    if (merged.empty()) throw std::invalid_argument("distribution needs positive total weight");
    return merged;
}

std::vector<double> cumulative_of(const std::vector<Atom>& atoms) {
    std::vector<double> cums(atoms.size());
    double run = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        run += atoms[i].weight;
        cums[i] = run;
    }
    cums.back() = 1.0;  // total validated to be 1 within tolerance
    return cums;
}

}  // namespace

FiniteDistribution::FiniteDistribution(std::vector<Atom> atoms)
    : atoms_(canonicalize(std::move(atoms))), cumulative_(cumulative_of(atoms_)) {}

FiniteDistribution FiniteDistribution::dirac(double location) {
    return FiniteDistribution({{location, 1.0}});
}

FiniteDistribution FiniteDistribution::from_samples(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("from_samples needs at least one value");
    const double w = 1.0 / static_cast<double>(values.size());
    std::vector<Atom> atoms;
    atoms.reserve(values.size());
    for (double v : values) atoms.push_back({v, w});
    return FiniteDistribution(std::move(atoms));
}

double FiniteDistribution::mean() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.location * a.weight;
    return m;
}

bool approx_equal(const FiniteDistribution& a, const FiniteDistribution& b,
                  double location_tol, double weight_tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a.atoms()[i].location - b.atoms()[i].location) > location_tol) return false;
        if (std::abs(a.atoms()[i].weight - b.atoms()[i].weight) > weight_tol) return false;
    }
    return true;
}

double inverse_cdf(const FiniteDistribution& d, double omega) {
    if (!(omega >= 0.0 && omega <= 1.0))
        throw std::invalid_argument("inverse_cdf needs omega in [0, 1]");
    if (omega == 0.0) return d.min_location();
    const std::vector<double>& cums = d.cumulative();
    const double target = omega - FiniteDistribution::kCdfTol;
    const auto it = std::lower_bound(cums.begin(), cums.end(), target);
    const std::size_t idx = static_cast<std::size_t>(it - cums.begin());
    return d.atoms()[idx < d.size() ? idx : d.size() - 1].location;
}

double sample(const FiniteDistribution& d, Rng& rng) {
    if (d.size() == 1) return d.atoms().front().location;
    const double u = rng.uniform();
    const std::vector<double>& cums = d.cumulative();
    const auto it = std::upper_bound(cums.begin(), cums.end(), u);
    const std::size_t idx = static_cast<std::size_t>(it - cums.begin());
    return d.atoms()[idx < d.size() ? idx : d.size() - 1].location;
}

namespace {

/// Walks the merged cumulative breakpoints of both step-function inverse
/// CDFs and hands every constant segment (length, |gap|) to the accumulator.
template <typename Fn>
void for_each_transport_segment(const FiniteDistribution& u, const FiniteDistribution& y, Fn&& fn) {
    const std::vector<double>& cu = u.cumulative();
    const std::vector<double>& cy = y.cumulative();
    std::size_t i = 0;
    std::size_t j = 0;
    double prev = 0.0;
    while (prev < 1.0) {
        const double hi = std::min(cu[i], cy[j]);
        const double len = hi - prev;
        if (len > 0.0)
            fn(len, std::abs(u.atoms()[i].location - y.atoms()[j].location));
        if (cu[i] <= hi && i + 1 < cu.size()) ++i;
        if (cy[j] <= hi && j + 1 < cy.size()) ++j;
        prev = hi;
    }
}

}  // namespace

double wasserstein_p(const FiniteDistribution& u, const FiniteDistribution& y, double p) {
    if (!(p >= 1.0) || std::isinf(p))
        throw std::invalid_argument("wasserstein_p needs finite p >= 1");
    double acc = 0.0;
    if (p == 1.0) {
        for_each_transport_segment(u, y, [&](double len, double gap) { acc += len * gap; });
        return acc;
    }
    if (p == 2.0) {
        for_each_transport_segment(u, y, [&](double len, double gap) { acc += len * gap * gap; });
        return std::sqrt(acc);
    }
    for_each_transport_segment(u, y,
                               [&](double len, double gap) { acc += len * std::pow(gap, p); });
    return std::pow(acc, 1.0 / p);
}

double wasserstein_inf(const FiniteDistribution& u, const FiniteDistribution& y) {
    // When both inputs place a cumulative breakpoint at the same real value,
    // rounding in the two partial sums can leave them one ulp apart, and the
    // segment walk then emits a sliver pairing quantiles from mismatched
    // intervals.  Such slivers are invisible to the integral metrics but would
    // dominate the sup, so segments no wider than the cumulative-weight
    // tolerance are ignored here, mirroring the slack inverse_cdf applies.
    double sup = 0.0;
    for_each_transport_segment(u, y, [&](double len, double gap) {
        if (len > FiniteDistribution::kCdfTol) sup = std::max(sup, gap);
    });
    return sup;
}

QuantileTargets quantile_midpoints(std::size_t n) {
    if (n == 0) throw std::invalid_argument("quantile_midpoints needs n >= 1");
    QuantileTargets targets;
    targets.midpoints.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        targets.midpoints[i] =
            (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n));
    return targets;
}

QuantileDistribution::QuantileDistribution(std::vector<double> locations)
    : locations_(std::move(locations)) {
    if (locations_.empty())
        throw std::invalid_argument("quantile distribution needs at least one location");
    for (double v : locations_)
        if (!std::isfinite(v))
            throw std::invalid_argument("quantile locations must be finite");
    std::sort(locations_.begin(), locations_.end());
}

FiniteDistribution QuantileDistribution::to_distribution() const {
    const double w = 1.0 / static_cast<double>(locations_.size());
    std::vector<Atom> atoms;
    atoms.reserve(locations_.size());
    for (double v : locations_) atoms.push_back({v, w});
    return FiniteDistribution(std::move(atoms));
}

QuantileDistribution quantile_projection(const FiniteDistribution& y, std::size_t n) {
    const QuantileTargets targets = quantile_midpoints(n);
    std::vector<double> locations(n);
    for (std::size_t i = 0; i < n; ++i) locations[i] = inverse_cdf(y, targets.midpoints[i]);
    return QuantileDistribution(std::move(locations));
}

FiniteDistribution c51_projection(const FiniteDistribution& y, std::span<const double> support) {
    if (support.size() < 2) throw std::invalid_argument("c51_projection needs at least 2 support points");
    for (std::size_t k = 1; k < support.size(); ++k)
        if (!(support[k] > support[k - 1]))
            throw std::invalid_argument("c51_projection support must be strictly increasing");
    std::vector<double> weights(support.size(), 0.0);
    for (const Atom& a : y.atoms()) {
        const double v = std::clamp(a.location, support.front(), support.back());
        const auto it = std::upper_bound(support.begin(), support.end(), v);
        if (it == support.end()) {
            weights.back() += a.weight;
            continue;
        }
        const std::size_t r = static_cast<std::size_t>(it - support.begin());
        const std::size_t l = r - 1;
        const double frac = (v - support[l]) / (support[r] - support[l]);
        weights[l] += a.weight * (1.0 - frac);
        weights[r] += a.weight * frac;
    }
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < support.size(); ++k)
        if (weights[k] > 0.0) atoms.push_back({support[k], weights[k]});
    return FiniteDistribution(std::move(atoms));
}

std::pair<double, double> projection_winf_identity(const FiniteDistribution& a,
                                                   const FiniteDistribution& b, std::size_t n) {
    const QuantileDistribution pa = quantile_projection(a, n);
    const QuantileDistribution pb = quantile_projection(b, n);
    const double lhs = wasserstein_inf(pa.to_distribution(), pb.to_distribution());
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        rhs = std::max(rhs, std::abs(pa.locations()[i] - pb.locations()[i]));
    return {lhs, rhs};
}

FiniteDistribution affine_transform(const FiniteDistribution& d, double scale, double shift) {
    if (!(scale >= 0.0)) throw std::invalid_argument("affine_transform needs scale >= 0");
    std::vector<Atom> atoms;
    atoms.reserve(d.size());
    for (const Atom& a : d.atoms()) atoms.push_back({shift + scale * a.location, a.weight});
    return FiniteDistribution(std::move(atoms));
}

FiniteDistribution mixture(std::span<const double> weights,
                           std::span<const FiniteDistribution* const> parts) {
    if (weights.size() != parts.size() || weights.empty())
        throw std::invalid_argument("mixture needs matching, nonempty weights and parts");
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (weights[k] < 0.0) throw std::invalid_argument("mixture weights must be nonnegative");
        if (weights[k] == 0.0) continue;
        for (const Atom& a : parts[k]->atoms()) atoms.push_back({a.location, weights[k] * a.weight});
    }
    return FiniteDistribution(std::move(atoms));
}

ValueDistributionTable::ValueDistributionTable(std::size_t n_states, std::size_t n_actions,
                                               FiniteDistribution init)
    : n_states_(n_states), n_actions_(n_actions) {
    if (n_states == 0 || n_actions == 0)
        throw std::invalid_argument("value distribution table needs positive dimensions");
    entries_.assign(n_states * n_actions, std::move(init));
}

std::size_t ValueDistributionTable::index(std::size_t state, std::size_t action) const {
    if (state >= n_states_ || action >= n_actions_)
        throw std::invalid_argument("value distribution table index out of range");
    return state * n_actions_ + action;
}

FiniteDistribution& ValueDistributionTable::at(std::size_t state, std::size_t action) {
    return entries_[index(state, action)];
}

const FiniteDistribution& ValueDistributionTable::at(std::size_t state, std::size_t action) const {
    return entries_[index(state, action)];
}

double maximal_wasserstein(const ValueDistributionTable& a, const ValueDistributionTable& b,
                           double p) {
    if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions())
        throw std::invalid_argument("maximal_wasserstein needs tables of identical dimensions");
    const bool sup_metric = std::isinf(p);
    if (!sup_metric && !(p >= 1.0))
        throw std::invalid_argument("maximal_wasserstein needs p >= 1 or infinity");
    double worst = 0.0;
    for (std::size_t x = 0; x < a.n_states(); ++x)
        for (std::size_t act = 0; act < a.n_actions(); ++act) {
            const double d = sup_metric ? wasserstein_inf(a.at(x, act), b.at(x, act))
                                        : wasserstein_p(a.at(x, act), b.at(x, act), p);
            worst = std::max(worst, d);
        }
    return worst;
}

}  // namespace qdrl
