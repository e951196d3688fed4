#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdrl/distribution.hpp"

namespace qdrl::test {

/// Independent transport-cost oracle: enumerates the union of cumulative
/// breakpoints of both distributions and evaluates both inverse CDFs at each
/// interval midpoint. Exact for finite distributions, but structured
/// differently from the paired segment walk in the library.
inline std::vector<double> merged_breakpoints(const FiniteDistribution& u,
                                              const FiniteDistribution& y) {
    std::vector<double> breaks{0.0};
    breaks.insert(breaks.end(), u.cumulative().begin(), u.cumulative().end());
    breaks.insert(breaks.end(), y.cumulative().begin(), y.cumulative().end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    return breaks;
}

inline double wasserstein_p_oracle(const FiniteDistribution& u, const FiniteDistribution& y,
                                   double p) {
    const std::vector<double> breaks = merged_breakpoints(u, y);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k];
        const double hi = breaks[k + 1];
        const double mid = 0.5 * (lo + hi);
        const double gap = std::abs(inverse_cdf(u, mid) - inverse_cdf(y, mid));
        acc += (hi - lo) * std::pow(gap, p);
    }
    return std::pow(acc, 1.0 / p);
}

inline double wasserstein_inf_oracle(const FiniteDistribution& u, const FiniteDistribution& y) {
    const std::vector<double> breaks = merged_breakpoints(u, y);
    double sup = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
        sup = std::max(sup, std::abs(inverse_cdf(u, mid) - inverse_cdf(y, mid)));
    }
    return sup;
}

/// Counts local modes of a 50-bin histogram of the distribution after a
/// centered 3-bin smoothing pass; bins below the mass threshold do not count.
inline std::size_t count_modes(const FiniteDistribution& d, std::size_t bins = 50,
                               double min_mass = 0.02) {
    const double lo = d.min_location();
    const double hi = d.max_location();
    if (hi <= lo) return 1;
    std::vector<double> hist(bins, 0.0);
    for (const Atom& a : d.atoms()) {
        auto bin = static_cast<std::size_t>((a.location - lo) / (hi - lo) *
                                            static_cast<double>(bins));
        if (bin >= bins) bin = bins - 1;
        hist[bin] += a.weight;
    }
    std::vector<double> smooth(bins, 0.0);
    for (std::size_t i = 0; i < bins; ++i) {
        double total = hist[i];
        double count = 1.0;
        if (i > 0) {
            total += hist[i - 1];
            count += 1.0;
        }
        if (i + 1 < bins) {
            total += hist[i + 1];
            count += 1.0;
        }
        smooth[i] = total / count;
    }
    std::size_t modes = 0;
    // A mode is a maximal run of equal smoothed values higher than both
    // neighbors, with enough mass to matter.
    std::size_t i = 0;
    while (i < bins) {
        std::size_t j = i;
        while (j + 1 < bins && smooth[j + 1] == smooth[i]) ++j;
        const bool rises = i == 0 || smooth[i] > smooth[i - 1];
        const bool falls = j + 1 == bins || smooth[j] > smooth[j + 1];
        if (rises && falls && smooth[i] >= min_mass / static_cast<double>(bins) * 3.0 &&
            smooth[i] > 0.0)
            ++modes;
        i = j + 1;
    }
    return modes;
}

}  // namespace qdrl::test
