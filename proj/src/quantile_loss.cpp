#include "qdrl/quantile_loss.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace qdrl {

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
}

}  // namespace

double qr_loss(double u, double tau) {
    check_tau(tau);
    return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

double huber(double u, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("huber needs kappa > 0");
    const double mag = std::abs(u);
    if (mag <= kappa) return 0.5 * u * u;
    return kappa * (mag - 0.5 * kappa);
}

double quantile_huber(double u, double tau, double kappa) {
    check_tau(tau);
    if (kappa < 0.0) throw std::invalid_argument("quantile_huber needs kappa >= 0");
    if (kappa == 0.0) return qr_loss(u, tau);
    return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * huber(u, kappa);
}

double qr_grad(double u, double tau, double kappa) {
    check_tau(tau);
    if (kappa < 0.0) throw std::invalid_argument("qr_grad needs kappa >= 0");
    const double indicator = u < 0.0 ? 1.0 : 0.0;
    if (kappa == 0.0) return indicator - tau;
    const double asym = std::abs(tau - indicator);
    if (std::abs(u) <= kappa) return -asym * u;
    return -asym * kappa * (u > 0.0 ? 1.0 : -1.0);
}

double sgd_quantile(const std::function<double(Rng&)>& sampler, double tau, std::size_t steps,
                    const std::function<double(std::size_t)>& learning_rate, Rng& rng,
                    double init, double kappa) {
    check_tau(tau);
    double theta = init;
    for (std::size_t t = 1; t <= steps; ++t) {
        const double z = sampler(rng);
        theta -= learning_rate(t) * qr_grad(z - theta, tau, kappa);
    }
    return theta;
}

std::function<double(Rng&)> make_sampler(FiniteDistribution dist) {
    return [dist = std::move(dist)](Rng& rng) { return sample(dist, rng); };
}

namespace {

/// Running mean and variance (Welford).
struct Accumulator {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    double stderr_of_mean() const {
        if (count < 2) return 0.0;
        const double var = m2 / static_cast<double>(count - 1);
        return std::sqrt(var / static_cast<double>(count));
    }
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

BiasedGradientReport biased_gradient_demo(std::size_t n, std::size_t m, double p,
                                          std::size_t trials, Rng& rng) {
    if (n == 0 || m == 0 || trials == 0)
        throw std::invalid_argument("biased_gradient_demo needs positive n, m, trials");
    if (!(p >= 1.0) || std::isinf(p))
        throw std::invalid_argument("biased_gradient_demo needs finite p >= 1");

    const double tau1 = quantile_midpoints(n).midpoints.front();
    const double unit_weight = 1.0 / static_cast<double>(n);
    // Central-difference step; atom gaps are 1, so both evaluation points fall
    // on the same linear pieces around the kink and the average of the two
    // one-sided slopes is recovered exactly.
    const double h = 1e-6;

    const auto model_at = [&](double theta1) {
        std::vector<Atom> atoms;
        atoms.reserve(n);
        atoms.push_back({theta1, unit_weight});
        for (std::size_t i = 2; i <= n; ++i)
            atoms.push_back({static_cast<double>(i), unit_weight});
        return FiniteDistribution(std::move(atoms));
    };
    const FiniteDistribution model_plus = model_at(1.0 + h);
    const FiniteDistribution model_minus = model_at(1.0 - h);

    Accumulator wass;
    Accumulator qr;
    std::vector<double> samples(m);
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t j = 0; j < m; ++j)
            samples[j] = static_cast<double>(rng.uniform_index(n) + 1);
        const FiniteDistribution empirical = FiniteDistribution::from_samples(samples);

        const double w_plus = wasserstein_p(empirical, model_plus, p);
        const double w_minus = wasserstein_p(empirical, model_minus, p);
        wass.add((w_plus - w_minus) / (2.0 * h));

        double q_plus = 0.0;
        double q_minus = 0.0;
        for (double z : samples) {
            q_plus += qr_loss(z - (1.0 + h), tau1);
            q_minus += qr_loss(z - (1.0 - h), tau1);
        }
        const double scale = 1.0 / static_cast<double>(m);
        qr.add((q_plus * scale - q_minus * scale) / (2.0 * h));
    }

    BiasedGradientReport report;
    report.n = n;
    report.m = m;
    report.p = p;
    report.trials = trials;
    report.wass_grad_mean = wass.mean;
    report.wass_grad_stderr = wass.stderr_of_mean();
    report.qr_grad_mean = qr.mean;
    report.qr_grad_stderr = qr.stderr_of_mean();
    return report;
}

std::string BiasedGradientReport::csv_header() const {
    return "N,m,p,trials,wass_grad_mean,wass_grad_stderr,qr_grad_mean,qr_grad_stderr";
}

std::string BiasedGradientReport::csv_row() const {
    std::string row;
    row += std::to_string(n);
    row += ',';
    row += std::to_string(m);
    row += ',';
    row += format_double(p);
    row += ',';
    row += std::to_string(trials);
    row += ',';
    row += format_double(wass_grad_mean);
    row += ',';
    row += format_double(wass_grad_stderr);
    row += ',';
    row += format_double(qr_grad_mean);
    row += ',';
    row += format_double(qr_grad_stderr);
    return row;
}

}  // namespace qdrl
