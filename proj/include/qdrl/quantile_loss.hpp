#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "qdrl/distribution.hpp"
#include "qdrl/rng.hpp"

namespace qdrl {

/// Quantile regression loss rho_tau(u) = u * (tau - 1[u < 0]), tau in (0, 1).
double qr_loss(double u, double tau);

/// Huber loss with threshold kappa > 0: quadratic within kappa, linear
/// beyond.
double huber(double u, double kappa);

/// Asymmetric Huber-smoothed quantile loss |tau - 1[u < 0]| * L_kappa(u);
/// kappa = 0 reproduces qr_loss exactly.
double quantile_huber(double u, double tau, double kappa);

/// Derivative of the (Huber-smoothed) quantile loss with respect to the
/// estimate theta, evaluated at u = z - theta. At the kink u = 0 the
/// convention 1[u < 0] = 0 applies, so qr_grad(0, tau, 0) = -tau.
double qr_grad(double u, double tau, double kappa);

/// Stochastic quantile estimation: theta <- theta - lr(t) * qr_grad. Returns
/// the final estimate after the given number of steps.
double sgd_quantile(const std::function<double(Rng&)>& sampler, double tau, std::size_t steps,
                    const std::function<double(std::size_t)>& learning_rate, Rng& rng,
                    double init = 0.0, double kappa = 0.0);

/// Monte-Carlo comparison of two stochastic gradient estimates for fitting a
/// uniform n-atom model to samples, run at the true minimizer.
///
/// The source distribution is uniform on {1, ..., n} and the model is held at
/// theta = (1, ..., n). Each trial draws m samples, forms the empirical
/// distribution, and measures two gradients with respect to theta_1 by
/// central differences: the gradient of the sample p-Wasserstein distance,
/// and the gradient of the sample quantile-regression objective at level
/// (2*1 - 1) / (2n). Sample Wasserstein gradients are biased (their mean
/// stays bounded away from 0) while the quantile-regression gradient is
/// unbiased.
struct BiasedGradientReport {
    std::size_t n = 0;
    std::size_t m = 0;
    double p = 1.0;
    std::size_t trials = 0;
    double wass_grad_mean = 0.0;
    double wass_grad_stderr = 0.0;
    double qr_grad_mean = 0.0;
    double qr_grad_stderr = 0.0;

    std::string csv_header() const;
    std::string csv_row() const;
};
BiasedGradientReport biased_gradient_demo(std::size_t n, std::size_t m, double p,
                                          std::size_t trials, Rng& rng);

/// Returns a sampler closure over a finite distribution, for sgd_quantile.
std::function<double(Rng&)> make_sampler(FiniteDistribution dist);

}  // namespace qdrl
