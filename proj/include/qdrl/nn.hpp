#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qdrl/rng.hpp"

namespace qdrl {

/// Fully connected multilayer perceptron with ReLU hidden activations and a
/// linear output layer. Weights are row-major (out x in).
struct MlpLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

struct MlpParams {
    std::vector<MlpLayer> layers;

    /// sizes = (input, hidden..., output); at least one layer. Weights drawn
    /// uniform in +-sqrt(6 / fan_in) (He-style), biases zero.
    static MlpParams random_init(std::span<const std::size_t> sizes, Rng& rng);
    static MlpParams zeros(std::span<const std::size_t> sizes);
    /// Zero-filled copy of this shape.
    MlpParams zeros_like() const;

    std::vector<std::size_t> sizes() const;
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
};

/// Intermediate activations kept for backpropagation. inputs[l] is the input
/// to layer l; preacts[l] the affine output of layer l before activation.
struct ForwardTrace {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> preacts;
};

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x);
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                ForwardTrace& trace);

/// Exact gradient of sum(out_grad . output) with respect to all parameters.
MlpParams mlp_backward(const MlpParams& params, std::span<const double> x,
                       std::span<const double> out_grad);

/// Backpropagation reusing a stored forward trace; accumulates into grads
/// (which must be zeros_like-shaped).
void mlp_backward_accumulate(const MlpParams& params, const ForwardTrace& trace,
                             std::span<const double> out_grad, MlpParams& grads);

/// First and second moment estimates for Adam, same shape as the parameters.
struct AdamState {
    MlpParams m;
    MlpParams v;

    static AdamState zeros_like(const MlpParams& params);
};

/// One Adam update with bias correction; t is the 1-based step count.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, std::size_t t);

}  // namespace qdrl
