#include "qdrl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace qdrl {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("MLP needs input and output sizes");
    for (std::size_t s : sizes)
        if (s == 0) throw std::invalid_argument("MLP layer sizes must be positive");
}

void check_same_shape(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size())
        throw std::invalid_argument("MLP shapes do not match");
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        if (a.layers[l].in != b.layers[l].in || a.layers[l].out != b.layers[l].out)
            throw std::invalid_argument("MLP shapes do not match");
}

}  // namespace

MlpParams MlpParams::random_init(std::span<const std::size_t> sizes, Rng& rng) {
    check_sizes(sizes);
    MlpParams params;
    params.layers.resize(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        MlpLayer& layer = params.layers[l];
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
    }
    return params;
}

MlpParams MlpParams::zeros(std::span<const std::size_t> sizes) {
    check_sizes(sizes);
    MlpParams params;
    params.layers.resize(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        MlpLayer& layer = params.layers[l];
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.w.assign(layer.in * layer.out, 0.0);
        layer.b.assign(layer.out, 0.0);
    }
    return params;
}

MlpParams MlpParams::zeros_like() const { return zeros(sizes()); }

std::vector<std::size_t> MlpParams::sizes() const {
    if (layers.empty()) throw std::invalid_argument("MLP has no layers");
    std::vector<std::size_t> out;
    out.push_back(layers.front().in);
    for (const MlpLayer& layer : layers) out.push_back(layer.out);
    return out;
}

std::size_t MlpParams::input_dim() const {
    if (layers.empty()) throw std::invalid_argument("MLP has no layers");
    return layers.front().in;
}

std::size_t MlpParams::output_dim() const {
    if (layers.empty()) throw std::invalid_argument("MLP has no layers");
    return layers.back().out;
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const MlpLayer& layer : layers) n += layer.w.size() + layer.b.size();
    return n;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                ForwardTrace& trace) {
    if (params.layers.empty()) throw std::invalid_argument("MLP has no layers");
    if (x.size() != params.input_dim())
        throw std::invalid_argument("MLP input dimension mismatch");
    trace.inputs.assign(params.layers.size(), {});
    trace.preacts.assign(params.layers.size(), {});
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const MlpLayer& layer = params.layers[l];
        trace.inputs[l] = cur;
        std::vector<double> next(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.b[o];
            const double* row = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * cur[i];
            next[o] = acc;
        }
        trace.preacts[l] = next;
        if (l + 1 < params.layers.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x) {
    ForwardTrace trace;
    return mlp_forward(params, x, trace);
}

void mlp_backward_accumulate(const MlpParams& params, const ForwardTrace& trace,
                             std::span<const double> out_grad, MlpParams& grads) {
    check_same_shape(params, grads);
    if (out_grad.size() != params.output_dim())
        throw std::invalid_argument("MLP output gradient dimension mismatch");
    std::vector<double> delta(out_grad.begin(), out_grad.end());
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const MlpLayer& layer = params.layers[l];
        MlpLayer& g = grads.layers[l];
        const std::vector<double>& input = trace.inputs[l];
        // ReLU mask applies to hidden layers only (the final layer is linear).
        if (l + 1 < params.layers.size())
            for (std::size_t o = 0; o < layer.out; ++o)
                if (trace.preacts[l][o] <= 0.0) delta[o] = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) {
            g.b[o] += delta[o];
            double* grow = g.w.data() + o * layer.in;
            const double d = delta[o];
            if (d == 0.0) continue;
            for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * input[i];
        }
        if (l == 0) break;
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) prev[i] += d * row[i];
        }
        delta = std::move(prev);
    }
}

MlpParams mlp_backward(const MlpParams& params, std::span<const double> x,
                       std::span<const double> out_grad) {
    ForwardTrace trace;
    (void)mlp_forward(params, x, trace);
    MlpParams grads = params.zeros_like();
    mlp_backward_accumulate(params, trace, out_grad, grads);
    return grads;
}

AdamState AdamState::zeros_like(const MlpParams& params) {
    return {params.zeros_like(), params.zeros_like()};
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, std::size_t t) {
    check_same_shape(params, grads);
    check_same_shape(params, state.m);
    check_same_shape(params, state.v);
    if (t == 0) throw std::invalid_argument("adam_step needs a 1-based step count");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam_step needs betas in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("adam_step needs eps > 0");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                                std::vector<double>& m, std::vector<double>& v) {
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        };
        update(params.layers[l].w, grads.layers[l].w, state.m.layers[l].w, state.v.layers[l].w);
        update(params.layers[l].b, grads.layers[l].b, state.m.layers[l].b, state.v.layers[l].b);
    }
}

}  // namespace qdrl
