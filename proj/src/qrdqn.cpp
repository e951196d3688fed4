#include "qdrl/qrdqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qdrl/quantile_loss.hpp"

namespace qdrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer needs positive capacity");
    items_.reserve(capacity);
}

void ReplayBuffer::push(const TransitionSample& t) {
    if (items_.size() < capacity_) {
        items_.push_back(t);
    } else {
        items_[write_pos_] = t;
    }
    write_pos_ = (write_pos_ + 1) % capacity_;
}

const TransitionSample& ReplayBuffer::sample(Rng& rng) const {
    if (items_.empty()) throw std::invalid_argument("cannot sample from an empty buffer");
    return items_[rng.uniform_index(items_.size())];
}

std::vector<double> one_hot(StateIndex x, std::size_t n_states) {
    if (x >= n_states) throw std::invalid_argument("one_hot state out of range");
    std::vector<double> f(n_states, 0.0);
    f[x] = 1.0;
    return f;
}

ActionIndex greedy_action(std::span<const double> theta, std::size_t n_actions,
                          std::size_t n_quantiles) {
    if (n_actions == 0 || n_quantiles == 0 || theta.size() != n_actions * n_quantiles)
        throw std::invalid_argument("greedy_action shape mismatch");
    ActionIndex best = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (ActionIndex a = 0; a < n_actions; ++a) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n_quantiles; ++j) mean += theta[a * n_quantiles + j];
        if (mean > best_mean) {
            best_mean = mean;
            best = a;
        }
    }
    return best;
}

ActionIndex epsilon_greedy(std::span<const double> theta, std::size_t n_actions,
                           std::size_t n_quantiles, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (rng.uniform() < epsilon) return rng.uniform_index(n_actions);
    return greedy_action(theta, n_actions, n_quantiles);
}

std::vector<double> bellman_target(const MlpParams& target_net, const TransitionSample& t,
                                   double gamma, std::size_t n_states, std::size_t n_actions,
                                   std::size_t n_quantiles) {
    std::vector<double> targets(n_quantiles, t.reward);
    if (t.done) return targets;
    const std::vector<double> theta_next = mlp_forward(target_net, one_hot(t.next_state, n_states));
    const ActionIndex best = greedy_action(theta_next, n_actions, n_quantiles);
    for (std::size_t j = 0; j < n_quantiles; ++j)
        targets[j] = t.reward + gamma * theta_next[best * n_quantiles + j];
    return targets;
}

QrdqnLossResult qrdqn_loss(std::span<const double> pred, std::span<const double> targets,
                           double kappa) {
    if (pred.empty() || targets.empty())
        throw std::invalid_argument("qrdqn_loss needs nonempty inputs");
    if (kappa < 0.0) throw std::invalid_argument("qrdqn_loss needs kappa >= 0");
    const std::size_t n = pred.size();
    const std::size_t m = targets.size();
    const QuantileTargets taus = quantile_midpoints(n);
    QrdqnLossResult result;
    result.grad.assign(n, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = taus.midpoints[i];
        double loss_i = 0.0;
        double grad_i = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double u = targets[j] - pred[i];
            loss_i += quantile_huber(u, tau, kappa);
            grad_i += qr_grad(u, tau, kappa);
        }
        result.loss += loss_i * inv_m;
        result.grad[i] = grad_i * inv_m;
    }
    return result;
}

Policy greedy_policy(const MlpParams& params, const FiniteMdp& env, std::size_t n_quantiles) {
    Policy pi(env.n_states(), env.n_actions());
    for (StateIndex x = 0; x < env.n_states(); ++x) {
        const std::vector<double> theta = mlp_forward(params, one_hot(x, env.n_states()));
        pi.set_action_prob(x, greedy_action(theta, env.n_actions(), n_quantiles), 1.0);
    }
    return pi;
}

double evaluate_greedy_return(const MlpParams& params, const FiniteMdp& env, StateIndex start,
                              std::size_t episodes, std::size_t episode_cap,
                              std::size_t n_quantiles, Rng& rng) {
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        StateIndex x = start;
        double discount = 1.0;
        double ret = 0.0;
        for (std::size_t step = 0; step < episode_cap && !env.terminal(x); ++step) {
            const std::vector<double> theta = mlp_forward(params, one_hot(x, env.n_states()));
            const ActionIndex a = greedy_action(theta, env.n_actions(), n_quantiles);
            const TransitionSample t = sample_transition(env, x, a, rng);
            ret += discount * t.reward;
            discount *= env.gamma();
            x = t.next_state;
        }
        total += ret;
    }
    return total / static_cast<double>(episodes);
}

TrainResult train_qrdqn(const FiniteMdp& env, StateIndex start, const AgentConfig& config,
                        Rng& rng) {
    if (start >= env.n_states()) throw std::invalid_argument("start state out of range");
    if (env.terminal(start)) throw std::invalid_argument("start state must be non-terminal");
    if (config.n_quantiles == 0 || config.batch_size == 0 || config.target_sync_period == 0 ||
        config.episode_cap == 0 || config.eval_period == 0 || config.eval_episodes == 0)
        throw std::invalid_argument("invalid agent config");
    const double gamma = config.gamma.value_or(env.gamma());
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("agent gamma must lie in [0, 1]");

    const std::size_t n_states = env.n_states();
    const std::size_t n_actions = env.n_actions();
    const std::size_t n = config.n_quantiles;

    std::vector<std::size_t> sizes;
    sizes.push_back(n_states);
    for (std::size_t h : config.hidden_sizes) sizes.push_back(h);
    sizes.push_back(n_actions * n);

    MlpParams params = MlpParams::random_init(sizes, rng);
    MlpParams target = params;
    AdamState adam = AdamState::zeros_like(params);
    MlpParams grads = params.zeros_like();
    ReplayBuffer buffer(config.buffer_capacity);

    TrainResult result{std::move(params), {}};
    MlpParams& net = result.params;

    const std::size_t warmup = std::max(config.warmup_steps, config.batch_size);
    std::vector<StateIndex> nonterminal;
    for (StateIndex s = 0; s < n_states; ++s)
        if (!env.terminal(s)) nonterminal.push_back(s);
    const auto reset_state = [&]() -> StateIndex {
        if (config.exploring_starts) return nonterminal[rng.uniform_index(nonterminal.size())];
        return start;
    };
    std::size_t adam_t = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    StateIndex x = reset_state();
    std::size_t episode_steps = 0;
    ForwardTrace trace;

    for (std::size_t step = 1; step <= config.train_steps; ++step) {
        const double frac =
            std::min(1.0, static_cast<double>(step) /
                              static_cast<double>(std::max<std::size_t>(1, config.epsilon_decay_steps)));
        const double epsilon =
            config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;

        const std::vector<double> theta = mlp_forward(net, one_hot(x, n_states));
        const ActionIndex a = epsilon_greedy(theta, n_actions, n, epsilon, rng);
        const TransitionSample t = sample_transition(env, x, a, rng);
        buffer.push(t);
        ++episode_steps;
        if (t.done || episode_steps >= config.episode_cap) {
            x = reset_state();
            episode_steps = 0;
        } else {
            x = t.next_state;
        }

        if (buffer.size() >= warmup) {
            // One minibatch gradient step on the quantile-Huber loss.
            for (MlpLayer& layer : grads.layers) {
                std::fill(layer.w.begin(), layer.w.end(), 0.0);
                std::fill(layer.b.begin(), layer.b.end(), 0.0);
            }
            double batch_loss = 0.0;
            const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
            std::vector<double> out_grad(n_actions * n);
            for (std::size_t k = 0; k < config.batch_size; ++k) {
                const TransitionSample& sample_t = buffer.sample(rng);
                const std::vector<double> targets =
                    bellman_target(target, sample_t, gamma, n_states, n_actions, n);
                const std::vector<double> pred =
                    mlp_forward(net, one_hot(sample_t.state, n_states), trace);
                const std::span<const double> pred_row(pred.data() + sample_t.action * n, n);
                const QrdqnLossResult loss = qrdqn_loss(pred_row, targets, config.kappa);
                batch_loss += loss.loss * inv_batch;
                std::fill(out_grad.begin(), out_grad.end(), 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    out_grad[sample_t.action * n + i] = loss.grad[i] * inv_batch;
                mlp_backward_accumulate(net, trace, out_grad, grads);
            }
            ++adam_t;
            adam_step(net, grads, adam, config.lr, config.adam_beta1, config.adam_beta2,
                      config.adam_eps, adam_t);
            loss_sum += batch_loss;
            ++loss_count;
            if (adam_t % config.target_sync_period == 0) target = net;
        }

        if (step % config.eval_period == 0 || step == config.train_steps) {
            Rng eval_rng(derive_seed(config.seed, 0x9000 + step));
            TrainCurvePoint point;
            point.step = step;
            point.greedy_return = evaluate_greedy_return(net, env, start, config.eval_episodes,
                                                         config.episode_cap, n, eval_rng);
            point.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
            result.curve.push_back(point);
            loss_sum = 0.0;
            loss_count = 0;
            if (step == config.train_steps) break;
        }
    }
    return result;
}

}  // namespace qdrl
