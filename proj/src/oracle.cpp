#include "qdrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "qdrl/serialize.hpp"

namespace qdrl {

FiniteDistribution monte_carlo_distribution(const FiniteMdp& mdp, const Policy& policy,
                                            StateIndex x, std::size_t rollouts, Rng& rng,
                                            std::size_t step_cap) {
    if (rollouts == 0) throw std::invalid_argument("monte_carlo_distribution needs rollouts >= 1");
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    std::vector<double> returns(rollouts);
    for (std::size_t k = 0; k < rollouts; ++k) {
        StateIndex cur = x;
        double discount = 1.0;
        double ret = 0.0;
        for (std::size_t step = 0; step < step_cap && !mdp.terminal(cur); ++step) {
            const ActionIndex a = policy.sample(cur, rng);
            const TransitionSample t = sample_transition(mdp, cur, a, rng);
            ret += discount * t.reward;
            discount *= mdp.gamma();
            cur = t.next_state;
        }
        returns[k] = ret;
    }
    return FiniteDistribution::from_samples(returns);
}

namespace {

struct ScaledPart {
    const FiniteDistribution* dist = nullptr;
    double weight = 0.0;  // P(x'|x,a) * policy(a'|x')
    double shift = 0.0;   // r(x,a,x')
};

/// Merges the affinely transformed parts into one sorted atom list, clusters
/// atoms within merge_tol (weight-averaged location), enforces the atom cap
/// by collapsing the smallest-gap adjacent runs, and returns the canonical
/// result.
FiniteDistribution pushforward_mixture(const std::vector<ScaledPart>& parts, double gamma,
                                       double merge_tol, std::size_t max_atoms) {
    std::size_t total = 0;
    for (const ScaledPart& part : parts) total += part.dist->size();
    std::vector<Atom> merged;
    merged.reserve(total);

    // k-way merge over the already-sorted part supports.
    std::vector<std::size_t> pos(parts.size(), 0);
    while (true) {
        std::size_t best = parts.size();
        double best_loc = 0.0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (pos[k] >= parts[k].dist->size()) continue;
            const double loc =
                parts[k].shift + gamma * parts[k].dist->atoms()[pos[k]].location;
            if (best == parts.size() || loc < best_loc) {
                best = k;
                best_loc = loc;
            }
        }
        if (best == parts.size()) break;
        const double w = parts[best].weight * parts[best].dist->atoms()[pos[best]].weight;
        ++pos[best];
        if (w == 0.0) continue;
        if (!merged.empty() && best_loc - merged.back().location <= merge_tol) {
            // weight-averaged location keeps the mean exact
            Atom& back = merged.back();
            const double sum = back.weight + w;
            back.location = (back.location * back.weight + best_loc * w) / sum;
            back.weight = sum;
        } else {
            merged.push_back({best_loc, w});
        }
    }

    if (merged.size() > max_atoms) {
        // One batched pass: pick the gap threshold that forces at least the
        // required number of merges, then collapse every adjacent run whose
        // gaps sit at or below it (weighted averages keep the mean exact).
        std::vector<double> gaps(merged.size() - 1);
        for (std::size_t i = 0; i + 1 < merged.size(); ++i)
            gaps[i] = merged[i + 1].location - merged[i].location;
        const std::size_t need = merged.size() - max_atoms;
        std::vector<double> order = gaps;
        std::nth_element(order.begin(),
                         order.begin() + static_cast<std::ptrdiff_t>(need - 1), order.end());
        const double threshold = order[need - 1];
        std::vector<Atom> capped;
        capped.reserve(max_atoms);
        capped.push_back(merged.front());
        for (std::size_t i = 1; i < merged.size(); ++i) {
            if (gaps[i - 1] <= threshold) {
                Atom& back = capped.back();
                const double sum = back.weight + merged[i].weight;
                back.location =
                    (back.location * back.weight + merged[i].location * merged[i].weight) / sum;
                back.weight = sum;
            } else {
                capped.push_back(merged[i]);
            }
        }
        merged = std::move(capped);
    }

    return FiniteDistribution(std::move(merged));
}

}  // namespace

ValueDistributionTable apply_distributional_bellman(const FiniteMdp& mdp, const Policy& policy,
                                                    const ValueDistributionTable& table,
                                                    double merge_tol, std::size_t max_atoms) {
    if (table.n_states() != mdp.n_states() || table.n_actions() != mdp.n_actions())
        throw std::invalid_argument("table shape does not match the MDP");
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    if (merge_tol < 0.0) throw std::invalid_argument("merge_tol must be nonnegative");
    if (max_atoms < 2) throw std::invalid_argument("max_atoms must be at least 2");

    ValueDistributionTable out(mdp.n_states(), mdp.n_actions());
    std::vector<ScaledPart> parts;
    for (StateIndex x = 0; x < mdp.n_states(); ++x)
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            parts.clear();
            for (StateIndex x2 = 0; x2 < mdp.n_states(); ++x2) {
                const double p = mdp.transition(x, a, x2);
                if (p == 0.0) continue;
                for (ActionIndex a2 = 0; a2 < mdp.n_actions(); ++a2) {
                    const double pi = policy.action_prob(x2, a2);
                    if (pi == 0.0) continue;
                    parts.push_back({&table.at(x2, a2), p * pi, mdp.reward(x, a, x2)});
                }
            }
            if (parts.empty())
                throw std::invalid_argument("transition row has no successors");
            out.at(x, a) = pushforward_mixture(parts, mdp.gamma(), merge_tol, max_atoms);
        }
    return out;
}

ValueDistributionTable exact_distributional_fixed_point(const FiniteMdp& mdp,
                                                        const Policy& policy,
                                                        std::size_t iterations,
                                                        double merge_tol, double tol,
                                                        std::size_t max_atoms) {
    if (!(mdp.gamma() < 1.0))
        throw std::invalid_argument("exact_distributional_fixed_point needs gamma < 1");
    ValueDistributionTable table(mdp.n_states(), mdp.n_actions());
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < iterations; ++iter) {
        ValueDistributionTable next =
            apply_distributional_bellman(mdp, policy, table, merge_tol, max_atoms);
        residual = maximal_wasserstein(table, next, std::numeric_limits<double>::infinity());
        table = std::move(next);
        if (residual < tol) return table;
    }
    throw std::runtime_error("distributional fixed point did not converge; last residual " +
                             format_double(residual));
}

FiniteDistribution policy_state_distribution(const ValueDistributionTable& table,
                                             const Policy& policy, StateIndex x) {
    if (policy.n_states() != table.n_states() || policy.n_actions() != table.n_actions())
        throw std::invalid_argument("policy shape does not match the table");
    std::vector<double> weights;
    std::vector<const FiniteDistribution*> parts;
    for (ActionIndex a = 0; a < table.n_actions(); ++a) {
        const double p = policy.action_prob(x, a);
        if (p == 0.0) continue;
        weights.push_back(p);
        parts.push_back(&table.at(x, a));
    }
    return mixture(weights, parts);
}

namespace {

std::vector<double> flat_simplex(std::size_t n, Rng& rng) {
    std::vector<double> w(n);
    while (true) {
        double total = 0.0;
        for (double& v : w) {
            v = -std::log(1.0 - rng.uniform());
            total += v;
        }
        if (total > 0.0) {
            for (double& v : w) v /= total;
            return w;
        }
    }
}

std::size_t worker_count(std::size_t items) {
    std::size_t workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (const char* env = std::getenv("QDRL_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) workers = static_cast<std::size_t>(parsed);
    }
    return std::max<std::size_t>(1, std::min(workers, items));
}

struct TrialOutcome {
    bool violated = false;
    double ratio = 0.0;
    std::string instance;
};

/// Runs fn(trial) for every trial index, sharded across workers when
/// QDRL_THREADS allows; outcomes land in a dense per-trial vector so the
/// merged report does not depend on the sharding.
template <typename Fn>
std::vector<TrialOutcome> run_trials(std::size_t trials, const Fn& fn) {
    std::vector<TrialOutcome> outcomes(trials);
    const std::size_t workers = worker_count(trials);
    if (workers <= 1) {
        for (std::size_t t = 0; t < trials; ++t) outcomes[t] = fn(t);
        return outcomes;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t t = w; t < trials; t += workers) outcomes[t] = fn(t);
        });
    for (std::thread& th : pool) th.join();
    return outcomes;
}

VerifyReport merge_outcomes(std::string name, std::vector<TrialOutcome> outcomes) {
    VerifyReport report;
    report.name = std::move(name);
    report.trials = outcomes.size();
    for (TrialOutcome& o : outcomes) {
        report.max_ratio = std::max(report.max_ratio, o.ratio);
        if (o.violated) {
            ++report.violations;
            if (report.failing_instances.size() < 20)
                report.failing_instances.push_back(std::move(o.instance));
        }
    }
    return report;
}

}  // namespace

FiniteMdp random_mdp(Rng& rng, double gamma) {
    const std::size_t n_states = 2 + rng.uniform_index(5);
    const std::size_t n_actions = 1 + rng.uniform_index(3);
    FiniteMdp mdp(n_states, n_actions, gamma);
    for (StateIndex x = 0; x < n_states; ++x)
        for (ActionIndex a = 0; a < n_actions; ++a) {
            const std::vector<double> row = flat_simplex(n_states, rng);
            for (StateIndex x2 = 0; x2 < n_states; ++x2)
                mdp.add_transition(x, a, x2, row[x2], rng.uniform(-1.0, 1.0));
        }
    mdp.validate();
    return mdp;
}

Policy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
    Policy pi(n_states, n_actions);
    for (StateIndex x = 0; x < n_states; ++x) {
        const std::vector<double> row = flat_simplex(n_actions, rng);
        for (ActionIndex a = 0; a < n_actions; ++a) pi.set_action_prob(x, a, row[a]);
    }
    pi.validate();
    return pi;
}

ValueDistributionTable random_quantile_table(std::size_t n_states, std::size_t n_actions,
                                             std::size_t n_quantiles, Rng& rng) {
    ValueDistributionTable table(n_states, n_actions);
    for (StateIndex x = 0; x < n_states; ++x)
        for (ActionIndex a = 0; a < n_actions; ++a) {
            std::vector<double> locs(n_quantiles);
            for (double& v : locs) v = rng.uniform(-2.0, 2.0);
            table.at(x, a) = QuantileDistribution(std::move(locs)).to_distribution();
        }
    return table;
}

FiniteDistribution random_distribution(Rng& rng, std::size_t max_atoms) {
    const std::size_t k = 1 + rng.uniform_index(max_atoms);
    const std::vector<double> weights = flat_simplex(k, rng);
    std::vector<Atom> atoms(k);
    for (std::size_t i = 0; i < k; ++i) atoms[i] = {rng.uniform(-2.0, 2.0), weights[i]};
    return FiniteDistribution(std::move(atoms));
}

namespace {

ValueDistributionTable project_table(const ValueDistributionTable& table, std::size_t n) {
    ValueDistributionTable out(table.n_states(), table.n_actions());
    for (std::size_t x = 0; x < table.n_states(); ++x)
        for (std::size_t a = 0; a < table.n_actions(); ++a)
            out.at(x, a) = quantile_projection(table.at(x, a), n).to_distribution();
    return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

VerifyReport verify_projected_contraction(std::size_t trials, Rng& rng) {
    if (trials == 0) throw std::invalid_argument("verify_projected_contraction needs trials >= 1");
    const std::uint64_t master = rng.next_u64();
    constexpr std::size_t kNChoices[] = {1, 2, 4, 8};

    auto outcomes = run_trials(trials, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(master, t);
        Rng trial_rng(seed);
        const double gamma = trial_rng.uniform(0.5, 0.99);
        const FiniteMdp mdp = random_mdp(trial_rng, gamma);
        const Policy policy = random_policy(mdp.n_states(), mdp.n_actions(), trial_rng);
        const std::size_t n = kNChoices[trial_rng.uniform_index(4)];
        const ValueDistributionTable z1 =
            random_quantile_table(mdp.n_states(), mdp.n_actions(), n, trial_rng);
        const ValueDistributionTable z2 =
            random_quantile_table(mdp.n_states(), mdp.n_actions(), n, trial_rng);

        const ValueDistributionTable t1 =
            apply_distributional_bellman(mdp, policy, z1, 0.0);
        const ValueDistributionTable t2 =
            apply_distributional_bellman(mdp, policy, z2, 0.0);
        const double lhs = maximal_wasserstein(project_table(t1, n), project_table(t2, n), kInf);
        const double rhs = maximal_wasserstein(z1, z2, kInf);

        TrialOutcome out;
        out.ratio = rhs > 0.0 ? lhs / rhs : 0.0;
        out.violated = lhs > gamma * rhs + 1e-9;
        if (out.violated) {
            Json instance;
            instance["trial"] = t;
            instance["seed"] = seed;
            instance["gamma"] = gamma;
            instance["n_quantiles"] = n;
            instance["lhs"] = lhs;
            instance["rhs"] = rhs;
            instance["mdp"] = mdp_to_json(mdp);
            instance["z1"] = table_to_json(z1);
            instance["z2"] = table_to_json(z2);
            out.instance = instance.dump();
        }
        return out;
    });

    VerifyReport report = merge_outcomes("contraction", std::move(outcomes));
    report.lines.push_back("projected-backup sup-Wasserstein contraction: trials=" +
                           std::to_string(report.trials) +
                           " violations=" + std::to_string(report.violations) +
                           " max_ratio=" + format_double(report.max_ratio));
    return report;
}

VerifyReport verify_single_dirac_case(std::size_t trials, Rng& rng) {
    if (trials == 0) throw std::invalid_argument("verify_single_dirac_case needs trials >= 1");
    const std::uint64_t master = rng.next_u64();

    auto outcomes = run_trials(trials, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(master, t);
        Rng trial_rng(seed);
        // gamma = 1 and zero rewards: build the MDP structure then zero the
        // rewards by re-adding nothing; random_mdp draws rewards, so rebuild
        // transition-by-transition with r = 0.
        const FiniteMdp base = random_mdp(trial_rng, 1.0);
        FiniteMdp mdp(base.n_states(), base.n_actions(), 1.0);
        for (StateIndex x = 0; x < base.n_states(); ++x)
            for (ActionIndex a = 0; a < base.n_actions(); ++a)
                for (StateIndex x2 = 0; x2 < base.n_states(); ++x2) {
                    const double p = base.transition(x, a, x2);
                    if (p > 0.0) mdp.add_transition(x, a, x2, p, 0.0);
                }
        mdp.validate();
        const Policy policy = random_policy(mdp.n_states(), mdp.n_actions(), trial_rng);
        const ValueDistributionTable z =
            random_quantile_table(mdp.n_states(), mdp.n_actions(), 1, trial_rng);
        const ValueDistributionTable y =
            random_quantile_table(mdp.n_states(), mdp.n_actions(), 1, trial_rng);
        const double tau = trial_rng.uniform();

        const ValueDistributionTable tz = apply_distributional_bellman(mdp, policy, z, 0.0);
        const ValueDistributionTable ty = apply_distributional_bellman(mdp, policy, y, 0.0);
        ValueDistributionTable pz(mdp.n_states(), mdp.n_actions());
        ValueDistributionTable py(mdp.n_states(), mdp.n_actions());
        for (StateIndex x = 0; x < mdp.n_states(); ++x)
            for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
                pz.at(x, a) = FiniteDistribution::dirac(inverse_cdf(tz.at(x, a), tau));
                py.at(x, a) = FiniteDistribution::dirac(inverse_cdf(ty.at(x, a), tau));
            }
        const double lhs = maximal_wasserstein(pz, py, kInf);
        const double rhs = maximal_wasserstein(z, y, kInf);

        TrialOutcome out;
        out.ratio = rhs > 0.0 ? lhs / rhs : 0.0;
        out.violated = lhs > rhs + 1e-9;
        if (out.violated) {
            Json instance;
            instance["trial"] = t;
            instance["seed"] = seed;
            instance["tau"] = tau;
            instance["lhs"] = lhs;
            instance["rhs"] = rhs;
            instance["mdp"] = mdp_to_json(mdp);
            instance["z"] = table_to_json(z);
            instance["y"] = table_to_json(y);
            out.instance = instance.dump();
        }
        return out;
    });

    VerifyReport report = merge_outcomes("dirac", std::move(outcomes));
    report.lines.push_back("single-Dirac quantile projection non-expansion: trials=" +
                           std::to_string(report.trials) +
                           " violations=" + std::to_string(report.violations) +
                           " max_ratio=" + format_double(report.max_ratio));
    return report;
}

VerifyReport verify_non_expansion_counterexample(const std::vector<double>& p_values) {
    if (p_values.empty())
        throw std::invalid_argument("verify_non_expansion_counterexample needs p values");
    for (double p : p_values)
        if (!(p >= 1.0) || std::isinf(p))
            throw std::invalid_argument("counterexample p values must be finite and >= 1");

    const CounterexampleMdp built = build_counterexample_mdp();
    const Policy policy = Policy::uniform(built.mdp.n_states(), 1);
    const ValueDistributionTable tz =
        apply_distributional_bellman(built.mdp, policy, built.z, 0.0);
    const ValueDistributionTable ty =
        apply_distributional_bellman(built.mdp, policy, built.y, 0.0);
    const ValueDistributionTable pz = project_table(tz, 2);
    const ValueDistributionTable py = project_table(ty, 2);

    VerifyReport report;
    report.name = "counterexample";
    report.trials = p_values.size();
    constexpr double kTol = 1e-12;
    for (double p : p_values) {
        const double before = maximal_wasserstein(built.z, built.y, p);
        const double after = maximal_wasserstein(pz, py, p);
        const double expected_before = std::pow(2.0, -1.0 / p);
        const bool bad =
            std::abs(before - expected_before) > kTol || std::abs(after - 1.0) > kTol;
        const double factor = after / before;
        report.max_ratio = std::max(report.max_ratio, factor);
        report.lines.push_back("p=" + format_double(p) + ": before=" + format_double(before) +
                               " after=" + format_double(after) +
                               " factor=" + format_double(factor));
        if (bad) {
            ++report.violations;
            Json instance;
            instance["p"] = p;
            instance["before"] = before;
            instance["expected_before"] = expected_before;
            instance["after"] = after;
            report.failing_instances.push_back(instance.dump());
        }
    }
    return report;
}

VerifyReport verify_winf_identity(std::size_t pairs, Rng& rng) {
    if (pairs == 0) throw std::invalid_argument("verify_winf_identity needs pairs >= 1");
    const std::uint64_t master = rng.next_u64();

    auto outcomes = run_trials(pairs, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(master, t);
        Rng trial_rng(seed);
        const FiniteDistribution a = random_distribution(trial_rng);
        const FiniteDistribution b = random_distribution(trial_rng);
        const std::size_t n = 1 + trial_rng.uniform_index(8);
        const auto [lhs, rhs] = projection_winf_identity(a, b, n);

        TrialOutcome out;
        out.ratio = std::abs(lhs - rhs);
        out.violated = out.ratio > 1e-12;
        if (out.violated) {
            Json instance;
            instance["trial"] = t;
            instance["seed"] = seed;
            instance["n_quantiles"] = n;
            instance["lhs"] = lhs;
            instance["rhs"] = rhs;
            instance["a"] = distribution_to_json(a);
            instance["b"] = distribution_to_json(b);
            out.instance = instance.dump();
        }
        return out;
    });

    VerifyReport report = merge_outcomes("winf-identity", std::move(outcomes));
    report.lines.push_back("projection sup-distance identity: pairs=" +
                           std::to_string(report.trials) +
                           " violations=" + std::to_string(report.violations) +
                           " max_abs_diff=" + format_double(report.max_ratio));
    return report;
}

}  // namespace qdrl
