#include "qdrl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "qdrl/mdp.hpp"
#include "qdrl/oracle.hpp"
#include "qdrl/quantile_loss.hpp"
#include "qdrl/serialize.hpp"

namespace qdrl {

namespace {

// Stream tags for seed derivation, one per randomness consumer.
constexpr std::uint64_t kStreamGroundTruth = 0x01;
constexpr std::uint64_t kStreamTd0 = 0x02;
constexpr std::uint64_t kStreamQrtd = 0x03;
constexpr std::uint64_t kStreamTrain = 0x04;
constexpr std::uint64_t kStreamFinalEval = 0x05;
constexpr std::uint64_t kStreamVerify = 0x06;
constexpr std::uint64_t kStreamBias = 0x07;

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

Json report_to_json(const VerifyReport& report) {
    Json j;
    j["trials"] = report.trials;
    j["violations"] = report.violations;
    j["max_ratio"] = report.max_ratio;
    Json failures = Json::array();
    for (const std::string& instance : report.failing_instances)
        failures.push_back(Json::parse(instance));
    j["failing_instances"] = std::move(failures);
    return j;
}

void print_report(const VerifyReport& report) {
    for (const std::string& line : report.lines) std::cout << line << "\n";
    std::cout << (report.ok() ? "[ok] " : "[violation] ") << report.name
              << " violations=" << report.violations << "\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const std::uint64_t value = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument("invalid seed: " + item);
        seeds.push_back(value);
    }
    if (seeds.empty()) throw std::invalid_argument("seed list is empty");
    return seeds;
}

}  // namespace

int cmd_gridworld_eval(const GridworldEvalOptions& options) {
    if (options.seeds.empty()) throw std::invalid_argument("gridworld-eval needs seeds");
    ensure_directory(options.out_dir);

    const WindyGridworld world = build_windy_gridworld();
    const Policy policy = policy_iteration(world.mdp);

    Rng gt_rng(derive_seed(options.seeds.front(), kStreamGroundTruth));
    const FiniteDistribution ground_truth = monte_carlo_distribution(
        world.mdp, policy, world.start, options.rollouts, gt_rng);

    Json gt_json;
    gt_json["state"] = world.start;
    gt_json["rollouts"] = options.rollouts;
    gt_json["mean"] = ground_truth.mean();
    gt_json["distribution"] = distribution_to_json(ground_truth);
    write_text_file(join_path(options.out_dir, "ground_truth.json"), gt_json.dump(2) + "\n");

    // Quantile snapshots (first seed only) at logarithmic checkpoints.
    std::set<std::size_t> checkpoints;
    for (std::size_t e = 1; e <= options.episodes; e *= 10) checkpoints.insert(e);
    if (options.episodes > 0) checkpoints.insert(options.episodes);

    std::string curves = "episode,algo,seed,sq_mean_err,w1_err\n";
    std::string zdist = "episode,i,tau_hat,theta\n";
    for (const char* algo_name : {"td0", "qrtd"}) {
        const EvalAlgorithm algo =
            std::string(algo_name) == "td0" ? EvalAlgorithm::kTd0 : EvalAlgorithm::kQrtd;
        const std::uint64_t stream = algo == EvalAlgorithm::kTd0 ? kStreamTd0 : kStreamQrtd;
        for (std::size_t s = 0; s < options.seeds.size(); ++s) {
            const std::uint64_t seed = options.seeds[s];
            Rng rng(derive_seed(seed, stream));
            EvalSnapshotFn snapshot;
            if (algo == EvalAlgorithm::kQrtd && s == 0)
                snapshot = [&](std::size_t episode, const QuantileTable& theta,
                               const ValueTable&) {
                    if (!checkpoints.contains(episode)) return;
                    for (std::size_t i = 0; i < theta.n_quantiles(); ++i) {
                        zdist += std::to_string(episode);
                        zdist += ',';
                        zdist += std::to_string(i + 1);
                        zdist += ',';
                        zdist += format_double(theta.targets().midpoints[i]);
                        zdist += ',';
                        zdist += format_double(theta.value(world.start, i));
                        zdist += '\n';
                    }
                };
            const PolicyEvalResult result =
                run_policy_evaluation(world.mdp, policy, algo, options.episodes, options.eval,
                                      world.start, ground_truth, rng, snapshot);
            for (const EvalCurvePoint& point : result.curve) {
                curves += std::to_string(point.episode);
                curves += ',';
                curves += algo_name;
                curves += ',';
                curves += std::to_string(seed);
                curves += ',';
                curves += format_double(point.sq_mean_err);
                curves += ',';
                curves += format_double(point.w1_err);
                curves += '\n';
            }
        }
    }
    write_text_file(join_path(options.out_dir, "curves.csv"), curves);
    write_text_file(join_path(options.out_dir, "zdist.csv"), zdist);
    std::cout << "gridworld-eval: wrote curves.csv, zdist.csv, ground_truth.json to "
              << options.out_dir << "\n";
    return kExitSuccess;
}

int cmd_train_qrdqn(const TrainQrdqnOptions& options) {
    if (options.seeds.empty()) throw std::invalid_argument("train-qrdqn needs seeds");
    if (options.kappas.empty()) throw std::invalid_argument("train-qrdqn needs kappa values");
    FiniteMdp env(1, 1, 0.0);
    StateIndex start = 0;
    if (options.env == "chain") {
        ChainMdp chain = build_chain_mdp();
        env = std::move(chain.mdp);
        start = chain.start;
    } else if (options.env == "gridworld") {
        WindyGridworld world = build_windy_gridworld();
        env = std::move(world.mdp);
        start = world.start;
    } else {
        throw std::invalid_argument("unknown env '" + options.env +
                                    "' (valid names: chain, gridworld)");
    }
    ensure_directory(options.out_dir);
    const Policy optimal = policy_iteration(env);

    for (double kappa : options.kappas) {
        const std::string tag = "kappa" + format_double(kappa);
        std::string curves = "step,seed,kappa,greedy_return,loss\n";
        Json final_json = Json::array();
        for (std::uint64_t seed : options.seeds) {
            AgentConfig config = options.agent;
            config.kappa = kappa;
            config.seed = seed;
            Rng rng(derive_seed(seed, kStreamTrain));
            const TrainResult result = train_qrdqn(env, start, config, rng);
            for (const TrainCurvePoint& point : result.curve) {
                curves += std::to_string(point.step);
                curves += ',';
                curves += std::to_string(seed);
                curves += ',';
                curves += format_double(kappa);
                curves += ',';
                curves += format_double(point.greedy_return);
                curves += ',';
                curves += format_double(point.loss);
                curves += '\n';
            }

            const Policy greedy = greedy_policy(result.params, env, config.n_quantiles);
            bool matches = true;
            for (StateIndex x = 0; x < env.n_states(); ++x)
                matches = matches && greedy.action_at(x) == optimal.action_at(x);
            Rng eval_rng(derive_seed(seed, kStreamFinalEval));
            Json entry;
            entry["seed"] = seed;
            entry["kappa"] = kappa;
            std::vector<ActionIndex> greedy_actions(env.n_states());
            for (StateIndex x = 0; x < env.n_states(); ++x) greedy_actions[x] = greedy.action_at(x);
            entry["greedy_actions"] = greedy_actions;
            entry["matches_policy_iteration"] = matches;
            entry["greedy_return"] =
                evaluate_greedy_return(result.params, env, start, config.eval_episodes,
                                       config.episode_cap, config.n_quantiles, eval_rng);
            final_json.push_back(std::move(entry));

            write_text_file(
                join_path(options.out_dir,
                          "params_" + tag + "_seed" + std::to_string(seed) + ".json"),
                mlp_to_json(result.params).dump() + "\n");
        }
        write_text_file(join_path(options.out_dir, "curves_" + tag + ".csv"), curves);
        write_text_file(join_path(options.out_dir, "final_" + tag + ".json"),
                        final_json.dump(2) + "\n");
        std::cout << "train-qrdqn: wrote curves_" << tag << ".csv and final_" << tag
                  << ".json to " << options.out_dir << "\n";
    }
    return kExitSuccess;
}

int cmd_verify(const VerifyOptions& options) {
    static const std::set<std::string> kValid = {"contraction", "dirac", "counterexample",
                                                 "bias", "winf-identity", "all"};
    if (!kValid.contains(options.which))
        throw std::invalid_argument(
            "unknown verify target '" + options.which +
            "' (valid: contraction, dirac, counterexample, bias, winf-identity, all)");
    ensure_directory(options.out_dir);

    const bool all = options.which == "all";
    bool any_violation = false;
    const auto emit = [&](const VerifyReport& report) {
        print_report(report);
        write_text_file(join_path(options.out_dir, report.name + "_report.json"),
                        report_to_json(report).dump(2) + "\n");
        any_violation = any_violation || !report.ok();
    };

    if (all || options.which == "contraction") {
        Rng rng(derive_seed(options.seed, kStreamVerify));
        emit(verify_projected_contraction(options.trials, rng));
    }
    if (all || options.which == "dirac") {
        Rng rng(derive_seed(options.seed, kStreamVerify + 1));
        emit(verify_single_dirac_case(options.trials, rng));
    }
    if (all || options.which == "counterexample") {
        emit(verify_non_expansion_counterexample(options.p_values));
    }
    if (all || options.which == "winf-identity") {
        Rng rng(derive_seed(options.seed, kStreamVerify + 2));
        emit(verify_winf_identity(options.winf_pairs, rng));
    }
    if (all || options.which == "bias") {
        Rng rng(derive_seed(options.seed, kStreamBias));
        const BiasedGradientReport bias = biased_gradient_demo(3, 3, 1.0, options.bias_trials, rng);
        write_text_file(join_path(options.out_dir, "bias_demo.csv"),
                        bias.csv_header() + "\n" + bias.csv_row() + "\n");
        VerifyReport report;
        report.name = "bias";
        report.trials = bias.trials;
        const bool wass_biased = bias.wass_grad_mean < 0.0 &&
                                 std::abs(bias.wass_grad_mean) > 3.0 * bias.wass_grad_stderr;
        const bool qr_unbiased = std::abs(bias.qr_grad_mean) <= 3.0 * bias.qr_grad_stderr;
        if (!wass_biased) ++report.violations;
        if (!qr_unbiased) ++report.violations;
        report.max_ratio = bias.wass_grad_stderr > 0.0
                               ? std::abs(bias.wass_grad_mean) / bias.wass_grad_stderr
                               : 0.0;
        report.lines.push_back("sample Wasserstein gradient mean " +
                               format_double(bias.wass_grad_mean) + " (stderr " +
                               format_double(bias.wass_grad_stderr) + ")");
        report.lines.push_back("quantile regression gradient mean " +
                               format_double(bias.qr_grad_mean) + " (stderr " +
                               format_double(bias.qr_grad_stderr) + ")");
        emit(report);
    }
    return any_violation ? kExitViolation : kExitSuccess;
}

namespace {

/// Applies config-file values then explicit flag overrides to the options.
struct FlagState {
    std::string config_path;
    std::string out_dir;
    std::string seeds;
    std::string env;
    long long episodes = -1;
    long long trials = -1;
    double kappa = std::numeric_limits<double>::quiet_NaN();
};

void apply_json_key(const Json& j, const char* key, std::size_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::size_t>();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Distributional value learning with quantile regression"};
    app.require_subcommand(1);

    FlagState flags;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "JSON config file");
        sub->add_option("--out", flags.out_dir, "output directory");
        sub->add_option("--seed", flags.seeds, "seed or comma-separated seed list");
    };

    CLI::App* grid = app.add_subcommand("gridworld-eval",
                                        "policy evaluation on the windy gridworld");
    add_common(grid);
    grid->add_option("--episodes", flags.episodes, "episodes per run");

    CLI::App* train = app.add_subcommand("train-qrdqn", "quantile control agent training");
    add_common(train);
    train->add_option("--env", flags.env, "environment name (chain, gridworld)");
    train->add_option("--kappa", flags.kappa, "single Huber threshold to run");
    train->add_option("--episodes", flags.episodes, "training environment steps");

    CLI::App* verify = app.add_subcommand("verify", "verification harnesses");
    add_common(verify);
    std::string which = "all";
    verify->add_option("target", which,
                       "contraction | dirac | counterexample | bias | winf-identity | all");
    verify->add_option("--trials", flags.trials, "trial count per harness");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitSuccess : kExitArgumentError;
    }

    try {
        Json config;
        if (!flags.config_path.empty()) config = load_json_file(flags.config_path);

        if (grid->parsed()) {
            GridworldEvalOptions options;
            if (!config.is_null()) {
                for (const auto& [key, value] : config.items()) {
                    (void)value;
                    static const std::set<std::string> known = {
                        "N", "alpha0", "halve_every", "episode_cap",
                        "episodes", "seeds", "rollouts"};
                    if (!known.contains(key))
                        throw std::invalid_argument("unknown config key: " + key);
                }
                Json eval_json = Json::object();
                for (const char* key : {"N", "alpha0", "halve_every", "episode_cap"})
                    if (config.contains(key)) eval_json[key] = config.at(key);
                policy_eval_config_from_json(eval_json, options.eval);
                apply_json_key(config, "episodes", options.episodes);
                apply_json_key(config, "rollouts", options.rollouts);
                if (config.contains("seeds"))
                    options.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
            }
            if (!flags.out_dir.empty()) options.out_dir = flags.out_dir;
            if (!flags.seeds.empty()) options.seeds = parse_seed_list(flags.seeds);
            if (flags.episodes >= 0) options.episodes = static_cast<std::size_t>(flags.episodes);
            return cmd_gridworld_eval(options);
        }

        if (train->parsed()) {
            TrainQrdqnOptions options;
            Json agent_json = Json::object();
            if (!config.is_null()) {
                agent_json = config;
                if (agent_json.contains("env")) {
                    options.env = agent_json.at("env").get<std::string>();
                    agent_json.erase("env");
                }
                if (agent_json.contains("seeds")) {
                    options.seeds = agent_json.at("seeds").get<std::vector<std::uint64_t>>();
                    agent_json.erase("seeds");
                }
                if (agent_json.contains("kappas")) {
                    options.kappas = agent_json.at("kappas").get<std::vector<double>>();
                    agent_json.erase("kappas");
                }
            }
            if (!flags.env.empty()) options.env = flags.env;
            // The gridworld goal is too sparse for epsilon-greedy walks from
            // the start corner to ever find, so that environment defaults to
            // exploring starts; an explicit config key still wins.
            if (options.env == "gridworld") options.agent.exploring_starts = true;
            agent_config_from_json(agent_json, options.agent);
            if (!flags.out_dir.empty()) options.out_dir = flags.out_dir;
            if (!flags.seeds.empty()) options.seeds = parse_seed_list(flags.seeds);
            if (!std::isnan(flags.kappa)) options.kappas = {flags.kappa};
            if (flags.episodes >= 0)
                options.agent.train_steps = static_cast<std::size_t>(flags.episodes);
            return cmd_train_qrdqn(options);
        }

        VerifyOptions options;
        options.which = which;
        if (!config.is_null()) {
            for (const auto& [key, value] : config.items()) {
                (void)value;
                static const std::set<std::string> known = {"trials", "winf_pairs",
                                                            "bias_trials", "seed", "p_values"};
                if (!known.contains(key))
                    throw std::invalid_argument("unknown config key: " + key);
            }
            apply_json_key(config, "trials", options.trials);
            apply_json_key(config, "winf_pairs", options.winf_pairs);
            apply_json_key(config, "bias_trials", options.bias_trials);
            if (config.contains("seed")) options.seed = config.at("seed").get<std::uint64_t>();
            if (config.contains("p_values"))
                options.p_values = config.at("p_values").get<std::vector<double>>();
        }
        if (!flags.out_dir.empty()) options.out_dir = flags.out_dir;
        if (!flags.seeds.empty()) options.seed = parse_seed_list(flags.seeds).front();
        if (flags.trials >= 0) {
            options.trials = static_cast<std::size_t>(flags.trials);
            options.winf_pairs = options.trials;
            options.bias_trials = options.trials;
        }
        return cmd_verify(options);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArgumentError;
    }
}

}  // namespace qdrl
