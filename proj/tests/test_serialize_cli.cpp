#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdrl/cli.hpp"
#include "qdrl/mdp.hpp"
#include "qdrl/nn.hpp"
#include "qdrl/oracle.hpp"
#include "qdrl/rng.hpp"
#include "qdrl/serialize.hpp"

using namespace qdrl;
namespace fs = std::filesystem;

namespace {

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("qdrl");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "qdrl_tests" / name;
    fs::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("format_double round-trips decimals") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-0.5) == "-0.5");
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(0.1).find(',') == std::string::npos);
}

TEST_CASE("distribution json round trip") {
    Rng rng(1);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const FiniteDistribution d = random_distribution(rng);
        const FiniteDistribution back = distribution_from_json(distribution_to_json(d));
        REQUIRE(back.size() == d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            CHECK(back.atoms()[i].location == d.atoms()[i].location);
            CHECK(back.atoms()[i].weight == d.atoms()[i].weight);
        }
    }
    CHECK_THROWS_AS(distribution_from_json(Json::array()), std::invalid_argument);
    CHECK_THROWS_AS(distribution_from_json(Json::parse("[[0.0]]")), std::invalid_argument);
}

TEST_CASE("table json round trip") {
    Rng rng(2);
    const ValueDistributionTable t = random_quantile_table(3, 2, 4, rng);
    const ValueDistributionTable back = table_from_json(table_to_json(t));
    REQUIRE(back.n_states() == 3);
    REQUIRE(back.n_actions() == 2);
    for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t a = 0; a < 2; ++a) CHECK(approx_equal(back.at(x, a), t.at(x, a), 0.0));

    Json bad = table_to_json(t);
    bad["entries"].erase(0);
    CHECK_THROWS_AS(table_from_json(bad), std::invalid_argument);
}

TEST_CASE("mdp json round trip preserves dynamics") {
    for (const FiniteMdp& mdp :
         {build_chain_mdp().mdp, build_counterexample_mdp().mdp, build_windy_gridworld().mdp}) {
        const FiniteMdp back = mdp_from_json(mdp_to_json(mdp));
        REQUIRE(back.n_states() == mdp.n_states());
        REQUIRE(back.n_actions() == mdp.n_actions());
        CHECK(back.gamma() == mdp.gamma());
        CHECK_NOTHROW(back.validate());
        for (StateIndex x = 0; x < mdp.n_states(); ++x) {
            CHECK(back.terminal(x) == mdp.terminal(x));
            for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
                for (StateIndex x2 = 0; x2 < mdp.n_states(); ++x2) {
                    CHECK(back.transition(x, a, x2) == mdp.transition(x, a, x2));
                    if (mdp.transition(x, a, x2) > 0.0)
                        CHECK(back.reward(x, a, x2) == mdp.reward(x, a, x2));
                }
        }
    }
}

TEST_CASE("mlp json round trip is bit exact") {
    Rng rng(3);
    const MlpParams params =
        MlpParams::random_init(std::vector<std::size_t>{3, 8, 4}, rng);
    const MlpParams back = mlp_from_json(mlp_to_json(params));
    REQUIRE(back.sizes() == params.sizes());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        CHECK(back.layers[l].w == params.layers[l].w);
        CHECK(back.layers[l].b == params.layers[l].b);
    }

    Json bad = mlp_to_json(params);
    bad["layers"][0]["w"].erase(0);
    CHECK_THROWS_AS(mlp_from_json(bad), std::invalid_argument);
    Json broken_chain = mlp_to_json(params);
    broken_chain["layers"][1]["in"] = 7;
    CHECK_THROWS_AS(mlp_from_json(broken_chain), std::invalid_argument);
    CHECK_THROWS_AS(mlp_from_json(Json{{"layers", Json::array()}}), std::invalid_argument);
}

TEST_CASE("agent config parsing applies known keys and rejects the rest") {
    AgentConfig config;
    agent_config_from_json(Json::parse(R"({
        "n_quantiles": 16, "kappa": 0.5, "hidden_sizes": [32, 16], "lr": 0.001,
        "batch_size": 64, "gamma": 0.95, "train_steps": 123,
        "exploring_starts": true, "seed": 9
    })"),
                           config);
    CHECK(config.n_quantiles == 16);
    CHECK(config.kappa == 0.5);
    CHECK(config.hidden_sizes == std::vector<std::size_t>{32, 16});
    CHECK(config.lr == 0.001);
    CHECK(config.batch_size == 64);
    REQUIRE(config.gamma.has_value());
    CHECK(*config.gamma == 0.95);
    CHECK(config.train_steps == 123);
    CHECK(config.exploring_starts);
    CHECK(config.seed == 9);
    // untouched keys keep their defaults
    CHECK(config.buffer_capacity == 10000);
    CHECK(!AgentConfig{}.gamma.has_value());

    AgentConfig other;
    CHECK_THROWS_AS(agent_config_from_json(Json::parse(R"({"bogus": 1})"), other),
                    std::invalid_argument);
}

TEST_CASE("evaluation config parsing") {
    PolicyEvalConfig config;
    policy_eval_config_from_json(
        Json::parse(R"({"N": 8, "alpha0": 0.05, "halve_every": 100, "episode_cap": 50})"),
        config);
    CHECK(config.n_quantiles == 8);
    CHECK(config.alpha0 == 0.05);
    CHECK(config.halve_every == 100);
    CHECK(config.episode_cap == 50);
    CHECK_THROWS_AS(policy_eval_config_from_json(Json::parse(R"({"episodes": 10})"), config),
                    std::invalid_argument);
}

TEST_CASE("file io helpers") {
    const std::string dir = fresh_dir("io_helper_out");
    ensure_directory(dir + "/nested/deeper");
    CHECK(fs::is_directory(dir + "/nested/deeper"));
    write_text_file(dir + "/a.txt", "line\n");
    CHECK(slurp(dir + "/a.txt") == "line\n");
    CHECK_THROWS_AS(load_json_file(dir + "/missing.json"), IoError);
    write_text_file(dir + "/bad.json", "{not json");
    CHECK_THROWS_AS(load_json_file(dir + "/bad.json"), IoError);
    write_text_file(dir + "/good.json", R"({"k": 1})");
    CHECK(load_json_file(dir + "/good.json").at("k").get<int>() == 1);
}

TEST_CASE("cli rejects bad invocations with the argument exit code") {
    CHECK(run({"verify", "bogus-target", "--trials", "5"}) == kExitArgumentError);
    CHECK(run({"no-such-subcommand"}) == kExitArgumentError);
    CHECK(run({"verify", "--no-such-flag"}) == kExitArgumentError);
    CHECK(run({"train-qrdqn", "--env", "volcano", "--episodes", "10"}) == kExitArgumentError);
    CHECK(run({"verify", "winf-identity", "--seed", "1,oops"}) == kExitArgumentError);
    CHECK(run({"--help"}) == kExitSuccess);
}

TEST_CASE("cli missing config file maps to the io exit code") {
    CHECK(run({"verify", "winf-identity", "--config", "definitely_missing.json"}) ==
          kExitIoError);
}

TEST_CASE("cli rejects unknown config keys") {
    const std::string dir = fresh_dir("cli_badcfg_out");
    ensure_directory(dir);
    write_text_file(dir + "/cfg.json", R"({"bogus": 1})");
    CHECK(run({"gridworld-eval", "--config", dir + "/cfg.json", "--out", dir}) ==
          kExitArgumentError);
    CHECK(run({"train-qrdqn", "--config", dir + "/cfg.json", "--out", dir}) ==
          kExitArgumentError);
    CHECK(run({"verify", "winf-identity", "--config", dir + "/cfg.json", "--out", dir}) ==
          kExitArgumentError);
}

TEST_CASE("cli verify single harness writes a report and succeeds") {
    const std::string dir = fresh_dir("cli_verify_out");
    CHECK(run({"verify", "winf-identity", "--trials", "20", "--seed", "5", "--out", dir}) ==
          kExitSuccess);
    const Json report = load_json_file(dir + "/winf-identity_report.json");
    CHECK(report.at("trials").get<int>() == 20);
    CHECK(report.at("violations").get<int>() == 0);
    CHECK(report.at("failing_instances").empty());

    CHECK(run({"verify", "counterexample", "--out", dir}) == kExitSuccess);
    const Json ce = load_json_file(dir + "/counterexample_report.json");
    CHECK(ce.at("violations").get<int>() == 0);
    CHECK(ce.at("max_ratio").get<double>() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cli verify reruns are byte identical") {
    const std::string a = fresh_dir("cli_verify_a");
    const std::string b = fresh_dir("cli_verify_b");
    CHECK(run({"verify", "winf-identity", "--trials", "20", "--seed", "7", "--out", a}) == 0);
    CHECK(run({"verify", "winf-identity", "--trials", "20", "--seed", "7", "--out", b}) == 0);
    CHECK(slurp(a + "/winf-identity_report.json") == slurp(b + "/winf-identity_report.json"));
}

TEST_CASE("cli train-qrdqn smoke run writes curves, finals, and params") {
    const std::string dir = fresh_dir("cli_train_out");
    ensure_directory(dir);
    write_text_file(dir + "/cfg.json", R"({
        "train_steps": 60, "warmup_steps": 16, "batch_size": 8, "hidden_sizes": [8],
        "n_quantiles": 2, "eval_period": 30, "eval_episodes": 2,
        "seeds": [1], "kappas": [1.0]
    })");
    CHECK(run({"train-qrdqn", "--config", dir + "/cfg.json", "--out", dir}) == kExitSuccess);

    const std::string curves = slurp(dir + "/curves_kappa1.csv");
    CHECK(curves.rfind("step,seed,kappa,greedy_return,loss\n", 0) == 0);
    CHECK(curves.find("\r") == std::string::npos);
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 3);  // header + 2 eval points

    const Json final_json = load_json_file(dir + "/final_kappa1.json");
    REQUIRE(final_json.is_array());
    REQUIRE(final_json.size() == 1);
    CHECK(final_json[0].at("seed").get<int>() == 1);
    CHECK(final_json[0].at("kappa").get<double>() == 1.0);
    CHECK(final_json[0].contains("greedy_actions"));
    CHECK(final_json[0].contains("matches_policy_iteration"));
    CHECK(final_json[0].contains("greedy_return"));

    const MlpParams params = mlp_from_json(load_json_file(dir + "/params_kappa1_seed1.json"));
    CHECK(params.input_dim() == 2);
    CHECK(params.output_dim() == 2 * 2);

    // the kappa flag overrides the config list and tags files accordingly
    CHECK(run({"train-qrdqn", "--config", dir + "/cfg.json", "--kappa", "0", "--out", dir}) ==
          kExitSuccess);
    CHECK(fs::exists(dir + "/curves_kappa0.csv"));
}

TEST_CASE("cli train-qrdqn reruns are byte identical") {
    const std::string a = fresh_dir("cli_train_a");
    const std::string b = fresh_dir("cli_train_b");
    ensure_directory(a);
    write_text_file(a + "/cfg.json", R"({
        "train_steps": 60, "warmup_steps": 16, "batch_size": 8, "hidden_sizes": [8],
        "n_quantiles": 2, "eval_period": 30, "eval_episodes": 2,
        "seeds": [3], "kappas": [0.0]
    })");
    CHECK(run({"train-qrdqn", "--config", a + "/cfg.json", "--out", a}) == 0);
    CHECK(run({"train-qrdqn", "--config", a + "/cfg.json", "--out", b}) == 0);
    CHECK(slurp(a + "/curves_kappa0.csv") == slurp(b + "/curves_kappa0.csv"));
    CHECK(slurp(a + "/params_kappa0_seed3.json") == slurp(b + "/params_kappa0_seed3.json"));
}

TEST_CASE("cli gridworld-eval with zero episodes writes headers only") {
    const std::string dir = fresh_dir("cli_grid_out");
    ensure_directory(dir);
    write_text_file(dir + "/cfg.json", R"({"rollouts": 50, "seeds": [1]})");
    CHECK(run({"gridworld-eval", "--config", dir + "/cfg.json", "--episodes", "0", "--out",
               dir}) == kExitSuccess);
    CHECK(slurp(dir + "/curves.csv") == "episode,algo,seed,sq_mean_err,w1_err\n");
    CHECK(slurp(dir + "/zdist.csv") == "episode,i,tau_hat,theta\n");
    const Json gt = load_json_file(dir + "/ground_truth.json");
    CHECK(gt.at("rollouts").get<int>() == 50);
    CHECK(gt.at("distribution").is_array());
    CHECK(gt.at("mean").get<double>() > 0.0);
}
