#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qdrl/qrdqn.hpp"
#include "qdrl/qrtd.hpp"

namespace qdrl {

/// Exit codes shared by every subcommand.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitArgumentError = 2;
inline constexpr int kExitIoError = 3;

struct GridworldEvalOptions {
    std::string out_dir = "out";
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t episodes = 10000;
    std::size_t rollouts = 1000;
    PolicyEvalConfig eval;
};

struct TrainQrdqnOptions {
    std::string out_dir = "out";
    std::string env = "chain";
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::vector<double> kappas = {0.0, 1.0};
    AgentConfig agent;
};

struct VerifyOptions {
    std::string which = "all";
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    std::size_t trials = 10000;
    std::size_t winf_pairs = 1000;
    std::size_t bias_trials = 10000;
    std::vector<double> p_values = {1.0, 1.5, 2.0, 4.0};
};

/// Policy-evaluation experiment on the windy gridworld: Monte-Carlo ground
/// truth, TD(0), and quantile-regression TD per seed; writes curves.csv,
/// ground_truth.json, and zdist.csv into the output directory.
int cmd_gridworld_eval(const GridworldEvalOptions& options);

/// Control experiment: trains the quantile agent per (seed, kappa) pair and
/// writes learning curves, final greedy-policy summaries, and parameters.
int cmd_train_qrdqn(const TrainQrdqnOptions& options);

/// Runs the selected verification harness(es); returns kExitViolation when
/// any check fails. which is one of contraction, dirac, counterexample,
/// bias, winf-identity, all.
int cmd_verify(const VerifyOptions& options);

/// Full argv entry point; maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv);

}  // namespace qdrl
