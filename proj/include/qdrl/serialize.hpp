#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qdrl/distribution.hpp"
#include "qdrl/mdp.hpp"
#include "qdrl/nn.hpp"
#include "qdrl/qrdqn.hpp"
#include "qdrl/qrtd.hpp"

namespace qdrl {

using Json = nlohmann::json;

/// Filesystem or parse failure surfaced to the CLI as exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Round-trip decimal formatting ('.' decimal point, no separators).
std::string format_double(double v);

Json distribution_to_json(const FiniteDistribution& d);  // [[location, weight], ...]
FiniteDistribution distribution_from_json(const Json& j);

Json table_to_json(const ValueDistributionTable& t);
ValueDistributionTable table_from_json(const Json& j);

Json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const Json& j);

Json mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const Json& j);

/// Fills config fields present in j, leaving the rest at their defaults.
/// Unknown keys raise std::invalid_argument.
void agent_config_from_json(const Json& j, AgentConfig& config);
void policy_eval_config_from_json(const Json& j, PolicyEvalConfig& config);

Json load_json_file(const std::string& path);          // throws IoError
void write_text_file(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);

}  // namespace qdrl
