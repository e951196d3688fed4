#include "qdrl/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qdrl {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Json distribution_to_json(const FiniteDistribution& d) {
    Json arr = Json::array();
    for (const Atom& a : d.atoms()) arr.push_back(Json::array({a.location, a.weight}));
    return arr;
}

FiniteDistribution distribution_from_json(const Json& j) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument("distribution JSON must be a nonempty array");
    std::vector<Atom> atoms;
    atoms.reserve(j.size());
    for (const Json& e : j) {
        if (!e.is_array() || e.size() != 2)
            throw std::invalid_argument("distribution atoms must be [location, weight] pairs");
        atoms.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return FiniteDistribution(std::move(atoms));
}

Json table_to_json(const ValueDistributionTable& t) {
    Json j;
    j["n_states"] = t.n_states();
    j["n_actions"] = t.n_actions();
    Json entries = Json::array();
    for (std::size_t x = 0; x < t.n_states(); ++x)
        for (std::size_t a = 0; a < t.n_actions(); ++a)
            entries.push_back(distribution_to_json(t.at(x, a)));
    j["entries"] = std::move(entries);
    return j;
}

ValueDistributionTable table_from_json(const Json& j) {
    const std::size_t n_states = j.at("n_states").get<std::size_t>();
    const std::size_t n_actions = j.at("n_actions").get<std::size_t>();
    const Json& entries = j.at("entries");
    if (!entries.is_array() || entries.size() != n_states * n_actions)
        throw std::invalid_argument("table JSON entry count mismatch");
    ValueDistributionTable table(n_states, n_actions);
    std::size_t k = 0;
    for (std::size_t x = 0; x < n_states; ++x)
        for (std::size_t a = 0; a < n_actions; ++a)
            table.at(x, a) = distribution_from_json(entries[k++]);
    return table;
}

Json mdp_to_json(const FiniteMdp& mdp) {
    Json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    Json terminal = Json::array();
    for (StateIndex x = 0; x < mdp.n_states(); ++x)
        if (mdp.terminal(x)) terminal.push_back(x);
    j["terminal"] = std::move(terminal);
    Json transitions = Json::array();
    for (StateIndex x = 0; x < mdp.n_states(); ++x)
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a)
            for (StateIndex x2 = 0; x2 < mdp.n_states(); ++x2) {
                const double p = mdp.transition(x, a, x2);
                if (p == 0.0) continue;
                transitions.push_back(Json::array({x, a, x2, p, mdp.reward(x, a, x2)}));
            }
    j["transitions"] = std::move(transitions);
    return j;
}

FiniteMdp mdp_from_json(const Json& j) {
    const std::size_t n_states = j.at("n_states").get<std::size_t>();
    const std::size_t n_actions = j.at("n_actions").get<std::size_t>();
    const double gamma = j.at("gamma").get<double>();
    FiniteMdp mdp(n_states, n_actions, gamma);
    for (const Json& t : j.at("transitions")) {
        if (!t.is_array() || t.size() != 5)
            throw std::invalid_argument("transition rows must be [x, a, x2, p, r]");
        mdp.add_transition(t[0].get<StateIndex>(), t[1].get<ActionIndex>(),
                           t[2].get<StateIndex>(), t[3].get<double>(), t[4].get<double>());
    }
    for (const Json& x : j.at("terminal")) mdp.make_terminal(x.get<StateIndex>());
    mdp.validate();
    return mdp;
}

Json mlp_to_json(const MlpParams& params) {
    Json layers = Json::array();
    for (const MlpLayer& layer : params.layers) {
        Json l;
        l["in"] = layer.in;
        l["out"] = layer.out;
        l["w"] = layer.w;
        l["b"] = layer.b;
        layers.push_back(std::move(l));
    }
    return Json{{"layers", std::move(layers)}};
}

MlpParams mlp_from_json(const Json& j) {
    MlpParams params;
    for (const Json& l : j.at("layers")) {
        MlpLayer layer;
        layer.in = l.at("in").get<std::size_t>();
        layer.out = l.at("out").get<std::size_t>();
        layer.w = l.at("w").get<std::vector<double>>();
        layer.b = l.at("b").get<std::vector<double>>();
        if (layer.w.size() != layer.in * layer.out || layer.b.size() != layer.out)
            throw std::invalid_argument("MLP layer JSON has inconsistent sizes");
        params.layers.push_back(std::move(layer));
    }
    if (params.layers.empty()) throw std::invalid_argument("MLP JSON has no layers");
    for (std::size_t l = 1; l < params.layers.size(); ++l)
        if (params.layers[l].in != params.layers[l - 1].out)
            throw std::invalid_argument("MLP layer JSON dimensions do not chain");
    return params;
}

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void agent_config_from_json(const Json& j, AgentConfig& config) {
    static const char* const kKnown[] = {
        "n_quantiles",   "kappa",         "hidden_sizes",       "lr",
        "adam_beta1",    "adam_beta2",    "adam_eps",           "batch_size",
        "buffer_capacity", "target_sync_period", "epsilon_start", "epsilon_end",
        "epsilon_decay_steps", "gamma",   "train_steps",        "warmup_steps",
        "episode_cap",   "eval_period",   "eval_episodes",      "exploring_starts",
        "seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : kKnown) known = known || key == k;
        if (!known) throw std::invalid_argument("unknown agent config key: " + key);
    }
    read_field(j, "n_quantiles", config.n_quantiles);
    read_field(j, "kappa", config.kappa);
    read_field(j, "hidden_sizes", config.hidden_sizes);
    read_field(j, "lr", config.lr);
    read_field(j, "adam_beta1", config.adam_beta1);
    read_field(j, "adam_beta2", config.adam_beta2);
    read_field(j, "adam_eps", config.adam_eps);
    read_field(j, "batch_size", config.batch_size);
    read_field(j, "buffer_capacity", config.buffer_capacity);
    read_field(j, "target_sync_period", config.target_sync_period);
    read_field(j, "epsilon_start", config.epsilon_start);
    read_field(j, "epsilon_end", config.epsilon_end);
    read_field(j, "epsilon_decay_steps", config.epsilon_decay_steps);
    if (j.contains("gamma")) config.gamma = j.at("gamma").get<double>();
    read_field(j, "train_steps", config.train_steps);
    read_field(j, "warmup_steps", config.warmup_steps);
    read_field(j, "episode_cap", config.episode_cap);
    read_field(j, "eval_period", config.eval_period);
    read_field(j, "eval_episodes", config.eval_episodes);
    read_field(j, "exploring_starts", config.exploring_starts);
    read_field(j, "seed", config.seed);
}

void policy_eval_config_from_json(const Json& j, PolicyEvalConfig& config) {
    static const char* const kKnown[] = {"N", "alpha0", "halve_every", "episode_cap"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : kKnown) known = known || key == k;
        if (!known) throw std::invalid_argument("unknown evaluation config key: " + key);
    }
    read_field(j, "N", config.n_quantiles);
    read_field(j, "alpha0", config.alpha0);
    read_field(j, "halve_every", config.halve_every);
    read_field(j, "episode_cap", config.episode_cap);
}

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw IoError("cannot parse JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

void ensure_directory(const std::string& path) {
    if (path.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace qdrl
