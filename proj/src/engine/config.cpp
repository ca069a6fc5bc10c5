#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "zfdt/engine.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

using ojson = nlohmann::ordered_json;

namespace {

void reject_unknown(const ojson& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (allowed.count(key) == 0) throw ConfigError("unknown config key: " + where + key);
    }
}

template <typename T>
void read(const ojson& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key has the wrong type: ") + key);
    }
}

ojson leiden_json(const LeidenConfig& l) {
    return {{"resolution", l.resolution},
            {"max_iterations", l.max_iterations},
            {"min_gain_epsilon", l.min_gain_epsilon},
            {"seed", l.rng_seed}};
}

}  // namespace

void EngineConfig::validate() const {
    if (chunk_size < kMinChunkSize) throw ConfigError("chunk_size must be at least " + std::to_string(kMinChunkSize));
    BeamConfig{top_k, beam_width}.validate();
    leiden.validate();
    if (max_parallel == 0) throw ConfigError("max_parallel must be positive");
    if (stub_dimension == 0) throw ConfigError("stub_dimension must be positive");
    if (!stub && endpoint.empty()) throw ConfigError("an endpoint is required unless stub clients are used");
    if (!stub && dimension == 0) throw ConfigError("dimension must be positive for remote clients");
    if (judge != "kg" && judge != "llm") throw ConfigError("judge must be \"kg\" or \"llm\"");
    bounds.validate();
}

std::string EngineConfig::to_json() const {
    ojson j;
    j["chunk_size"] = chunk_size;
    j["top_k"] = top_k;
    j["beam_width"] = beam_width;
    j["leiden"] = leiden_json(leiden);
    j["seed"] = seed;
    j["max_parallel"] = max_parallel;
    j["expand"] = expand;
    j["stub"] = stub;
    j["stub_identical_pairs"] = stub_options.identical_pairs;
    j["stub_max_section_items"] = stub_options.max_section_items;
    j["stub_dimension"] = stub_dimension;
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["embedding_model"] = embedding_model;
    j["api_key_env"] = api_key_env;
    j["dimension"] = dimension;
    j["judge"] = judge;
    j["tcm_only_avg"] = tcm_only_avg;
    j["rules_path"] = rules_path;
    j["bounds"] = {{"beta", bounds.beta},
                   {"gamma_threshold", bounds.gamma_threshold},
                   {"learning_rate", bounds.learning_rate},
                   {"steps", bounds.steps},
                   {"seed", bounds.rng_seed},
                   {"asymmetric_margin", bounds.asymmetric_margin}};
    return j.dump(2);
}

EngineConfig EngineConfig::from_json(std::string_view json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"chunk_size", "top_k", "beam_width", "leiden", "seed", "max_parallel", "expand", "stub",
                    "stub_identical_pairs", "stub_max_section_items", "stub_dimension", "endpoint", "model",
                    "embedding_model", "api_key_env", "dimension", "judge", "tcm_only_avg", "rules_path", "bounds"},
                   "");
    EngineConfig c;
    read(j, "chunk_size", c.chunk_size);
    read(j, "top_k", c.top_k);
    read(j, "beam_width", c.beam_width);
    read(j, "seed", c.seed);
    read(j, "max_parallel", c.max_parallel);
    read(j, "expand", c.expand);
    read(j, "stub", c.stub);
    read(j, "stub_identical_pairs", c.stub_options.identical_pairs);
    read(j, "stub_max_section_items", c.stub_options.max_section_items);
    read(j, "stub_dimension", c.stub_dimension);
    read(j, "endpoint", c.endpoint);
    read(j, "model", c.model);
    read(j, "embedding_model", c.embedding_model);
    read(j, "api_key_env", c.api_key_env);
    read(j, "dimension", c.dimension);
    read(j, "judge", c.judge);
    read(j, "tcm_only_avg", c.tcm_only_avg);
    read(j, "rules_path", c.rules_path);
    if (j.contains("leiden")) {
        const auto& l = j["leiden"];
        reject_unknown(l, {"resolution", "max_iterations", "min_gain_epsilon", "seed"}, "leiden.");
        read(l, "resolution", c.leiden.resolution);
        read(l, "max_iterations", c.leiden.max_iterations);
        read(l, "min_gain_epsilon", c.leiden.min_gain_epsilon);
        read(l, "seed", c.leiden.rng_seed);
    }
    if (j.contains("bounds")) {
        const auto& b = j["bounds"];
        reject_unknown(b, {"beta", "gamma_threshold", "learning_rate", "steps", "seed", "asymmetric_margin"}, "bounds.");
        read(b, "beta", c.bounds.beta);
        read(b, "gamma_threshold", c.bounds.gamma_threshold);
        read(b, "learning_rate", c.bounds.learning_rate);
        read(b, "steps", c.bounds.steps);
        read(b, "seed", c.bounds.rng_seed);
        read(b, "asymmetric_margin", c.bounds.asymmetric_margin);
    }
    c.validate();
    return c;
}

EngineConfig EngineConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string EngineConfig::build_fingerprint() const {
    ojson j;
    j["chunk_size"] = chunk_size;
    j["leiden"] = leiden_json(leiden);
    j["seed"] = seed;
    j["stub"] = stub;
    if (stub) {
        j["stub_identical_pairs"] = stub_options.identical_pairs;
        j["stub_max_section_items"] = stub_options.max_section_items;
        j["stub_dimension"] = stub_dimension;
    } else {
        j["endpoint"] = endpoint;
        j["model"] = model;
        j["embedding_model"] = embedding_model;
        j["dimension"] = dimension;
    }
    return text::sha256_hex(j.dump());
}

Clients make_clients(const EngineConfig& config) {
    Clients c;
    if (config.stub) {
        c.encoder = std::make_unique<StubEncoder>(config.stub_dimension);
        c.generator = std::make_unique<StubGenerator>(config.stub_options);
        return c;
    }
    RemoteConfig rc;
    rc.base_url = config.endpoint;
    rc.model = config.model;
    rc.embedding_model = config.embedding_model;
    rc.api_key_env = config.api_key_env;
    rc.dimension = config.dimension;
    rc.max_in_flight = static_cast<int>(config.max_parallel);
    c.encoder = std::make_unique<RemoteEncoder>(rc);
    c.generator = std::make_unique<RemoteGenerator>(rc);
    return c;
}

}  // namespace zfdt
