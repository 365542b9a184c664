#pragma once

// JSON experiment configuration with an explicit key schema. Unknown keys, type errors and
// missing required keys raise ConfigError carrying the offending key and, when it can be
// located, the source line.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "federation.hpp"

namespace dpmmcfl {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    RunConfig run;
    std::string output_dir;  // empty: $DPMMCFL_OUT, then "out"
    std::size_t seeds = 1;
    std::vector<std::size_t> sweep_k{1, 2, 4, 8, 16};

    std::vector<std::uint64_t> seed_list() const {
        std::vector<std::uint64_t> out;
        for (std::size_t s = 0; s < seeds; ++s) out.push_back(run.seed + s);
        return out;
    }

    std::string resolved_output_dir() const {
        if (!output_dir.empty()) return output_dir;
        if (const char* env = std::getenv("DPMMCFL_OUT"); env && *env) return env;
        return "out";
    }
};

namespace detail {

struct Source {
    std::string name;  // file name or "--set"
    std::string text;
};

/// Line of the dotted key inside JSON text, found by walking its path components in order; 0 if absent.
inline std::size_t locate_key(const std::string& text, const std::string& dotted) {
    std::size_t pos = 0;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        const auto at = text.find('"' + part + '"', pos);
        if (at == std::string::npos) return 0;
        pos = at + part.size() + 2;
    }
    return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

inline void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    if (j.is_object() && !(prefix.empty() && j.empty())) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (!prefix.empty()) {
        out[prefix] = j;
    }
}

struct Field {
    const char* key;
    bool required;
    std::function<void(const json&, ExperimentConfig&)> apply;
};

inline std::size_t as_count(const json& v) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
    return v.get<std::size_t>();
}

inline double as_real(const json& v) {
    if (!v.is_number()) throw std::invalid_argument("expected a number");
    return v.get<double>();
}

inline std::vector<std::size_t> as_count_list(const json& v) {
    if (!v.is_array()) throw std::invalid_argument("expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) out.push_back(as_count(e));
    return out;
}

template <typename E>
E as_enum(const json& v, const std::vector<std::pair<std::string, E>>& choices) {
    std::string all;
    if (v.is_string())
        for (const auto& [name, e] : choices)
            if (v.get<std::string>() == name) return e;
    for (const auto& [name, e] : choices) all += (all.empty() ? "" : "|") + name;
    throw std::invalid_argument("expected one of " + all);
}

inline const std::vector<Field>& schema() {
    using C = ExperimentConfig;
    static const std::vector<Field> fields{
        {"rounds", false, [](const json& v, C& c) { c.run.rounds = as_count(v); }},
        {"seed", false, [](const json& v, C& c) { c.run.seed = as_count(v); }},
        {"seeds", false, [](const json& v, C& c) { c.seeds = as_count(v); }},
        {"algorithm", false, [](const json& v, C& c) {
             c.run.algorithm = as_enum<Algorithm>(v, {{"dpmm", Algorithm::dpmm_cfl}, {"fixedk", Algorithm::fixed_k}, {"global", Algorithm::global}});
         }},
        {"fixed_k", false, [](const json& v, C& c) { c.run.fixed_k = as_count(v); }},
        {"kmeans_restarts", false, [](const json& v, C& c) { c.run.kmeans_restarts = as_count(v); }},
        {"aggregation", false, [](const json& v, C& c) {
             c.run.aggregation = as_enum<Aggregation>(v, {{"sample_weighted", Aggregation::sample_weighted}, {"uniform", Aggregation::uniform}});
         }},
        {"warm_start", false, [](const json& v, C& c) {
             if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
             c.run.warm_start = v.get<bool>();
         }},
        {"threads", false, [](const json& v, C& c) { c.run.threads = as_count(v); }},
        {"output_dir", false, [](const json& v, C& c) {
             if (!v.is_string()) throw std::invalid_argument("expected a string");
             c.output_dir = v.get<std::string>();
         }},
        {"sweep_k", false, [](const json& v, C& c) { c.sweep_k = as_count_list(v); }},
        {"model.hidden_dims", false, [](const json& v, C& c) { c.run.model.hidden_dims = as_count_list(v); }},
        {"sgd.learning_rate", false, [](const json& v, C& c) { c.run.sgd.learning_rate = as_real(v); }},
        {"sgd.momentum", false, [](const json& v, C& c) { c.run.sgd.momentum = as_real(v); }},
        {"sgd.batch_size", false, [](const json& v, C& c) { c.run.sgd.batch_size = as_count(v); }},
        {"sgd.local_steps", false, [](const json& v, C& c) { c.run.sgd.local_steps = as_count(v); }},
        {"dp.alpha", false, [](const json& v, C& c) { c.run.dp.alpha = as_real(v); }},
        {"dp.mu0", false, [](const json& v, C& c) {
             if (v.is_number()) {
                 c.run.dp.mu0 = {v.get<double>()};
             } else if (v.is_array()) {
                 c.run.dp.mu0.clear();
                 for (const auto& e : v) c.run.dp.mu0.push_back(as_real(e));
             } else {
                 throw std::invalid_argument("expected a number or an array of numbers");
             }
         }},
        {"dp.sigma0_sq", false, [](const json& v, C& c) { c.run.dp.sigma0_sq = as_real(v); }},
        {"dp.sigma_sq", false, [](const json& v, C& c) { c.run.dp.sigma_sq = as_real(v); }},
        {"sampler.split_merge", false, [](const json& v, C& c) { c.run.sampler.n_split_merge = as_count(v); }},
        {"sampler.gibbs_sweeps", false, [](const json& v, C& c) { c.run.sampler.n_gibbs_sweeps = as_count(v); }},
        {"sampler.restricted_scans", false, [](const json& v, C& c) { c.run.sampler.t_restricted_scans = as_count(v); }},
        {"pool.num_classes", false, [](const json& v, C& c) { c.run.pool.num_classes = as_count(v); }},
        {"pool.samples_per_class", false, [](const json& v, C& c) { c.run.pool.samples_per_class = as_count(v); }},
        {"pool.feature_dim", false, [](const json& v, C& c) { c.run.pool.feature_dim = as_count(v); }},
        {"pool.class_separation", false, [](const json& v, C& c) { c.run.pool.class_separation = as_real(v); }},
        {"pool.noise_sd", false, [](const json& v, C& c) { c.run.pool.noise_sd = as_real(v); }},
        {"partition.scheme", true, [](const json& v, C& c) {
             c.run.partition.scheme = as_enum<PartitionScheme>(v, {{"dirichlet", PartitionScheme::dirichlet}, {"class_split", PartitionScheme::class_split}});
         }},
        {"partition.num_clusters", true, [](const json& v, C& c) { c.run.partition.num_clusters = as_count(v); }},
        {"partition.num_clients", true, [](const json& v, C& c) { c.run.partition.num_clients = as_count(v); }},
        {"partition.alpha_inter", false, [](const json& v, C& c) { c.run.partition.alpha_inter = as_real(v); }},
        {"partition.alpha_intra", false, [](const json& v, C& c) { c.run.partition.alpha_intra = as_real(v); }},
        {"partition.classes_per_cluster", false, [](const json& v, C& c) { c.run.partition.classes_per_cluster = as_count(v); }},
        {"partition.classes_per_client", false, [](const json& v, C& c) { c.run.partition.classes_per_client = as_count(v); }},
        {"partition.test_fraction", false, [](const json& v, C& c) { c.run.partition.test_fraction = as_real(v); }},
    };
    return fields;
}

inline std::string anchor(const Source& src, const std::string& key) {
    const auto line = locate_key(src.text, key);
    return line ? src.name + ":" + std::to_string(line) : src.name;
}

}  // namespace detail

/// Parses `key=value` where value is JSON if it parses, a bare string otherwise.
inline std::pair<std::string, json> parse_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) v = raw;
    return {key, v};
}

/// Builds an ExperimentConfig from JSON text plus `key=value` overrides.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source_name,
                                     const std::vector<std::string>& overrides = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(source_name + ":1: top level must be a JSON object");

    const detail::Source src{source_name, text};
    std::map<std::string, json> flat;
    detail::flatten(doc, "", flat);
    std::map<std::string, std::string> where;  // key -> anchor for messages
    for (const auto& [k, v] : flat) where[k] = detail::anchor(src, k);
    for (const auto& kv : overrides) {
        auto [k, v] = parse_override(kv);
        flat[k] = v;
        where[k] = "--set " + k;
    }

    std::map<std::string, const detail::Field*> by_key;
    for (const auto& f : detail::schema()) by_key[f.key] = &f;
    for (const auto& [k, v] : flat)
        if (!by_key.count(k)) throw ConfigError(where[k] + ": unknown key '" + k + "'");

    ExperimentConfig cfg;
    for (const auto& f : detail::schema()) {
        auto it = flat.find(f.key);
        if (it == flat.end()) {
            if (f.required) throw ConfigError(source_name + ": missing required key '" + std::string(f.key) + "'");
            continue;
        }
        try {
            f.apply(it->second, cfg);
        } catch (const std::exception& e) {
            throw ConfigError(where[f.key] + ": " + f.key + ": " + e.what());
        }
    }
    try {
        cfg.run.validate();
        if (cfg.seeds < 1) throw std::invalid_argument("seeds must be >= 1");
        if (cfg.run.algorithm == Algorithm::fixed_k && cfg.run.fixed_k > cfg.run.partition.num_clients)
            throw std::invalid_argument("fixed_k exceeds partition.num_clients");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, overrides);
}

/// Effective configuration as nested JSON (echoed into summaries).
inline json config_to_json(const ExperimentConfig& c) {
    const auto& r = c.run;
    json j;
    j["rounds"] = r.rounds;
    j["seed"] = r.seed;
    j["seeds"] = c.seeds;
    j["algorithm"] = to_string(r.algorithm);
    j["fixed_k"] = r.fixed_k;
    j["kmeans_restarts"] = r.kmeans_restarts;
    j["aggregation"] = r.aggregation == Aggregation::uniform ? "uniform" : "sample_weighted";
    j["warm_start"] = r.warm_start;
    j["threads"] = r.threads;
    j["output_dir"] = c.resolved_output_dir();
    j["sweep_k"] = c.sweep_k;
    j["model"]["hidden_dims"] = r.model.hidden_dims;
    j["sgd"] = {{"learning_rate", r.sgd.learning_rate}, {"momentum", r.sgd.momentum},
                {"batch_size", r.sgd.batch_size}, {"local_steps", r.sgd.local_steps}};
    j["dp"] = {{"alpha", r.dp.alpha}, {"mu0", r.dp.mu0.size() > 1 ? json(r.dp.mu0) : json(r.dp.mean(0))},
               {"sigma0_sq", r.dp.sigma0_sq}, {"sigma_sq", r.dp.sigma_sq}};
    j["sampler"] = {{"split_merge", r.sampler.n_split_merge}, {"gibbs_sweeps", r.sampler.n_gibbs_sweeps},
                    {"restricted_scans", r.sampler.t_restricted_scans}};
    j["pool"] = {{"num_classes", r.pool.num_classes}, {"samples_per_class", r.pool.samples_per_class},
                 {"feature_dim", r.pool.feature_dim}, {"class_separation", r.pool.class_separation},
                 {"noise_sd", r.pool.noise_sd}};
    j["partition"] = {{"scheme", r.partition.scheme == PartitionScheme::dirichlet ? "dirichlet" : "class_split"},
                      {"num_clusters", r.partition.num_clusters}, {"num_clients", r.partition.num_clients},
                      {"alpha_inter", r.partition.alpha_inter}, {"alpha_intra", r.partition.alpha_intra},
                      {"classes_per_cluster", r.partition.classes_per_cluster},
                      {"classes_per_client", r.partition.classes_per_client},
                      {"test_fraction", r.partition.test_fraction}};
    return j;
}

}  // namespace dpmmcfl
