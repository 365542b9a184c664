#pragma once

// Experiment runner behind the dpmmcfl command-line tool: per-seed CSV traces, JSON
// summaries, fixed-K sweeps and the oracle validation suites.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "federation.hpp"
#include "metrics.hpp"
#include "validation.hpp"

#ifndef DPMMCFL_VERSION
#define DPMMCFL_VERSION "0.0.0-unknown"
#endif

namespace dpmmcfl {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_validate = 3 };

inline constexpr const char* kVersion = DPMMCFL_VERSION;

namespace detail {

/// Writes through a sibling temp file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string trace_csv(const std::vector<RoundRecord>& trace) {
    std::string s = std::string(kTraceHeader) + "\n";
    for (const auto& r : trace) s += to_csv_row(r) + "\n";
    return s;
}

inline json mean_sd_json(const std::vector<double>& v) {
    const auto ms = mean_sd(v);
    return {{"mean", ms.mean}, {"sd", ms.sd}};
}

inline json summary_of(const std::vector<std::uint64_t>& seeds, const std::vector<std::vector<RoundRecord>>& traces) {
    json per_seed = json::array();
    std::vector<double> acc, f1, ari, nmi, k;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto t = summarize_trace(traces[s]);
        per_seed.push_back({{"seed", seeds[s]}, {"final_K", t.final_K}, {"acc", t.acc}, {"f1", t.f1},
                            {"ari", t.ari}, {"nmi", t.nmi}, {"K_last3", t.K}});
        acc.push_back(t.acc);
        f1.push_back(t.f1);
        ari.push_back(t.ari);
        nmi.push_back(t.nmi);
        k.push_back(static_cast<double>(t.final_K));
    }
    json final_k = json::array();
    for (const auto& t : traces) final_k.push_back(t.back().K);
    return {{"per_seed", per_seed},
            {"final_K", final_k},
            {"last3", {{"acc", mean_sd_json(acc)}, {"f1", mean_sd_json(f1)}, {"ari", mean_sd_json(ari)},
                       {"nmi", mean_sd_json(nmi)}, {"final_K", mean_sd_json(k)}}}};
}

}  // namespace detail

/// Runs the configured algorithm once per seed; traces in seed order.
inline std::vector<std::vector<RoundRecord>> run_seeds(const ExperimentConfig& cfg) {
    std::vector<std::vector<RoundRecord>> traces;
    for (auto seed : cfg.seed_list()) {
        RunConfig rc = cfg.run;
        rc.seed = seed;
        traces.push_back(run_experiment(rc).trace);
    }
    return traces;
}

/// `<out>/<algorithm>_seed<N>.csv` per seed plus `<out>/summary.json`.
inline int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
    const std::filesystem::path out = cfg.resolved_output_dir();
    const auto seeds = cfg.seed_list();
    const auto traces = run_seeds(cfg);
    const std::string alg = to_string(cfg.run.algorithm);
    json files = json::array();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto name = alg + "_seed" + std::to_string(seeds[s]) + ".csv";
        detail::write_atomic(out / name, detail::trace_csv(traces[s]));
        files.push_back(name);
        const auto t = summarize_trace(traces[s]);
        char line[256];
        std::snprintf(line, sizeof line, "seed %llu: final K=%zu acc=%.4f f1=%.4f ari=%.4f\n",
                      static_cast<unsigned long long>(seeds[s]), t.final_K, t.acc, t.f1, t.ari);
        log << line;
    }
    json summary = detail::summary_of(seeds, traces);
    summary["command"] = "run";
    summary["algorithm"] = alg;
    summary["version"] = kVersion;
    summary["config"] = config_to_json(cfg);
    summary["traces"] = files;
    detail::write_atomic(out / "summary.json", summary.dump(2) + "\n");
    log << "wrote " << (out / "summary.json").string() << "\n";
    return exit_ok;
}

/// Fixed-K k-means baseline for every K in the sweep list and every seed.
/// Writes `<out>/sweep.csv` keyed by (K, seed, round) and `<out>/sweep_summary.json`.
inline int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.sweep_k.empty()) throw ConfigError("sweep_k: sweep list must be nonempty");
    for (auto k : cfg.sweep_k)
        if (k < 1 || k > cfg.run.partition.num_clients)
            throw ConfigError("sweep_k: K=" + std::to_string(k) + " outside [1, num_clients]");
    const std::filesystem::path out = cfg.resolved_output_dir();
    const auto seeds = cfg.seed_list();
    std::string csv = std::string("K,seed,") + kTraceHeader + "\n";
    json per_k = json::array();
    double best_acc = -1.0;
    std::size_t best_k = 0;
    for (auto k : cfg.sweep_k) {
        ExperimentConfig sub = cfg;
        sub.run.algorithm = Algorithm::fixed_k;
        sub.run.fixed_k = k;
        const auto traces = run_seeds(sub);
        for (std::size_t s = 0; s < seeds.size(); ++s)
            for (const auto& r : traces[s])
                csv += std::to_string(k) + "," + std::to_string(seeds[s]) + "," + to_csv_row(r) + "\n";
        json entry = detail::summary_of(seeds, traces);
        entry["K"] = k;
        const double acc = entry["last3"]["acc"]["mean"].get<double>();
        if (acc > best_acc) {
            best_acc = acc;
            best_k = k;
        }
        char line[128];
        std::snprintf(line, sizeof line, "K=%zu: acc=%.4f\n", k, acc);
        log << line;
        per_k.push_back(std::move(entry));
    }
    detail::write_atomic(out / "sweep.csv", csv);
    json summary{{"command", "sweep"}, {"version", kVersion}, {"config", config_to_json(cfg)},
                 {"sweep", per_k}, {"peak_K", best_k}, {"peak_acc", best_acc}};
    detail::write_atomic(out / "sweep_summary.json", summary.dump(2) + "\n");
    log << "wrote " << (out / "sweep.csv").string() << "\n";
    return exit_ok;
}

/// Prints every oracle check; exit_validate if any fails.
inline int cmd_validate(validation::Level level, std::ostream& out) {
    bool ok = true;
    for (const auto& r : validation::run_all(level)) {
        char line[512];
        std::snprintf(line, sizeof line, "%-4s %-40s value=%.3e threshold=%.3e %s\n", r.passed ? "PASS" : "FAIL",
                      r.name.c_str(), r.value, r.threshold, r.detail.c_str());
        out << line;
        ok = ok && r.passed;
    }
    out << (ok ? "all checks passed\n" : "some checks failed\n");
    return ok ? exit_ok : exit_validate;
}

}  // namespace dpmmcfl
