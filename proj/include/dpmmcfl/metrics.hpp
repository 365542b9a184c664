#pragma once

// Classification and partition-agreement metrics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpmmcfl {

inline double micro_accuracy(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size()) throw std::invalid_argument("micro_accuracy: length mismatch");
    if (preds.empty()) throw std::invalid_argument("micro_accuracy: empty input");
    std::size_t hit = 0;
    for (std::size_t k = 0; k < preds.size(); ++k) hit += preds[k] == labels[k];
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

/// Unweighted mean of per-class F1 over classes present in preds or labels.
/// A present class with no true positives scores 0.
inline double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t num_classes) {
    if (preds.size() != labels.size()) throw std::invalid_argument("macro_f1: length mismatch");
    if (preds.empty()) throw std::invalid_argument("macro_f1: empty input");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const auto p = static_cast<std::size_t>(preds[k]);
        const auto y = static_cast<std::size_t>(labels[k]);
        if (p >= num_classes || y >= num_classes) throw std::invalid_argument("macro_f1: label out of range");
        if (p == y) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[y];
        }
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
        if (denom == 0) continue;
        ++present;
        sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    return sum / static_cast<double>(present);
}

namespace detail {

struct Contingency {
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    double n = 0.0;
};

inline Contingency contingency(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw std::invalid_argument("partition metrics: length mismatch");
    Contingency t;
    for (std::size_t k = 0; k < a.size(); ++k) {
        t.cells[{a[k], b[k]}] += 1.0;
        t.rows[a[k]] += 1.0;
        t.cols[b[k]] += 1.0;
    }
    t.n = static_cast<double>(a.size());
    return t;
}

inline double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace detail

/// Hubert-Arabie adjusted Rand index. Returns 1 when both partitions are trivial in the same way.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    const auto t = detail::contingency(a, b);
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, v] : t.cells) index += detail::choose2(v);
    for (const auto& [k, v] : t.rows) sa += detail::choose2(v);
    for (const auto& [k, v] : t.cols) sb += detail::choose2(v);
    const double total = detail::choose2(t.n);
    if (total == 0.0) return 1.0;
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

/// Mutual information normalized by the arithmetic mean of the two entropies (natural log).
inline double normalized_mutual_info(std::span<const int> a, std::span<const int> b) {
    const auto t = detail::contingency(a, b);
    if (t.n == 0.0) return 1.0;
    auto entropy = [&](const std::map<int, double>& m) {
        double h = 0.0;
        for (const auto& [k, v] : m) h -= (v / t.n) * std::log(v / t.n);
        return h;
    };
    const double ha = entropy(t.rows), hb = entropy(t.cols);
    if (ha == 0.0 && hb == 0.0) return 1.0;
    double mi = 0.0;
    for (const auto& [key, v] : t.cells) {
        const double pij = v / t.n;
        mi += pij * std::log(pij / ((t.rows.at(key.first) / t.n) * (t.cols.at(key.second) / t.n)));
    }
    const double denom = 0.5 * (ha + hb);
    return std::clamp(mi / denom, 0.0, 1.0);
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

/// Mean and population standard deviation.
inline MeanSd mean_sd(std::span<const double> v) {
    MeanSd r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size()));
    return r;
}

/// Per-round trace entry.
struct RoundRecord {
    std::size_t round = 0;
    std::size_t K = 0;
    double acc_mean = 0.0, acc_sd = 0.0;
    double f1_mean = 0.0, f1_sd = 0.0;
    double ari = 0.0, nmi = 0.0;
    double logpost = 0.0;
    double objective = 0.0;
    std::size_t accept_split = 0, accept_merge = 0;
    std::size_t propose_split = 0, propose_merge = 0;
};

inline constexpr const char* kTraceHeader =
    "round,K_t,acc_mean,acc_sd,f1_mean,f1_sd,ari,nmi,logpost,objective,accept_split,accept_merge";

inline std::string to_csv_row(const RoundRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu", r.round, r.K, r.acc_mean,
                  r.acc_sd, r.f1_mean, r.f1_sd, r.ari, r.nmi, r.logpost, r.objective, r.accept_split, r.accept_merge);
    return buf;
}

/// Averages over the last `last` rounds of a trace (all of it when shorter).
struct TraceSummary {
    double acc = 0.0, f1 = 0.0, ari = 0.0, nmi = 0.0, K = 0.0;
    std::size_t final_K = 0;
};

inline TraceSummary summarize_trace(std::span<const RoundRecord> trace, std::size_t last = 3) {
    if (trace.empty()) throw std::invalid_argument("summarize_trace: empty trace");
    TraceSummary s;
    const std::size_t n = std::min(last, trace.size());
    for (std::size_t k = trace.size() - n; k < trace.size(); ++k) {
        s.acc += trace[k].acc_mean;
        s.f1 += trace[k].f1_mean;
        s.ari += trace[k].ari;
        s.nmi += trace[k].nmi;
        s.K += static_cast<double>(trace[k].K);
    }
    const double dn = static_cast<double>(n);
    s.acc /= dn;
    s.f1 /= dn;
    s.ari /= dn;
    s.nmi /= dn;
    s.K /= dn;
    s.final_K = trace.back().K;
    return s;
}

}  // namespace dpmmcfl
