#pragma once

// MCMC over partitions for the conjugate DP mixture: collapsed Gibbs sweeps and split-merge
// moves whose proposals come from restricted Gibbs scans started at a random launch state,
// plus exact enumeration of the posterior for small M.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"
#include "dpmm.hpp"

namespace dpmmcfl {

struct SamplerConfig {
    std::size_t n_split_merge = 20;
    std::size_t n_gibbs_sweeps = 2;
    std::size_t t_restricted_scans = 5;
};

enum class MoveKind { split, merge, gibbs };

inline const char* to_string(MoveKind k) {
    switch (k) {
        case MoveKind::split: return "split";
        case MoveKind::merge: return "merge";
        case MoveKind::gibbs: return "gibbs";
    }
    return "?";
}

struct MoveOutcome {
    MoveKind kind = MoveKind::gibbs;
    bool accepted = false;
    double log_acceptance = 0.0;  // log of min{1, ratio}
    std::size_t K_after = 0;
};

/// One collapsed Gibbs pass: each item is removed and reassigned by CRP weight times
/// conjugate predictive, empty clusters are dropped, labels canonicalised at the end.
inline Assignment gibbs_sweep(const Assignment& a, const Matrix& reps, const DPConfig& cfg, Rng& rng) {
    if (reps.rows != a.size()) throw std::invalid_argument("gibbs_sweep: representation rows != assignment size");
    std::vector<int> labels = a.labels();
    std::vector<ClusterStats> stats(a.num_clusters(), ClusterStats(reps.cols));
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& s = stats[static_cast<std::size_t>(labels[i])];
        s = stats_add(std::move(s), reps.row(i));
    }

    const ClusterStats empty(reps.cols);
    const double log_alpha = std::log(cfg.alpha);
    std::vector<double> logw;
    std::vector<std::size_t> slot;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = reps.row(i);
        auto& own = stats[static_cast<std::size_t>(labels[i])];
        own = stats_remove(std::move(own), x);

        logw.clear();
        slot.clear();
        for (std::size_t k = 0; k < stats.size(); ++k) {
            if (stats[k].n == 0) continue;
            logw.push_back(std::log(static_cast<double>(stats[k].n)) + log_predictive(stats[k], x, cfg));
            slot.push_back(k);
        }
        logw.push_back(log_alpha + log_predictive(empty, x, cfg));

        const std::size_t pick = sample_log_weights(logw, rng);
        std::size_t target;
        if (pick < slot.size()) {
            target = slot[pick];
        } else {
            auto it = std::find_if(stats.begin(), stats.end(), [](const ClusterStats& s) { return s.n == 0; });
            if (it == stats.end()) {
                stats.emplace_back(reps.cols);
                target = stats.size() - 1;
            } else {
                target = static_cast<std::size_t>(it - stats.begin());
            }
        }
        labels[i] = static_cast<int>(target);
        stats[target] = stats_add(std::move(stats[target]), x);
    }
    return Assignment(labels);
}

/// Items of the two anchor clusters other than the anchors, with their launch sides
/// (0: with anchor i, 1: with anchor j).
struct LaunchState {
    std::size_t i = 0, j = 0;
    std::vector<std::size_t> items;
    std::vector<std::uint8_t> side;
};

namespace detail {

struct TwoClusters {
    ClusterStats with_i, with_j;
    std::vector<std::uint8_t> side;
};

inline TwoClusters build_two(const LaunchState& ls, const Matrix& reps) {
    TwoClusters tc{ClusterStats(reps.cols), ClusterStats(reps.cols), ls.side};
    tc.with_i = stats_add(std::move(tc.with_i), reps.row(ls.i));
    tc.with_j = stats_add(std::move(tc.with_j), reps.row(ls.j));
    for (std::size_t k = 0; k < ls.items.size(); ++k) {
        auto& s = ls.side[k] ? tc.with_j : tc.with_i;
        s = stats_add(std::move(s), reps.row(ls.items[k]));
    }
    return tc;
}

/// One restricted Gibbs pass over the launch items; sampled when `forced` is null, otherwise
/// driven to `forced`. Returns the log probability of the choices made.
inline double restricted_pass(TwoClusters& tc, const LaunchState& ls, const Matrix& reps, const DPConfig& cfg,
                              Rng* rng, const std::vector<std::uint8_t>* forced) {
    double logq = 0.0;
    for (std::size_t k = 0; k < ls.items.size(); ++k) {
        const auto x = reps.row(ls.items[k]);
        auto& from = tc.side[k] ? tc.with_j : tc.with_i;
        from = stats_remove(std::move(from), x);

        const double li = std::log(static_cast<double>(tc.with_i.n)) + log_predictive(tc.with_i, x, cfg);
        const double lj = std::log(static_cast<double>(tc.with_j.n)) + log_predictive(tc.with_j, x, cfg);
        const double hi = std::max(li, lj);
        const double lse = hi + std::log(std::exp(li - hi) + std::exp(lj - hi));
        const double log_pi = li - lse, log_pj = lj - lse;

        std::uint8_t choice;
        if (forced) {
            choice = (*forced)[k];
        } else {
            choice = uniform01(*rng) < std::exp(log_pi) ? 0 : 1;
        }
        logq += choice ? log_pj : log_pi;
        tc.side[k] = choice;
        auto& to = choice ? tc.with_j : tc.with_i;
        to = stats_add(std::move(to), x);
    }
    return logq;
}

/// log prior ratio times marginal-likelihood ratio of two clusters versus their union.
inline double log_split_gain(const ClusterStats& a, const ClusterStats& b, const DPConfig& cfg) {
    ClusterStats u = a;
    u.n += b.n;
    for (std::size_t k = 0; k < u.sum.size(); ++k) u.sum[k] += b.sum[k];
    u.sumsq += b.sumsq;
    return std::log(cfg.alpha) + std::lgamma(static_cast<double>(a.n)) + std::lgamma(static_cast<double>(b.n))
           - std::lgamma(static_cast<double>(u.n)) + cluster_log_marginal(a, cfg) + cluster_log_marginal(b, cfg)
           - cluster_log_marginal(u, cfg);
}

inline void check_anchors(const Assignment& a, std::size_t i, std::size_t j) {
    if (i == j || i >= a.size() || j >= a.size()) throw std::invalid_argument("split-merge: anchors must be distinct valid items");
}

}  // namespace detail

/// Restricted Gibbs scan of `items` between the clusters of i and j (which must differ in `a`).
/// With `forced_target`, each item is set to its cluster there and the scan returns the log
/// probability of reproducing it.
inline std::pair<Assignment, double> restricted_gibbs_scan(const Assignment& a, std::span<const std::size_t> items,
                                                           std::size_t i, std::size_t j, const Matrix& reps,
                                                           const DPConfig& cfg, Rng& rng,
                                                           const std::optional<Assignment>& forced_target = std::nullopt) {
    detail::check_anchors(a, i, j);
    if (a[i] == a[j]) throw std::invalid_argument("restricted_gibbs_scan: anchors must sit in different clusters");
    LaunchState ls{i, j, {}, {}};
    for (auto s : items) {
        if (s == i || s == j) throw std::invalid_argument("restricted_gibbs_scan: scan set contains an anchor");
        if (a[s] != a[i] && a[s] != a[j]) throw std::invalid_argument("restricted_gibbs_scan: item outside the two clusters");
        ls.items.push_back(s);
        ls.side.push_back(a[s] == a[j] ? 1 : 0);
    }
    std::vector<std::uint8_t> target;
    if (forced_target) {
        const auto& f = *forced_target;
        if (f.size() != a.size() || f[i] == f[j]) throw std::invalid_argument("restricted_gibbs_scan: invalid forced target");
        for (auto s : ls.items) {
            if (f[s] != f[i] && f[s] != f[j]) throw std::invalid_argument("restricted_gibbs_scan: forced target leaves the two clusters");
            target.push_back(f[s] == f[j] ? 1 : 0);
        }
    }
    auto tc = detail::build_two(ls, reps);
    // members of either cluster outside the scan set stay put but still count
    std::vector<std::uint8_t> in_scan(a.size(), 0);
    for (auto s : ls.items) in_scan[s] = 1;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k == i || k == j || in_scan[k]) continue;
        if (a[k] == a[i]) tc.with_i = stats_add(std::move(tc.with_i), reps.row(k));
        if (a[k] == a[j]) tc.with_j = stats_add(std::move(tc.with_j), reps.row(k));
    }
    const double logq = detail::restricted_pass(tc, ls, reps, cfg, &rng, forced_target ? &target : nullptr);

    std::vector<int> labels = a.labels();
    for (std::size_t k = 0; k < ls.items.size(); ++k) labels[ls.items[k]] = tc.side[k] ? a[j] : a[i];
    return {Assignment(labels), logq};
}

/// Random launch: items of c_i and c_j (anchors excluded) split uniformly between the anchors,
/// then `t_scans` sampled restricted Gibbs passes.
inline LaunchState make_launch_state(const Assignment& a, std::size_t i, std::size_t j, const Matrix& reps,
                                     const DPConfig& cfg, std::size_t t_scans, Rng& rng) {
    detail::check_anchors(a, i, j);
    LaunchState ls{i, j, {}, {}};
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k == i || k == j) continue;
        if (a[k] == a[i] || a[k] == a[j]) {
            ls.items.push_back(k);
            ls.side.push_back(uniform01(rng) < 0.5 ? 0 : 1);
        }
    }
    auto tc = detail::build_two(ls, reps);
    for (std::size_t t = 0; t < t_scans; ++t) detail::restricted_pass(tc, ls, reps, cfg, &rng, nullptr);
    ls.side = tc.side;
    return ls;
}

struct SplitMergeProposal {
    MoveKind kind = MoveKind::split;
    Assignment proposal;
    double log_q = 0.0;            // split: log q(c*|c); merge: log q(c|c*)
    double log_posterior_ratio = 0.0;
    double log_ratio = 0.0;        // log of the Metropolis-Hastings ratio before min{1, .}
};

/// Builds the split (c_i = c_j) or merge (c_i != c_j) proposal from a given launch state.
inline SplitMergeProposal propose_from_launch(const Assignment& a, const LaunchState& launch, const Matrix& reps,
                                              const DPConfig& cfg, Rng& rng) {
    const std::size_t i = launch.i, j = launch.j;
    detail::check_anchors(a, i, j);
    SplitMergeProposal out;
    auto tc = detail::build_two(launch, reps);
    std::vector<int> labels = a.labels();

    if (a[i] == a[j]) {
        out.kind = MoveKind::split;
        out.log_q = detail::restricted_pass(tc, launch, reps, cfg, &rng, nullptr);
        const int fresh = static_cast<int>(a.num_clusters());
        labels[i] = fresh;
        for (std::size_t k = 0; k < launch.items.size(); ++k)
            if (tc.side[k] == 0) labels[launch.items[k]] = fresh;
        out.proposal = Assignment(labels);
        // reverse merge is deterministic: q(c|c*) = 1
        out.log_posterior_ratio = detail::log_split_gain(tc.with_i, tc.with_j, cfg);
        out.log_ratio = out.log_posterior_ratio - out.log_q;
    } else {
        out.kind = MoveKind::merge;
        std::vector<std::uint8_t> current(launch.items.size());
        for (std::size_t k = 0; k < launch.items.size(); ++k) current[k] = a[launch.items[k]] == a[j] ? 1 : 0;
        out.log_q = detail::restricted_pass(tc, launch, reps, cfg, nullptr, &current);
        for (auto& l : labels)
            if (l == a[i]) l = a[j];
        out.proposal = Assignment(labels);
        const auto si = stats_of(reps, a.members(a[i]));
        const auto sj = stats_of(reps, a.members(a[j]));
        out.log_posterior_ratio = -detail::log_split_gain(si, sj, cfg);
        out.log_ratio = out.log_posterior_ratio + out.log_q;
    }
    return out;
}

/// One split-merge Metropolis-Hastings move on a uniformly chosen anchor pair.
inline std::pair<Assignment, MoveOutcome> split_merge_step(const Assignment& a, const Matrix& reps, const DPConfig& cfg,
                                                           const SamplerConfig& sm, Rng& rng) {
    if (a.size() < 2) throw std::invalid_argument("split_merge_step: need at least two items");
    if (reps.rows != a.size()) throw std::invalid_argument("split_merge_step: representation rows != assignment size");
    const std::size_t m = a.size();
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    std::size_t j = std::uniform_int_distribution<std::size_t>(0, m - 2)(rng);
    if (j >= i) ++j;

    const auto launch = make_launch_state(a, i, j, reps, cfg, sm.t_restricted_scans, rng);
    auto prop = propose_from_launch(a, launch, reps, cfg, rng);

    MoveOutcome out;
    out.kind = prop.kind;
    out.log_acceptance = std::min(0.0, prop.log_ratio);
    out.accepted = std::log(uniform01(rng)) < out.log_acceptance;
    Assignment next = out.accepted ? std::move(prop.proposal) : a;
    out.K_after = next.num_clusters();
    return {std::move(next), out};
}

struct ChainResult {
    Assignment assignment;
    std::vector<MoveOutcome> moves;
};

/// `n_split_merge` split-merge moves followed by `n_gibbs_sweeps` Gibbs sweeps.
inline ChainResult run_chain(const Matrix& reps, const DPConfig& cfg, const SamplerConfig& sm, Rng& rng,
                             const Assignment& init) {
    cfg.validate();
    if (reps.rows != init.size()) throw std::invalid_argument("run_chain: representation rows != assignment size");
    ChainResult res{init, {}};
    if (init.size() >= 2) {
        for (std::size_t s = 0; s < sm.n_split_merge; ++s) {
            auto [next, outcome] = split_merge_step(res.assignment, reps, cfg, sm, rng);
            res.assignment = std::move(next);
            res.moves.push_back(outcome);
        }
    }
    for (std::size_t s = 0; s < sm.n_gibbs_sweeps; ++s) {
        res.assignment = gibbs_sweep(res.assignment, reps, cfg, rng);
        res.moves.push_back({MoveKind::gibbs, true, 0.0, res.assignment.num_clusters()});
    }
    return res;
}

/// Every set partition of {0..m-1} as a canonical label vector (restricted growth strings).
inline std::vector<std::vector<int>> enumerate_partitions(std::size_t m) {
    std::vector<std::vector<int>> out;
    if (m == 0) return {std::vector<int>{}};
    std::vector<int> rgs(m, 0), maxv(m, 0);
    while (true) {
        out.push_back(rgs);
        std::size_t k = m - 1;
        while (k > 0 && rgs[k] == maxv[k - 1] + 1) --k;
        if (k == 0) break;
        ++rgs[k];
        maxv[k] = std::max(maxv[k - 1], rgs[k]);
        for (std::size_t r = k + 1; r < m; ++r) {
            rgs[r] = 0;
            maxv[r] = maxv[k];
        }
    }
    return out;
}

/// Exact normalized posterior over all partitions (M <= 10).
inline std::vector<std::pair<Assignment, double>> enumerate_posterior(const Matrix& reps, const DPConfig& cfg) {
    if (reps.rows > 10) throw std::invalid_argument("enumeration too large");
    std::vector<std::pair<Assignment, double>> out;
    std::vector<double> logs;
    for (const auto& labels : enumerate_partitions(reps.rows)) {
        Assignment a(labels);
        logs.push_back(posterior_logscore(a, reps, cfg));
        out.emplace_back(std::move(a), 0.0);
    }
    const double lse = log_sum_exp(logs);
    for (std::size_t k = 0; k < out.size(); ++k) out[k].second = std::exp(logs[k] - lse);
    return out;
}

/// Total-variation distance between an empirical partition histogram and an exact distribution.
inline double total_variation(const std::map<std::vector<int>, std::size_t>& counts,
                              const std::vector<std::pair<Assignment, double>>& exact) {
    std::size_t total = 0;
    for (const auto& [k, c] : counts) total += c;
    if (total == 0) throw std::invalid_argument("total_variation: no samples");
    double tv = 0.0;
    std::size_t matched = 0;
    for (const auto& [a, p] : exact) {
        auto it = counts.find(a.labels());
        const double q = it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
        if (it != counts.end()) matched += it->second;
        tv += std::abs(p - q);
    }
    tv += static_cast<double>(total - matched) / static_cast<double>(total);
    return 0.5 * tv;
}

}  // namespace dpmmcfl
