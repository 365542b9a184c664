#pragma once

// Probabilistic kernel of the Dirichlet process mixture: Chinese restaurant process prior,
// conjugate spherical-Gaussian cluster marginal likelihood and the unnormalized
// log posterior over client partitions.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "core.hpp"

namespace dpmmcfl {

/// DP concentration, spherical Gaussian base measure N(mu0, sigma0_sq I) and spherical
/// likelihood variance sigma_sq. An empty mu0 means the zero vector; a single entry is broadcast.
struct DPConfig {
    double alpha = 1.0;
    std::vector<double> mu0;
    double sigma0_sq = 1.0;
    double sigma_sq = 1.0;

    void validate() const {
        if (!(alpha > 0.0)) throw std::invalid_argument("DPConfig: alpha must be > 0");
        if (!(sigma0_sq > 0.0)) throw std::invalid_argument("DPConfig: sigma0_sq must be > 0");
        if (!(sigma_sq > 0.0)) throw std::invalid_argument("DPConfig: sigma_sq must be > 0");
        for (double m : mu0)
            if (!std::isfinite(m)) throw std::invalid_argument("DPConfig: mu0 must be finite");
    }

    double mean(std::size_t dim) const {
        if (mu0.empty()) return 0.0;
        return mu0.size() == 1 ? mu0.front() : mu0.at(dim);
    }
};

/// A partition of M items into K nonempty clusters, labels numbered by order of first appearance.
class Assignment {
public:
    Assignment() = default;

    /// Any integer labelling; relabelled canonically.
    explicit Assignment(std::span<const int> raw) : labels_(raw.size()) {
        std::unordered_map<int, int> remap;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto [it, fresh] = remap.try_emplace(raw[i], static_cast<int>(sizes_.size()));
            if (fresh) sizes_.push_back(0);
            labels_[i] = it->second;
            ++sizes_[static_cast<std::size_t>(it->second)];
        }
    }
    explicit Assignment(const std::vector<int>& raw) : Assignment(std::span<const int>(raw)) {}

    static Assignment single_cluster(std::size_t m) { return Assignment(std::vector<int>(m, 0)); }
    static Assignment singletons(std::size_t m) {
        std::vector<int> v(m);
        for (std::size_t i = 0; i < m; ++i) v[i] = static_cast<int>(i);
        return Assignment(v);
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t num_clusters() const { return sizes_.size(); }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<std::size_t>& sizes() const { return sizes_; }
    int operator[](std::size_t i) const { return labels_[i]; }

    std::vector<std::size_t> members(int k) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == k) out.push_back(i);
        return out;
    }

    /// True when labels are canonical, sizes match and no cluster is empty.
    bool is_valid() const {
        std::vector<std::size_t> counts;
        for (int l : labels_) {
            if (l < 0 || static_cast<std::size_t>(l) > counts.size()) return false;
            if (static_cast<std::size_t>(l) == counts.size()) counts.push_back(0);
            ++counts[static_cast<std::size_t>(l)];
        }
        return counts == sizes_;
    }

    friend bool operator==(const Assignment& a, const Assignment& b) { return a.labels_ == b.labels_; }

private:
    std::vector<int> labels_;
    std::vector<std::size_t> sizes_;
};

/// Sufficient statistics of one cluster: count, coordinate sums, total squared norm.
struct ClusterStats {
    std::size_t n = 0;
    std::vector<double> sum;
    double sumsq = 0.0;

    ClusterStats() = default;
    explicit ClusterStats(std::size_t dim) : sum(dim, 0.0) {}

    std::size_t dim() const { return sum.size(); }
};

inline ClusterStats stats_add(ClusterStats stats, std::span<const double> x) {
    if (stats.sum.empty() && stats.n == 0) stats.sum.assign(x.size(), 0.0);
    if (x.size() != stats.sum.size()) throw std::invalid_argument("stats_add: dimension mismatch");
    ++stats.n;
    for (std::size_t k = 0; k < x.size(); ++k) {
        stats.sum[k] += x[k];
        stats.sumsq += x[k] * x[k];
    }
    return stats;
}

inline ClusterStats stats_remove(ClusterStats stats, std::span<const double> x) {
    if (stats.n == 0) throw std::invalid_argument("stats_remove: empty cluster");
    if (x.size() != stats.sum.size()) throw std::invalid_argument("stats_remove: dimension mismatch");
    --stats.n;
    for (std::size_t k = 0; k < x.size(); ++k) {
        stats.sum[k] -= x[k];
        stats.sumsq -= x[k] * x[k];
    }
    if (stats.n == 0) {
        std::fill(stats.sum.begin(), stats.sum.end(), 0.0);
        stats.sumsq = 0.0;
    }
    return stats;
}

inline ClusterStats stats_of(const Matrix& reps, std::span<const std::size_t> rows) {
    ClusterStats s(reps.cols);
    for (auto r : rows) s = stats_add(std::move(s), reps.row(r));
    return s;
}

/// log P(new item joins cluster k | sizes) for every occupied cluster, then the new-cluster entry.
inline std::vector<double> crp_conditional_logprobs(std::span<const long> sizes, long total_others, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("crp: alpha must be > 0");
    long total = 0;
    for (long m : sizes) {
        if (m < 0) throw std::invalid_argument("crp: negative cluster size");
        total += m;
    }
    if (total != total_others) throw std::invalid_argument("crp: total_others must equal the sum of sizes");
    const double denom = std::log(static_cast<double>(total_others) + alpha);
    std::vector<double> out;
    out.reserve(sizes.size() + 1);
    for (long m : sizes) out.push_back(std::log(static_cast<double>(m)) - denom);
    out.push_back(std::log(alpha) - denom);
    return out;
}

/// log[ Gamma(alpha)/Gamma(alpha+M) * alpha^K * prod_k Gamma(m_k) ]
inline double crp_joint_logprior(const Assignment& a, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("crp: alpha must be > 0");
    const double m = static_cast<double>(a.size());
    double lp = std::lgamma(alpha) - std::lgamma(alpha + m) + static_cast<double>(a.num_clusters()) * std::log(alpha);
    for (auto mk : a.sizes()) lp += std::lgamma(static_cast<double>(mk));
    return lp;
}

/// Closed-form log of the integral over mu of prod_i N(x_i | mu, s I) N(mu | mu0, s0 I).
///
/// With n members, per-coordinate sums S and squared deviations from the prior mean,
///   log p = -(n d / 2) log(2 pi s) + (d / 2) log(s / (s + n s0))
///           - sum_i ||x_i - mu0||^2 / (2 s) + s0 ||S - n mu0||^2 / (2 s (s + n s0)).
/// An empty cluster contributes 0.
inline double cluster_log_marginal(const ClusterStats& stats, const DPConfig& cfg) {
    if (stats.n == 0) return 0.0;
    const double n = static_cast<double>(stats.n);
    const double d = static_cast<double>(stats.dim());
    const double s = cfg.sigma_sq, s0 = cfg.sigma0_sq;

    double dev_sq = stats.sumsq;  // sum_i ||x_i - mu0||^2
    double centred_sum_sq = 0.0;  // ||S - n mu0||^2
    for (std::size_t k = 0; k < stats.dim(); ++k) {
        const double m0 = cfg.mean(k);
        dev_sq += -2.0 * m0 * stats.sum[k] + n * m0 * m0;
        const double c = stats.sum[k] - n * m0;
        centred_sum_sq += c * c;
    }
    return -0.5 * n * d * std::log(2.0 * std::numbers::pi * s) + 0.5 * d * std::log(s / (s + n * s0))
           - dev_sq / (2.0 * s) + s0 * centred_sum_sq / (2.0 * s * (s + n * s0));
}

/// Conjugate posterior predictive log density of x given a cluster's statistics
/// (prior predictive when the cluster is empty).
inline double log_predictive(const ClusterStats& stats, std::span<const double> x, const DPConfig& cfg) {
    const double n = static_cast<double>(stats.n);
    const double post_prec = 1.0 / cfg.sigma0_sq + n / cfg.sigma_sq;
    const double post_var = 1.0 / post_prec;
    const double pred_var = post_var + cfg.sigma_sq;
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double s = stats.n ? stats.sum[k] : 0.0;
        const double mean = post_var * (cfg.mean(k) / cfg.sigma0_sq + s / cfg.sigma_sq);
        const double r = x[k] - mean;
        sq += r * r;
    }
    return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * pred_var) - 0.5 * sq / pred_var;
}

/// Unnormalized log posterior over partitions: CRP joint prior plus the product of cluster marginals.
inline double posterior_logscore(const Assignment& a, const Matrix& reps, const DPConfig& cfg) {
    if (reps.rows != a.size()) throw std::invalid_argument("posterior_logscore: representation rows != assignment size");
    std::vector<ClusterStats> stats(a.num_clusters(), ClusterStats(reps.cols));
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& s = stats[static_cast<std::size_t>(a[i])];
        s = stats_add(std::move(s), reps.row(i));
    }
    double lp = crp_joint_logprior(a, cfg.alpha);
    for (const auto& s : stats) lp += cluster_log_marginal(s, cfg);
    return lp;
}

/// Column-wise z-scoring across rows; constant columns become zero.
inline Matrix zscore_columns(const Matrix& reps) {
    Matrix out = reps;
    if (reps.rows == 0) return out;
    const double n = static_cast<double>(reps.rows);
    for (std::size_t j = 0; j < reps.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < reps.rows; ++i) mean += reps(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < reps.rows; ++i) var += (reps(i, j) - mean) * (reps(i, j) - mean);
        var /= n;
        const double sd = std::sqrt(var);
        // relative floor: treat round-off-level spread as constant
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        for (std::size_t i = 0; i < reps.rows; ++i) out(i, j) = constant ? 0.0 : (reps(i, j) - mean) / sd;
    }
    return out;
}

}  // namespace dpmmcfl
