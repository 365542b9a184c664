#pragma once

// Oracle checks for the Bayesian kernel and the sampler. Each check compares a production code
// path against an independent computation (sequential CRP products, numerical quadrature,
// Monte Carlo integration, exact posterior enumeration) and reports value vs threshold.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "core.hpp"
#include "dpmm.hpp"
#include "sampler.hpp"

namespace dpmmcfl::validation {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
    std::string detail;
};

inline CheckResult at_most(std::string name, double value, double threshold, std::string detail = {}) {
    return {std::move(name), value, threshold, value <= threshold, std::move(detail)};
}

/// log P(c) accumulated one item at a time from the CRP conditionals.
inline double crp_sequential_logprior(const Assignment& a, double alpha) {
    std::vector<long> sizes;
    double lp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto logp = crp_conditional_logprobs(sizes, static_cast<long>(i), alpha);
        const auto k = static_cast<std::size_t>(a[i]);
        lp += logp[k];  // k == sizes.size() selects the new-cluster entry
        if (k == sizes.size()) sizes.push_back(0);
        ++sizes[k];
    }
    return lp;
}

/// Closed-form joint prior vs sequential conditionals, and total mass, over every partition
/// of M <= max_m items.
inline std::vector<CheckResult> check_crp_exactness(std::size_t max_m = 8, std::vector<double> alphas = {0.5, 1.0, 2.0}) {
    double worst_gap = 0.0, worst_mass = 0.0;
    for (double alpha : alphas) {
        for (std::size_t m = 1; m <= max_m; ++m) {
            std::vector<double> logs;
            for (const auto& labels : enumerate_partitions(m)) {
                const Assignment a(labels);
                const double joint = crp_joint_logprior(a, alpha);
                worst_gap = std::max(worst_gap, std::abs(joint - crp_sequential_logprior(a, alpha)));
                logs.push_back(joint);
            }
            worst_mass = std::max(worst_mass, std::abs(std::exp(log_sum_exp(logs)) - 1.0));
        }
    }
    return {at_most("crp joint prior vs sequential conditionals (max |log diff|)", worst_gap, 1e-9),
            at_most("crp total mass over all partitions (max |sum - 1|)", worst_mass, 1e-9)};
}

/// log of the 1-D marginal likelihood by adaptive Gauss-Kronrod quadrature over the mean.
inline double quadrature_log_marginal_1d(std::span<const double> xs, double mu0, double s0, double s) {
    double centre = 0.0;
    for (double x : xs) centre += x;
    centre /= static_cast<double>(xs.size());
    const double scale = std::sqrt(s / static_cast<double>(xs.size()));
    auto log_integrand = [&](double mu) {
        double lp = -0.5 * std::log(2.0 * std::numbers::pi * s0) - 0.5 * (mu - mu0) * (mu - mu0) / s0;
        for (double x : xs) lp += -0.5 * std::log(2.0 * std::numbers::pi * s) - 0.5 * (x - mu) * (x - mu) / s;
        return lp;
    };
    const double shift = log_integrand(centre);
    auto f = [&](double u) { return std::exp(log_integrand(centre + scale * u) - shift); };
    using boost::math::quadrature::gauss_kronrod;
    const double inf = std::numeric_limits<double>::infinity();
    const double val = gauss_kronrod<double, 61>::integrate(f, -inf, inf, 20, 1e-14);
    return std::log(val * scale) + shift;
}

/// Closed form vs quadrature on fixed hand cases and random 1-D instances.
inline std::vector<CheckResult> check_marginal_quadrature(std::size_t instances = 10, std::uint64_t seed = 7) {
    std::vector<CheckResult> out;
    DPConfig unit;
    const double hand1 = cluster_log_marginal(stats_of(Matrix::from_rows({{0.0}}), std::vector<std::size_t>{0}), unit);
    const double hand2 = cluster_log_marginal(stats_of(Matrix::from_rows({{0.0}, {0.0}}), std::vector<std::size_t>{0, 1}), unit);
    // single point: prior predictive N(0; 0, 2); two coincident points: 1 / (2 pi sqrt 3)
    const double want1 = -0.5 * std::log(4.0 * std::numbers::pi);
    const double want2 = -std::log(2.0 * std::numbers::pi * std::sqrt(3.0));
    const std::vector<double> zero1{0.0}, zero2{0.0, 0.0};
    out.push_back(at_most("marginal n=1, x=0 vs log(1/sqrt(4 pi)) = -1.265512",
                          std::max(std::abs(hand1 - want1), std::abs(hand1 - quadrature_log_marginal_1d(zero1, 0.0, 1.0, 1.0))),
                          1e-6, "closed=" + std::to_string(hand1)));
    out.push_back(at_most("marginal n=2, x={0,0} vs log(1/(2 pi sqrt 3)) = -2.387183",
                          std::max(std::abs(hand2 - want2), std::abs(hand2 - quadrature_log_marginal_1d(zero2, 0.0, 1.0, 1.0))),
                          1e-6, "closed=" + std::to_string(hand2)));

    Rng rng = make_rng(seed, "quadrature");
    std::uniform_int_distribution<int> n_dist(1, 12);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> var_dist(0.2, 3.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        DPConfig cfg;
        cfg.mu0 = {normal(rng)};
        cfg.sigma0_sq = var_dist(rng);
        cfg.sigma_sq = var_dist(rng);
        const int n = n_dist(rng);
        std::vector<std::vector<double>> rows;
        std::vector<double> xs;
        for (int r = 0; r < n; ++r) {
            xs.push_back(2.0 * normal(rng));
            rows.push_back({xs.back()});
        }
        std::vector<std::size_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        const double closed = cluster_log_marginal(stats_of(Matrix::from_rows(rows), idx), cfg);
        const double quad = quadrature_log_marginal_1d(xs, cfg.mu0[0], cfg.sigma0_sq, cfg.sigma_sq);
        worst = std::max(worst, std::abs(closed - quad));
    }
    out.push_back(at_most("marginal closed form vs 1-D quadrature (max |log diff|, " + std::to_string(instances) + " instances)",
                          worst, 1e-6));
    return out;
}

/// Closed form vs plain Monte Carlo over the base measure in d = 3; passes within 3 standard errors.
inline CheckResult check_marginal_monte_carlo(std::size_t samples = 1'000'000, std::uint64_t seed = 11) {
    Rng rng = make_rng(seed, "monte-carlo");
    std::normal_distribution<double> normal(0.0, 1.0);
    DPConfig cfg;
    cfg.mu0 = {0.3, -0.2, 0.1};
    cfg.sigma0_sq = 1.0;
    cfg.sigma_sq = 1.5;
    const Matrix pts = Matrix::from_rows({{0.5, -0.4, 0.9}, {-0.3, 0.2, 0.4}});
    const double exact = std::exp(cluster_log_marginal(stats_of(pts, std::vector<std::size_t>{0, 1}), cfg));

    double mean = 0.0, m2 = 0.0;
    std::vector<double> mu(3);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < 3; ++k) mu[k] = cfg.mu0[k] + std::sqrt(cfg.sigma0_sq) * normal(rng);
        double lp = 0.0;
        for (std::size_t r = 0; r < pts.rows; ++r)
            for (std::size_t k = 0; k < 3; ++k) {
                const double e = pts(r, k) - mu[k];
                lp += -0.5 * std::log(2.0 * std::numbers::pi * cfg.sigma_sq) - 0.5 * e * e / cfg.sigma_sq;
            }
        const double v = std::exp(lp);
        const double delta = v - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += delta * (v - mean);
    }
    const double se = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
    const double z = std::abs(mean - exact) / se;
    return at_most("marginal closed form vs d=3 Monte Carlo (|error| / standard error)", z, 3.0,
                   "exact=" + std::to_string(exact) + " mc=" + std::to_string(mean));
}

/// Mean number of clusters from sequential CRP draws vs the harmonic-sum expectation.
inline CheckResult check_crp_cluster_count(std::size_t m = 10, double alpha = 1.0, std::size_t draws = 100'000,
                                           std::uint64_t seed = 13) {
    Rng rng = make_rng(seed, "crp-count");
    double total = 0.0;
    std::vector<long> sizes;
    for (std::size_t d = 0; d < draws; ++d) {
        sizes.clear();
        for (std::size_t i = 0; i < m; ++i) {
            const auto logp = crp_conditional_logprobs(sizes, static_cast<long>(i), alpha);
            const auto k = sample_log_weights(logp, rng);
            if (k == sizes.size()) sizes.push_back(0);
            ++sizes[k];
        }
        total += static_cast<double>(sizes.size());
    }
    double expected = 0.0;
    for (std::size_t i = 0; i < m; ++i) expected += alpha / (alpha + static_cast<double>(i));
    const double mean = total / static_cast<double>(draws);
    return at_most("CRP mean cluster count relative error (M=" + std::to_string(m) + ")",
                   std::abs(mean - expected) / expected, 0.02,
                   "mean=" + std::to_string(mean) + " expected=" + std::to_string(expected));
}

/// Test instance for sampler stationarity: points around two or three random centres.
inline Matrix stationarity_instance(std::size_t m, std::size_t d, std::uint64_t seed) {
    Rng rng = make_rng(seed, "stationarity-instance", {m, d});
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t centres = 2 + static_cast<std::size_t>(seed % 2);
    Matrix c(centres, d);
    for (auto& v : c.data) v = 1.5 * normal(rng);
    Matrix x(m, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < d; ++k) x(i, k) = c(i % centres, k) + 0.5 * normal(rng);
    return x;
}

/// Total-variation distance between the empirical partition distribution of a chain and the
/// enumerated posterior. One sample is recorded after every run_chain call of `per_sample` moves.
inline double chain_tv_distance(const Matrix& reps, const DPConfig& cfg, const SamplerConfig& per_sample,
                                std::size_t samples, std::size_t burn_in, std::uint64_t seed) {
    const auto exact = enumerate_posterior(reps, cfg);
    Rng rng = make_rng(seed, "stationarity-chain");
    Assignment state = Assignment::single_cluster(reps.rows);
    for (std::size_t b = 0; b < burn_in; ++b) state = run_chain(reps, cfg, per_sample, rng, state).assignment;
    std::map<std::vector<int>, std::size_t> counts;
    for (std::size_t s = 0; s < samples; ++s) {
        state = run_chain(reps, cfg, per_sample, rng, state).assignment;
        ++counts[state.labels()];
    }
    return total_variation(counts, exact);
}

/// Split-merge plus Gibbs chain vs exact enumeration on instances with M in {5,6,7}, d in {1,2}.
inline CheckResult check_sampler_stationarity(std::size_t samples = 50'000, std::uint64_t seed = 17) {
    struct Case { std::size_t m, d; };
    const std::vector<Case> cases{{5, 1}, {6, 2}, {7, 1}, {6, 1}, {7, 2}};
    SamplerConfig per_sample;
    per_sample.n_split_merge = 1;
    per_sample.n_gibbs_sweeps = 1;
    per_sample.t_restricted_scans = 5;
    double worst = 0.0;
    std::string detail;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto reps = stationarity_instance(cases[k].m, cases[k].d, seed + k);
        const double tv = chain_tv_distance(reps, DPConfig{}, per_sample, samples, 500, seed + 100 + k);
        worst = std::max(worst, tv);
        detail += "M=" + std::to_string(cases[k].m) + ",d=" + std::to_string(cases[k].d) + ":" + std::to_string(tv) + " ";
    }
    return at_most("sampler stationarity vs enumeration (max TV over " + std::to_string(cases.size()) + " instances)", worst,
                   0.05, detail);
}

enum class Level { fast, full };

inline std::vector<CheckResult> run_all(Level level) {
    std::vector<CheckResult> out = check_crp_exactness();
    for (auto& r : check_marginal_quadrature()) out.push_back(std::move(r));
    out.push_back(check_marginal_monte_carlo());
    out.push_back(check_crp_cluster_count());
    if (level == Level::full) out.push_back(check_sampler_stationarity());
    return out;
}

}  // namespace dpmmcfl::validation
