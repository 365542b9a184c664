#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "dpmmcfl/sampler.hpp"
#include "dpmmcfl/validation.hpp"

using namespace dpmmcfl;

namespace {

Matrix column(const std::vector<double>& xs) {
    Matrix m(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
    return m;
}

Matrix random_points(std::size_t m, std::size_t d, std::uint64_t seed) {
    Rng rng = make_rng(seed, "points");
    std::normal_distribution<double> z;
    Matrix x(m, d);
    for (auto& v : x.data) v = z(rng);
    return x;
}

// log posterior restricted to two clusters, for the two-way conditional of item s
double two_way_logprob(const Matrix& reps, const DPConfig& cfg, std::vector<std::size_t> with_i,
                       std::vector<std::size_t> with_j, std::size_t s, bool to_j) {
    auto score = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        return std::lgamma(static_cast<double>(a.size())) + std::lgamma(static_cast<double>(b.size())) +
               cluster_log_marginal(stats_of(reps, a), cfg) + cluster_log_marginal(stats_of(reps, b), cfg);
    };
    auto ai = with_i, bj = with_j;
    ai.push_back(s);
    bj.push_back(s);
    const double li = score(ai, with_j), lj = score(with_i, bj);
    const double mx = std::max(li, lj);
    const double lse = mx + std::log(std::exp(li - mx) + std::exp(lj - mx));
    return (to_j ? lj : li) - lse;
}

}  // namespace

TEST(Enumeration, BellNumbers) {
    const std::vector<std::size_t> bell{1, 2, 5, 15, 52, 203, 877, 4140};
    for (std::size_t m = 1; m <= bell.size(); ++m) EXPECT_EQ(enumerate_partitions(m).size(), bell[m - 1]);
    for (const auto& p : enumerate_partitions(6)) EXPECT_TRUE(Assignment(p).labels() == p);
}

TEST(Enumeration, PosteriorNormalizesAndErrors) {
    const auto single = enumerate_posterior(column({0.4}), DPConfig{});
    ASSERT_EQ(single.size(), 1u);
    EXPECT_NEAR(single[0].second, 1.0, 1e-12);
    const auto post = enumerate_posterior(random_points(6, 2, 1), DPConfig{});
    double total = 0.0;
    for (const auto& [a, p] : post) total += p;
    EXPECT_NEAR(total, 1.0, 1e-9);
    try {
        enumerate_posterior(random_points(11, 1, 2), DPConfig{});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "enumeration too large");
    }
}

TEST(Enumeration, EqualPointsFavourOneCluster) {
    DPConfig cfg;
    cfg.alpha = 0.05;
    const auto post = enumerate_posterior(column({0.5, 0.5, 0.5}), cfg);
    double one = 0.0, singles = 0.0;
    for (const auto& [a, p] : post) {
        if (a.num_clusters() == 1) one = p;
        if (a.num_clusters() == 3) singles = p;
    }
    EXPECT_GT(one, singles);
}

TEST(GibbsSweep, SinglePointUnchanged) {
    Rng rng = make_rng(1, "g");
    const auto a = Assignment::single_cluster(1);
    EXPECT_EQ(gibbs_sweep(a, column({3.0}), DPConfig{}, rng), a);
}

TEST(GibbsSweep, FarApartPairMatchesEnumeration) {
    DPConfig cfg;
    cfg.sigma_sq = 0.01;
    cfg.sigma0_sq = 4.0;
    const Matrix x = column({-5.0, 5.0});  // 100 sigma apart
    double exact_two = 0.0;
    for (const auto& [a, p] : enumerate_posterior(x, cfg))
        if (a.num_clusters() == 2) exact_two = p;
    Rng rng = make_rng(2, "g");
    Assignment s = Assignment::single_cluster(2);
    std::size_t two = 0;
    for (int t = 0; t < 2000; ++t) {
        for (int k = 0; k < 50; ++k) s = gibbs_sweep(s, x, cfg, rng);
        two += s.num_clusters() == 2;
    }
    EXPECT_NEAR(static_cast<double>(two) / 2000.0, exact_two, 0.05);
}

TEST(RestrictedScan, EmptySetIsIdentity) {
    const Matrix x = random_points(4, 2, 3);
    const Assignment a(std::vector<int>{0, 1, 0, 1});
    Rng rng = make_rng(3, "r");
    auto [b, logq] = restricted_gibbs_scan(a, {}, 0, 1, x, DPConfig{}, rng);
    EXPECT_EQ(b, a);
    EXPECT_EQ(logq, 0.0);
}

TEST(RestrictedScan, Errors) {
    const Matrix x = random_points(5, 1, 4);
    Rng rng = make_rng(4, "r");
    const Assignment a(std::vector<int>{0, 1, 0, 1, 2});
    const std::vector<std::size_t> with_anchor{0, 2};
    EXPECT_THROW(restricted_gibbs_scan(a, with_anchor, 0, 1, x, DPConfig{}, rng), std::invalid_argument);
    const std::vector<std::size_t> outside{4};
    EXPECT_THROW(restricted_gibbs_scan(a, outside, 0, 1, x, DPConfig{}, rng), std::invalid_argument);
    const std::vector<std::size_t> ok{2};
    EXPECT_THROW(restricted_gibbs_scan(a, ok, 0, 2, x, DPConfig{}, rng), std::invalid_argument);
}

TEST(RestrictedScan, ForcedOverwhelmingChoiceHasZeroLogProb) {
    DPConfig cfg;
    cfg.sigma_sq = 0.01;
    cfg.sigma0_sq = 100.0;
    const Matrix x = column({0.0, 20.0, 0.01});
    const Assignment a(std::vector<int>{0, 1, 1});
    const Assignment target(std::vector<int>{0, 1, 0});
    Rng rng = make_rng(5, "r");
    const std::vector<std::size_t> items{2};
    auto [b, logq] = restricted_gibbs_scan(a, items, 0, 1, x, cfg, rng, target);
    EXPECT_EQ(b, target);
    EXPECT_NEAR(logq, 0.0, 1e-12);
}

TEST(RestrictedScan, ChoiceProbabilitiesMatchMarginalOracleAndNormalize) {
    const Matrix x = random_points(6, 2, 6);
    DPConfig cfg;
    cfg.sigma_sq = 0.7;
    const Assignment a(std::vector<int>{0, 1, 0, 1, 0, 1});
    const std::vector<std::size_t> items{4};
    Rng rng = make_rng(6, "r");
    // item 4 leaves cluster {0,2,4}; the rest stay as they are
    const std::vector<std::size_t> ci{0, 2}, cj{1, 3, 5};
    const auto to_i = restricted_gibbs_scan(a, items, 0, 1, x, cfg, rng, Assignment(std::vector<int>{0, 1, 0, 1, 0, 1}));
    const auto to_j = restricted_gibbs_scan(a, items, 0, 1, x, cfg, rng, Assignment(std::vector<int>{0, 1, 0, 1, 1, 1}));
    EXPECT_NEAR(to_i.second, two_way_logprob(x, cfg, ci, cj, 4, false), 1e-10);
    EXPECT_NEAR(to_j.second, two_way_logprob(x, cfg, ci, cj, 4, true), 1e-10);
    EXPECT_NEAR(std::exp(to_i.second) + std::exp(to_j.second), 1.0, 1e-12);
}

TEST(SplitMerge, SplitGainEqualsFullScoreDifference) {
    const Matrix x = random_points(7, 2, 7);
    const DPConfig cfg;
    Rng rng = make_rng(7, "sm");
    const Assignment a(std::vector<int>{0, 0, 0, 1, 0, 0, 1});
    for (int t = 0; t < 10; ++t) {
        const auto launch = make_launch_state(a, 0, 4, x, cfg, 3, rng);
        const auto prop = propose_from_launch(a, launch, x, cfg, rng);
        ASSERT_EQ(prop.kind, MoveKind::split);
        EXPECT_NEAR(prop.log_posterior_ratio, posterior_logscore(prop.proposal, x, cfg) - posterior_logscore(a, x, cfg), 1e-9);
        EXPECT_EQ(prop.proposal.num_clusters(), a.num_clusters() + 1);
    }
}

TEST(SplitMerge, SplitThenMergeRoundTripRatiosCancel) {
    const Matrix x = random_points(6, 1, 8);
    DPConfig cfg;
    cfg.alpha = 0.7;
    Rng rng = make_rng(8, "sm");
    const Assignment merged(std::vector<int>{0, 0, 0, 0, 1, 0});
    for (int t = 0; t < 20; ++t) {
        const auto launch = make_launch_state(merged, 1, 3, x, cfg, 4, rng);
        const auto split = propose_from_launch(merged, launch, x, cfg, rng);
        ASSERT_EQ(split.kind, MoveKind::split);
        // the same launch read back from the split state proposes the merge
        const auto merge = propose_from_launch(split.proposal, launch, x, cfg, rng);
        ASSERT_EQ(merge.kind, MoveKind::merge);
        EXPECT_EQ(merge.proposal, merged);
        EXPECT_NEAR(split.log_ratio + merge.log_ratio, 0.0, 1e-9);
        EXPECT_NEAR(merge.log_q, split.log_q, 1e-12);
    }
}

TEST(SplitMerge, TinyAlphaIdenticalPointsAlwaysMerge) {
    DPConfig cfg;
    cfg.alpha = 1e-8;
    const Matrix x = column({1.0, 1.0, 1.0, 1.0});
    const Assignment two(std::vector<int>{0, 0, 1, 1});
    Rng rng = make_rng(9, "sm");
    std::size_t merges = 0;
    for (int t = 0; t < 200; ++t) {
        auto [next, out] = split_merge_step(two, x, cfg, SamplerConfig{}, rng);
        if (out.kind != MoveKind::merge) continue;
        ++merges;
        EXPECT_EQ(out.log_acceptance, 0.0);
        EXPECT_TRUE(out.accepted);
        EXPECT_EQ(next.num_clusters(), 1u);
    }
    EXPECT_GT(merges, 0u);
}

TEST(SplitMerge, RequiresTwoItems) {
    Rng rng = make_rng(1, "sm");
    EXPECT_THROW(split_merge_step(Assignment::single_cluster(1), column({0.0}), DPConfig{}, SamplerConfig{}, rng),
                 std::invalid_argument);
}

TEST(RunChain, ZeroMovesReturnsInit) {
    const Matrix x = random_points(5, 2, 10);
    const Assignment init(std::vector<int>{0, 1, 0, 2, 1});
    SamplerConfig sm;
    sm.n_split_merge = 0;
    sm.n_gibbs_sweeps = 0;
    Rng rng = make_rng(10, "c");
    const auto res = run_chain(x, DPConfig{}, sm, rng, init);
    EXPECT_EQ(res.assignment, init);
    EXPECT_TRUE(res.moves.empty());
}

TEST(RunChain, DeterministicAndValidAfterEveryMove) {
    const Matrix x = random_points(12, 3, 11);
    const SamplerConfig sm;
    Rng a = make_rng(11, "c"), b = make_rng(11, "c");
    const auto ra = run_chain(x, DPConfig{}, sm, a, Assignment::single_cluster(12));
    const auto rb = run_chain(x, DPConfig{}, sm, b, Assignment::single_cluster(12));
    EXPECT_EQ(ra.assignment, rb.assignment);

    Rng rng = make_rng(12, "c");
    Assignment s = Assignment::single_cluster(12);
    for (int t = 0; t < 300; ++t) {
        const std::size_t k_before = s.num_clusters();
        auto [next, out] = split_merge_step(s, x, DPConfig{}, sm, rng);
        ASSERT_TRUE(next.is_valid());
        ASSERT_LE(out.log_acceptance, 0.0);
        ASSERT_LE(std::max(next.num_clusters(), k_before) - std::min(next.num_clusters(), k_before), 1u);
        s = std::move(next);
        s = gibbs_sweep(s, x, DPConfig{}, rng);
        ASSERT_TRUE(s.is_valid());
    }
}

TEST(RunChain, RecoversThreeSeparatedBlobs) {
    DPConfig cfg;
    cfg.sigma_sq = 0.05;
    cfg.sigma0_sq = 25.0;
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng data = make_rng(seed, "blobs");
        std::normal_distribution<double> z(0.0, 0.2);
        Matrix x(30, 2);
        for (std::size_t i = 0; i < 30; ++i) {
            const double cx = 6.0 * static_cast<double>(i / 10);
            x(i, 0) = cx + z(data);
            x(i, 1) = -cx + z(data);
        }
        Rng rng = make_rng(seed, "chain");
        SamplerConfig sm;
        sm.n_split_merge = 200;
        sm.n_gibbs_sweeps = 5;
        const auto res = run_chain(x, cfg, sm, rng, Assignment::single_cluster(30));
        hits += res.assignment.num_clusters() == 3;
    }
    EXPECT_GE(hits, 9);
}

// Each move type alone leaves the posterior invariant.
TEST(Stationarity, GibbsOnly) {
    SamplerConfig sm;
    sm.n_split_merge = 0;
    sm.n_gibbs_sweeps = 1;
    const auto x = validation::stationarity_instance(6, 1, 3);
    EXPECT_LE(validation::chain_tv_distance(x, DPConfig{}, sm, 50'000, 500, 31), 0.05);
}

TEST(Stationarity, SplitMergeOnly) {
    SamplerConfig sm;
    sm.n_split_merge = 1;
    sm.n_gibbs_sweeps = 0;
    sm.t_restricted_scans = 5;
    const auto x = validation::stationarity_instance(5, 2, 4);
    EXPECT_LE(validation::chain_tv_distance(x, DPConfig{}, sm, 50'000, 500, 41), 0.05);
}

TEST(Stationarity, SplitMergeWithoutIntermediateScans) {
    SamplerConfig sm;
    sm.n_split_merge = 1;
    sm.n_gibbs_sweeps = 0;
    sm.t_restricted_scans = 0;
    const auto x = validation::stationarity_instance(5, 1, 5);
    EXPECT_LE(validation::chain_tv_distance(x, DPConfig{}, sm, 50'000, 500, 51), 0.05);
}

TEST(Stationarity, HybridOnSixPoints) {
    SamplerConfig sm;
    sm.n_split_merge = 1;
    sm.n_gibbs_sweeps = 1;
    DPConfig cfg;
    cfg.alpha = 2.0;
    cfg.sigma_sq = 0.5;
    const auto x = validation::stationarity_instance(6, 2, 6);
    EXPECT_LE(validation::chain_tv_distance(x, cfg, sm, 50'000, 500, 61), 0.05);
}

TEST(TotalVariation, KnownValues) {
    const auto exact = enumerate_posterior(column({0.0, 3.0}), DPConfig{});
    std::map<std::vector<int>, std::size_t> counts;
    counts[exact[0].first.labels()] = 1;
    EXPECT_NEAR(total_variation(counts, exact), 1.0 - exact[0].second, 1e-12);
    counts.clear();
    EXPECT_THROW(total_variation(counts, exact), std::invalid_argument);
}
