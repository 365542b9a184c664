#include <gtest/gtest.h>

#include "dpmmcfl/kmeans.hpp"
#include "dpmmcfl/metrics.hpp"

using namespace dpmmcfl;

namespace {

Matrix blobs(std::size_t per, std::size_t k, double spread, std::uint64_t seed) {
    Rng rng = make_rng(seed, "blobs");
    std::normal_distribution<double> z(0.0, spread);
    Matrix x(per * k, 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        x(i, 0) = 10.0 * static_cast<double>(i / per) + z(rng);
        x(i, 1) = z(rng);
    }
    return x;
}

}  // namespace

TEST(KMeans, RecoversSeparatedBlobs) {
    const auto x = blobs(10, 3, 0.5, 1);
    Rng rng = make_rng(1, "km");
    const auto res = kmeans_best_of(x, 3, 5, rng);
    std::vector<int> truth(30);
    for (std::size_t i = 0; i < 30; ++i) truth[i] = static_cast<int>(i / 10);
    EXPECT_NEAR(adjusted_rand_index(res.assignment.labels(), truth), 1.0, 1e-12);
    EXPECT_EQ(res.centroids.rows, 3u);
}

TEST(KMeans, CentroidsAreMemberMeansAndInertiaConsistent) {
    const auto x = blobs(8, 2, 2.0, 2);
    Rng rng = make_rng(2, "km");
    const auto res = kmeans(x, 2, rng);
    double inertia = 0.0;
    for (int k = 0; k < 2; ++k) {
        const auto mem = res.assignment.members(k);
        for (std::size_t j = 0; j < 2; ++j) {
            double m = 0.0;
            for (auto i : mem) m += x(i, j);
            EXPECT_NEAR(res.centroids(static_cast<std::size_t>(k), j), m / static_cast<double>(mem.size()), 1e-12);
        }
        for (auto i : mem)
            for (std::size_t j = 0; j < 2; ++j) {
                const double d = x(i, j) - res.centroids(static_cast<std::size_t>(k), j);
                inertia += d * d;
            }
    }
    EXPECT_NEAR(res.inertia, inertia, 1e-9);
}

TEST(KMeans, KEqualsMGivesSingletons) {
    const auto x = blobs(2, 3, 1.0, 3);
    Rng rng = make_rng(3, "km");
    EXPECT_EQ(kmeans(x, 6, rng).assignment, Assignment::singletons(6));
}

TEST(KMeans, OneClusterAndErrors) {
    const auto x = blobs(5, 2, 1.0, 4);
    Rng rng = make_rng(4, "km");
    EXPECT_EQ(kmeans(x, 1, rng).assignment, Assignment::single_cluster(10));
    EXPECT_THROW(kmeans(x, 11, rng), std::invalid_argument);
    EXPECT_THROW(kmeans(x, 0, rng), std::invalid_argument);
    EXPECT_THROW(kmeans_best_of(x, 2, 0, rng), std::invalid_argument);
}

TEST(KMeans, DuplicatePointsKeepClustersNonEmpty) {
    Matrix x(6, 1, 0.0);
    x(5, 0) = 1.0;
    Rng rng = make_rng(5, "km");
    const auto res = kmeans(x, 3, rng);
    EXPECT_TRUE(res.assignment.is_valid());
    EXPECT_LE(res.assignment.num_clusters(), 3u);
}

TEST(KMeans, BestOfNeverWorseThanSingleRun) {
    const auto x = blobs(6, 5, 3.0, 6);
    Rng a = make_rng(6, "km"), b = make_rng(6, "km");
    const auto single = kmeans(x, 5, a);
    const auto best = kmeans_best_of(x, 5, 10, b);
    EXPECT_LE(best.inertia, single.inertia);
}

TEST(KMeans, Deterministic) {
    const auto x = blobs(7, 3, 2.0, 7);
    Rng a = make_rng(7, "km"), b = make_rng(7, "km");
    EXPECT_EQ(kmeans_best_of(x, 3, 4, a).assignment, kmeans_best_of(x, 3, 4, b).assignment);
}
