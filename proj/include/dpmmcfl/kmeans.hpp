#pragma once

// Lloyd's k-means with k-means++ seeding, used by the fixed-K clustered baseline.

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "dpmm.hpp"

namespace dpmmcfl {

struct KMeansResult {
    Assignment assignment;
    Matrix centroids;
    std::size_t iterations = 0;
    double inertia = 0.0;  // sum of squared distances to assigned centroids
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

}  // namespace detail

/// k-means on the rows of `points`. Empty clusters are reseeded from the point farthest from its
/// centroid. Clusters still empty at the end are dropped, so K_t can be below k on
/// degenerate inputs.
inline KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, std::size_t max_iter = 50) {
    const std::size_t m = points.rows, d = points.cols;
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > m) throw std::invalid_argument("kmeans: k exceeds the number of points");

    Matrix cent(k, d);
    std::vector<double> best(m, std::numeric_limits<double>::infinity());
    // k-means++ seeding
    std::size_t first = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    std::copy_n(points.row(first).begin(), d, cent.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            best[i] = std::min(best[i], detail::sq_dist(points.row(i), cent.row(c - 1)));
            total += best[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = uniform01(rng) * total;
            for (pick = 0; pick + 1 < m; ++pick) {
                u -= best[pick];
                if (u < 0.0) break;
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        }
        std::copy_n(points.row(pick).begin(), d, cent.row(c).begin());
    }

    std::vector<int> labels(m, -1);
    std::vector<std::size_t> counts(k);
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < m; ++i) {
            int arg = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = detail::sq_dist(points.row(i), cent.row(c));
                if (dist < bd) {
                    bd = dist;
                    arg = static_cast<int>(c);
                }
            }
            if (labels[i] != arg) {
                labels[i] = arg;
                changed = true;
            }
        }
        // reseed empties from the currently worst-fit point
        std::fill(counts.begin(), counts.end(), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < m; ++i) {
                if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
                const double dist = detail::sq_dist(points.row(i), cent.row(static_cast<std::size_t>(labels[i])));
                if (dist > fd) {
                    fd = dist;
                    far = i;
                }
            }
            if (fd < 0.0) continue;
            --counts[static_cast<std::size_t>(labels[far])];
            labels[far] = static_cast<int>(c);
            counts[c] = 1;
            changed = true;
        }
        std::fill(cent.data.begin(), cent.data.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            auto row = cent.row(static_cast<std::size_t>(labels[i]));
            const auto p = points.row(i);
            for (std::size_t j = 0; j < d; ++j) row[j] += p[j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (auto& v : cent.row(c)) v /= static_cast<double>(counts[c]);
        if (!changed) break;
    }
    Assignment a(labels);
    Matrix ordered(a.num_clusters(), d);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(cent.row(static_cast<std::size_t>(labels[i])).begin(), d, ordered.row(static_cast<std::size_t>(a[i])).begin());
    double inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i) inertia += detail::sq_dist(points.row(i), ordered.row(static_cast<std::size_t>(a[i])));
    return {std::move(a), std::move(ordered), it, inertia};
}

/// Best of `restarts` independent k-means++ runs by inertia.
inline KMeansResult kmeans_best_of(const Matrix& points, std::size_t k, std::size_t restarts, Rng& rng,
                                   std::size_t max_iter = 50) {
    if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
    KMeansResult best = kmeans(points, k, rng, max_iter);
    for (std::size_t r = 1; r < restarts; ++r) {
        auto cand = kmeans(points, k, rng, max_iter);
        if (cand.inertia < best.inertia) best = std::move(cand);
    }
    return best;
}

}  // namespace dpmmcfl
