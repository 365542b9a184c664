#pragma once

// Shared value types and seeded random streams.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace dpmmcfl {

/// Flat real-valued parameter or representation vector.
using ParamVector = std::vector<double>;

using Rng = std::mt19937_64;

/// Dense row-major matrix; rows are observations.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rs) {
        Matrix m;
        m.rows = rs.size();
        m.cols = rs.empty() ? 0 : rs.front().size();
        m.data.reserve(m.rows * m.cols);
        for (const auto& r : rs) {
            if (r.size() != m.cols) throw std::invalid_argument("ragged rows");
            m.data.insert(m.data.end(), r.begin(), r.end());
        }
        return m;
    }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Derives an independent stream seed from a master seed, a purpose tag and indices.
/// Streams for (seed, "local", round, client) never depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::initializer_list<std::uint64_t> idx = {}) {
    std::uint64_t h = detail::splitmix64(master ^ detail::hash_tag(tag));
    for (auto v : idx) h = detail::splitmix64(h ^ detail::splitmix64(v + 0x51ed27));
    return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view tag, std::initializer_list<std::uint64_t> idx = {}) {
    return Rng(derive_seed(master, tag, idx));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// log(sum(exp(v))) without overflow.
inline double log_sum_exp(std::span<const double> v) {
    double mx = -INFINITY;
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Inverse-CDF draw from unnormalized log weights.
inline std::size_t sample_log_weights(std::span<const double> logw, Rng& rng) {
    const double lse = log_sum_exp(logw);
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < logw.size(); ++k) {
        acc += std::exp(logw[k] - lse);
        if (u < acc) return k;
    }
    // u landed in the rounding gap above the accumulated mass
    for (std::size_t k = logw.size(); k-- > 0;)
        if (std::isfinite(logw[k])) return k;
    return logw.size() - 1;
}

/// Gamma-normalized Dirichlet draw; zero concentrations yield zero components.
inline std::vector<double> sample_dirichlet(std::span<const double> conc, Rng& rng) {
    std::vector<double> out(conc.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < conc.size(); ++k) {
        if (conc[k] <= 0.0) continue;
        out[k] = std::gamma_distribution<double>(conc[k], 1.0)(rng);
        total += out[k];
    }
    if (total <= 0.0) {
        // all gamma draws underflowed (tiny shapes); put the mass on one admissible coordinate
        std::vector<std::size_t> ok;
        for (std::size_t k = 0; k < conc.size(); ++k)
            if (conc[k] > 0.0) ok.push_back(k);
        if (ok.empty()) throw std::invalid_argument("dirichlet: no positive concentration");
        out[ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)]] = 1.0;
        return out;
    }
    for (auto& x : out) x /= total;
    return out;
}

/// Integer counts summing to `total`, proportional to `weights` (largest-remainder rounding).
inline std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
    std::vector<std::size_t> out(weights.size(), 0);
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (weights.empty() || wsum <= 0.0) {
        if (total != 0) throw std::invalid_argument("largest_remainder: no positive weight");
        return out;
    }
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double exact = static_cast<double>(total) * weights[k] / wsum;
        out[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += out[k];
        rem.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) out[rem[r % rem.size()].second] += 1;
    return out;
}

}  // namespace dpmmcfl
