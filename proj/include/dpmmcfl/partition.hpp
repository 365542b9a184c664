#pragma once

// Synthetic Gaussian class pool and its non-IID split into clients under Dirichlet
// label skew or class-split schemes. Ground-truth construction clusters are kept for scoring.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "model.hpp"

namespace dpmmcfl {

struct PoolSpec {
    std::size_t num_classes = 10;
    std::size_t samples_per_class = 300;
    std::size_t feature_dim = 2;
    double class_separation = 2.0;
    double noise_sd = 1.0;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("PoolSpec: num_classes must be >= 2");
        if (samples_per_class < 1) throw std::invalid_argument("PoolSpec: samples_per_class must be >= 1");
        if (feature_dim < 1) throw std::invalid_argument("PoolSpec: feature_dim must be >= 1");
        if (!(class_separation > 0.0)) throw std::invalid_argument("PoolSpec: class_separation must be > 0");
        if (!(noise_sd >= 0.0)) throw std::invalid_argument("PoolSpec: noise_sd must be >= 0");
    }
};

enum class PartitionScheme { dirichlet, class_split };

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::dirichlet;
    std::size_t num_clusters = 4;
    std::size_t num_clients = 60;
    double alpha_inter = 0.1;
    double alpha_intra = 10.0;
    std::size_t classes_per_cluster = 3;
    std::size_t classes_per_client = 2;
    double test_fraction = 0.2;

    void validate(std::size_t num_classes) const {
        if (num_clusters < 1) throw std::invalid_argument("PartitionSpec: num_clusters must be >= 1");
        if (num_clients < 1 || num_clients % num_clusters != 0)
            throw std::invalid_argument("PartitionSpec: num_clients must be a positive multiple of num_clusters");
        if (!(alpha_inter > 0.0) || !(alpha_intra > 0.0)) throw std::invalid_argument("PartitionSpec: Dirichlet concentrations must be > 0");
        if (classes_per_client < 1 || classes_per_client > classes_per_cluster || classes_per_cluster > num_classes)
            throw std::invalid_argument("PartitionSpec: need 1 <= classes_per_client <= classes_per_cluster <= num_classes");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("PartitionSpec: test_fraction must lie in (0,1)");
    }
};

/// One client's data; `*_index` are row indices into the pool.
struct ClientData {
    LabeledDataset train, test;
    std::vector<std::size_t> train_index, test_index;
};

struct ClientPartition {
    std::vector<ClientData> clients;
    std::vector<int> ground_truth_cluster;
    /// Pool rows held by no client (class-split only: classes nobody drew).
    std::vector<std::size_t> unassigned;
    /// Dirichlet scheme: the accepted cluster-level class-proportion draws, one per cluster.
    std::vector<std::vector<double>> cluster_proportions;
};

/// Class means: scaled one-hot vectors when feature_dim >= num_classes (all pairwise distances equal
/// class_separation), otherwise a circle in the first two coordinates with neighbouring means
/// class_separation apart.
inline Matrix class_means(const PoolSpec& spec) {
    Matrix mu(spec.num_classes, spec.feature_dim, 0.0);
    if (spec.feature_dim >= spec.num_classes) {
        for (std::size_t c = 0; c < spec.num_classes; ++c) mu(c, c) = spec.class_separation / std::numbers::sqrt2;
    } else if (spec.feature_dim == 1) {
        for (std::size_t c = 0; c < spec.num_classes; ++c) mu(c, 0) = spec.class_separation * static_cast<double>(c);
    } else {
        const double kc = static_cast<double>(spec.num_classes);
        const double radius = spec.class_separation / (2.0 * std::sin(std::numbers::pi / kc));
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / kc;
            mu(c, 0) = radius * std::cos(angle);
            mu(c, 1) = radius * std::sin(angle);
        }
    }
    return mu;
}

/// Class-major pool: samples_per_class rows per label drawn from N(mu_c, noise_sd^2 I).
inline LabeledDataset generate_pool(const PoolSpec& spec, Rng& rng) {
    spec.validate();
    const Matrix mu = class_means(spec);
    std::normal_distribution<double> noise(0.0, 1.0);
    LabeledDataset pool;
    pool.features = Matrix(spec.num_classes * spec.samples_per_class, spec.feature_dim);
    pool.labels.reserve(pool.features.rows);
    std::size_t r = 0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++r) {
            for (std::size_t k = 0; k < spec.feature_dim; ++k) pool.features(r, k) = mu(c, k) + spec.noise_sd * noise(rng);
            pool.labels.push_back(static_cast<int>(c));
        }
    }
    return pool;
}

inline LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> rows) {
    LabeledDataset out;
    out.features = Matrix(rows.size(), data.features.cols);
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        std::copy_n(data.features.row(rows[k]).begin(), data.features.cols, out.features.row(k).begin());
        out.labels.push_back(data.labels[rows[k]]);
    }
    return out;
}

/// Stratified split of row indices: the test side receives ceil(n * test_fraction) rows
/// (at most n - 1), distributed over labels by largest remainder.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split_indices(
    std::span<const std::size_t> rows, std::span<const int> labels_of_rows, double test_fraction, Rng& rng) {
    const std::size_t n = rows.size();
    if (n < 2) throw std::invalid_argument("train_test_split: need at least 2 samples");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("train_test_split: test_fraction must lie in (0,1)");
    const auto n_test = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9)));

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t k = 0; k < n; ++k) by_label[labels_of_rows[k]].push_back(rows[k]);
    std::vector<double> weights;
    for (auto& [y, v] : by_label) {
        std::shuffle(v.begin(), v.end(), rng);
        weights.push_back(static_cast<double>(v.size()));
    }
    const auto quota = largest_remainder(n_test, weights);

    std::vector<std::size_t> train, test;
    std::size_t g = 0;
    for (auto& [y, v] : by_label) {
        for (std::size_t k = 0; k < v.size(); ++k) (k < quota[g] ? test : train).push_back(v[k]);
        ++g;
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

inline std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data, double test_fraction, Rng& rng) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto [tr, te] = train_test_split_indices(rows, data.labels, test_fraction, rng);
    return {subset(data, tr), subset(data, te)};
}

namespace detail {

inline std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& pool, std::size_t num_classes) {
    std::vector<std::vector<std::size_t>> out(num_classes);
    for (std::size_t r = 0; r < pool.size(); ++r) out.at(static_cast<std::size_t>(pool.labels[r])).push_back(r);
    return out;
}

inline std::size_t num_classes_of(const LabeledDataset& pool) {
    int mx = -1;
    for (int y : pool.labels) mx = std::max(mx, y);
    return static_cast<std::size_t>(mx + 1);
}

inline ClientPartition finish_partition(const LabeledDataset& pool, std::vector<std::vector<std::size_t>> client_rows,
                                        std::vector<int> truth, double test_fraction, Rng& rng) {
    ClientPartition part;
    part.ground_truth_cluster = std::move(truth);
    for (auto& rows : client_rows) {
        std::sort(rows.begin(), rows.end());
        std::vector<int> labels;
        for (auto r : rows) labels.push_back(pool.labels[r]);
        auto [tr, te] = train_test_split_indices(rows, labels, test_fraction, rng);
        ClientData cd;
        cd.train = subset(pool, tr);
        cd.test = subset(pool, te);
        cd.train_index = std::move(tr);
        cd.test_index = std::move(te);
        part.clients.push_back(std::move(cd));
    }
    return part;
}

}  // namespace detail

/// Dirichlet label skew at two levels. Cluster class profiles p_k ~ Dir(alpha_inter 1); each class is
/// routed to clusters in proportion to p_k[c]. Inside a cluster every client draws
/// r ~ Dir(alpha_intra * cluster class proportions) and each class is divided by r[c].
/// Allocations use largest-remainder rounding. A cluster with fewer rows than 2 per client, or a
/// client with fewer than 2 rows, triggers a redraw (100 attempts).
inline ClientPartition dirichlet_partition(const LabeledDataset& pool, const PartitionSpec& pspec, Rng& rng) {
    const std::size_t C = detail::num_classes_of(pool);
    pspec.validate(C);
    if (pspec.scheme != PartitionScheme::dirichlet) throw std::invalid_argument("dirichlet_partition: scheme must be dirichlet");
    const std::size_t K = pspec.num_clusters, per = pspec.num_clients / K;
    constexpr int max_retries = 100;

    auto by_class = detail::rows_by_class(pool, C);
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);

    const std::vector<double> flat(C, pspec.alpha_inter);
    std::vector<std::vector<double>> profile(K);
    for (auto& p : profile) p = sample_dirichlet(flat, rng);

    // cluster_rows[k] for the current profiles
    std::vector<std::vector<std::size_t>> cluster_rows;
    auto route = [&] {
        cluster_rows.assign(K, {});
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> w(K);
            for (std::size_t k = 0; k < K; ++k) w[k] = profile[k][c];
            const auto counts = largest_remainder(by_class[c].size(), w);
            std::size_t pos = 0;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t q = 0; q < counts[k]; ++q) cluster_rows[k].push_back(by_class[c][pos++]);
        }
    };
    route();
    for (int attempt = 0;; ++attempt) {
        bool ok = true;
        for (std::size_t k = 0; k < K; ++k) {
            if (cluster_rows[k].size() < 2 * per) {
                ok = false;
                profile[k] = sample_dirichlet(flat, rng);
            }
        }
        if (ok) break;
        if (attempt >= max_retries) throw std::runtime_error("degenerate partition");
        route();
    }

    std::vector<std::vector<std::size_t>> client_rows(pspec.num_clients);
    std::vector<int> truth(pspec.num_clients);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::vector<std::size_t>> cls(C);
        for (auto r : cluster_rows[k]) cls[static_cast<std::size_t>(pool.labels[r])].push_back(r);
        std::vector<double> conc(C);
        for (std::size_t c = 0; c < C; ++c)
            conc[c] = pspec.alpha_intra * static_cast<double>(cls[c].size()) / static_cast<double>(cluster_rows[k].size());

        for (int attempt = 0;; ++attempt) {
            std::vector<std::vector<double>> mix(per);
            for (auto& m : mix) m = sample_dirichlet(conc, rng);
            std::vector<std::vector<std::size_t>> local(per);
            for (std::size_t c = 0; c < C; ++c) {
                if (cls[c].empty()) continue;
                std::vector<double> w(per);
                for (std::size_t q = 0; q < per; ++q) w[q] = mix[q][c];
                double wsum = std::accumulate(w.begin(), w.end(), 0.0);
                if (wsum <= 0.0) std::fill(w.begin(), w.end(), 1.0);
                const auto counts = largest_remainder(cls[c].size(), w);
                std::size_t pos = 0;
                for (std::size_t q = 0; q < per; ++q)
                    for (std::size_t z = 0; z < counts[q]; ++z) local[q].push_back(cls[c][pos++]);
            }
            const bool ok = std::all_of(local.begin(), local.end(), [](const auto& v) { return v.size() >= 2; });
            if (ok) {
                for (std::size_t q = 0; q < per; ++q) {
                    client_rows[k * per + q] = std::move(local[q]);
                    truth[k * per + q] = static_cast<int>(k);
                }
                break;
            }
            if (attempt >= max_retries) throw std::runtime_error("degenerate partition");
        }
    }
    auto part = detail::finish_partition(pool, std::move(client_rows), std::move(truth), pspec.test_fraction, rng);
    part.cluster_proportions = std::move(profile);
    return part;
}

/// Class-split: every cluster draws classes_per_cluster distinct classes, every client draws
/// classes_per_client of its cluster's classes. A class's rows are shared evenly between the
/// clusters whose clients hold it, then evenly between those clients (remainders round-robin).
/// Rows of classes no client holds are reported in `unassigned`.
inline ClientPartition class_split_partition(const LabeledDataset& pool, const PartitionSpec& pspec, Rng& rng) {
    const std::size_t C = detail::num_classes_of(pool);
    pspec.validate(C);
    if (pspec.scheme != PartitionScheme::class_split) throw std::invalid_argument("class_split_partition: scheme must be class_split");
    const std::size_t K = pspec.num_clusters, per = pspec.num_clients / K;

    std::vector<std::vector<std::size_t>> client_classes(pspec.num_clients);
    std::vector<int> truth(pspec.num_clients);
    std::vector<std::size_t> all(C);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> pick = all;
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(pspec.classes_per_cluster);
        for (std::size_t q = 0; q < per; ++q) {
            std::vector<std::size_t> mine = pick;
            std::shuffle(mine.begin(), mine.end(), rng);
            mine.resize(pspec.classes_per_client);
            std::sort(mine.begin(), mine.end());
            client_classes[k * per + q] = std::move(mine);
            truth[k * per + q] = static_cast<int>(k);
        }
    }

    auto by_class = detail::rows_by_class(pool, C);
    std::vector<std::vector<std::size_t>> client_rows(pspec.num_clients);
    std::vector<std::size_t> unassigned;
    for (std::size_t c = 0; c < C; ++c) {
        auto rows = by_class[c];
        std::shuffle(rows.begin(), rows.end(), rng);
        // holders grouped by cluster
        std::vector<std::vector<std::size_t>> holders(K);
        std::vector<std::size_t> clusters;
        for (std::size_t i = 0; i < pspec.num_clients; ++i) {
            if (std::binary_search(client_classes[i].begin(), client_classes[i].end(), c)) {
                const auto k = static_cast<std::size_t>(truth[i]);
                if (holders[k].empty()) clusters.push_back(k);
                holders[k].push_back(i);
            }
        }
        if (clusters.empty()) {
            unassigned.insert(unassigned.end(), rows.begin(), rows.end());
            continue;
        }
        // round-robin over clusters, then over clients within each cluster
        std::vector<std::size_t> cursor(K, 0);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto k = clusters[r % clusters.size()];
            auto& h = holders[k];
            client_rows[h[cursor[k]++ % h.size()]].push_back(rows[r]);
        }
    }
    for (std::size_t i = 0; i < client_rows.size(); ++i)
        if (client_rows[i].size() < 2) throw std::runtime_error("degenerate partition: client " + std::to_string(i) + " holds fewer than 2 samples");
    std::sort(unassigned.begin(), unassigned.end());
    auto part = detail::finish_partition(pool, std::move(client_rows), std::move(truth), pspec.test_fraction, rng);
    part.unassigned = std::move(unassigned);
    return part;
}

inline ClientPartition make_partition(const LabeledDataset& pool, const PartitionSpec& pspec, Rng& rng) {
    return pspec.scheme == PartitionScheme::dirichlet ? dirichlet_partition(pool, pspec, rng)
                                                      : class_split_partition(pool, pspec, rng);
}

/// Columnar text export: `client_id,cluster_id,split,label,f0,...`; one row per held sample.
inline void write_partition_csv(const ClientPartition& part, std::ostream& os) {
    std::size_t d = 0;
    for (const auto& c : part.clients) d = std::max({d, c.train.features.cols, c.test.features.cols});
    os << "client_id,cluster_id,split,label";
    for (std::size_t k = 0; k < d; ++k) os << ",f" << k;
    os << '\n';
    char buf[64];
    for (std::size_t i = 0; i < part.clients.size(); ++i) {
        const auto emit = [&](const LabeledDataset& ds, const char* split) {
            for (std::size_t r = 0; r < ds.size(); ++r) {
                os << i << ',' << part.ground_truth_cluster[i] << ',' << split << ',' << ds.labels[r];
                for (double v : ds.features.row(r)) {
                    std::snprintf(buf, sizeof buf, ",%.17g", v);
                    os << buf;
                }
                os << '\n';
            }
        };
        emit(part.clients[i].train, "train");
        emit(part.clients[i].test, "test");
    }
}

/// Inverse of write_partition_csv (pool indices are not stored and come back empty).
inline ClientPartition read_partition_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("client_id,cluster_id,split,label", 0) != 0)
        throw std::runtime_error("partition csv: bad header");
    ClientPartition part;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) throw std::runtime_error("partition csv: line " + std::to_string(lineno) + ": too few columns");
        try {
            const auto client = static_cast<std::size_t>(std::stoul(cells[0]));
            const int cluster = std::stoi(cells[1]);
            const int label = std::stoi(cells[3]);
            std::vector<double> x;
            for (std::size_t k = 4; k < cells.size(); ++k) x.push_back(std::stod(cells[k]));
            if (client >= part.clients.size()) {
                part.clients.resize(client + 1);
                part.ground_truth_cluster.resize(client + 1, -1);
            }
            part.ground_truth_cluster[client] = cluster;
            auto& cd = part.clients[client];
            if (cells[2] == "train") {
                cd.train.push_back(x, label);
            } else if (cells[2] == "test") {
                cd.test.push_back(x, label);
            } else {
                throw std::invalid_argument("unknown split '" + cells[2] + "'");
            }
        } catch (const std::logic_error& e) {
            throw std::runtime_error("partition csv: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return part;
}

}  // namespace dpmmcfl
