#pragma once

// Clustered federated learning rounds: broadcast of cluster models, local SGD, clustering of
// client representations (DP mixture, fixed-K k-means or a single global cluster) and
// per-cluster federated averaging.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "dpmm.hpp"
#include "kmeans.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "partition.hpp"
#include "sampler.hpp"

namespace dpmmcfl {

enum class Algorithm { dpmm_cfl, fixed_k, global };
enum class Aggregation { sample_weighted, uniform };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::dpmm_cfl: return "dpmm";
        case Algorithm::fixed_k: return "fixedk";
        case Algorithm::global: return "global";
    }
    return "?";
}

struct RunConfig {
    std::size_t rounds = 30;
    ModelSpec model;  // input_dim and num_classes are taken from the pool
    SGDConfig sgd;
    DPConfig dp;
    SamplerConfig sampler;
    PoolSpec pool;
    PartitionSpec partition;
    Aggregation aggregation = Aggregation::sample_weighted;
    Algorithm algorithm = Algorithm::dpmm_cfl;
    std::size_t fixed_k = 4;
    std::size_t kmeans_restarts = 10;
    bool warm_start = true;
    std::size_t threads = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (rounds < 1) throw std::invalid_argument("RunConfig: rounds must be >= 1");
        if (algorithm == Algorithm::fixed_k && fixed_k < 1) throw std::invalid_argument("RunConfig: fixed_k must be >= 1");
        if (threads < 1) throw std::invalid_argument("RunConfig: threads must be >= 1");
        if (kmeans_restarts < 1) throw std::invalid_argument("RunConfig: kmeans_restarts must be >= 1");
        sgd.validate();
        dp.validate();
        pool.validate();
        partition.validate(pool.num_classes);
    }

    ModelSpec model_spec() const {
        ModelSpec s = model;
        s.input_dim = pool.feature_dim;
        s.num_classes = pool.num_classes;
        return s;
    }
};

struct ClusterModel {
    ParamVector params;
    std::size_t members = 0;         // m_k
    std::size_t weighted_size = 0;   // N_k
};

/// Immutable per-experiment context: model architecture and client data.
struct Federation {
    ModelSpec spec;
    std::shared_ptr<const ClientPartition> data;

    std::size_t num_clients() const { return data->clients.size(); }
    const LabeledDataset& train(std::size_t i) const { return data->clients[i].train; }
    const LabeledDataset& test(std::size_t i) const { return data->clients[i].test; }
};

/// Mutable state carried between rounds.
struct RoundState {
    std::size_t round = 0;
    Assignment assignment;
    std::vector<ClusterModel> clusters;
    std::vector<ParamVector> client_params;
};

/// Aggregation weights for members with sample counts `n`; they sum to 1.
inline std::vector<double> aggregation_weights(std::span<const std::size_t> n, Aggregation mode) {
    if (n.empty()) throw std::invalid_argument("aggregate: empty member list");
    std::vector<double> w(n.size());
    if (mode == Aggregation::uniform) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n.size()));
    } else {
        std::size_t total = 0;
        for (auto v : n) total += v;
        if (total == 0) throw std::invalid_argument("aggregate: members hold no samples");
        for (std::size_t k = 0; k < n.size(); ++k) w[k] = static_cast<double>(n[k]) / static_cast<double>(total);
    }
    return w;
}

struct AggregateInput {
    std::span<const double> params;
    std::size_t n = 0;
};

/// Weighted average of member parameters (sample-weighted FedAvg, or uniform 1/m_k).
/// Accumulated as offsets from the first member so identical inputs come back bit-exact.
inline ParamVector aggregate(std::span<const AggregateInput> members, Aggregation mode) {
    if (members.empty()) throw std::invalid_argument("aggregate: empty member list");
    std::vector<std::size_t> n;
    for (const auto& m : members) n.push_back(m.n);
    const auto w = aggregation_weights(n, mode);
    const auto& base = members.front().params;
    ParamVector out(base.begin(), base.end());
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (members[k].params.size() != out.size()) throw std::invalid_argument("aggregate: parameter length mismatch");
        for (std::size_t p = 0; p < out.size(); ++p) out[p] += w[k] * (members[k].params[p] - base[p]);
    }
    return out;
}

/// sum_k sum_i (n_i / N_k) r_ik f_i(Omega_k) over the clients' training sets.
inline double clustered_objective(const std::vector<ClusterModel>& clusters, const Federation& fed, const Assignment& a) {
    if (a.size() != fed.num_clients()) throw std::invalid_argument("clustered_objective: assignment size mismatch");
    if (clusters.size() != a.num_clusters()) throw std::invalid_argument("clustered_objective: cluster count mismatch");
    std::vector<double> nk(clusters.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) nk[static_cast<std::size_t>(a[i])] += static_cast<double>(fed.train(i).size());
    for (double v : nk)
        if (v <= 0.0) throw std::invalid_argument("clustered_objective: empty cluster");
    double f = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto k = static_cast<std::size_t>(a[i]);
        f += static_cast<double>(fed.train(i).size()) / nk[k] * loss(clusters[k].params, fed.train(i), fed.spec);
    }
    return f;
}

namespace detail {

template <typename Func>
void par_for(std::size_t count, std::size_t threads, Func f) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t id = 0; id < threads; ++id)
        pool.emplace_back([id, count, threads, &f] {
            for (std::size_t i = id; i < count; i += threads) f(i);
        });
    for (auto& t : pool) t.join();
}

inline std::vector<ClusterModel> aggregate_clusters(const Federation& fed, const Assignment& a,
                                                    const std::vector<ParamVector>& client_params, Aggregation mode) {
    std::vector<ClusterModel> out(a.num_clusters());
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::vector<AggregateInput> members;
        for (auto i : a.members(static_cast<int>(k))) {
            members.push_back({client_params[i], fed.train(i).size()});
            out[k].weighted_size += fed.train(i).size();
        }
        out[k].members = members.size();
        out[k].params = aggregate(members, mode);
    }
    return out;
}

}  // namespace detail

/// Builds the data, the random initial model and the K=1 starting state.
inline std::pair<Federation, RoundState> init_experiment(const RunConfig& cfg) {
    cfg.validate();
    Federation fed;
    fed.spec = cfg.model_spec();
    fed.spec.validate();
    Rng data_rng = make_rng(cfg.seed, "data");
    const auto pool = generate_pool(cfg.pool, data_rng);
    fed.data = std::make_shared<const ClientPartition>(make_partition(pool, cfg.partition, data_rng));

    Rng init_rng = make_rng(cfg.seed, "init");
    RoundState st;
    const auto omega = init_params(fed.spec, init_rng);
    const std::size_t m = fed.num_clients();
    st.assignment = Assignment::single_cluster(m);
    ClusterModel c{omega, m, 0};
    for (std::size_t i = 0; i < m; ++i) c.weighted_size += fed.train(i).size();
    st.clusters.push_back(std::move(c));
    st.client_params.assign(m, omega);
    return {std::move(fed), std::move(st)};
}

/// One communication round: local updates from each client's cluster model, clustering of the
/// z-scored last-layer representations, per-cluster aggregation and evaluation.
/// Every random draw comes from a stream keyed by (seed, round[, client]).
inline std::pair<RoundState, RoundRecord> run_round(const Federation& fed, const RoundState& prev, const RunConfig& cfg) {
    const std::size_t m = fed.num_clients();
    const std::size_t t = prev.round + 1;
    RoundState next;
    next.round = t;
    next.client_params.resize(m);

    detail::par_for(m, cfg.threads, [&](std::size_t i) {
        Rng rng = make_rng(cfg.seed, "local", {t, i});
        const auto& start = prev.clusters[static_cast<std::size_t>(prev.assignment[i])].params;
        next.client_params[i] = local_update(start, fed.train(i), cfg.sgd, fed.spec, rng);
    });

    Matrix reps(m, fed.spec.representation_size());
    for (std::size_t i = 0; i < m; ++i) {
        const auto r = representation(next.client_params[i], fed.spec);
        std::copy(r.begin(), r.end(), reps.row(i).begin());
    }
    const Matrix z = zscore_columns(reps);

    RoundRecord rec;
    rec.round = t;
    switch (cfg.algorithm) {
        case Algorithm::dpmm_cfl: {
            Rng rng = make_rng(cfg.seed, "chain", {t});
            const Assignment init = cfg.warm_start ? prev.assignment : Assignment::single_cluster(m);
            auto chain = run_chain(z, cfg.dp, cfg.sampler, rng, init);
            for (const auto& mv : chain.moves) {
                if (mv.kind == MoveKind::split) {
                    ++rec.propose_split;
                    rec.accept_split += mv.accepted;
                } else if (mv.kind == MoveKind::merge) {
                    ++rec.propose_merge;
                    rec.accept_merge += mv.accepted;
                }
            }
            next.assignment = std::move(chain.assignment);
            break;
        }
        case Algorithm::fixed_k: {
            if (cfg.fixed_k > m) throw std::invalid_argument("fixed_k: K exceeds the number of clients");
            Rng rng = make_rng(cfg.seed, "kmeans", {t});
            next.assignment = kmeans_best_of(z, cfg.fixed_k, cfg.kmeans_restarts, rng).assignment;
            break;
        }
        case Algorithm::global:
            next.assignment = Assignment::single_cluster(m);
            break;
    }

    next.clusters = detail::aggregate_clusters(fed, next.assignment, next.client_params, cfg.aggregation);

    std::vector<double> acc(m), f1(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& model = next.clusters[static_cast<std::size_t>(next.assignment[i])].params;
        const auto& test = fed.test(i);
        const auto preds = predict(model, test, fed.spec);
        acc[i] = micro_accuracy(preds, test.labels);
        f1[i] = macro_f1(preds, test.labels, fed.spec.num_classes);
    }
    const auto a = mean_sd(acc), f = mean_sd(f1);
    rec.K = next.assignment.num_clusters();
    rec.acc_mean = a.mean;
    rec.acc_sd = a.sd;
    rec.f1_mean = f.mean;
    rec.f1_sd = f.sd;
    rec.ari = adjusted_rand_index(next.assignment.labels(), fed.data->ground_truth_cluster);
    rec.nmi = normalized_mutual_info(next.assignment.labels(), fed.data->ground_truth_cluster);
    rec.logpost = posterior_logscore(next.assignment, z, cfg.dp);
    rec.objective = clustered_objective(next.clusters, fed, next.assignment);
    return {std::move(next), rec};
}

/// run_round with the clustering step replaced by k-means at fixed K.
inline std::pair<RoundState, RoundRecord> fixed_k_round(const Federation& fed, const RoundState& prev, RunConfig cfg,
                                                        std::size_t K) {
    if (K < 1) throw std::invalid_argument("fixed_k: K must be >= 1");
    cfg.algorithm = Algorithm::fixed_k;
    cfg.fixed_k = K;
    return run_round(fed, prev, cfg);
}

struct ExperimentResult {
    Federation federation;
    RoundState final_state;
    std::vector<RoundRecord> trace;
};

/// Full loop from K=1 with a random initial cluster model.
inline ExperimentResult run_experiment(const RunConfig& cfg) {
    auto [fed, state] = init_experiment(cfg);
    if (cfg.algorithm == Algorithm::fixed_k && cfg.fixed_k > fed.num_clients())
        throw std::invalid_argument("fixed_k: K exceeds the number of clients");
    ExperimentResult res{std::move(fed), {}, {}};
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        auto [next, rec] = run_round(res.federation, state, cfg);
        state = std::move(next);
        res.trace.push_back(rec);
    }
    res.final_state = std::move(state);
    return res;
}

}  // namespace dpmmcfl
