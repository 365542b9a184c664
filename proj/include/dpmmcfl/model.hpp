#pragma once

// Small differentiable classifiers (linear softmax or tanh MLP), cross-entropy loss,
// momentum-SGD local updates and last-layer representations.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace dpmmcfl {

struct ModelSpec {
    std::size_t input_dim = 1;
    std::size_t num_classes = 2;
    std::vector<std::size_t> hidden_dims;  // empty: linear softmax

    void validate() const {
        if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
        if (num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
        for (auto h : hidden_dims)
            if (h == 0) throw std::invalid_argument("ModelSpec: hidden layer of width 0");
    }

    /// Layer widths including input and output.
    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_dim};
        w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
        w.push_back(num_classes);
        return w;
    }

    std::size_t num_layers() const { return hidden_dims.size() + 1; }

    /// Offset of layer l's weight block; its bias block follows the weights.
    std::size_t layer_offset(std::size_t l) const {
        const auto w = widths();
        std::size_t off = 0;
        for (std::size_t k = 0; k < l; ++k) off += w[k] * w[k + 1] + w[k + 1];
        return off;
    }

    std::size_t param_count() const { return layer_offset(num_layers()); }

    std::size_t representation_size() const {
        const auto w = widths();
        return w[w.size() - 2] * num_classes + num_classes;
    }
};

struct LabeledDataset {
    Matrix features;          // n x d
    std::vector<int> labels;  // n

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    void push_back(std::span<const double> x, int y) {
        if (features.cols == 0 && features.rows == 0) features.cols = x.size();
        if (x.size() != features.cols) throw std::invalid_argument("LabeledDataset: feature width mismatch");
        features.data.insert(features.data.end(), x.begin(), x.end());
        ++features.rows;
        labels.push_back(y);
    }

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct SGDConfig {
    double learning_rate = 0.005;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t local_steps = 10;

    void validate() const {
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("SGDConfig: learning_rate must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("SGDConfig: momentum must lie in [0,1)");
        if (batch_size < 1) throw std::invalid_argument("SGDConfig: batch_size must be >= 1");
        if (local_steps < 1) throw std::invalid_argument("SGDConfig: local_steps must be >= 1");
    }
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases of every layer.
inline ParamVector init_params(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    const auto w = spec.widths();
    ParamVector p;
    p.reserve(spec.param_count());
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t k = 0; k < w[l] * w[l + 1] + w[l + 1]; ++k) p.push_back(u(rng));
    }
    return p;
}

namespace detail {

inline void check_shapes(const ParamVector& params, const LabeledDataset& data, const ModelSpec& spec) {
    if (data.empty()) throw std::invalid_argument("empty dataset");
    if (params.size() != spec.param_count()) throw std::invalid_argument("parameter vector does not match model spec");
    if (data.features.cols != spec.input_dim) throw std::invalid_argument("feature width does not match model spec");
    for (int y : data.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes)
            throw std::invalid_argument("label out of range");
}

/// Forward pass for one sample; fills per-layer activations (acts[0] = input) and returns logits.
inline void forward(const ParamVector& params, const ModelSpec& spec, std::span<const double> x,
                    std::vector<std::vector<double>>& acts) {
    const auto w = spec.widths();
    const std::size_t L = spec.num_layers();
    acts.resize(L + 1);
    acts[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = w[l], out = w[l + 1];
        const double* W = params.data() + off;
        const double* b = W + in * out;
        auto& a = acts[l + 1];
        a.assign(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double z = b[o];
            for (std::size_t i = 0; i < in; ++i) z += W[o * in + i] * acts[l][i];
            a[o] = (l + 1 < L) ? std::tanh(z) : z;
        }
        off += in * out + out;
    }
}

/// Softmax in place; returns log-sum-exp of the logits.
inline double softmax_inplace(std::vector<double>& z) {
    const double lse = log_sum_exp(z);
    for (auto& v : z) v = std::exp(v - lse);
    return lse;
}

}  // namespace detail

/// Class scores for one sample.
inline std::vector<double> predict_proba(const ParamVector& params, const ModelSpec& spec, std::span<const double> x) {
    std::vector<std::vector<double>> acts;
    detail::forward(params, spec, x, acts);
    auto p = acts.back();
    detail::softmax_inplace(p);
    return p;
}

inline std::vector<int> predict(const ParamVector& params, const LabeledDataset& data, const ModelSpec& spec) {
    std::vector<int> out(data.size());
    std::vector<std::vector<double>> acts;
    for (std::size_t n = 0; n < data.size(); ++n) {
        detail::forward(params, spec, data.features.row(n), acts);
        const auto& z = acts.back();
        out[n] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }
    return out;
}

/// Mean cross-entropy over all samples.
inline double loss(const ParamVector& params, const LabeledDataset& data, const ModelSpec& spec) {
    detail::check_shapes(params, data, spec);
    std::vector<std::vector<double>> acts;
    double total = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
        detail::forward(params, spec, data.features.row(n), acts);
        const auto& z = acts.back();
        total += log_sum_exp(z) - z[static_cast<std::size_t>(data.labels[n])];
    }
    return total / static_cast<double>(data.size());
}

namespace detail {

/// Accumulates the summed (not averaged) cross-entropy gradient over `rows` into `grad`.
inline void accumulate_gradient(const ParamVector& params, const LabeledDataset& data, const ModelSpec& spec,
                                std::span<const std::size_t> rows, ParamVector& grad) {
    const auto w = spec.widths();
    const std::size_t L = spec.num_layers();
    std::vector<std::size_t> offs(L);
    for (std::size_t l = 0; l < L; ++l) offs[l] = spec.layer_offset(l);

    std::vector<std::vector<double>> acts;
    std::vector<double> delta, prev;
    for (std::size_t n : rows) {
        forward(params, spec, data.features.row(n), acts);
        delta = acts.back();
        softmax_inplace(delta);
        delta[static_cast<std::size_t>(data.labels[n])] -= 1.0;
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = w[l], out = w[l + 1];
            const double* W = params.data() + offs[l];
            double* gW = grad.data() + offs[l];
            double* gb = gW + in * out;
            for (std::size_t o = 0; o < out; ++o) {
                gb[o] += delta[o];
                for (std::size_t i = 0; i < in; ++i) gW[o * in + i] += delta[o] * acts[l][i];
            }
            if (l == 0) break;
            prev.assign(in, 0.0);
            for (std::size_t o = 0; o < out; ++o)
                for (std::size_t i = 0; i < in; ++i) prev[i] += W[o * in + i] * delta[o];
            for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - acts[l][i] * acts[l][i];
            delta.swap(prev);
        }
    }
}

}  // namespace detail

/// Exact gradient of `loss`.
inline ParamVector loss_gradient(const ParamVector& params, const LabeledDataset& data, const ModelSpec& spec) {
    detail::check_shapes(params, data, spec);
    ParamVector grad(params.size(), 0.0);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    detail::accumulate_gradient(params, data, spec, rows, grad);
    for (auto& g : grad) g /= static_cast<double>(data.size());
    return grad;
}

/// Q momentum-SGD steps from `params0`. One permutation of the local data is drawn per call and
/// minibatches walk it cyclically. Momentum starts at zero on every call.
inline ParamVector local_update(const ParamVector& params0, const LabeledDataset& data, const SGDConfig& cfg,
                                const ModelSpec& spec, Rng& rng) {
    cfg.validate();
    detail::check_shapes(params0, data, spec);
    const std::size_t n = data.size();
    const std::size_t batch = std::min(cfg.batch_size, n);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);

    ParamVector w = params0;
    ParamVector velocity(w.size(), 0.0);
    ParamVector grad(w.size());
    std::vector<std::size_t> rows(batch);
    std::size_t cursor = 0;
    for (std::size_t step = 0; step < cfg.local_steps; ++step) {
        for (std::size_t b = 0; b < batch; ++b) {
            rows[b] = perm[cursor];
            cursor = (cursor + 1) % n;
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        detail::accumulate_gradient(w, data, spec, rows, grad);
        for (std::size_t k = 0; k < w.size(); ++k) {
            velocity[k] = cfg.momentum * velocity[k] + grad[k] / static_cast<double>(batch);
            w[k] -= cfg.learning_rate * velocity[k];
        }
    }
    return w;
}

/// Weights and biases of the final layer, copied out as one contiguous slice.
inline ParamVector representation(const ParamVector& params, const ModelSpec& spec) {
    if (params.size() != spec.param_count()) throw std::invalid_argument("parameter vector does not match model spec");
    const std::size_t r = spec.representation_size();
    return ParamVector(params.end() - static_cast<std::ptrdiff_t>(r), params.end());
}

}  // namespace dpmmcfl
