#pragma once

// The watermark model: a small fully connected residual network mapping
// text embeddings to watermark logits, with exact analytic gradients for the
// similarity / normalization training losses and the output-shape transforms.
//
// Layer layout: input linear (d -> h), (num_layers - 2) residual blocks
// (h = relu(W h + b) + h), output linear (h -> out_dim). All math is double;
// gradient accumulation order is fixed so training is bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sirwm/core.hpp"
#include "sirwm/rng.hpp"

namespace sirwm {

struct LossConfig {
    double k1 = 20.0;
    double k2 = 1000.0;
    double lambda1 = 10.0;
    double lambda2 = 0.1;
    double target_abs = 0.1;  // R: target absolute value of raw logit entries
    double gamma = 0.5;       // green fraction
    bool include_self_pairs = false;

    void validate() const {
        if (k1 <= 0.0 || k2 <= 0.0) throw std::invalid_argument("k1 and k2 must be > 0");
        if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("lambdas must be >= 0");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    }
};

struct NetParams {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    int num_layers = 4;  // input layer + (num_layers-2) residual blocks + output layer

    // weights[l] is row-major (layer_out x layer_in); biases[l] has layer_out entries.
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int layer_in(int l) const { return l == 0 ? input_dim : hidden_dim; }
    int layer_out(int l) const { return l == num_layers - 1 ? output_dim : hidden_dim; }

    static NetParams zeros(int input_dim, int hidden_dim, int output_dim, int num_layers = 4) {
        if (input_dim < 1 || hidden_dim < 1 || output_dim < 1 || num_layers < 2) {
            throw std::invalid_argument("bad network shape");
        }
        NetParams p;
        p.input_dim = input_dim;
        p.hidden_dim = hidden_dim;
        p.output_dim = output_dim;
        p.num_layers = num_layers;
        p.weights.resize(static_cast<std::size_t>(num_layers));
        p.biases.resize(static_cast<std::size_t>(num_layers));
        for (int l = 0; l < num_layers; ++l) {
            p.weights[static_cast<std::size_t>(l)]
                .assign(static_cast<std::size_t>(p.layer_out(l)) *
                        static_cast<std::size_t>(p.layer_in(l)), 0.0);
            p.biases[static_cast<std::size_t>(l)]
                .assign(static_cast<std::size_t>(p.layer_out(l)), 0.0);
        }
        return p;
    }

    // Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), one seeded stream.
    static NetParams random_init(int input_dim, int hidden_dim, int output_dim,
                                 std::uint64_t seed, int num_layers = 4) {
        NetParams p = zeros(input_dim, hidden_dim, output_dim, num_layers);
        rng::Stream stream(rng::hash2(seed, 0x5eed1u));
        for (int l = 0; l < num_layers; ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_in(l)));
            auto& w = p.weights[static_cast<std::size_t>(l)];
            for (double& v : w) v = (2.0 * stream.next_unit() - 1.0) * bound;
            auto& b = p.biases[static_cast<std::size_t>(l)];
            for (double& v : b) v = (2.0 * stream.next_unit() - 1.0) * bound;
        }
        return p;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (int l = 0; l < num_layers; ++l) {
            n += weights[static_cast<std::size_t>(l)].size() +
                 biases[static_cast<std::size_t>(l)].size();
        }
        return n;
    }

    // Fixed parameter order: per layer, weights row-major then bias.
    template <typename Fn>
    void for_each_param(Fn&& fn) {
        for (int l = 0; l < num_layers; ++l) {
            for (double& v : weights[static_cast<std::size_t>(l)]) fn(v);
            for (double& v : biases[static_cast<std::size_t>(l)]) fn(v);
        }
    }
    template <typename Fn>
    void for_each_param(Fn&& fn) const {
        for (int l = 0; l < num_layers; ++l) {
            for (const double& v : weights[static_cast<std::size_t>(l)]) fn(v);
            for (const double& v : biases[static_cast<std::size_t>(l)]) fn(v);
        }
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        for_each_param([&](const double& v) { out.push_back(v); });
        return out;
    }

    void unflatten(std::span<const double> flat) {
        if (flat.size() != param_count()) {
            throw std::invalid_argument("unflatten: size mismatch");
        }
        std::size_t i = 0;
        for_each_param([&](double& v) { v = flat[i++]; });
    }
};

namespace detail {

inline void affine(const std::vector<double>& w, const std::vector<double>& b,
                   std::span<const double> x, std::vector<double>& out) {
    const std::size_t rows = b.size();
    const std::size_t cols = x.size();
    out.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

}  // namespace detail

// Per-example activation record kept for backprop.
struct ForwardTrace {
    std::vector<double> input;
    std::vector<double> h0;                     // after input linear
    std::vector<std::vector<double>> block_pre; // z_k = W_k h_{k-1} + b_k
    std::vector<std::vector<double>> block_out; // h_k = relu(z_k) + h_{k-1}
    std::vector<double> output;
};

inline ForwardTrace forward_traced(const NetParams& p, std::span<const double> e) {
    if (static_cast<int>(e.size()) != p.input_dim) {
        throw std::invalid_argument("forward: embedding dimension mismatch");
    }
    ForwardTrace t;
    t.input.assign(e.begin(), e.end());
    detail::affine(p.weights[0], p.biases[0], e, t.h0);
    const int blocks = p.num_layers - 2;
    t.block_pre.resize(static_cast<std::size_t>(blocks));
    t.block_out.resize(static_cast<std::size_t>(blocks));
    const std::vector<double>* h = &t.h0;
    for (int k = 0; k < blocks; ++k) {
        auto& z = t.block_pre[static_cast<std::size_t>(k)];
        detail::affine(p.weights[static_cast<std::size_t>(k + 1)],
                       p.biases[static_cast<std::size_t>(k + 1)], *h, z);
        auto& out = t.block_out[static_cast<std::size_t>(k)];
        out.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            out[i] = (z[i] > 0.0 ? z[i] : 0.0) + (*h)[i];
        }
        h = &out;
    }
    detail::affine(p.weights[static_cast<std::size_t>(p.num_layers - 1)],
                   p.biases[static_cast<std::size_t>(p.num_layers - 1)], *h, t.output);
    for (double v : t.output) {
        if (!std::isfinite(v)) throw std::runtime_error("forward produced non-finite output");
    }
    return t;
}

inline std::vector<double> forward(const NetParams& p, std::span<const double> e) {
    return forward_traced(p, e).output;
}

inline std::vector<double> forward(const NetParams& p, const Embedding& e) {
    return forward_traced(p, std::span<const double>(e.values)).output;
}

// Accumulates dL/dparams for one example given dL/d(output). Order of
// accumulation is fixed by the caller looping examples in batch order.
inline void backward_accumulate(const NetParams& p, const ForwardTrace& t,
                                std::span<const double> dLdy, NetParams& grad) {
    const int blocks = p.num_layers - 2;
    const std::size_t out_layer = static_cast<std::size_t>(p.num_layers - 1);
    const std::vector<double>& h_last =
        blocks > 0 ? t.block_out[static_cast<std::size_t>(blocks - 1)] : t.h0;

    // output layer
    {
        auto& gw = grad.weights[out_layer];
        auto& gb = grad.biases[out_layer];
        const std::size_t cols = h_last.size();
        for (std::size_t r = 0; r < dLdy.size(); ++r) {
            gb[r] += dLdy[r];
            double* gwr = gw.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gwr[c] += dLdy[r] * h_last[c];
        }
    }
    // g = dL/dh_last
    std::vector<double> g(p.hidden_dim, 0.0);
    {
        const auto& w = p.weights[out_layer];
        const std::size_t cols = static_cast<std::size_t>(p.hidden_dim);
        for (std::size_t r = 0; r < dLdy.size(); ++r) {
            const double* wr = w.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) g[c] += wr[c] * dLdy[r];
        }
    }
    // residual blocks, last to first
    std::vector<double> gz(static_cast<std::size_t>(p.hidden_dim));
    std::vector<double> gprev(static_cast<std::size_t>(p.hidden_dim));
    for (int k = blocks - 1; k >= 0; --k) {
        const auto& z = t.block_pre[static_cast<std::size_t>(k)];
        const std::vector<double>& h_in =
            k == 0 ? t.h0 : t.block_out[static_cast<std::size_t>(k - 1)];
        for (std::size_t i = 0; i < gz.size(); ++i) {
            gz[i] = z[i] > 0.0 ? g[i] : 0.0;
        }
        auto& gw = grad.weights[static_cast<std::size_t>(k + 1)];
        auto& gb = grad.biases[static_cast<std::size_t>(k + 1)];
        const std::size_t cols = h_in.size();
        for (std::size_t r = 0; r < gz.size(); ++r) {
            gb[r] += gz[r];
            double* gwr = gw.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gwr[c] += gz[r] * h_in[c];
        }
        const auto& w = p.weights[static_cast<std::size_t>(k + 1)];
        std::fill(gprev.begin(), gprev.end(), 0.0);
        for (std::size_t r = 0; r < gz.size(); ++r) {
            const double* wr = w.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gprev[c] += wr[c] * gz[r];
        }
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = gprev[i] + g[i];
    }
    // input layer
    {
        auto& gw = grad.weights[0];
        auto& gb = grad.biases[0];
        const std::size_t cols = t.input.size();
        for (std::size_t r = 0; r < g.size(); ++r) {
            gb[r] += g[r];
            double* gwr = gw.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gwr[c] += g[r] * t.input[c];
        }
    }
}

// ---------------------------------------------------------------------------
// Output transforms
// ---------------------------------------------------------------------------

inline WatermarkLogits tanh_scale(std::span<const double> raw, double k2) {
    WatermarkLogits wl;
    wl.transform = TransformKind::tanh_k2;
    wl.values.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) wl.values[i] = std::tanh(k2 * raw[i]);
    return wl;
}

// Rank-based linear scaling onto [-1, 1]; ties broken by index order.
inline std::vector<double> linear_rank_scale(std::span<const double> raw) {
    const std::size_t n = raw.size();
    if (n < 2) throw std::invalid_argument("linear_rank_scale: need length >= 2");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (raw[a] != raw[b]) return raw[a] < raw[b];
        return a < b;
    });
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        out[idx[r]] = -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(n - 1);
    }
    return out;
}

inline WatermarkLogits shape_transform(std::span<const double> raw, TransformKind kind,
                                       double k2 = 1000.0) {
    WatermarkLogits wl;
    wl.transform = kind;
    switch (kind) {
        case TransformKind::tanh_k2:
            return tanh_scale(raw, k2);
        case TransformKind::linear:
            wl.values = linear_rank_scale(raw);
            return wl;
        case TransformKind::tanh10_linear: {
            wl.values = linear_rank_scale(raw);
            for (double& v : wl.values) v = std::tanh(10.0 * v);
            return wl;
        }
        case TransformKind::cubic: {
            wl.values = linear_rank_scale(raw);
            for (double& v : wl.values) v = v * v * v;
            return wl;
        }
        default:
            throw std::invalid_argument("shape_transform: unknown kind");
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline double target_similarity(double sim, double mean_sim, double k1) {
    return std::tanh(k1 * (sim - mean_sim));
}

// Positive entries scaled by (1-gamma)/gamma; identity at gamma = 0.5.
inline std::vector<double> gamma_scale(std::span<const double> v, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("gamma_scale: gamma must be in (0,1)");
    }
    const double f = (1.0 - gamma) / gamma;
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) {
        if (x > 0.0) x *= f;
    }
    return out;
}

namespace detail {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct BatchOutputs {
    std::vector<ForwardTrace> traces;
    std::vector<std::vector<double>> scaled;  // S(y) per example
    std::vector<double> scaled_norm;          // ||S(y)||
};

inline BatchOutputs batch_forward(const NetParams& p, const std::vector<Embedding>& batch,
                                  const LossConfig& cfg) {
    BatchOutputs bo;
    bo.traces.reserve(batch.size());
    bo.scaled.reserve(batch.size());
    bo.scaled_norm.reserve(batch.size());
    const double f = (1.0 - cfg.gamma) / cfg.gamma;
    for (const Embedding& e : batch) {
        if (e.norm <= 0.0) {
            throw std::invalid_argument("loss: zero-norm embedding in batch");
        }
        bo.traces.push_back(forward_traced(p, std::span<const double>(e.values)));
        const auto& y = bo.traces.back().output;
        std::vector<double> s(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) s[i] = y[i] > 0.0 ? f * y[i] : y[i];
        double n2 = 0.0;
        for (double v : s) n2 += v * v;
        bo.scaled.push_back(std::move(s));
        bo.scaled_norm.push_back(std::sqrt(n2));
    }
    return bo;
}

// d/dy chain through S: slope f on positive raw entries, 1 elsewhere.
inline void chain_through_scale(const std::vector<double>& y, std::vector<double>& dLds,
                                double gamma) {
    const double f = (1.0 - gamma) / gamma;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0) dLds[i] *= f;
    }
}

}  // namespace detail

struct LossValueGrad {
    double loss = 0.0;
    NetParams grad;
};

// Sum over ordered pairs of |cos(S(T(e_i)), S(T(e_j))) - tanh(k1 (sim_ij - mean_sim))|.
// Self-pairs are excluded unless cfg.include_self_pairs is set.
inline LossValueGrad similarity_loss(const NetParams& p, const std::vector<Embedding>& batch,
                                     double mean_sim, const LossConfig& cfg) {
    cfg.validate();
    if (batch.size() < 2) throw std::invalid_argument("similarity_loss: batch size must be >= 2");
    auto bo = detail::batch_forward(p, batch, cfg);
    const std::size_t n = batch.size();

    LossValueGrad out;
    out.grad = NetParams::zeros(p.input_dim, p.hidden_dim, p.output_dim, p.num_layers);
    std::vector<std::vector<double>> dLds(n);
    for (std::size_t i = 0; i < n; ++i) dLds[i].assign(bo.scaled[i].size(), 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j && !cfg.include_self_pairs) continue;
            double c;
            if (i == j) {
                c = 1.0;
            } else {
                if (bo.scaled_norm[i] <= 0.0 || bo.scaled_norm[j] <= 0.0) {
                    throw std::runtime_error("similarity_loss: zero-norm watermark logits");
                }
                double dot = 0.0;
                const auto& si = bo.scaled[i];
                const auto& sj = bo.scaled[j];
                for (std::size_t d = 0; d < si.size(); ++d) dot += si[d] * sj[d];
                c = dot / (bo.scaled_norm[i] * bo.scaled_norm[j]);
            }
            const double target = target_similarity(cosine(batch[i], batch[j]), mean_sim, cfg.k1);
            const double diff = c - target;
            out.loss += std::abs(diff);
            if (i == j) continue;  // cos(u, u) has zero gradient
            const double g = detail::sgn(diff);
            if (g == 0.0) continue;
            const auto& si = bo.scaled[i];
            const auto& sj = bo.scaled[j];
            const double ninj = bo.scaled_norm[i] * bo.scaled_norm[j];
            const double ni2 = bo.scaled_norm[i] * bo.scaled_norm[i];
            const double nj2 = bo.scaled_norm[j] * bo.scaled_norm[j];
            for (std::size_t d = 0; d < si.size(); ++d) {
                dLds[i][d] += g * (sj[d] / ninj - c * si[d] / ni2);
                dLds[j][d] += g * (si[d] / ninj - c * sj[d] / nj2);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        detail::chain_through_scale(bo.traces[i].output, dLds[i], cfg.gamma);
        backward_accumulate(p, bo.traces[i], dLds[i], out.grad);
    }
    return out;
}

// Row-sum balance + per-dimension (column) balance on S(T(e)), plus
// lambda1 * | R - |T(e)^(i)| | on the raw outputs.
inline LossValueGrad normalization_loss(const NetParams& p, const std::vector<Embedding>& batch,
                                        const LossConfig& cfg) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("normalization_loss: empty batch");
    auto bo = detail::batch_forward(p, batch, cfg);
    const std::size_t n = batch.size();
    const std::size_t dims = bo.scaled[0].size();

    LossValueGrad out;
    out.grad = NetParams::zeros(p.input_dim, p.hidden_dim, p.output_dim, p.num_layers);
    std::vector<std::vector<double>> dLds(n);
    std::vector<std::vector<double>> dLdy_raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        dLds[i].assign(dims, 0.0);
        dLdy_raw[i].assign(dims, 0.0);
    }

    // per-vector sums
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (double v : bo.scaled[i]) row += v;
        out.loss += std::abs(row);
        const double g = detail::sgn(row);
        if (g != 0.0) {
            for (std::size_t d = 0; d < dims; ++d) dLds[i][d] += g;
        }
    }
    // per-dimension sums across the batch
    for (std::size_t d = 0; d < dims; ++d) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += bo.scaled[i][d];
        out.loss += std::abs(col);
        const double g = detail::sgn(col);
        if (g != 0.0) {
            for (std::size_t i = 0; i < n; ++i) dLds[i][d] += g;
        }
    }
    // magnitude target on raw outputs
    for (std::size_t i = 0; i < n; ++i) {
        const auto& y = bo.traces[i].output;
        for (std::size_t d = 0; d < dims; ++d) {
            const double a = std::abs(y[d]);
            out.loss += cfg.lambda1 * std::abs(cfg.target_abs - a);
            dLdy_raw[i][d] += cfg.lambda1 * detail::sgn(a - cfg.target_abs) * detail::sgn(y[d]);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        detail::chain_through_scale(bo.traces[i].output, dLds[i], cfg.gamma);
        for (std::size_t d = 0; d < dims; ++d) dLds[i][d] += dLdy_raw[i][d];
        backward_accumulate(p, bo.traces[i], dLds[i], out.grad);
    }
    return out;
}

struct TotalLoss {
    double loss = 0.0;
    double similarity = 0.0;
    double normalization = 0.0;
    NetParams grad;
};

inline TotalLoss total_loss(const NetParams& p, const std::vector<Embedding>& batch,
                            double mean_sim, const LossConfig& cfg) {
    auto ls = similarity_loss(p, batch, mean_sim, cfg);
    auto ln = normalization_loss(p, batch, cfg);
    TotalLoss out;
    out.similarity = ls.loss;
    out.normalization = ln.loss;
    out.loss = ls.loss + cfg.lambda2 * ln.loss;
    out.grad = std::move(ls.grad);
    std::size_t idx = 0;
    auto flat_ln = ln.grad.flatten();
    out.grad.for_each_param([&](double& v) { v += cfg.lambda2 * flat_ln[idx++]; });
    return out;
}

// Mean pairwise cosine over a set of embeddings, self-pairs excluded by
// default. Uses the norm-of-sum identity, so it is exact and O(n d).
inline double mean_pairwise_similarity(const std::vector<Embedding>& batch,
                                       bool include_self_pairs = false) {
    const std::size_t n = batch.size();
    if (n < 2) throw std::invalid_argument("mean_pairwise_similarity: need >= 2 embeddings");
    std::vector<double> acc(batch[0].values.size(), 0.0);
    for (const Embedding& e : batch) {
        if (e.norm <= 0.0) throw std::invalid_argument("zero-norm embedding");
        if (e.values.size() != acc.size()) throw std::invalid_argument("dimension mismatch");
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += e.values[d] / e.norm;
    }
    double total = 0.0;
    for (double v : acc) total += v * v;  // == sum over all ordered pairs incl. self
    const double nn = static_cast<double>(n);
    if (include_self_pairs) return total / (nn * nn);
    return (total - nn) / (nn * (nn - 1.0));
}

}  // namespace sirwm
