#pragma once

// Differentiable building blocks. Everything is templated on the scalar type:
// double in test mode, float in run mode. Backward passes are hand-derived and
// checked against central finite differences in tests/test_numerics.cpp.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "ted/error.hpp"

namespace ted {

using Index = Eigen::Index;

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// One byte per token, 1 = valid.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kLayerNormEps = 1e-6;

enum class Precision { test, run };

template <class Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* what) {
    if (!x.derived().allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

inline Index count_valid(const Mask& mask) {
    Index n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

inline std::vector<Index> valid_rows(const Mask& mask) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(static_cast<Index>(i));
    return rows;
}

// ---------------------------------------------------------------------------
// Parameter views

template <class S>
using TensorList = std::vector<std::span<S>>;

template <class S, class Derived>
std::span<S> as_span(Eigen::PlainObjectBase<Derived>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

template <class S>
Index total_size(const TensorList<S>& ts) {
    Index n = 0;
    for (const auto& t : ts) n += static_cast<Index>(t.size());
    return n;
}

template <class S>
VecX<S> flatten(const TensorList<S>& ts) {
    VecX<S> out(total_size(ts));
    Index at = 0;
    for (const auto& t : ts)
        for (S v : t) out(at++) = v;
    return out;
}

template <class S>
void unflatten(const TensorList<S>& ts, const VecX<S>& flat) {
    if (flat.size() != total_size(ts)) throw ArgumentError("unflatten: size mismatch");
    Index at = 0;
    for (const auto& t : ts)
        for (S& v : t) v = flat(at++);
}

template <class S, class Derived>
void fill_normal(Eigen::PlainObjectBase<Derived>& m, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
}

// ---------------------------------------------------------------------------
// LayerNorm (parameter-free, population variance)

template <class S>
struct RowNorm {
    MatX<S> y;
    VecX<S> inv_std;
};

template <class S>
RowNorm<S> layer_norm_rows(const MatX<S>& x, S eps = S(kLayerNormEps)) {
    if (x.cols() < 1) throw ArgumentError("layer_norm: empty feature dimension");
    if (!(eps > S(0))) throw ArgumentError("layer_norm: eps must be positive");
    require_finite(x, "layer_norm input");
    RowNorm<S> out{MatX<S>(x.rows(), x.cols()), VecX<S>(x.rows())};
    for (Index i = 0; i < x.rows(); ++i) {
        const S mean = x.row(i).mean();
        const S var = (x.row(i).array() - mean).square().mean();
        const S r = S(1) / std::sqrt(var + eps);
        out.y.row(i) = (x.row(i).array() - mean) * r;
        out.inv_std(i) = r;
    }
    return out;
}

/// dx = r * (dy - mean(dy) - y * mean(dy .* y)), row by row.
template <class S>
MatX<S> layer_norm_rows_backward(const RowNorm<S>& fwd, const MatX<S>& dy) {
    const Index d = dy.cols();
    MatX<S> dx(dy.rows(), d);
    for (Index i = 0; i < dy.rows(); ++i) {
        const S mean_dy = dy.row(i).mean();
        const S mean_dyy = dy.row(i).dot(fwd.y.row(i)) / S(d);
        dx.row(i) = fwd.inv_std(i) * (dy.row(i).array() - mean_dy - fwd.y.row(i).array() * mean_dyy);
    }
    return dx;
}

template <class S>
VecX<S> layer_norm(const VecX<S>& x, S eps = S(kLayerNormEps)) {
    MatX<S> row = x.transpose();
    return layer_norm_rows<S>(row, eps).y.row(0).transpose();
}

// ---------------------------------------------------------------------------
// Softmax

template <class S>
VecX<S> softmax(const VecX<S>& x) {
    if (x.size() == 0) throw ArgumentError("softmax: empty input");
    require_finite(x, "softmax input");
    VecX<S> e = (x.array() - x.maxCoeff()).exp();
    return e / e.sum();
}

template <class S>
VecX<S> softmax_backward(const VecX<S>& y, const VecX<S>& dy) {
    return (y.array() * (dy.array() - y.dot(dy))).matrix();
}

template <class S>
void softmax_rows_inplace(MatX<S>& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        m.row(i) = (m.row(i).array() - m.row(i).maxCoeff()).exp();
        m.row(i) /= m.row(i).sum();
    }
}

// ---------------------------------------------------------------------------
// GELU

enum class GeluKind { exact, tanh };

template <class S>
S gelu(S x, GeluKind kind = GeluKind::exact) {
    if (kind == GeluKind::exact) return S(0.5) * x * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
    const S c = std::sqrt(S(2) / std::numbers::pi_v<S>);
    return S(0.5) * x * (S(1) + std::tanh(c * (x + S(0.044715) * x * x * x)));
}

template <class S>
S gelu_grad(S x, GeluKind kind = GeluKind::exact) {
    if (kind == GeluKind::exact) {
        const S cdf = S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
        const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * std::numbers::pi_v<S>);
        return cdf + x * pdf;
    }
    const S c = std::sqrt(S(2) / std::numbers::pi_v<S>);
    const S th = std::tanh(c * (x + S(0.044715) * x * x * x));
    return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * c * (S(1) + S(3 * 0.044715) * x * x);
}

// ---------------------------------------------------------------------------
// Linear layer: y = x W^T + b with W stored [out x in].

template <class S>
struct Linear {
    MatX<S> weight;
    VecX<S> bias;

    static Linear init(Index in, Index out, double stddev, std::mt19937_64& rng) {
        Linear l{MatX<S>(out, in), VecX<S>::Zero(out)};
        fill_normal<S>(l.weight, stddev, rng);
        return l;
    }
    static Linear zeros(Index in, Index out) { return {MatX<S>::Zero(out, in), VecX<S>::Zero(out)}; }

    Index in_dim() const { return weight.cols(); }
    Index out_dim() const { return weight.rows(); }

    MatX<S> forward(const MatX<S>& x) const {
        MatX<S> y = x * weight.transpose();
        y.rowwise() += bias.transpose();
        return y;
    }
    VecX<S> forward(const VecX<S>& x) const { return weight * x + bias; }

    /// Accumulates parameter gradients into `grad`; returns dL/dx.
    MatX<S> backward(const MatX<S>& x, const MatX<S>& dy, Linear& grad) const {
        grad.weight.noalias() += dy.transpose() * x;
        grad.bias += dy.colwise().sum().transpose();
        return dy * weight;
    }

    TensorList<S> tensors() { return {as_span<S>(weight), as_span<S>(bias)}; }
};

// ---------------------------------------------------------------------------
// Pre-LN transformer block: h = x + MHA(LN(x)); y = h + MLP(LN(h)).
// LayerNorms are parameter-free; the MLP is fc1 -> GELU -> fc2.

template <class S>
struct AttentionBlockParams {
    Index heads = 1;
    Linear<S> q, k, v, o, fc1, fc2;

    Index dim() const { return q.in_dim(); }
    Index hidden() const { return fc1.out_dim(); }

    static AttentionBlockParams init(Index dim, Index heads, Index mlp_ratio, double stddev,
                                     std::mt19937_64& rng) {
        if (heads < 1 || dim % heads != 0)
            throw ConfigError("attention block: dim " + std::to_string(dim) +
                              " not divisible by heads " + std::to_string(heads));
        AttentionBlockParams p;
        p.heads = heads;
        p.q = Linear<S>::init(dim, dim, stddev, rng);
        p.k = Linear<S>::init(dim, dim, stddev, rng);
        p.v = Linear<S>::init(dim, dim, stddev, rng);
        p.o = Linear<S>::init(dim, dim, stddev, rng);
        p.fc1 = Linear<S>::init(dim, mlp_ratio * dim, stddev, rng);
        p.fc2 = Linear<S>::init(mlp_ratio * dim, dim, stddev, rng);
        return p;
    }

    AttentionBlockParams zeros_like() const {
        AttentionBlockParams z;
        z.heads = heads;
        z.q = Linear<S>::zeros(dim(), dim());
        z.k = Linear<S>::zeros(dim(), dim());
        z.v = Linear<S>::zeros(dim(), dim());
        z.o = Linear<S>::zeros(dim(), dim());
        z.fc1 = Linear<S>::zeros(dim(), hidden());
        z.fc2 = Linear<S>::zeros(hidden(), dim());
        return z;
    }

    TensorList<S> tensors() {
        TensorList<S> out;
        for (Linear<S>* l : {&q, &k, &v, &o, &fc1, &fc2}) {
            auto t = l->tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

    template <class T>
    AttentionBlockParams<T> cast() const {
        AttentionBlockParams<T> out;
        out.heads = heads;
        auto c = [](const Linear<S>& l) { return Linear<T>{l.weight.template cast<T>(), l.bias.template cast<T>()}; };
        out.q = c(q), out.k = c(k), out.v = c(v), out.o = c(o), out.fc1 = c(fc1), out.fc2 = c(fc2);
        return out;
    }
};

struct BlockOptions {
    GeluKind gelu = GeluKind::exact;
    bool attention = true; // false: skip the attention sub-layer (ablation)
};

/// Saved activations of one block, over the compacted (valid-only) rows.
template <class S>
struct AttentionCache {
    std::vector<Index> rows;
    MatX<S> x;
    RowNorm<S> ln1, ln2;
    MatX<S> q, k, v, ctx, h1, pre_act, act;
    std::vector<MatX<S>> probs; // one [T x T] matrix per head
};

namespace detail {

template <class S>
void check_block_input(const MatX<S>& x, const Mask& mask, const AttentionBlockParams<S>& p) {
    if (x.rows() < 1) throw ArgumentError("attention_block: empty sequence");
    if (static_cast<Index>(mask.size()) != x.rows())
        throw ArgumentError("attention_block: mask length does not match sequence length");
    if (x.cols() != p.dim()) throw ArgumentError("attention_block: feature dim does not match params");
    if (p.heads < 1 || p.dim() % p.heads != 0) throw ConfigError("attention_block: dim not divisible by heads");
    if (count_valid(mask) == 0) throw ArgumentError("attention_block: all positions masked");
}

} // namespace detail

/// Masked positions are removed before any arithmetic, so they take no part in
/// attention and appending padding leaves valid rows bit-identical. Masked rows of
/// the output are copied from the input.
template <class S>
MatX<S> attention_block(const MatX<S>& x, const Mask& mask, const AttentionBlockParams<S>& p,
                        AttentionCache<S>* cache = nullptr, BlockOptions opt = {}) {
    detail::check_block_input(x, mask, p);
    AttentionCache<S> local;
    AttentionCache<S>& c = cache ? *cache : local;

    c.rows = valid_rows(mask);
    c.x = x(c.rows, Eigen::all);
    const Index t = c.x.rows();
    const Index d = p.dim();
    const Index dh = d / p.heads;
    const S scale = S(1) / std::sqrt(S(dh));

    c.probs.clear();
    if (opt.attention) {
        c.ln1 = layer_norm_rows<S>(c.x);
        c.q = p.q.forward(c.ln1.y);
        c.k = p.k.forward(c.ln1.y);
        c.v = p.v.forward(c.ln1.y);
        c.ctx.resize(t, d);
        for (Index h = 0; h < p.heads; ++h) {
            MatX<S> scores = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
            softmax_rows_inplace(scores);
            c.ctx.middleCols(h * dh, dh) = scores * c.v.middleCols(h * dh, dh);
            c.probs.push_back(std::move(scores));
        }
        c.h1 = c.x + p.o.forward(c.ctx);
    } else {
        c.h1 = c.x;
    }
    c.ln2 = layer_norm_rows<S>(c.h1);
    c.pre_act = p.fc1.forward(c.ln2.y);
    c.act = c.pre_act.unaryExpr([&](S u) { return gelu(u, opt.gelu); });
    MatX<S> yc = c.h1 + p.fc2.forward(c.act);
    require_finite(yc, "attention_block output");

    MatX<S> y = x;
    y(c.rows, Eigen::all) = yc;
    return y;
}

/// Accumulates parameter gradients into `grad` and returns dL/dx (identity on masked rows).
template <class S>
MatX<S> attention_block_backward(const AttentionCache<S>& c, const AttentionBlockParams<S>& p,
                                 const MatX<S>& dy, AttentionBlockParams<S>& grad, BlockOptions opt = {}) {
    const Index d = p.dim();
    const Index dh = d / p.heads;
    const S scale = S(1) / std::sqrt(S(dh));

    MatX<S> dyc = dy(c.rows, Eigen::all);

    // MLP branch
    MatX<S> dact = p.fc2.backward(c.act, dyc, grad.fc2);
    MatX<S> dpre = dact.array() * c.pre_act.unaryExpr([&](S u) { return gelu_grad(u, opt.gelu); }).array();
    MatX<S> dln2 = p.fc1.backward(c.ln2.y, dpre, grad.fc1);
    MatX<S> dh1 = dyc + layer_norm_rows_backward(c.ln2, dln2);

    MatX<S> dxc = dh1;
    if (opt.attention) {
        MatX<S> dctx = p.o.backward(c.ctx, dh1, grad.o);
        MatX<S> dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
        for (Index h = 0; h < p.heads; ++h) {
            const auto& probs = c.probs[static_cast<std::size_t>(h)];
            const auto dctx_h = dctx.middleCols(h * dh, dh);
            MatX<S> dprobs = dctx_h * c.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = probs.transpose() * dctx_h;
            VecX<S> inner = (dprobs.array() * probs.array()).rowwise().sum();
            MatX<S> dscores = probs.array() * (dprobs.colwise() - inner).array();
            dq.middleCols(h * dh, dh) = dscores * c.k.middleCols(h * dh, dh) * scale;
            dk.middleCols(h * dh, dh) = dscores.transpose() * c.q.middleCols(h * dh, dh) * scale;
        }
        MatX<S> dln1 = p.q.backward(c.ln1.y, dq, grad.q);
        dln1 += p.k.backward(c.ln1.y, dk, grad.k);
        dln1 += p.v.backward(c.ln1.y, dv, grad.v);
        dxc += layer_norm_rows_backward(c.ln1, dln1);
    }

    MatX<S> dx = dy;
    dx(c.rows, Eigen::all) = dxc;
    return dx;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class S>
struct AdamState {
    VecX<S> m, v;
    long step = 0;
};

/// One bias-corrected Adam update of `params` in place.
template <class S>
void adam_step(std::span<S> params, std::span<const S> grads, AdamState<S>& state, const AdamConfig& cfg) {
    const auto n = static_cast<Index>(params.size());
    if (static_cast<Index>(grads.size()) != n)
        throw ArgumentError("adam_step: params and grads differ in size");
    if (state.step == 0 && state.m.size() == 0) {
        state.m = VecX<S>::Zero(n);
        state.v = VecX<S>::Zero(n);
    }
    if (state.m.size() != n || state.v.size() != n)
        throw ArgumentError("adam_step: optimizer state does not match params");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (Index i = 0; i < n; ++i) {
        const double g = static_cast<double>(grads[static_cast<std::size_t>(i)]);
        const double m = cfg.beta1 * static_cast<double>(state.m(i)) + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * static_cast<double>(state.v(i)) + (1.0 - cfg.beta2) * g * g;
        state.m(i) = static_cast<S>(m);
        state.v(i) = static_cast<S>(v);
        const double update = cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
        params[static_cast<std::size_t>(i)] -= static_cast<S>(update);
    }
}

/// Adam over a list of tensors, one state per tensor.
template <class S>
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const TensorList<S>& params, const TensorList<S>& grads) {
        if (params.size() != grads.size()) throw ArgumentError("Adam: tensor count mismatch");
        if (states_.empty()) states_.resize(params.size());
        if (states_.size() != params.size()) throw ArgumentError("Adam: tensor count changed");
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_step<S>(params[i], std::span<const S>(grads[i].data(), grads[i].size()), states_[i], cfg_);
    }

    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<AdamState<S>> states_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checker

/// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// with central differences of step `eps`. `f(x, grad)` returns the scalar value and,
/// when `grad` is non-null, writes the analytic gradient into it.
template <class F>
double finite_diff_check(F&& f, const VecX<double>& point, double eps = 1e-5) {
    VecX<double> analytic(point.size());
    f(point, &analytic);
    if (analytic.size() != point.size()) throw ArgumentError("finite_diff_check: gradient size mismatch");
    VecX<double> x = point;
    double worst = 0.0;
    for (Index i = 0; i < point.size(); ++i) {
        x(i) = point(i) + eps;
        const double up = f(x, static_cast<VecX<double>*>(nullptr));
        x(i) = point(i) - eps;
        const double down = f(x, static_cast<VecX<double>*>(nullptr));
        x(i) = point(i);
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
    }
    return worst;
}

} // namespace ted
