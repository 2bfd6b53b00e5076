#pragma once

// Sentence-level context aggregator.
//
//   x0   = [context_token ; valid rows of c_text]           (1+n) x D
//   x    = block_Lblk( ... block_1(x0) )                      pre-LN, bidirectional
//   out  = Proj(LayerNorm(x[0]))                              D_out
//
// The context token is always a valid position. Padded rows of c_text are dropped
// before the stack, which is equivalent to masking them out of every attention
// row and makes the output bit-identical under appended padding.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ted/hidden_states.hpp"
#include "ted/numerics.hpp"
#include "ted/util.hpp"

namespace ted {

struct AggregatorConfig {
    Index dim = 1024;
    Index out_dim = 1024;
    Index heads = 8;
    Index blocks = 2;
    Index mlp_ratio = 4;
    bool force_projection = false;
    double init_std = 0.02;

    bool has_projection() const { return force_projection || dim != out_dim; }
    void validate() const;
    bool operator==(const AggregatorConfig&) const = default;
};

/// The default init scale (0.02 at D = 1024) rescaled to keep the same per-unit
/// variance at other widths: 0.02 * sqrt(1024 / D).
inline double scaled_init_std(Index dim) { return 0.02 * std::sqrt(1024.0 / static_cast<double>(dim)); }

template <class S>
struct AggregatorParams {
    AggregatorConfig cfg;
    VecX<S> context_token;
    std::vector<AttentionBlockParams<S>> blocks;
    std::optional<Linear<S>> projection;

    /// Fixed order: context token, then per block q.W q.b k.W k.b v.W v.b o.W o.b
    /// fc1.W fc1.b fc2.W fc2.b, then projection W b.
    TensorList<S> tensors() {
        TensorList<S> out{as_span<S>(context_token)};
        for (auto& b : blocks) {
            auto t = b.tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        if (projection) {
            auto t = projection->tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

    AggregatorParams zeros_like() const {
        AggregatorParams z;
        z.cfg = cfg;
        z.context_token = VecX<S>::Zero(context_token.size());
        for (const auto& b : blocks) z.blocks.push_back(b.zeros_like());
        if (projection) z.projection = Linear<S>::zeros(projection->in_dim(), projection->out_dim());
        return z;
    }

    template <class T>
    AggregatorParams<T> cast() const {
        AggregatorParams<T> out;
        out.cfg = cfg;
        out.context_token = context_token.template cast<T>();
        for (const auto& b : blocks) out.blocks.push_back(b.template cast<T>());
        if (projection)
            out.projection = Linear<T>{projection->weight.template cast<T>(), projection->bias.template cast<T>()};
        return out;
    }

    bool operator==(const AggregatorParams& other) const {
        auto a = const_cast<AggregatorParams&>(*this).tensors();
        auto b = const_cast<AggregatorParams&>(other).tensors();
        if (!(cfg == other.cfg) || a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
        return true;
    }
};

/// Normal(0, init_std) weights and context token, zero biases. Deterministic per seed.
template <class S>
AggregatorParams<S> init_params(std::uint64_t seed, const AggregatorConfig& cfg = {}) {
    cfg.validate();
    auto rng = make_rng(seed, 0x616767ULL);
    AggregatorParams<S> p;
    p.cfg = cfg;
    p.context_token.resize(cfg.dim);
    fill_normal<S>(p.context_token, cfg.init_std, rng);
    for (Index b = 0; b < cfg.blocks; ++b)
        p.blocks.push_back(AttentionBlockParams<S>::init(cfg.dim, cfg.heads, cfg.mlp_ratio, cfg.init_std, rng));
    if (cfg.has_projection()) p.projection = Linear<S>::init(cfg.dim, cfg.out_dim, cfg.init_std, rng);
    return p;
}

template <class S>
struct AggregatorCache {
    std::vector<Index> rows; // valid rows of c_text
    Index text_rows = 0;
    std::vector<AttentionCache<S>> blocks;
    RowNorm<S> final_norm; // row 0 only
};

template <class S>
VecX<S> aggregate(const MatX<S>& c_text, const Mask& mask, const AggregatorParams<S>& p,
                  AggregatorCache<S>* cache = nullptr, BlockOptions opt = {}) {
    if (c_text.cols() != p.cfg.dim)
        throw ArgumentError("aggregate: token dim " + std::to_string(c_text.cols()) + " != aggregator dim " +
                            std::to_string(p.cfg.dim));
    if (static_cast<Index>(mask.size()) != c_text.rows())
        throw ArgumentError("aggregate: mask length does not match token count");
    const auto rows = valid_rows(mask);
    if (rows.empty()) throw ArgumentError("aggregate: every token is masked");

    const Index n = static_cast<Index>(rows.size());
    MatX<S> x(1 + n, p.cfg.dim);
    x.row(0) = p.context_token.transpose();
    x.bottomRows(n) = c_text(rows, Eigen::all);
    const Mask all_valid(static_cast<std::size_t>(1 + n), 1);

    AggregatorCache<S> local;
    AggregatorCache<S>& c = cache ? *cache : local;
    c.rows = rows;
    c.text_rows = c_text.rows();
    c.blocks.assign(p.blocks.size(), {});
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
        x = attention_block<S>(x, all_valid, p.blocks[b], cache ? &c.blocks[b] : nullptr, opt);

    MatX<S> head = x.topRows(1);
    c.final_norm = layer_norm_rows<S>(head);
    VecX<S> out = c.final_norm.y.row(0).transpose();
    if (p.projection) out = p.projection->forward(out);
    require_finite(out, "aggregate output");
    return out;
}

/// Accumulates parameter gradients into `grad`; returns dL/dc_text (zero on masked rows).
/// `cache` must come from a forward call with a non-null cache.
template <class S>
MatX<S> aggregate_backward(const AggregatorCache<S>& c, const AggregatorParams<S>& p, const VecX<S>& dout,
                           AggregatorParams<S>& grad, BlockOptions opt = {}) {
    MatX<S> dhead;
    if (p.projection) {
        MatX<S> normed = c.final_norm.y;
        dhead = p.projection->backward(normed, dout.transpose(), *grad.projection);
    } else {
        dhead = dout.transpose();
    }
    const Index n = static_cast<Index>(c.rows.size());
    MatX<S> dx = MatX<S>::Zero(1 + n, p.cfg.dim);
    dx.row(0) = layer_norm_rows_backward(c.final_norm, dhead).row(0);
    for (std::size_t b = p.blocks.size(); b-- > 0;)
        dx = attention_block_backward<S>(c.blocks[b], p.blocks[b], dx, grad.blocks[b], opt);

    grad.context_token += dx.row(0).transpose();
    MatX<S> dtext = MatX<S>::Zero(c.text_rows, p.cfg.dim);
    dtext(c.rows, Eigen::all) = dx.bottomRows(n);
    return dtext;
}

/// Cosine similarity. Zero-norm inputs are a numeric-domain error.
template <class S>
S similarity(const VecX<S>& a, const VecX<S>& b) {
    if (a.size() != b.size()) throw ArgumentError("similarity: dimension mismatch");
    require_finite(a, "similarity input");
    require_finite(b, "similarity input");
    const S na = a.norm();
    const S nb = b.norm();
    if (na == S(0) || nb == S(0)) throw NumericError("similarity: zero-norm embedding");
    return std::clamp(a.dot(b) / (na * nb), S(-1), S(1));
}

// Checkpoint: magic "TEDA" | version u16 | flags u16 (bit0 projection, bit1 force_projection)
// | dim u32 | out_dim u32 | heads u32 | blocks u32 | mlp_ratio u32 | metadata length u32
// | metadata ("key=value\n" lines) | float32 LE blobs in AggregatorParams::tensors() order.

struct AggregatorCheckpoint {
    AggregatorParams<float> params;
    Metadata meta;
};

void save_aggregator(const AggregatorParams<float>& params, const Metadata& meta, const std::filesystem::path& path);
AggregatorCheckpoint load_aggregator(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_aggregator(const AggregatorParams<float>& params, const Metadata& meta);
AggregatorCheckpoint decode_aggregator(std::span<const std::uint8_t> bytes);

} // namespace ted
