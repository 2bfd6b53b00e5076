#pragma once

// Layer fusion: hidden states [L x N x D] -> one token sequence [N x D].

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ted/hidden_states.hpp"

namespace ted {

inline constexpr long kNeverFreeze = std::numeric_limits<long>::max();

/// Learnable per-layer scalars w; the fused sequence uses alpha = softmax(w).
/// Once frozen the values can no longer change.
class FusionWeights {
public:
    FusionWeights() = default;
    explicit FusionWeights(Index num_layers) : w_(VecX<double>::Zero(num_layers)) {}
    explicit FusionWeights(VecX<double> w) : w_(std::move(w)) {}

    Index size() const { return w_.size(); }
    const VecX<double>& values() const { return w_; }
    VecX<double> alphas() const { return softmax<double>(w_); }

    bool frozen() const { return frozen_; }
    std::optional<long> step_frozen_at() const { return step_frozen_at_; }

    void set_values(const VecX<double>& w);
    /// Mutable view for an optimizer. Throws StateError when frozen.
    std::span<double> trainable();
    /// Idempotent; the first freeze step is kept.
    void freeze(long step);
    /// There is no way back from frozen: throws StateError if frozen.
    void unfreeze();

    /// Text record:
    ///   layers <L>
    ///   w <w_1> ... <w_L>        (%.17g)
    ///   frozen <0|1>
    ///   step_frozen_at <n|->
    std::string to_record() const;
    static FusionWeights from_record(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static FusionWeights load(const std::filesystem::path& path);

    bool operator==(const FusionWeights&) const = default;

private:
    VecX<double> w_;
    bool frozen_ = false;
    std::optional<long> step_frozen_at_;
};

/// Trainable while step < freeze_step, frozen from freeze_step on. Never unfreezes.
FusionWeights apply_schedule(FusionWeights weights, long step, long freeze_step);

/// freeze_step = round(fraction * total_steps).
long default_freeze_step(long total_steps, double fraction = 2.0 / 3.0);

struct SingleLayer {
    int index = -1;
};
struct Avg {};
struct NormAvg {};
struct Learnable {
    FusionWeights weights;
};

using FusionStrategy = std::variant<SingleLayer, Avg, NormAvg, Learnable>;

/// "last", "penult", "layer:<i>", "avg", "norm_avg", "learnable" (zero-initialized w over num_layers).
FusionStrategy parse_fusion(std::string_view name, Index num_layers);
std::string to_string(const FusionStrategy& s);

template <class S>
struct TokenSeq {
    MatX<S> tokens; // [N x D]
    Mask mask;
};

/// Parameter-free LayerNorm of every layer; the learnable path reuses this across steps.
template <class S>
struct NormalizedLayers {
    std::vector<MatX<S>> layers;
    Mask mask;
};

template <class S>
NormalizedLayers<S> normalize_layers(const HiddenStates& h) {
    h.validate();
    NormalizedLayers<S> out;
    out.mask = h.mask;
    for (const auto& l : h.layers) out.layers.push_back(layer_norm_rows<S>(l.cast<S>()).y);
    return out;
}

template <class S>
MatX<S> weighted_sum(const NormalizedLayers<S>& n, const VecX<S>& alpha) {
    if (alpha.size() != static_cast<Index>(n.layers.size()))
        throw ArgumentError("fusion weights have " + std::to_string(alpha.size()) + " entries, hidden states have " +
                            std::to_string(n.layers.size()) + " layers");
    MatX<S> out = alpha(0) * n.layers[0];
    for (std::size_t i = 1; i < n.layers.size(); ++i) out += alpha(static_cast<Index>(i)) * n.layers[i];
    return out;
}

template <class S>
TokenSeq<S> fuse(const HiddenStates& h, const FusionStrategy& strategy) {
    h.validate();
    const Index L = h.num_layers();
    TokenSeq<S> out;
    out.mask = h.mask;
    if (const auto* single = std::get_if<SingleLayer>(&strategy)) {
        out.tokens = h.layer(single->index).cast<S>();
    } else if (std::holds_alternative<Avg>(strategy)) {
        out.tokens = h.layers[0].cast<S>();
        for (Index i = 1; i < L; ++i) out.tokens += h.layers[static_cast<std::size_t>(i)].cast<S>();
        out.tokens /= S(L);
    } else if (std::holds_alternative<NormAvg>(strategy)) {
        out.tokens = layer_norm_rows<S>(h.layers[0].cast<S>()).y;
        for (Index i = 1; i < L; ++i) out.tokens += layer_norm_rows<S>(h.layers[static_cast<std::size_t>(i)].cast<S>()).y;
        out.tokens /= S(L);
    } else {
        const auto& w = std::get<Learnable>(strategy).weights;
        out.tokens = weighted_sum<S>(normalize_layers<S>(h), w.alphas().cast<S>());
    }
    return out;
}

/// dL/dw of the learnable fusion, given dL/d(fused tokens).
template <class S>
VecX<double> fuse_grad_w(const NormalizedLayers<S>& n, const FusionWeights& weights, const MatX<S>& upstream) {
    if (weights.frozen()) throw StateError("fuse_grad_w: fusion weights are frozen");
    if (weights.size() != static_cast<Index>(n.layers.size()))
        throw ArgumentError("fuse_grad_w: weight count does not match layer count");
    VecX<double> dalpha(weights.size());
    for (Index i = 0; i < weights.size(); ++i) {
        const auto& layer = n.layers[static_cast<std::size_t>(i)];
        if (layer.rows() != upstream.rows() || layer.cols() != upstream.cols())
            throw ArgumentError("fuse_grad_w: upstream gradient shape mismatch");
        dalpha(i) = static_cast<double>((layer.array() * upstream.array()).sum());
    }
    return softmax_backward<double>(weights.alphas(), dalpha);
}

template <class S>
VecX<double> fuse_grad_w(const HiddenStates& h, const FusionWeights& weights, const MatX<S>& upstream) {
    if (weights.frozen()) throw StateError("fuse_grad_w: fusion weights are frozen");
    return fuse_grad_w<S>(normalize_layers<S>(h), weights, upstream);
}

/// Mean over valid rows.
template <class S>
VecX<S> masked_mean(const MatX<S>& tokens, const Mask& mask) {
    const Index n = count_valid(mask);
    if (n == 0) throw ArgumentError("masked_mean: every token is masked");
    VecX<S> sum = VecX<S>::Zero(tokens.cols());
    for (Index i = 0; i < tokens.rows(); ++i)
        if (mask[static_cast<std::size_t>(i)]) sum += tokens.row(i).transpose();
    return sum / S(n);
}

/// Masked mean of the final layer's token vectors.
template <class S>
VecX<S> mean_pool_last(const HiddenStates& h) {
    if (h.layers.empty()) throw ArgumentError("mean_pool_last: no layers");
    if (count_valid(h.mask) == 0) throw ArgumentError("mean_pool_last: every token is masked");
    return masked_mean<S>(h.layers.back().cast<S>(), h.mask);
}

} // namespace ted
