#pragma once

// Contrastive training of the context aggregator over a frozen encoder.

#include <chrono>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ted/aggregator.hpp"
#include "ted/corpus.hpp"
#include "ted/encoder.hpp"
#include "ted/fusion.hpp"
#include "ted/parallel.hpp"

namespace ted {

template <class S>
struct InfoNceResult {
    S loss;
    MatX<S> grad_a; // [B x D_out]
    MatX<S> grad_b;
};

/// Symmetric InfoNCE over in-batch negatives. Rows of `a` and `b` are matched pairs;
/// S_ij = cos(a_i, b_j) / tau and the loss is the mean of the row-wise and
/// column-wise cross-entropies with diagonal targets.
template <class S>
InfoNceResult<S> info_nce_loss(const MatX<S>& a, const MatX<S>& b, S tau) {
    if (!(tau > S(0))) throw ConfigError("info_nce_loss: temperature must be positive");
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("info_nce_loss: batch shapes differ");
    if (a.rows() < 1) throw ArgumentError("info_nce_loss: empty batch");
    require_finite(a, "info_nce_loss input");
    require_finite(b, "info_nce_loss input");
    const Index n = a.rows();

    VecX<S> na = a.rowwise().norm(), nb = b.rowwise().norm();
    if ((na.array() == S(0)).any() || (nb.array() == S(0)).any())
        throw NumericError("info_nce_loss: zero-norm embedding");
    MatX<S> ua = na.cwiseInverse().asDiagonal() * a;
    MatX<S> ub = nb.cwiseInverse().asDiagonal() * b;
    MatX<S> logits = ua * ub.transpose() / tau;

    MatX<S> prow = logits;
    softmax_rows_inplace(prow);
    MatX<S> pcol_t = logits.transpose();
    softmax_rows_inplace(pcol_t);

    S loss = 0;
    for (Index i = 0; i < n; ++i) loss -= std::log(prow(i, i)) + std::log(pcol_t(i, i));
    loss /= S(2 * n);

    MatX<S> dlogits = (prow + pcol_t.transpose()) / S(2 * n);
    dlogits.diagonal().array() -= S(1) / S(n);
    MatX<S> dua = dlogits * ub / tau;
    MatX<S> dub = dlogits.transpose() * ua / tau;

    InfoNceResult<S> out{loss, MatX<S>(n, a.cols()), MatX<S>(n, a.cols())};
    for (Index i = 0; i < n; ++i) {
        out.grad_a.row(i) = (dua.row(i) - ua.row(i) * ua.row(i).dot(dua.row(i))) / na(i);
        out.grad_b.row(i) = (dub.row(i) - ub.row(i) * ub.row(i).dot(dub.row(i))) / nb(i);
    }
    return out;
}

/// What the fusion step needs for one text, computed once because the encoder is frozen.
/// Rows are compacted to the valid tokens.
template <class S>
struct FusionInput {
    MatX<S> fixed;                 // fused tokens for non-learnable strategies
    NormalizedLayers<S> normalized; // per-layer LayerNorm, learnable strategy only
    Mask mask;

    bool learnable() const { return !normalized.layers.empty(); }

    MatX<S> tokens(const VecX<S>& alpha) const { return learnable() ? weighted_sum<S>(normalized, alpha) : fixed; }
};

template <class S>
FusionInput<S> prepare_fusion_input(const HiddenStates& h, const FusionStrategy& strategy) {
    h.validate();
    const auto rows = valid_rows(h.mask);
    HiddenStates compact;
    compact.mask.assign(rows.size(), 1);
    for (const auto& l : h.layers) compact.layers.push_back(l(rows, Eigen::all));
    FusionInput<S> in;
    in.mask = compact.mask;
    if (std::holds_alternative<Learnable>(strategy)) {
        if (std::get<Learnable>(strategy).weights.size() != h.num_layers())
            throw ArgumentError("fusion weights have " + std::to_string(std::get<Learnable>(strategy).weights.size()) +
                                " entries, hidden states have " + std::to_string(h.num_layers()) + " layers");
        in.normalized = normalize_layers<S>(compact);
    } else {
        in.fixed = fuse<S>(compact, strategy).tokens;
    }
    return in;
}

/// Encodes and prepares every text; errors name the offending record.
template <class S>
std::vector<FusionInput<S>> prepare_fusion_inputs(const std::vector<std::string>& texts,
                                                  const std::vector<std::string>& record_ids,
                                                  const HiddenStateSource& encoder, const FusionStrategy& strategy,
                                                  unsigned threads) {
    std::vector<FusionInput<S>> out(texts.size());
    parallel_for(texts.size(), threads, [&](std::size_t i) {
        try {
            out[i] = prepare_fusion_input<S>(encoder.encode(texts[i]), strategy);
        } catch (const Error& e) {
            throw Error(e.kind(), "record " + record_ids[i] + ": " + e.what());
        }
    });
    return out;
}

struct TrainConfig {
    double lr = 1e-5;
    int epochs = 1;
    Index batch_size = 32;
    double tau = 0.07;
    std::uint64_t seed = 0;
    long freeze_step = kNeverFreeze; // learnable fusion only
    unsigned threads = 1;
    AggregatorConfig aggregator;     // dim must match the encoder

    void validate() const;
};

struct TrainHistory {
    std::vector<long> step;
    std::vector<int> epoch;
    std::vector<double> loss;
    std::vector<VecX<double>> alpha; // softmax(w) used at each step; empty when not learnable
    double wall_seconds = 0;
    std::uint64_t seed = 0;

    std::vector<double> epoch_mean_losses() const;
    /// Columns: step, epoch, loss, alpha_1..alpha_L. Wall-clock is not written.
    void write_tsv(const std::filesystem::path& path) const;
};

template <class S>
struct TrainResult {
    AggregatorParams<S> params;
    std::optional<FusionWeights> fusion;
    TrainHistory history;
};

template <class S>
TrainResult<S> train_aggregator(const std::vector<CaptionPair>& pairs, const HiddenStateSource& encoder,
                                const FusionStrategy& strategy, const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw ArgumentError("train_aggregator: no caption pairs");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::string> texts, ids;
    for (const auto& p : pairs) {
        texts.push_back(p.caption_a), ids.push_back(p.id);
        texts.push_back(p.caption_b), ids.push_back(p.id);
    }
    const auto inputs = prepare_fusion_inputs<S>(texts, ids, encoder, strategy, cfg.threads);
    const Index dim = inputs.front().learnable() ? inputs.front().normalized.layers.front().cols()
                                                 : inputs.front().fixed.cols();
    if (dim != cfg.aggregator.dim)
        throw ConfigError("aggregator dim " + std::to_string(cfg.aggregator.dim) + " does not match encoder dim " +
                          std::to_string(dim));

    TrainResult<S> result{init_params<S>(cfg.seed, cfg.aggregator), std::nullopt, {}};
    auto& params = result.params;
    if (const auto* l = std::get_if<Learnable>(&strategy)) result.fusion = l->weights;
    result.history.seed = cfg.seed;

    Adam<S> optimizer(AdamConfig{.lr = cfg.lr});
    Adam<double> fusion_optimizer(AdamConfig{.lr = cfg.lr});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches = pairs.size() / batch;
    std::vector<std::size_t> order(pairs.size());
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = make_rng(cfg.seed, 0x6570000ULL + static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t b = 0; b < batches; ++b, ++step) {
            auto& fusion = result.fusion;
            if (fusion) *fusion = apply_schedule(*fusion, step, cfg.freeze_step);
            const VecX<double> alpha = fusion ? fusion->alphas() : VecX<double>();
            const VecX<S> alpha_s = alpha.cast<S>();
            const bool train_fusion = fusion && !fusion->frozen();

            // item j: pair order[b*B + j/2], side j%2
            const std::size_t items = 2 * batch;
            auto text_of = [&](std::size_t j) { return 2 * order[b * batch + j / 2] + j % 2; };
            std::vector<AggregatorCache<S>> caches(items);
            MatX<S> emb_a(cfg.batch_size, cfg.aggregator.out_dim), emb_b(cfg.batch_size, cfg.aggregator.out_dim);
            parallel_for(items, cfg.threads, [&](std::size_t j) {
                const auto& in = inputs[text_of(j)];
                VecX<S> e = aggregate<S>(in.tokens(alpha_s), in.mask, params, &caches[j]);
                (j % 2 ? emb_b : emb_a).row(static_cast<Index>(j / 2)) = e.transpose();
            });

            auto nce = info_nce_loss<S>(emb_a, emb_b, S(cfg.tau));
            if (!std::isfinite(static_cast<double>(nce.loss)))
                throw NumericError("train_aggregator: non-finite loss at step " + std::to_string(step));

            std::vector<AggregatorParams<S>> grads(items);
            std::vector<VecX<double>> fusion_grads(items);
            parallel_for(items, cfg.threads, [&](std::size_t j) {
                const auto& in = inputs[text_of(j)];
                grads[j] = params.zeros_like();
                VecX<S> dout = (j % 2 ? nce.grad_b : nce.grad_a).row(static_cast<Index>(j / 2)).transpose();
                MatX<S> dtext = aggregate_backward<S>(caches[j], params, dout, grads[j]);
                if (train_fusion) fusion_grads[j] = fuse_grad_w<S>(in.normalized, *fusion, dtext);
            });

            auto total = params.zeros_like();
            auto total_t = total.tensors();
            for (auto& g : grads) {
                auto gt = g.tensors();
                for (std::size_t t = 0; t < gt.size(); ++t)
                    for (std::size_t k = 0; k < gt[t].size(); ++k) total_t[t][k] += gt[t][k];
            }
            optimizer.step(params.tensors(), total_t);
            if (train_fusion) {
                VecX<double> gw = VecX<double>::Zero(fusion->size());
                for (const auto& g : fusion_grads) gw += g;
                fusion_optimizer.step({fusion->trainable()}, {std::span<double>(gw.data(), gw.size())});
            }

            result.history.step.push_back(step);
            result.history.epoch.push_back(epoch);
            result.history.loss.push_back(static_cast<double>(nce.loss));
            result.history.alpha.push_back(alpha);
        }
    }
    result.history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace ted
