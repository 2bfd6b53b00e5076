#pragma once

// Benchmark scoring: similarity-argmax accuracy, per-category breakdown, the shuffled-caption
// baseline and multi-seed stability.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ted/trainer.hpp"

namespace ted {

enum class SimilarityKind { cosine, dot };

template <class S>
S score_similarity(const VecX<S>& a, const VecX<S>& b, SimilarityKind kind) {
    if (kind == SimilarityKind::cosine) return similarity<S>(a, b);
    if (a.size() != b.size()) throw ArgumentError("similarity: dimension mismatch");
    return a.dot(b);
}

struct InstanceScore {
    bool correct = false;
    double margin = 0; // sim(cap, pos) - max sim(cap, neg)
};

/// Correct iff the positive is strictly more similar than every negative; ties lose.
template <class S>
InstanceScore score_instance(const VecX<S>& cap, const VecX<S>& pos, const std::vector<VecX<S>>& negs,
                             SimilarityKind kind = SimilarityKind::cosine) {
    if (negs.empty()) throw ArgumentError("score_instance: no negatives");
    const S sp = score_similarity<S>(cap, pos, kind);
    S best = score_similarity<S>(cap, negs.front(), kind);
    for (std::size_t i = 1; i < negs.size(); ++i) best = std::max(best, score_similarity<S>(cap, negs[i], kind));
    return {sp > best, static_cast<double>(sp - best)};
}

/// Text -> sentence embedding.
template <class S>
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual VecX<S> embed(const std::string& text) const = 0;
};

/// Frozen encoder -> fusion -> aggregator.
template <class S>
class TextEmbedder final : public Embedder<S> {
public:
    TextEmbedder(const HiddenStateSource& encoder, FusionStrategy strategy, AggregatorParams<S> params)
        : encoder_(encoder), strategy_(std::move(strategy)), params_(std::move(params)) {
        if (const auto* l = std::get_if<Learnable>(&strategy_)) alpha_ = l->weights.alphas().template cast<S>();
    }

    VecX<S> embed(const std::string& text) const override {
        const auto in = prepare_fusion_input<S>(encoder_.encode(text), strategy_);
        return aggregate<S>(in.tokens(alpha_), in.mask, params_);
    }

    const AggregatorParams<S>& params() const { return params_; }
    const FusionStrategy& strategy() const { return strategy_; }

private:
    const HiddenStateSource& encoder_;
    FusionStrategy strategy_;
    AggregatorParams<S> params_;
    VecX<S> alpha_;
};

struct CategoryScore {
    std::size_t correct = 0;
    std::size_t count = 0;
    double accuracy() const { return count ? 100.0 * static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct EvalReport {
    double overall_accuracy = 0; // percent
    std::size_t n_instances = 0;  // scored instances
    std::size_t n_correct = 0;
    std::vector<std::string> excluded; // ids skipped after an encoding failure
    std::map<Category, CategoryScore> per_category;
    Metadata fingerprint;

    std::string to_text() const;
    /// Columns: category, n, accuracy; a final "overall" row.
    std::string to_tsv() const;
    /// Writes report.txt and report.tsv into `dir`.
    void write(const std::filesystem::path& dir) const;
};

/// Builds a report from precomputed outcomes (`scores[i]` belongs to `bench[i]`).
EvalReport summarize(const std::vector<Ted6kInstance>& bench, const std::vector<InstanceScore>& scores,
                     Metadata fingerprint = {});

struct EvalOptions {
    SimilarityKind similarity = SimilarityKind::cosine;
    bool skip_errors = false;
    unsigned threads = 1;
};

namespace detail {

template <class S>
struct Embedded {
    std::unordered_map<std::string, VecX<S>> vectors;
    std::unordered_map<std::string, std::string> failures; // text -> message
};

template <class S>
Embedded<S> embed_texts(const std::vector<Ted6kInstance>& bench, const Embedder<S>& embedder, unsigned threads) {
    std::vector<std::string> texts;
    std::unordered_map<std::string, std::size_t> seen;
    auto add = [&](const std::string& t) {
        if (seen.emplace(t, texts.size()).second) texts.push_back(t);
    };
    for (const auto& inst : bench) {
        add(inst.caption);
        add(inst.positive);
        for (const auto& n : inst.negatives) add(n);
    }
    std::vector<VecX<S>> vecs(texts.size());
    std::vector<std::optional<std::string>> errors(texts.size());
    parallel_for(texts.size(), threads, [&](std::size_t i) {
        try {
            vecs[i] = embedder.embed(texts[i]);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    Embedded<S> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (errors[i])
            out.failures.emplace(texts[i], *errors[i]);
        else
            out.vectors.emplace(texts[i], std::move(vecs[i]));
    }
    return out;
}

/// First failing text of an instance, if any.
template <class S>
const std::string* failure_of(const Ted6kInstance& inst, const Embedded<S>& e) {
    auto check = [&](const std::string& t) -> const std::string* {
        auto it = e.failures.find(t);
        return it == e.failures.end() ? nullptr : &it->second;
    };
    if (auto* f = check(inst.caption)) return f;
    if (auto* f = check(inst.positive)) return f;
    for (const auto& n : inst.negatives)
        if (auto* f = check(n)) return f;
    return nullptr;
}

template <class S>
EvalReport score_pairs(const std::vector<Ted6kInstance>& bench, const std::vector<std::size_t>& caption_of,
                       const Embedded<S>& e, const EvalOptions& opt, Metadata fingerprint) {
    std::vector<Ted6kInstance> kept;
    std::vector<InstanceScore> scores;
    std::vector<std::string> excluded;
    for (std::size_t i = 0; i < bench.size(); ++i) {
        const auto& inst = bench[i];
        const auto& cap_inst = bench[caption_of[i]];
        const std::string* fail = failure_of(inst, e);
        if (!fail) fail = failure_of(cap_inst, e);
        if (fail) {
            if (!opt.skip_errors) throw Error(ErrorKind::validation, "instance " + inst.id + ": " + *fail);
            excluded.push_back(inst.id);
            continue;
        }
        std::vector<VecX<S>> negs;
        for (const auto& n : inst.negatives) negs.push_back(e.vectors.at(n));
        scores.push_back(
            score_instance<S>(e.vectors.at(cap_inst.caption), e.vectors.at(inst.positive), negs, opt.similarity));
        kept.push_back(inst);
    }
    auto report = summarize(kept, scores, std::move(fingerprint));
    report.excluded = std::move(excluded);
    return report;
}

} // namespace detail

template <class S>
EvalReport evaluate(const std::vector<Ted6kInstance>& bench, const Embedder<S>& embedder, const EvalOptions& opt = {},
                    Metadata fingerprint = {}) {
    if (bench.empty()) throw ArgumentError("evaluate: empty benchmark");
    const auto e = detail::embed_texts<S>(bench, embedder, opt.threads);
    std::vector<std::size_t> identity(bench.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    return detail::score_pairs<S>(bench, identity, e, opt, std::move(fingerprint));
}

/// Seeded derangement (Sattolo's algorithm): a single n-cycle, so no index maps to itself.
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed);

/// Pairs every statement set with another instance's caption, then scores as usual.
template <class S>
EvalReport shuffle_baseline(const std::vector<Ted6kInstance>& bench, const Embedder<S>& embedder, std::uint64_t seed,
                            const EvalOptions& opt = {}, Metadata fingerprint = {}) {
    if (bench.size() < 2) throw ArgumentError("shuffle_baseline: at least two instances are required");
    const auto e = detail::embed_texts<S>(bench, embedder, opt.threads);
    return detail::score_pairs<S>(bench, derangement(bench.size(), seed), e, opt, std::move(fingerprint));
}

struct StabilityResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> scores;
    double max_variation = 0; // max - min
};

/// Trains one aggregator per seed (everything else fixed) and evaluates each.
template <class S>
StabilityResult stability_runs(const std::vector<CaptionPair>& pairs, const std::vector<Ted6kInstance>& bench,
                               const HiddenStateSource& encoder, const FusionStrategy& strategy, TrainConfig cfg,
                               const std::vector<std::uint64_t>& seeds, const EvalOptions& opt = {}) {
    if (seeds.size() < 2) throw ArgumentError("stability_runs: at least two seeds are required");
    StabilityResult out;
    out.seeds = seeds;
    for (auto seed : seeds) {
        cfg.seed = seed;
        try {
            auto trained = train_aggregator<S>(pairs, encoder, strategy, cfg);
            FusionStrategy used = strategy;
            if (trained.fusion) used = Learnable{*trained.fusion};
            TextEmbedder<S> embedder(encoder, used, std::move(trained.params));
            out.scores.push_back(evaluate<S>(bench, embedder, opt).overall_accuracy);
        } catch (const Error& e) {
            throw Error(e.kind(), "seed " + std::to_string(seed) + ": " + e.what());
        }
    }
    const auto [lo, hi] = std::minmax_element(out.scores.begin(), out.scores.end());
    out.max_variation = *hi - *lo;
    return out;
}

/// Empty when the checkpoint metadata matches the (encoder, fusion) pairing, else a description.
std::optional<std::string> pairing_mismatch(const Metadata& ckpt_meta, const std::string& encoder_id,
                                            const std::string& fusion_name);

} // namespace ted
