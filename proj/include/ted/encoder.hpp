#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ted/hidden_states.hpp"

namespace ted {

/// A frozen text encoder: text in, all-layer hidden states out.
class HiddenStateSource {
public:
    virtual ~HiddenStateSource() = default;
    virtual HiddenStates encode(const std::string& text) const = 0;
    virtual std::string id() const = 0;
};

struct ToyEncoderConfig {
    std::uint64_t seed = 0;
    Index layers = 4;        // emitted layers, embedding layer included
    Index dim = 128;
    Index max_tokens = 64;
    Index vocab_size = 4096;
    Index heads = 4;
    bool attention = true;   // false drops the attention sub-layers (ablation)

    void validate() const;
};

/// Byte 3-gram rolling hash into vocab buckets, truncated to max_tokens.
/// Texts shorter than three bytes hash to a single token.
std::vector<std::uint32_t> toy_tokenize(std::string_view text, Index vocab_size, Index max_tokens);

/// Deterministic random-init pre-LN transformer. Output is padded to max_tokens;
/// layer 0 is the embedding layer, layer i >= 1 the output of block i.
class ToyEncoder final : public HiddenStateSource {
public:
    explicit ToyEncoder(ToyEncoderConfig cfg);

    HiddenStates encode(const std::string& text) const override;
    std::string id() const override;
    const ToyEncoderConfig& config() const { return cfg_; }

private:
    ToyEncoderConfig cfg_;
    MatX<float> embedding_;  // [vocab x D]
    MatX<float> positional_; // [max_tokens x D]
    std::vector<AttentionBlockParams<float>> blocks_;
};

HiddenStates toy_encode(const std::string& text, const ToyEncoderConfig& cfg);

/// Reads pre-extracted dumps from `<dir>/<text_key(text)>.tedh`.
class TedhDirectory final : public HiddenStateSource {
public:
    explicit TedhDirectory(std::filesystem::path dir);
    HiddenStates encode(const std::string& text) const override;
    std::string id() const override;

private:
    std::filesystem::path dir_;
};

/// "toy:seed=7[,layers=4,dim=64,tokens=64,vocab=4096,heads=4]" or "tedh:<dir>".
std::unique_ptr<HiddenStateSource> make_encoder(std::string_view uri);
ToyEncoderConfig parse_toy_uri(std::string_view uri);

} // namespace ted
