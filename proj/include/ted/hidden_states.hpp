#pragma once

#include <map>
#include <string>
#include <vector>

#include "ted/numerics.hpp"

namespace ted {

using Metadata = std::map<std::string, std::string>;

/// Per-layer token representations of one text. Stored as float32 (the on-disk
/// dtype); consumers cast to their working precision.
struct HiddenStates {
    std::vector<MatX<float>> layers; // L entries, each [N x D]
    Mask mask;                       // N entries, 1 = valid token
    Metadata meta;                   // encoder, tokenizer, text_hash, includes_embedding_layer, ...
    std::uint16_t flags = 0;

    Index num_layers() const { return static_cast<Index>(layers.size()); }
    Index num_tokens() const { return static_cast<Index>(mask.size()); }
    Index dim() const { return layers.empty() ? 0 : layers.front().cols(); }

    /// Throws ArgumentError/NumericError when shapes, mask or values are invalid.
    void validate() const;

    /// Python-style index: -1 is the last layer, -2 the penultimate.
    const MatX<float>& layer(int index) const;

    bool operator==(const HiddenStates& other) const;
};

/// Resolves a possibly negative layer index into [0, L).
Index resolve_layer_index(int index, Index num_layers);

} // namespace ted
