#include "ted/hidden_states.hpp"

#include <cstring>

namespace ted {

Index resolve_layer_index(int index, Index num_layers) {
    const Index i = index < 0 ? num_layers + index : index;
    if (i < 0 || i >= num_layers)
        throw ArgumentError("layer index " + std::to_string(index) + " out of range for " +
                            std::to_string(num_layers) + " layers");
    return i;
}

void HiddenStates::validate() const {
    if (layers.empty()) throw ArgumentError("hidden states: no layers");
    if (mask.empty()) throw ArgumentError("hidden states: no tokens");
    if (dim() < 1) throw ArgumentError("hidden states: zero feature dimension");
    for (const auto& l : layers) {
        if (l.rows() != num_tokens() || l.cols() != dim())
            throw ArgumentError("hidden states: inconsistent layer shapes");
        require_finite(l, "hidden states");
    }
    for (auto m : mask)
        if (m > 1) throw ArgumentError("hidden states: mask values must be 0 or 1");
    if (count_valid(mask) == 0) throw ArgumentError("hidden states: every token is masked");
}

const MatX<float>& HiddenStates::layer(int index) const {
    return layers[static_cast<std::size_t>(resolve_layer_index(index, num_layers()))];
}

bool HiddenStates::operator==(const HiddenStates& other) const {
    if (flags != other.flags || mask != other.mask || meta != other.meta) return false;
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
        if (std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) != 0)
            return false;
    }
    return true;
}

} // namespace ted
