#pragma once

#include <random>

#include "ted/hidden_states.hpp"
#include "ted/util.hpp"

namespace testutil {

using namespace ted;

/// Random shape, random values, random mask with at least one valid token.
inline HiddenStates random_states(std::mt19937_64& rng, Index max_layers = 5, Index max_tokens = 9, Index max_dim = 7) {
    std::uniform_int_distribution<Index> L(1, max_layers), N(1, max_tokens), D(1, max_dim);
    const Index l = L(rng), n = N(rng), d = D(rng);
    HiddenStates h;
    for (Index i = 0; i < l; ++i) {
        MatX<float> m(n, d);
        fill_normal<float>(m, 3.0, rng);
        h.layers.push_back(m);
    }
    std::bernoulli_distribution keep(0.7);
    h.mask.resize(static_cast<std::size_t>(n));
    for (auto& m : h.mask) m = keep(rng) ? 1 : 0;
    h.mask[static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n))] = 1;
    return h;
}

} // namespace testutil
