#pragma once

// Seeded synthetic corpus: made-up concept words with several synonyms each.
// Caption pairs name one concept with two different synonyms; benchmark instances
// pair a caption with a statement about the same concept (another synonym) and
// statements in the identical template about other concepts.

#include <cstdint>
#include <string>
#include <vector>

#include "ted/corpus.hpp"

namespace ted {

struct ToyWorldConfig {
    std::uint64_t seed = 0;
    int concepts = 8;
    int synonyms = 2;
    int negatives = 3;
    std::size_t pairs = 512;
    std::size_t instances = 400;

    void validate() const;
};

struct ToyWorld {
    std::vector<std::vector<std::string>> lexicon; // [concept][synonym]
    std::vector<CaptionPair> pairs;
    std::vector<Ted6kInstance> bench;
};

ToyWorld make_toy_world(const ToyWorldConfig& cfg);

} // namespace ted
