#include "ted/toyworld.hpp"

#include <array>
#include <set>

#include "ted/error.hpp"
#include "ted/util.hpp"

namespace ted {

namespace {

constexpr std::array<const char*, 14> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<const char*, 6> kVowels = {"a", "e", "i", "o", "u", "y"};

std::string pseudo_word(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> syl(3, 4);
    std::string w;
    for (int i = 0, n = syl(rng); i < n; ++i) {
        w += kOnsets[rng() % kOnsets.size()];
        w += kVowels[rng() % kVowels.size()];
    }
    if (rng() % 2) w += kOnsets[rng() % kOnsets.size()];
    return w;
}

constexpr std::array<const char*, 8> kCaptionTemplates = {
    "a photo of a {}",
    "one {} outdoors",
    "close-up of the {}",
    "a {} at night",
    "drawing of a {}",
    "my old {}",
    "a {} indoors",
    "the {} again",
};

// One statement template per category, in kAllCategories order.
constexpr std::array<const char*, 9> kStatementTemplates = {
    "two {}s",              // quantity
    "a bright {}",          // adjective
    "it is a {}",           // coreference
    "a {} appears",         // basic event
    "a {} quietly",         // adverb
    "a {} on top",          // spatial relationship
    "sign says {}",         // ocr
    "a {} earlier",         // temporal relationship
    "a {} runs",            // action
};

std::string fill(const char* tmpl, const std::string& word) {
    std::string s(tmpl);
    s.replace(s.find("{}"), 2, word);
    return s;
}

} // namespace

void ToyWorldConfig::validate() const {
    if (concepts < negatives + 1) throw ConfigError("toy world: need more concepts than negatives");
    if (synonyms < 2) throw ConfigError("toy world: at least two synonyms per concept are required");
    if (negatives < 1) throw ConfigError("toy world: at least one negative is required");
    if (pairs < 1 || instances < 1) throw ConfigError("toy world: pair and instance counts must be positive");
}

ToyWorld make_toy_world(const ToyWorldConfig& cfg) {
    cfg.validate();
    ToyWorld world;
    auto rng = make_rng(cfg.seed, 0x746f79);
    std::set<std::string> used;
    world.lexicon.resize(static_cast<std::size_t>(cfg.concepts));
    for (auto& syns : world.lexicon)
        while (static_cast<int>(syns.size()) < cfg.synonyms) {
            auto w = pseudo_word(rng);
            if (used.insert(w).second) syns.push_back(std::move(w));
        }

    const auto nc = static_cast<std::size_t>(cfg.concepts), ns = static_cast<std::size_t>(cfg.synonyms);
    auto pick_two = [&](std::size_t& a, std::size_t& b) {
        a = rng() % ns;
        b = (a + 1 + rng() % (ns - 1)) % ns;
    };

    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        const std::size_t c = rng() % nc;
        std::size_t s1, s2;
        pick_two(s1, s2);
        const std::size_t t1 = rng() % kCaptionTemplates.size();
        const std::size_t t2 = (t1 + 1 + rng() % (kCaptionTemplates.size() - 1)) % kCaptionTemplates.size();
        world.pairs.push_back({"pair-" + std::to_string(i), fill(kCaptionTemplates[t1], world.lexicon[c][s1]),
                               fill(kCaptionTemplates[t2], world.lexicon[c][s2]), "toy"});
    }

    for (std::size_t i = 0; i < cfg.instances; ++i) {
        const std::size_t c = rng() % nc;
        std::size_t s1, s2;
        pick_two(s1, s2);
        const std::size_t cat = i % kAllCategories.size();
        const char* stmt = kStatementTemplates[cat];
        Ted6kInstance inst;
        inst.id = "toy-" + std::to_string(i);
        inst.category = kAllCategories[cat];
        inst.caption = fill(kCaptionTemplates[rng() % kCaptionTemplates.size()], world.lexicon[c][s1]);
        inst.positive = fill(stmt, world.lexicon[c][s2]);
        std::set<std::size_t> others;
        while (static_cast<int>(others.size()) < cfg.negatives) {
            const std::size_t o = rng() % nc;
            if (o != c) others.insert(o);
        }
        for (std::size_t o : others) inst.negatives.push_back(fill(stmt, world.lexicon[o][rng() % ns]));
        world.bench.push_back(std::move(inst));
    }
    return world;
}

} // namespace ted
