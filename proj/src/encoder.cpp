#include "ted/encoder.hpp"

#include <charconv>
#include <cmath>
#include <map>

#include "ted/tedh.hpp"
#include "ted/util.hpp"

namespace ted {

void ToyEncoderConfig::validate() const {
    if (layers < 1) throw ConfigError("toy encoder: layers must be >= 1");
    if (dim < 1) throw ConfigError("toy encoder: dim must be >= 1");
    if (max_tokens < 1) throw ConfigError("toy encoder: max_tokens must be >= 1");
    if (vocab_size < 1) throw ConfigError("toy encoder: vocab_size must be >= 1");
    if (heads < 1 || dim % heads != 0) throw ConfigError("toy encoder: dim must be divisible by heads");
}

std::vector<std::uint32_t> toy_tokenize(std::string_view text, Index vocab_size, Index max_tokens) {
    if (text.empty()) throw ArgumentError("toy_tokenize: empty text");
    const auto vocab = static_cast<std::uint64_t>(vocab_size);
    std::vector<std::uint32_t> ids;
    if (text.size() < 3) {
        ids.push_back(static_cast<std::uint32_t>(splitmix64(fnv1a64(text)) % vocab));
        return ids;
    }
    // Polynomial rolling hash over a 3-byte window, base 257 (mod 2^64).
    constexpr std::uint64_t base = 257;
    constexpr std::uint64_t base_sq = base * base;
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto b = static_cast<std::uint64_t>(static_cast<unsigned char>(text[i])) + 1;
        if (i >= 3) h -= (static_cast<std::uint64_t>(static_cast<unsigned char>(text[i - 3])) + 1) * base_sq;
        h = h * base + b;
        if (i >= 2) {
            ids.push_back(static_cast<std::uint32_t>(splitmix64(h) % vocab));
            if (static_cast<Index>(ids.size()) == max_tokens) break;
        }
    }
    return ids;
}

ToyEncoder::ToyEncoder(ToyEncoderConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    auto rng = make_rng(cfg_.seed, 0x70795f656e63ULL);
    embedding_.resize(cfg_.vocab_size, cfg_.dim);
    fill_normal<float>(embedding_, 1.0, rng);
    positional_.resize(cfg_.max_tokens, cfg_.dim);
    for (Index t = 0; t < cfg_.max_tokens; ++t)
        for (Index j = 0; j < cfg_.dim; ++j) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(cfg_.dim));
            const double angle = static_cast<double>(t) * freq;
            positional_(t, j) = static_cast<float>(0.1 * (j % 2 == 0 ? std::sin(angle) : std::cos(angle)));
        }
    const double stddev = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
    for (Index b = 1; b < cfg_.layers; ++b) {
        auto block = AttentionBlockParams<float>::init(cfg_.dim, cfg_.heads, 4, stddev, rng);
        block.fc2.weight *= 0.5f;
        blocks_.push_back(std::move(block));
    }
}

HiddenStates ToyEncoder::encode(const std::string& text) const {
    const auto ids = toy_tokenize(text, cfg_.vocab_size, cfg_.max_tokens);
    const auto n = static_cast<Index>(ids.size());

    HiddenStates h;
    h.mask.assign(static_cast<std::size_t>(cfg_.max_tokens), 0);
    MatX<float> x = MatX<float>::Zero(cfg_.max_tokens, cfg_.dim);
    for (Index t = 0; t < n; ++t) {
        x.row(t) = embedding_.row(ids[static_cast<std::size_t>(t)]) + positional_.row(t);
        h.mask[static_cast<std::size_t>(t)] = 1;
    }
    h.layers.push_back(x);
    const BlockOptions opt{GeluKind::exact, cfg_.attention};
    for (const auto& block : blocks_) {
        x = attention_block<float>(x, h.mask, block, nullptr, opt);
        h.layers.push_back(x);
    }
    h.meta = {{"encoder", id()},
              {"tokenizer", "byte3gram-rolling:vocab=" + std::to_string(cfg_.vocab_size)},
              {"text_hash", text_key(text)},
              {"includes_embedding_layer", "true"}};
    return h;
}

std::string ToyEncoder::id() const {
    std::string s = "toy:seed=" + std::to_string(cfg_.seed);
    const ToyEncoderConfig d;
    if (cfg_.layers != d.layers) s += ",layers=" + std::to_string(cfg_.layers);
    if (cfg_.dim != d.dim) s += ",dim=" + std::to_string(cfg_.dim);
    if (cfg_.max_tokens != d.max_tokens) s += ",tokens=" + std::to_string(cfg_.max_tokens);
    if (cfg_.vocab_size != d.vocab_size) s += ",vocab=" + std::to_string(cfg_.vocab_size);
    if (cfg_.heads != d.heads) s += ",heads=" + std::to_string(cfg_.heads);
    if (!cfg_.attention) s += ",attention=0";
    return s;
}

HiddenStates toy_encode(const std::string& text, const ToyEncoderConfig& cfg) {
    return ToyEncoder(cfg).encode(text);
}

TedhDirectory::TedhDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw IoError("hidden-state directory not found: " + dir_.string());
}

HiddenStates TedhDirectory::encode(const std::string& text) const {
    const auto path = dir_ / (text_key(text) + ".tedh");
    if (!std::filesystem::exists(path))
        throw IoError("no hidden-state dump for text key " + text_key(text) + " in " + dir_.string());
    return read_tedh(path);
}

std::string TedhDirectory::id() const { return "tedh:" + dir_.string(); }

ToyEncoderConfig parse_toy_uri(std::string_view uri) {
    constexpr std::string_view prefix = "toy:";
    if (!uri.starts_with(prefix)) throw ArgumentError("not a toy encoder uri: " + std::string(uri));
    uri.remove_prefix(prefix.size());
    ToyEncoderConfig cfg;
    while (!uri.empty()) {
        const auto comma = uri.find(',');
        const auto item = uri.substr(0, comma);
        uri = comma == std::string_view::npos ? std::string_view{} : uri.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw ArgumentError("toy encoder option is not key=value: " + std::string(item));
        const auto key = item.substr(0, eq);
        const auto val = item.substr(eq + 1);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
        if (ec != std::errc{} || ptr != val.data() + val.size())
            throw ArgumentError("toy encoder option '" + std::string(key) + "' is not an integer");
        const auto iv = static_cast<Index>(v);
        if (key == "seed") cfg.seed = v;
        else if (key == "layers") cfg.layers = iv;
        else if (key == "dim") cfg.dim = iv;
        else if (key == "tokens") cfg.max_tokens = iv;
        else if (key == "vocab") cfg.vocab_size = iv;
        else if (key == "heads") cfg.heads = iv;
        else if (key == "attention") cfg.attention = v != 0;
        else throw ArgumentError("unknown toy encoder option '" + std::string(key) + "'");
    }
    cfg.validate();
    return cfg;
}

std::unique_ptr<HiddenStateSource> make_encoder(std::string_view uri) {
    if (uri.starts_with("toy:")) return std::make_unique<ToyEncoder>(parse_toy_uri(uri));
    if (uri.starts_with("tedh:")) return std::make_unique<TedhDirectory>(std::filesystem::path(uri.substr(5)));
    throw ArgumentError("unknown encoder source '" + std::string(uri) + "' (expected toy:... or tedh:<dir>)");
}

} // namespace ted
