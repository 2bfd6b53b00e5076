#include "ted/aggregator.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ted/tedh.hpp"

namespace ted {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'D', 'A'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

struct Cursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    std::span<const std::uint8_t> take(std::size_t n) {
        if (bytes.size() - pos < n) throw Error(ErrorKind::format, "aggregator checkpoint is truncated");
        auto s = bytes.subspan(pos, n);
        pos += n;
        return s;
    }
    template <class T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }
};

} // namespace

void AggregatorConfig::validate() const {
    if (dim < 1 || out_dim < 1) throw ConfigError("aggregator: dimensions must be positive");
    if (heads < 1 || dim % heads != 0)
        throw ConfigError("aggregator: dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
    if (blocks < 1) throw ConfigError("aggregator: at least one attention block is required");
    if (mlp_ratio < 1) throw ConfigError("aggregator: mlp_ratio must be >= 1");
    if (!(init_std > 0.0)) throw ConfigError("aggregator: init_std must be positive");
}

std::vector<std::uint8_t> encode_aggregator(const AggregatorParams<float>& params, const Metadata& meta) {
    if constexpr (std::endian::native != std::endian::little)
        throw Error(ErrorKind::format, "big-endian hosts are not supported");
    const auto& cfg = params.cfg;
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put<std::uint16_t>(out, kVersion);
    put<std::uint16_t>(out, static_cast<std::uint16_t>((params.projection ? 1 : 0) | (cfg.force_projection ? 2 : 0)));
    for (Index v : {cfg.dim, cfg.out_dim, cfg.heads, cfg.blocks, cfg.mlp_ratio})
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    const std::string blob = encode_metadata(meta);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(blob.size()));
    out.insert(out.end(), blob.begin(), blob.end());
    for (const auto& t : const_cast<AggregatorParams<float>&>(params).tensors()) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
        out.insert(out.end(), p, p + t.size_bytes());
    }
    return out;
}

AggregatorCheckpoint decode_aggregator(std::span<const std::uint8_t> bytes) {
    if constexpr (std::endian::native != std::endian::little)
        throw Error(ErrorKind::format, "big-endian hosts are not supported");
    Cursor c{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error(ErrorKind::format, "not an aggregator checkpoint (bad magic)");
    c.take(4);
    if (c.get<std::uint16_t>() != kVersion) throw Error(ErrorKind::format, "unsupported aggregator checkpoint version");
    const auto flags = c.get<std::uint16_t>();
    AggregatorConfig cfg;
    cfg.dim = c.get<std::uint32_t>();
    cfg.out_dim = c.get<std::uint32_t>();
    cfg.heads = c.get<std::uint32_t>();
    cfg.blocks = c.get<std::uint32_t>();
    cfg.mlp_ratio = c.get<std::uint32_t>();
    cfg.force_projection = (flags & 2) != 0;
    cfg.validate();
    if (((flags & 1) != 0) != cfg.has_projection())
        throw Error(ErrorKind::format, "aggregator checkpoint: projection flag inconsistent with dimensions");
    const auto meta_len = c.get<std::uint32_t>();
    auto blob = c.take(meta_len);

    AggregatorCheckpoint ck;
    ck.meta = decode_metadata(std::string_view(reinterpret_cast<const char*>(blob.data()), blob.size()));
    ck.params = init_params<float>(0, cfg);
    for (auto& t : ck.params.tensors()) std::memcpy(t.data(), c.take(t.size_bytes()).data(), t.size_bytes());
    if (c.pos != bytes.size()) throw Error(ErrorKind::format, "aggregator checkpoint has trailing bytes");
    for (auto& t : ck.params.tensors())
        for (float v : t)
            if (!std::isfinite(v)) throw Error(ErrorKind::format, "aggregator checkpoint contains non-finite values");
    return ck;
}

void save_aggregator(const AggregatorParams<float>& params, const Metadata& meta, const std::filesystem::path& path) {
    const auto bytes = encode_aggregator(params, meta);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

AggregatorCheckpoint load_aggregator(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open aggregator checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_aggregator(bytes);
}

} // namespace ted
