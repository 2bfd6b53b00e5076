#include "ted/tedh.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace ted {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'D', 'H'};

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        throw TedhError(TedhErrc::unsupported_host, "big-endian hosts are not supported");
}

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        T v;
        std::memcpy(&v, take(sizeof(T), what).data(), sizeof(T));
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw TedhError(TedhErrc::truncated, std::string("file ends inside ") + what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

const char* to_string(TedhErrc code) noexcept {
    switch (code) {
    case TedhErrc::bad_magic: return "bad_magic";
    case TedhErrc::unsupported_version: return "unsupported_version";
    case TedhErrc::truncated: return "truncated";
    case TedhErrc::length_mismatch: return "length_mismatch";
    case TedhErrc::bad_dtype: return "bad_dtype";
    case TedhErrc::bad_header: return "bad_header";
    case TedhErrc::bad_mask: return "bad_mask";
    case TedhErrc::non_finite: return "non_finite";
    case TedhErrc::unsupported_host: return "unsupported_host";
    }
    return "unknown";
}

std::string encode_metadata(const Metadata& meta) {
    std::string blob;
    for (const auto& [key, value] : meta) {
        if (key.empty() || key.find_first_of("=\n") != std::string::npos)
            throw ArgumentError("metadata key '" + key + "' is empty or contains '=' or newline");
        if (value.find('\n') != std::string::npos)
            throw ArgumentError("metadata value for '" + key + "' contains a newline");
        blob += key;
        blob += '=';
        blob += value;
        blob += '\n';
    }
    return blob;
}

Metadata decode_metadata(std::string_view blob) {
    Metadata meta;
    while (!blob.empty()) {
        const auto nl = blob.find('\n');
        if (nl == std::string_view::npos)
            throw TedhError(TedhErrc::bad_header, "metadata line without terminating newline");
        const auto line = blob.substr(0, nl);
        blob.remove_prefix(nl + 1);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw TedhError(TedhErrc::bad_header, "metadata line is not key=value");
        meta.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    return meta;
}

std::vector<std::uint8_t> encode_tedh(const HiddenStates& h) {
    require_little_endian();
    h.validate();
    const auto L = static_cast<std::uint32_t>(h.num_layers());
    const auto N = static_cast<std::uint32_t>(h.num_tokens());
    const auto D = static_cast<std::uint32_t>(h.dim());
    const std::string meta = encode_metadata(h.meta);

    std::vector<std::uint8_t> out;
    out.reserve(kTedhHeaderSize + meta.size() + N + 4ull * L * N * D);
    out.insert(out.end(), kMagic, kMagic + 4);
    put<std::uint16_t>(out, kTedhVersion);
    put<std::uint16_t>(out, h.flags);
    put<std::uint32_t>(out, L);
    put<std::uint32_t>(out, N);
    put<std::uint32_t>(out, D);
    put<std::uint8_t>(out, 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    out.insert(out.end(), h.mask.begin(), h.mask.end());
    for (const auto& layer : h.layers) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(layer.data());
        out.insert(out.end(), p, p + sizeof(float) * static_cast<std::size_t>(layer.size()));
    }
    return out;
}

HiddenStates decode_tedh(std::span<const std::uint8_t> bytes) {
    require_little_endian();
    Reader r(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw TedhError(TedhErrc::bad_magic, "missing TEDH magic");
    r.take(4, "magic");
    const auto version = r.get<std::uint16_t>("header");
    if (version != kTedhVersion)
        throw TedhError(TedhErrc::unsupported_version, "version " + std::to_string(version));

    HiddenStates h;
    h.flags = r.get<std::uint16_t>("header");
    const auto L = r.get<std::uint32_t>("header");
    const auto N = r.get<std::uint32_t>("header");
    const auto D = r.get<std::uint32_t>("header");
    const auto dtype = r.get<std::uint8_t>("header");
    const auto meta_len = r.get<std::uint32_t>("header");
    if (dtype != 0) throw TedhError(TedhErrc::bad_dtype, "dtype " + std::to_string(dtype));
    if (L == 0 || N == 0 || D == 0) throw TedhError(TedhErrc::bad_header, "zero dimension");
    const std::uint64_t layer_tokens = std::uint64_t{L} * N;
    if (layer_tokens > std::numeric_limits<std::uint64_t>::max() / 4 / D)
        throw TedhError(TedhErrc::bad_header, "shape overflows");
    const std::uint64_t values = layer_tokens * D;

    auto meta = r.take(meta_len, "metadata");
    h.meta = decode_metadata(std::string_view(reinterpret_cast<const char*>(meta.data()), meta.size()));

    auto mask = r.take(N, "mask");
    h.mask.assign(mask.begin(), mask.end());
    for (auto m : h.mask)
        if (m > 1) throw TedhError(TedhErrc::bad_mask, "mask byte " + std::to_string(m));
    if (count_valid(h.mask) == 0) throw TedhError(TedhErrc::bad_mask, "no valid token");

    const std::uint64_t payload = values * 4;
    if (r.remaining() < payload)
        throw TedhError(TedhErrc::truncated, "payload has " + std::to_string(r.remaining()) +
                                                 " bytes, expected " + std::to_string(payload));
    if (r.remaining() > payload)
        throw TedhError(TedhErrc::length_mismatch, std::to_string(r.remaining() - payload) +
                                                       " trailing bytes after payload");
    h.layers.reserve(L);
    for (std::uint32_t l = 0; l < L; ++l) {
        MatX<float> m(N, D);
        auto block = r.take(sizeof(float) * std::size_t{N} * D, "payload");
        std::memcpy(m.data(), block.data(), block.size());
        if (!m.allFinite()) throw TedhError(TedhErrc::non_finite, "layer " + std::to_string(l));
        h.layers.push_back(std::move(m));
    }
    return h;
}

void write_tedh(const HiddenStates& h, const std::filesystem::path& path) {
    const auto bytes = encode_tedh(h);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

HiddenStates read_tedh(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tedh(bytes);
}

} // namespace ted
