#pragma once

// TEDH: binary interchange format for per-layer hidden-state dumps.
//
//   offset  size  field
//   0       4     magic "TEDH"
//   4       2     version (u16, = 1)
//   6       2     flags (u16)
//   8       4     L layers (u32)
//   12      4     N tokens (u32)
//   16      4     D dims (u32)
//   20      1     dtype (u8, 0 = float32 little-endian)
//   21      4     metadata length M (u32)
//   25      M     metadata, UTF-8 "key=value\n" lines in key order
//   25+M    N     mask bytes (0/1)
//   25+M+N  4LND  payload, row-major [layer][token][dim]
//
// All integers little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ted/error.hpp"
#include "ted/hidden_states.hpp"

namespace ted {

inline constexpr std::uint16_t kTedhVersion = 1;
inline constexpr std::size_t kTedhHeaderSize = 25;

enum class TedhErrc {
    bad_magic = 1,
    unsupported_version = 2,
    truncated = 3,        // file ends before the declared content
    length_mismatch = 4,  // bytes remain after the declared payload
    bad_dtype = 5,
    bad_header = 6,       // zero dimensions, size overflow, malformed metadata
    bad_mask = 7,         // mask byte other than 0/1, or no valid token
    non_finite = 8,
    unsupported_host = 9, // big-endian host
};

const char* to_string(TedhErrc code) noexcept;

class TedhError : public Error {
public:
    TedhError(TedhErrc code, const std::string& what)
        : Error(ErrorKind::format, std::string("TEDH ") + to_string(code) + ": " + what), code_(code) {}
    TedhErrc code() const noexcept { return code_; }

private:
    TedhErrc code_;
};

std::vector<std::uint8_t> encode_tedh(const HiddenStates& h);
HiddenStates decode_tedh(std::span<const std::uint8_t> bytes);

void write_tedh(const HiddenStates& h, const std::filesystem::path& path);
HiddenStates read_tedh(const std::filesystem::path& path);

std::string encode_metadata(const Metadata& meta);
Metadata decode_metadata(std::string_view blob);

} // namespace ted
