#include "ted/util.hpp"

#include "ted/error.hpp"

namespace ted {

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::state: return "state";
    case ErrorKind::format: return "format";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

} // namespace ted
