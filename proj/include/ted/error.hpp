#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ted {

enum class ErrorKind {
    argument,   // bad caller input (empty vector, out-of-range index, ...)
    config,     // inconsistent configuration (D % heads != 0, tau <= 0, ...)
    numeric,    // NaN/Inf, zero-norm vectors, zero variance
    state,      // operation not allowed in the current state (frozen weights)
    format,     // malformed file contents
    validation, // record-level schema violations in corpus files
    io,         // filesystem failures
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& w) : Error(ErrorKind::argument, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct StateError : Error {
    explicit StateError(const std::string& w) : Error(ErrorKind::state, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

/// Record-level corpus error. `line` is 1-based; 0 when the error is not tied to a line.
class ValidationError : public Error {
public:
    ValidationError(const std::string& w, std::size_t line = 0, std::string record_id = {})
        : Error(ErrorKind::validation, w), line_(line), record_id_(std::move(record_id)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& record_id() const noexcept { return record_id_; }

private:
    std::size_t line_;
    std::string record_id_;
};

} // namespace ted
