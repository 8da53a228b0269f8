#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace attrigraph {

enum class ErrorKind {
    shape_mismatch,
    index_out_of_range,
    invalid_argument,
    missing_input,
    format,
    io,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library. `what()` carries the full message
/// (operand shapes, layer/branch names, image ids); `kind()` lets callers
/// branch without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed file contents. `offset()` is the byte position the reader was
/// inspecting when it gave up, when that is meaningful.
class FormatError : public Error {
public:
    FormatError(const std::string& message, std::optional<std::size_t> offset = std::nullopt)
        : Error(ErrorKind::format, message), offset_(offset) {}

    std::optional<std::size_t> offset() const noexcept { return offset_; }

private:
    std::optional<std::size_t> offset_;
};

}  // namespace attrigraph
