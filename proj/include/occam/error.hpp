#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace occam {

/// Invalid arguments, shapes, or configuration detected before any work starts.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what, std::string pointer = {})
        : std::invalid_argument(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}

    /// JSON pointer of the offending config key, empty when not config related.
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

/// Expression text that fails to parse. `position` is a 0-based byte offset.
class ParseError : public std::invalid_argument {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::invalid_argument(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Malformed or inconsistent input data (CSV cells, edge lists, non-positive logs).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace occam
