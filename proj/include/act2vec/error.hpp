#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace act2vec {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A training update produced a non-finite value.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace act2vec
