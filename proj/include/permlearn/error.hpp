#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace permlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched lengths or matrix shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Values outside the mathematical domain of an operation (negative
/// entries, non-finite values, non-bijective index arrays).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inputs on which an iterative procedure cannot proceed, e.g. a zero row
/// passed to row normalization.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

class SizeLimitError : public Error {
public:
    using Error::Error;
};

/// Malformed checkpoint, pixmap, matrix or config file. Carries the byte
/// offset (or line number for text formats) where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    /// Error in a line-oriented text format; offset() holds the 1-based line.
    static FormatError at_line(const std::string& what, std::size_t line) {
        return FormatError(what + " (line " + std::to_string(line) + ")", line, 0);
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    FormatError(const std::string& full, std::size_t offset, int) : Error(full), offset_(offset) {}

    std::size_t offset_;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during training.
class TrainingDivergenceError : public Error {
public:
    TrainingDivergenceError(const std::string& what, std::size_t iteration)
        : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// A cache or tape used with parameters or shapes other than the ones that
/// produced it.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

}  // namespace permlearn
