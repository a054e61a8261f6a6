#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcalc {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition (p outside (0,1), negative
/// abscissa, empty interval, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Expression source text could not be parsed. Carries the byte offset of
/// the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation failed: missing variable binding or a point that is not
/// resolvable on a stored lattice.
class EvalError : public Error {
public:
    using Error::Error;
};

/// A numeric procedure could not produce a usable value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Series terms stopped decaying; the p-integral does not converge.
class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// An iterative limit or solver failed to converge.
class NonConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Lattice structure mismatch or insufficient lattice depth.
class LatticeError : public Error {
public:
    using Error::Error;
};

} // namespace pcalc
