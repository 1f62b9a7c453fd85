#pragma once

#include <stdexcept>
#include <string>

namespace epijoint {

// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid hyperparameter or model parameter.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Inconsistent matrix shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed input file. line() is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Requested range not covered by the data.
class RangeError : public Error {
public:
    using Error::Error;
};

// Numerical failure inside an iterative solver or factorization.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace epijoint
