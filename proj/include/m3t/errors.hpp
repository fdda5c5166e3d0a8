#pragma once

#include <stdexcept>
#include <string>

namespace m3t {

// Every failure raised by the library derives from Error. The subclasses map
// onto the CLI exit codes: NumericError exits 3, everything else exits 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or extent disagreement between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Caller broke a precondition (bad argument, wrong call order).
class UsageError : public Error {
public:
    using Error::Error;
};

// Input data violates a domain constraint (index out of range, duplicates).
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values or degenerate geometry.
class NumericError : public Error {
public:
    using Error::Error;
};

// Inconsistent body model (e.g. parents not forming a tree).
class ModelError : public Error {
public:
    using Error::Error;
};

// Malformed document. line() is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// A file parsed but failed validation.
class LoadError : public Error {
public:
    using Error::Error;
};

// A pluggable component (e.g. a predictor) returned something off-contract.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace m3t
