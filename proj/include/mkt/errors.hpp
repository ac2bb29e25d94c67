#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mkt {

/// Bad parameter or violated precondition (config error at the CLI level).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base for everything that is wrong with the data rather than the caller.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise malformed observations.
class InvalidData : public DataError {
public:
    using DataError::DataError;
};

/// Covariance singular or too ill-conditioned to invert.
class DegenerateData : public DataError {
public:
    DegenerateData(const std::string& what, double condition)
        : DataError(what), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Least-squares Gram matrix is singular.
class RankDeficiency : public DataError {
public:
    using DataError::DataError;
};

/// Recursive update produced non-finite values.
class NumericOverflow : public DataError {
public:
    using DataError::DataError;
};

/// Bootstrap calibration could not build a valid surrogate model.
class CalibrationFailure : public DataError {
public:
    using DataError::DataError;
};

/// Low-pass AR design failed (singular Yule-Walker system).
class DesignFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV could not be parsed. Line numbers are 1-based.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// CSV parsed but does not match the declared layout.
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

} // namespace mkt
