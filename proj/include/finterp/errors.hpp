#pragma once

#include <stdexcept>
#include <string>

namespace finterp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t outside [0,1], d mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A closed-form expression is singular at the requested time (C3(0) = 0, t = 1 for two-sided fields).
class SingularTimeError : public DomainError {
public:
    using DomainError::DomainError;
};

/// |B(t)| vanishes so the score expression cannot be evaluated.
class SingularScoreError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Operation is not defined for this input family (gamma == 0 for two-sided, d != 2 for scatter, ...).
class NotApplicableError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Non-finite input or intermediate value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Input data or configuration violates an invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. `row` is 1-based; 0 when the error is not tied to a row.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t row, const std::string& what)
        : ValidationError(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Too few samples for a statistic to mean anything.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace finterp
