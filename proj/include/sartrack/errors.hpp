#ifndef SARTRACK_ERRORS_HPP
#define SARTRACK_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sartrack {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingKeypointError : public Error {
public:
    explicit MissingKeypointError(const std::string& which)
        : Error("missing keypoint: " + which) {}
};

class InvalidTimingError : public Error {
public:
    using Error::Error;
};

class InsufficientExcitationError : public Error {
public:
    using Error::Error;
};

class UnstableEstimateError : public Error {
public:
    using Error::Error;
};

class InfeasibleSpecError : public Error {
public:
    using Error::Error;
};

class InsufficientSamplesError : public Error {
public:
    using Error::Error;
};

class NonMonotoneFitError : public Error {
public:
    using Error::Error;
};

class InvalidSeriesError : public Error {
public:
    using Error::Error;
};

/// Scenario / config problem tied to a dotted field path, e.g. `perception.detect_rate_hz`.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Text file parse failure; line is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace sartrack

#endif // SARTRACK_ERRORS_HPP
