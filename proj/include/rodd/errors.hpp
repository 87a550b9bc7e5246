#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rodd {

/// Coarse failure category, used by the CLI to pick an exit code:
/// Validation -> exit 2, Numeric -> exit 3.
enum class ErrorKind {
    Validation,
    Numeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define RODD_DEFINE_ERROR(Name, Kind)                                       \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(std::string message)                                  \
            : Error(ErrorKind::Kind, std::move(message)) {}                 \
    }

// cube construction / parsing
RODD_DEFINE_ERROR(UnknownCategory, Validation);
RODD_DEFINE_ERROR(DuplicateCell, Validation);
RODD_DEFINE_ERROR(ArityMismatch, Validation);
RODD_DEFINE_ERROR(ParseError, Validation);
RODD_DEFINE_ERROR(ConfigError, Validation);

// estimators / scoring
RODD_DEFINE_ERROR(EmptyInput, Numeric);
RODD_DEFINE_ERROR(EmptyCube, Numeric);
RODD_DEFINE_ERROR(NonPositiveMeasure, Numeric);
RODD_DEFINE_ERROR(NonPositiveEstimate, Numeric);
RODD_DEFINE_ERROR(NoValidPairs, Numeric);

// synthesis / evaluation
RODD_DEFINE_ERROR(InsufficientData, Numeric);
RODD_DEFINE_ERROR(DomainMismatch, Validation);
RODD_DEFINE_ERROR(DegenerateLabels, Numeric);
RODD_DEFINE_ERROR(IncompleteBlock, Validation);

#undef RODD_DEFINE_ERROR

}  // namespace rodd
