#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stagedur {

enum class ErrorCode {
    InvalidArgument,
    RowNotStochastic,
    NegativeProbability,
    InitNotStochastic,
    MissingSignal,
    NonFinitePayoff,
    BadOrder,
    NotStageDurationModel,
    BudgetExceeded,
    SingularSystem,
    InsufficientEpochs,
    NoAcceptedSamples,
    ImpossibleObservation,
    NotConverged,
    NotFullyObserved,
    GapBoundViolated,
    ParseError,
    UnknownName,
    DuplicateEntry,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::RowNotStochastic: return "row-not-stochastic";
    case ErrorCode::NegativeProbability: return "negative-probability";
    case ErrorCode::InitNotStochastic: return "init-not-stochastic";
    case ErrorCode::MissingSignal: return "missing-signal";
    case ErrorCode::NonFinitePayoff: return "non-finite-payoff";
    case ErrorCode::BadOrder: return "bad-order";
    case ErrorCode::NotStageDurationModel: return "not-stage-duration-model";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::SingularSystem: return "singular-system";
    case ErrorCode::InsufficientEpochs: return "insufficient-epochs";
    case ErrorCode::NoAcceptedSamples: return "no-accepted-samples";
    case ErrorCode::ImpossibleObservation: return "impossible-observation";
    case ErrorCode::NotConverged: return "not-converged";
    case ErrorCode::NotFullyObserved: return "not-fully-observed";
    case ErrorCode::GapBoundViolated: return "gap-bound-violated";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::UnknownName: return "unknown-name";
    case ErrorCode::DuplicateEntry: return "duplicate-entry";
    }
    return "unknown";
}

/**
 * Library exception. The message is "<code-name>: <detail>", prefixed with
 * "<line>:<column>: " when the error has a position in an input text.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
          code_(code) {}

    Error(ErrorCode code, std::size_t line, std::size_t column, const std::string& detail)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " +
                             error_code_name(code) + ": " + detail),
          code_(code), line_(line), column_(column) {}

    /// Same error with "<path>:" in front, e.g. "model.pomdp:3:7: parse-error: ...".
    Error in_file(const std::string& path) const {
        return Error(*this, path + (line_ ? ":" : ": ") + what());
    }

    ErrorCode code() const noexcept { return code_; }
    /// 1-based line of the offending token, 0 when the error has no position.
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    Error(const Error& base, const std::string& message)
        : std::runtime_error(message), code_(base.code_), line_(base.line_), column_(base.column_) {}

    ErrorCode code_;
    std::size_t line_ = 0;
    std::size_t column_ = 0;
};

} // namespace stagedur
