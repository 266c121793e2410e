#pragma once

#include <stdexcept>
#include <string>

namespace epihmm {

enum class Errc {
    NegativeEntry,
    RowSumViolation,
    MalformedRow,
    MalformedDate,
    DuplicateRegionDate,
    UnknownColumn,
    MissingLabel,
    EmptyWindow,
    DegenerateModel,
    NonFiniteLikelihood,
    AllPathsImpossible,
    InsufficientData,
    MissingRegionDate,
    UnknownRule,
    InvalidModel,
    IoError,
};

// Single exception type; tests and the CLI dispatch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace epihmm
