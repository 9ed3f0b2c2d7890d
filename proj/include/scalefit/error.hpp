#pragma once

#include <stdexcept>
#include <string>

namespace scalefit {

/// Raised when input data violates a record, table, or fit precondition.
/// The CLI maps this family to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A pipeline stage failed; carries the stage name so reports can point at it.
class StageError : public DataError {
public:
    StageError(std::string stage, const std::string& cause)
        : DataError(stage + ": " + cause), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace scalefit
