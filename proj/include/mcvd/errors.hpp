#pragma once

#include <stdexcept>
#include <string>

namespace mcvd {

/// Input rejected by a precondition check. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A persisted artifact that an operation depends on does not exist. Exit code 2.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or a solver that cannot make progress. Exit code 3.
class NumericFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mcvd
