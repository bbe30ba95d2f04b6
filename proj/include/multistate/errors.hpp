#pragma once

#include <stdexcept>
#include <string>

namespace multistate {

/// Broad failure category, used by the CLI to choose an exit code.
enum class ErrorCategory {
  input,     // malformed or invalid user input (exit code 1)
  numerical  // a numerical routine failed or a consistency check tripped (exit code 2)
};

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

  /// Short machine-readable name, e.g. "NotIrreducible".
  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define MULTISTATE_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& message)                    \
        : Error(#Name, ErrorCategory::Category, message) {}      \
  };

MULTISTATE_DEFINE_ERROR(SchemaError, input)
MULTISTATE_DEFINE_ERROR(ValidationError, input)
MULTISTATE_DEFINE_ERROR(NotIrreducible, input)

MULTISTATE_DEFINE_ERROR(NoConvergence, numerical)
MULTISTATE_DEFINE_ERROR(Singularity, numerical)
MULTISTATE_DEFINE_ERROR(Overflow, numerical)
MULTISTATE_DEFINE_ERROR(SpectralViolation, numerical)
MULTISTATE_DEFINE_ERROR(CrossCheckFailure, numerical)
MULTISTATE_DEFINE_ERROR(UndefinedPochhammer, numerical)
MULTISTATE_DEFINE_ERROR(DivergentSeries, numerical)
MULTISTATE_DEFINE_ERROR(DensityUnavailable, numerical)

#undef MULTISTATE_DEFINE_ERROR

}  // namespace multistate
