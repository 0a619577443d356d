#pragma once

#include <stdexcept>
#include <string>

namespace fmdd {

/// Failure categories, mapped to CLI exit codes (config=2, assembly=3,
/// solver=4, acceptance=5). Geometry and mesh defects count as assembly.
enum class ErrorCategory { config, assembly, solver, acceptance, io };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory cat, const std::string& what)
      : std::runtime_error(what), category_(cat) {}

  ErrorCategory category() const { return category_; }

  int exit_code() const {
    switch (category_) {
      case ErrorCategory::config: return 2;
      case ErrorCategory::io: return 2;
      case ErrorCategory::assembly: return 3;
      case ErrorCategory::solver: return 4;
      case ErrorCategory::acceptance: return 5;
    }
    return 1;
  }

private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct AssemblyError : Error {
  explicit AssemblyError(const std::string& w) : Error(ErrorCategory::assembly, w) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorCategory::solver, w) {}
};
struct AcceptanceError : Error {
  explicit AcceptanceError(const std::string& w) : Error(ErrorCategory::acceptance, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

}  // namespace fmdd
