#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace micromech {

/// Base class for every domain failure raised by the library. The CLI maps
/// these to exit status 1; anything else escaping is a usage or I/O problem.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the admissible domain of an operation (e.g. nu >= 0.5).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A closed-form expression hit a vanishing denominator.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Reference medium with 2*mu0 + lambda0 == 0.
class DegenerateMediumError : public Error {
 public:
  using Error::Error;
};

/// The convergence index is undefined because the mean stress vanishes.
class ZeroMeanStressError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point or Newton iteration hit its cap. Carries the residual history
/// so the caller can decide whether to raise the cap.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history,
                      std::optional<int> load_index = std::nullopt)
      : Error(what), history_(std::move(history)), load_index_(load_index) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }
  std::optional<int> load_index() const noexcept { return load_index_; }

 private:
  std::vector<double> history_;
  std::optional<int> load_index_;
};

/// Fiber packing could not reach the requested volume fraction.
class PackingError : public Error {
 public:
  using Error::Error;
};

/// Phase-field integration left the admissible concentration band.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// Malformed array file, manifest, or config content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Macro stiffness matrix is singular (mechanism or missing constraints).
class SingularStiffnessError : public Error {
 public:
  using Error::Error;
};

/// Config file or command-line value that fails schema validation. Not a
/// domain error: the CLI reports it as a usage problem.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace micromech
