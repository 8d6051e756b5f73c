#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace boltzalbedo {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input hits a removable or genuine singularity (e.g. u == v in k2).
class SingularInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Inconsistent operator / grid / config wiring.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Measured or synthesized data violates a precondition (e.g. attenuation <= 0).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative procedure failed; carries the monitored history.
class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace boltzalbedo
