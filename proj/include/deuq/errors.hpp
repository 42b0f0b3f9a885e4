#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace deuq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unrecognized configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape mismatches, unrecorded tape variables, misuse of an API.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Reference integrator produced a non-finite state.
class OracleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite objective. Carries the last parameters for
// which the objective was finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch,
                  std::vector<double> last_finite_params)
      : Error(what), epoch_(epoch), last_finite_(std::move(last_finite_params)) {}

  std::size_t epoch() const { return epoch_; }
  const std::vector<double>& last_finite_params() const { return last_finite_; }

 private:
  std::size_t epoch_;
  std::vector<double> last_finite_;
};

}  // namespace deuq
