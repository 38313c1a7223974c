#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qlqr {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or precondition violation at an API boundary.
class ContractError : public Error {
 public:
  using Error::Error;
};

class DiscretizationError : public Error {
 public:
  using Error::Error;
};

class ControllabilityError : public Error {
 public:
  using Error::Error;
};

/// A policy or iteration that should be contractive was not.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// H_uu singular or not positive definite, so no greedy policy exists.
class ImprovementError : public Error {
 public:
  using Error::Error;
};

/// The collected samples do not identify every entry of the quadratic form.
class ExcitationError : public Error {
 public:
  ExcitationError(const std::string& what, int rank, int required)
      : Error(what), rank_(rank), required_(required) {}
  int rank() const { return rank_; }
  int required() const { return required_; }

 private:
  int rank_;
  int required_;
};

/// Inner policy evaluation hit its iteration cap.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Invalid experiment configuration; `field()` is a JSON-pointer-like path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace qlqr
