#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace divker {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model evaluation: non-positive diffusion, non-finite callback
/// output, dimension mismatch.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// The requested estimator does not apply to this model (e.g. a pure
/// kernel formula on a multiplicative-noise system).
class UnsupportedEstimator : public Error {
 public:
  using Error::Error;
};

class SingularStep : public Error {
 public:
  SingularStep(std::size_t step, double determinant, const std::string& what)
      : Error(what), step_(step), determinant_(determinant) {}
  std::size_t step() const { return step_; }
  double determinant() const { return determinant_; }

 private:
  std::size_t step_;
  double determinant_;
};

/// Covector norm crossed the explosion cap (or became non-finite).
class CovectorExplosion : public Error {
 public:
  CovectorExplosion(std::size_t step, double norm, const std::string& what)
      : Error(what), step_(step), norm_(norm) {}
  std::size_t step() const { return step_; }
  double norm() const { return norm_; }

 private:
  std::size_t step_;
  double norm_;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace divker
