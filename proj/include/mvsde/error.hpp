#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar parameter lies outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Two measures cannot be index-coupled (different sizes or weights).
class CouplingError : public Error {
 public:
  using Error::Error;
};

/// A coefficient model produced a non-finite value.
class ModelEvaluationError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Requested storage exceeds the configured memory cap.
class MemoryCapError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A particle state became non-finite or exceeded the blow-up threshold.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, std::size_t step, std::size_t particle,
              std::vector<double> snapshot)
      : Error(what), step_(step), particle_(particle), snapshot_(std::move(snapshot)) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t particle() const noexcept { return particle_; }
  const std::vector<double>& snapshot() const noexcept { return snapshot_; }

 private:
  std::size_t step_;
  std::size_t particle_;
  std::vector<double> snapshot_;
};

}  // namespace mvsde
