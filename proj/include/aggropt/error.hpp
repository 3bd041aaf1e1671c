#ifndef AGGROPT_ERROR_HPP
#define AGGROPT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aggropt {

/// Precondition violated by an argument (bad context, negative variance, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A logged record or input row failed validation.
/// `location()` is a record index for in-memory datasets and a 1-based line
/// number for files.
class DataValidationError : public std::runtime_error {
 public:
  DataValidationError(std::size_t location, const std::string& what)
      : std::runtime_error(what), location_(location) {}

  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

/// Invalid experiment or optimizer configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Gaussian approximation has zero variance, so the score is undefined.
class DegenerateDistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An ascent step produced a non-finite gradient or parameter.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace aggropt

#endif  // AGGROPT_ERROR_HPP
