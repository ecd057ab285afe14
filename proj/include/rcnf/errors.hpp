#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rcnf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, inconsistent shapes, out-of-range configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Blow-ups, factorization failures and other numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A trajectory left the representable range. Carries where it happened.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t trajectory, std::size_t step, const std::string& what)
      : NumericalError(what), trajectory_(trajectory), step_(step) {}

  std::size_t trajectory() const noexcept { return trajectory_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t trajectory_;
  std::size_t step_;
};

}  // namespace rcnf
