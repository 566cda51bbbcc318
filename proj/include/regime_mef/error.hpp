#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace regime_mef {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, misaligned series, violated preconditions.
/// The CLI maps this to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Design matrix without full column rank. `columns` names the columns that
/// the pivoted QR found to be linearly dependent on the others.
class RankDeficiencyError : public InputError {
 public:
  RankDeficiencyError(const std::string& what, std::vector<std::string> columns)
      : InputError(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// Numerical failure: an optimizer or EM run that did not converge, an
/// underflowing likelihood, a non-invertible optimum. Exit code 3 in the CLI.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace regime_mef
