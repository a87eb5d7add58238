#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpms {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range user input (CLI exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A precondition of a call was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach its tolerance (CLI exit code 3).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Requested geometry cannot be realized, e.g. a fluid phase pinches off (exit code 4).
class GeometryError : public Error {
 public:
  GeometryError(const std::string& what, std::vector<int> cells = {})
      : Error(what), cells_(std::move(cells)) {}
  const std::vector<int>& offending_cells() const { return cells_; }

 private:
  std::vector<int> cells_;
};

/// Surface mesh failed validation (exit code 5).
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Least-squares or linear system without a unique solution.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace tpms
