#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace refwalk {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or an inconsistent graph/oracle/map description.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A linear solve that did not reach its residual target.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Level escalation ran out of budget before successive levels agreed.
class NotCauchyError : public Error {
 public:
  NotCauchyError(const std::string& what, int level_low, int level_high,
                 std::vector<double> previous, std::vector<double> last, double gap)
      : Error(what + " (levels " + std::to_string(level_low) + "->" + std::to_string(level_high) +
              ", gap " + std::to_string(gap) + ")"),
        level_low_(level_low),
        level_high_(level_high),
        previous_(std::move(previous)),
        last_(std::move(last)),
        gap_(gap) {}

  int level_low() const noexcept { return level_low_; }
  int level_high() const noexcept { return level_high_; }
  const std::vector<double>& previous() const noexcept { return previous_; }
  const std::vector<double>& last() const noexcept { return last_; }
  double gap() const noexcept { return gap_; }

 private:
  int level_low_;
  int level_high_;
  std::vector<double> previous_;
  std::vector<double> last_;
  double gap_;
};

/// Internal invariant violated (e.g. a harmonic measure that does not sum to one).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Covariance with a materially negative eigenvalue.
class CovarianceError : public Error {
 public:
  CovarianceError(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// A simulation or sampler exceeded its step budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or its contents do not parse.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace refwalk
