// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qpspec {

enum class ErrorKind {
  kInvalidArgument,
  kSingularGeometry,
  kEmptyPencil,
  kConvergence,
  kInvalidCoefficient,
  kEmptyEstimator,
  kNearSingularCoalesce,
  kApproximantTooFine,
  kConfig,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Error(ErrorKind kind, const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), kind_(kind), residuals_(std::move(residuals)) {}

  ErrorKind kind() const { return kind_; }
  // Best residuals reached before giving up (convergence errors only).
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  ErrorKind kind_;
  std::vector<double> residuals_;
};

}  // namespace qpspec
