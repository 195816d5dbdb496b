// SPDX-License-Identifier: Apache-2.0
#include "qpspec/error.hpp"

namespace qpspec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kSingularGeometry: return "singular-geometry";
    case ErrorKind::kEmptyPencil: return "empty-pencil";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kInvalidCoefficient: return "invalid-coefficient";
    case ErrorKind::kEmptyEstimator: return "empty-estimator";
    case ErrorKind::kNearSingularCoalesce: return "near-singular-coalesce";
    case ErrorKind::kApproximantTooFine: return "approximant-too-fine";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace qpspec
