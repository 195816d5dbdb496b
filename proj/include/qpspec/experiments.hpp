// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qpspec/config.hpp"
#include "qpspec/rq_validate.hpp"
#include "qpspec/supercell.hpp"
#include "qpspec/transfer_diag.hpp"

namespace qpspec {

struct RunOptions {
  std::string out_dir = "out";
  int threads = 1;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  bool quiet = false;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SolveRecord {
  int N = 0;
  std::size_t n_modes = 0;
  std::size_t n_deflated = 0;
  std::string method;
  int restarts = 0;
  std::vector<double> lambdas;
  std::vector<double> residuals;
};

struct SolveResult {
  std::vector<SolveRecord> runs;
  std::vector<CheckResult> checks;
};

struct TableRow {
  int N = 0;
  int index = 0;        // position in the sorted embedded spectrum
  double overlap = 1.0; // with the branch vector at the next larger N
  RQEstimate estimate;
  BoundReport bound;
};

struct ValidateResult {
  std::vector<TableRow> rows;  // ascending N
  std::vector<CheckResult> checks;
};

struct SmoothRow {
  double tau = 0.0;
  int index = 0;
  RQEstimate estimate;  // validated against the sharp coefficient
  BoundReport bound;
  ShellSpectrum shells;
  std::size_t degenerate_gradient = 0;
};

struct SmoothResult {
  std::vector<SmoothRow> rows;  // config order
  std::vector<CheckResult> checks;
};

struct BandPoint {
  int k_index = 0;
  Eigen::VectorXd k;
  int index = 0;
  RQEstimate estimate;
  double nearest_rel = 0.0;  // to the finest supercell's folded bands
};

struct BandsResult {
  std::vector<BandPoint> points;
  std::vector<SupercellModel> supercells;
  std::vector<FoldedBandSet> folded;
  std::size_t finest = 0;  // supercell used for the envelope comparison
  std::size_t within = 0;
  double fraction_within = 0.0;
  double median_rel = 0.0;
  std::vector<std::string> errors;  // per-k failures of the projected pipeline
  std::vector<CheckResult> checks;
};

struct ChainReport {
  int start = 0;
  bool coalesced = false;
  std::string error;
  double product_rel_error = 0.0;
  StabilityReport stability;
  std::complex<double> direct_ratio{0.0, 0.0};  // u_n / u_{n+1}
};

struct DiagnoseResult {
  int N = 0;
  int index = 0;
  double lambda_tilde = 0.0;
  double min_abs_ratio = 0.0;
  double max_abs_ratio = 0.0;
  std::size_t gaps = 0;
  double recurrence_deviation = 0.0;  // within the first window
  std::vector<ChainReport> chains;    // 1D only
  std::optional<FivePointRatios> five_point;  // 2D only
  std::vector<CheckResult> checks;
};

SolveResult cmd_solve(const ExperimentConfig& cfg, const RunOptions& opts);
ValidateResult cmd_validate(const ExperimentConfig& cfg, const RunOptions& opts);
SmoothResult cmd_smooth_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
BandsResult cmd_bands(const ExperimentConfig& cfg, const RunOptions& opts);
DiagnoseResult cmd_diagnose(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace qpspec
