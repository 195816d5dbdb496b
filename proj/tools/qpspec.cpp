// SPDX-License-Identifier: Apache-2.0
// Command-line driver. Exit codes: 0 ok, 2 config/io, 3 numerical, 4 --check failed.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpspec/config.hpp"
#include "qpspec/error.hpp"
#include "qpspec/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

int report(const std::vector<qpspec::CheckResult>& checks, bool check_mode) {
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.pass;
  }
  if (check_mode && checks.empty()) {
    std::cout << "no checks listed in the config\n";
  }
  return (check_mode && !ok) ? kExitCheck : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free spectral solver for quasiperiodic Helmholtz eigenproblems"};
  app.require_subcommand(1);

  std::string config_path;
  qpspec::RunOptions opts;
  bool check = false;
  long long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_flag("--check", check, "evaluate the acceptance checks named in the config; exit 4 on failure");
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed")->check(CLI::NonNegativeNumber);
    sub->add_flag("-q,--quiet", opts.quiet, "no progress messages");
  };
  auto* solve = app.add_subcommand("solve", "embedded eigenpairs for each N");
  auto* validate = app.add_subcommand("validate", "reconstruct and validate the tracked branch");
  auto* smooth = app.add_subcommand("smooth-sweep", "smoothing-width sweep for two-phase coefficients");
  auto* bands = app.add_subcommand("bands", "projected bands against supercell approximants");
  auto* diagnose = app.add_subcommand("diagnose", "ratio and transfer diagnostics on a validated branch");
  for (auto* s : {solve, validate, smooth, bands, diagnose}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);

  try {
    const qpspec::ExperimentConfig cfg = qpspec::load_config(config_path);
    if (*solve) return report(qpspec::cmd_solve(cfg, opts).checks, check);
    if (*validate) return report(qpspec::cmd_validate(cfg, opts).checks, check);
    if (*smooth) return report(qpspec::cmd_smooth_sweep(cfg, opts).checks, check);
    if (*bands) return report(qpspec::cmd_bands(cfg, opts).checks, check);
    if (*diagnose) return report(qpspec::cmd_diagnose(cfg, opts).checks, check);
  } catch (const qpspec::Error& e) {
    std::cerr << "error (" << qpspec::to_string(e.kind()) << "): " << e.what() << '\n';
    if (!e.residuals().empty()) {
      std::cerr << "best residuals:";
      for (double r : e.residuals()) std::cerr << ' ' << r;
      std::cerr << '\n';
    }
    const bool config = e.kind() == qpspec::ErrorKind::kConfig || e.kind() == qpspec::ErrorKind::kIo;
    return config ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
