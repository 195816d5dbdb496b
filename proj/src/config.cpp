// SPDX-License-Identifier: Apache-2.0
#include "qpspec/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qpspec/error.hpp"

namespace qpspec {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kConfig, "config " + where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

const json& need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, "missing key '" + std::string(key) + "'");
  return j.at(key);
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected true or false");
  return j.get<bool>();
}

Eigen::VectorXd vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i], where);
  return v;
}

template <typename T>
T opt(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const std::string w = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    return boolean(j.at(key), w);
  } else if constexpr (std::is_integral_v<T>) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(w, "expected a non-negative integer");
    return static_cast<T>(v.get<long long>());
  } else {
    return num(j.at(key), w);
  }
}

std::vector<TrigTerm> terms(const json& j, const std::string& where, int dim) {
  if (!j.is_array()) fail(where, "expected an array of terms");
  std::vector<TrigTerm> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    only_keys(j[i], w, {"fn", "index", "amp"});
    TrigTerm t;
    const json& fn = need(j[i], w, "fn");
    if (fn == "cos") {
      t.is_sine = false;
    } else if (fn == "sin") {
      t.is_sine = true;
    } else {
      fail(w + ".fn", "expected \"cos\" or \"sin\"");
    }
    const json& idx = need(j[i], w, "index");
    if (!idx.is_array() || static_cast<int>(idx.size()) != dim) {
      fail(w + ".index", "expected " + std::to_string(dim) + " integers");
    }
    for (const auto& v : idx) t.index.push_back(integer(v, w + ".index"));
    t.amp = num(need(j[i], w, "amp"), w + ".amp");
    out.push_back(std::move(t));
  }
  return out;
}

PeriodicCoefficient coefficient(const json& j, const ProjectionGeometry& geom, int* oversample) {
  const std::string w = "coefficient";
  if (!j.is_object()) fail(w, "expected an object");
  const json& kind = need(j, w, "kind");
  const int dim = geom.d_high;
  *oversample = 1;
  if (j.contains("oversample")) {
    *oversample = integer(j.at("oversample"), w + ".oversample");
    if (*oversample < 1) fail(w + ".oversample", "must be >= 1");
  }
  if (kind == "constant") {
    only_keys(j, w, {"kind", "value", "oversample"});
    return PeriodicCoefficient(ConstantCoefficient{num(need(j, w, "value"), w + ".value")}, dim, geom.T);
  }
  if (kind == "trig-sum") {
    only_keys(j, w, {"kind", "offset", "terms", "oversample"});
    TrigSumCoefficient f;
    f.offset = opt(j, "offset", 0.0, w);
    f.terms = terms(need(j, w, "terms"), w + ".terms", dim);
    return PeriodicCoefficient(f, dim, geom.T);
  }
  if (kind == "exp-trig") {
    only_keys(j, w, {"kind", "offset", "inner", "outer", "oversample"});
    ExpTrigCoefficient f;
    f.offset = opt(j, "offset", 0.0, w);
    f.inner = terms(need(j, w, "inner"), w + ".inner", dim);
    if (j.contains("outer")) f.outer = terms(j.at("outer"), w + ".outer", dim);
    return PeriodicCoefficient(f, dim, geom.T);
  }
  if (kind == "two-phase") {
    only_keys(j, w, {"kind", "threshold", "eps_a", "eps_b", "tau", "oversample"});
    TwoPhaseCoefficient f;
    f.threshold = opt(j, "threshold", f.threshold, w);
    f.eps_a = opt(j, "eps_a", f.eps_a, w);
    f.eps_b = opt(j, "eps_b", f.eps_b, w);
    f.tau = opt(j, "tau", f.tau, w);
    if (f.tau < 0.0) fail(w + ".tau", "must be >= 0");
    if (!(f.eps_a > 0.0 && f.eps_b > 0.0)) fail(w, "eps_a and eps_b must be positive");
    return PeriodicCoefficient(f, dim, geom.T);
  }
  fail(w + ".kind", "expected one of constant, trig-sum, exp-trig, two-phase");
}

ProjectionGeometry geometry(const json& j, std::string* label) {
  const std::string w = "geometry";
  only_keys(j, w, {"catalog", "rows", "periods"});
  try {
    if (j.contains("catalog")) {
      if (j.contains("rows") || j.contains("periods")) fail(w, "give either catalog or rows/periods");
      if (!j.at("catalog").is_string()) fail(w + ".catalog", "expected a string");
      *label = j.at("catalog").get<std::string>();
      return ProjectionGeometry::from_catalog(*label);
    }
    const json& rows = need(j, w, "rows");
    if (!rows.is_array() || rows.empty()) fail(w + ".rows", "expected a non-empty array of rows");
    const auto dh = static_cast<Eigen::Index>(rows.size());
    Eigen::Index dl = -1;
    Eigen::MatrixXd P;
    for (Eigen::Index m = 0; m < dh; ++m) {
      const Eigen::VectorXd r = vec(rows[static_cast<std::size_t>(m)], w + ".rows");
      if (dl < 0) {
        dl = r.size();
        P.resize(dh, dl);
      }
      if (r.size() != dl) fail(w + ".rows", "rows have different lengths");
      P.row(m) = r.transpose();
    }
    *label = "explicit";
    return ProjectionGeometry::make(P, vec(need(j, w, "periods"), w + ".periods"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(w, e.what());
  }
}

}  // namespace

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{
      "constant-analytics", "table1-1d",     "table1-2d",       "caption-1d", "caption-4d",
      "residual-bound",     "coalesce-chain", "smoothing-trend", "envelope-1d"};
  return names;
}

BlochVector ExperimentConfig::bloch() const {
  if (k_high) return *k_high;
  return lift_wavevector(*k_low, geometry);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "root", {"name", "geometry", "coefficient", "N", "k", "solver", "validation", "branch",
                        "smoothing", "bands", "diagnose", "outputs", "checks", "independence_bound",
                        "seed"});
  ExperimentConfig c;
  c.source = j.dump(2);
  if (j.contains("name")) {
    if (!j.at("name").is_string()) fail("name", "expected a string");
    c.name = j.at("name").get<std::string>();
  }
  c.geometry = geometry(need(j, "root", "geometry"), &c.geometry_label);
  c.coefficient = coefficient(need(j, "root", "coefficient"), c.geometry, &c.oversample);

  const json& N = need(j, "root", "N");
  if (N.is_array()) {
    for (const auto& v : N) c.N.push_back(integer(v, "N"));
  } else {
    c.N.push_back(integer(N, "N"));
  }
  if (c.N.empty()) fail("N", "expected at least one value");
  for (int v : c.N) {
    if (v < 1) fail("N", "values must be >= 1");
  }
  std::sort(c.N.begin(), c.N.end());
  if (std::adjacent_find(c.N.begin(), c.N.end()) != c.N.end()) fail("N", "duplicate values");

  const json& k = need(j, "root", "k");
  only_keys(k, "k", {"high", "low"});
  if (k.contains("high") == k.contains("low")) fail("k", "give exactly one of high or low");
  if (k.contains("high")) {
    c.k_high = vec(k.at("high"), "k.high");
    if (c.k_high->size() != c.geometry.d_high) fail("k.high", "length must match the torus dimension");
  } else {
    c.k_low = vec(k.at("low"), "k.low");
    if (c.k_low->size() != c.geometry.d_low) fail("k.low", "length must match the physical dimension");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    only_keys(s, "solver", {"n_eig", "tol", "max_iter", "dense_threshold"});
    c.solver.n_eig = opt(s, "n_eig", c.solver.n_eig, "solver");
    c.solver.tol = opt(s, "tol", c.solver.tol, "solver");
    c.solver.max_iter = opt(s, "max_iter", c.solver.max_iter, "solver");
    c.solver.dense_threshold = opt(s, "dense_threshold", c.solver.dense_threshold, "solver");
    if (c.solver.n_eig < 1) fail("solver.n_eig", "must be >= 1");
    if (!(c.solver.tol > 0.0)) fail("solver.tol", "must be positive");
  }
  if (j.contains("validation")) {
    const json& v = j.at("validation");
    only_keys(v, "validation", {"h", "n", "r0", "delta"});
    c.validation.h = opt(v, "h", c.validation.h, "validation");
    c.validation.n = opt(v, "n", c.validation.n, "validation");
    c.validation.delta = opt(v, "delta", c.validation.delta, "validation");
    if (v.contains("r0")) c.validation.r0 = vec(v.at("r0"), "validation.r0");
    if (!(c.validation.h > 0.0)) fail("validation.h", "must be positive");
    if (c.validation.n < 1) fail("validation.n", "must be >= 1");
    if (c.validation.delta < 0.0) fail("validation.delta", "must be >= 0");
  }
  // Default sizes: about 4e4 samples in 1D, 1e6 in 2D.
  if (c.geometry.d_low == 2 && !(j.contains("validation") && j.at("validation").contains("n"))) c.validation.n = 500;
  if (c.validation.r0.size() == 0) c.validation.r0 = Eigen::VectorXd::Zero(c.geometry.d_low);
  if (c.validation.r0.size() != c.geometry.d_low) fail("validation.r0", "length must match the physical dimension");

  if (j.contains("branch")) {
    const json& b = j.at("branch");
    only_keys(b, "branch", {"target", "index"});
    if (b.contains("target")) c.branch.target = num(b.at("target"), "branch.target");
    if (b.contains("index")) c.branch.index = opt(b, "index", 0, "branch");
  }
  if (j.contains("smoothing")) {
    const json& s = j.at("smoothing");
    only_keys(s, "smoothing", {"taus", "mode"});
    SmoothingConfig sc;
    const Eigen::VectorXd t = vec(need(s, "smoothing", "taus"), "smoothing.taus");
    sc.taus.assign(t.data(), t.data() + t.size());
    for (double v : sc.taus) {
      if (v < 0.0) fail("smoothing.taus", "values must be >= 0");
    }
    sc.mode = opt(s, "mode", 0, "smoothing");
    if (!c.coefficient.is_two_phase()) fail("smoothing", "needs a two-phase coefficient");
    c.smoothing = sc;
  }
  if (j.contains("bands")) {
    const json& b = j.at("bands");
    only_keys(b, "bands", {"path", "samples", "denominators", "n_bands", "lambda_min", "lambda_max",
                           "mesh_h", "max_unknowns"});
    BandsConfig bc;
    if (b.contains("path")) {
      if (!b.at("path").is_string()) fail("bands.path", "expected a string");
      bc.path = b.at("path").get<std::string>();
    }
    bc.samples = opt(b, "samples", bc.samples, "bands");
    bc.n_bands = opt(b, "n_bands", bc.n_bands, "bands");
    bc.lambda_min = opt(b, "lambda_min", bc.lambda_min, "bands");
    bc.lambda_max = opt(b, "lambda_max", bc.lambda_max, "bands");
    bc.mesh_h = opt(b, "mesh_h", bc.mesh_h, "bands");
    bc.max_unknowns = opt(b, "max_unknowns", bc.max_unknowns, "bands");
    const json& d = need(b, "bands", "denominators");
    if (!d.is_array() || d.empty()) fail("bands.denominators", "expected a list of lists");
    const std::size_t need_count = static_cast<std::size_t>(c.geometry.d_low) * (c.geometry.d_high - 1);
    for (const auto& row : d) {
      if (!row.is_array() || row.size() != need_count) {
        fail("bands.denominators", "each entry needs " + std::to_string(need_count) + " denominators");
      }
      std::vector<std::int64_t> q;
      for (const auto& v : row) {
        if (!v.is_number_integer() || v.get<long long>() < 1) fail("bands.denominators", "expected positive integers");
        q.push_back(v.get<std::int64_t>());
      }
      bc.denominators.push_back(std::move(q));
    }
    if (bc.samples < 1 || bc.n_bands < 1) fail("bands", "samples and n_bands must be >= 1");
    if (!(bc.lambda_max > bc.lambda_min)) fail("bands", "lambda_max must exceed lambda_min");
    c.bands = bc;
  }
  if (j.contains("diagnose")) {
    const json& d = j.at("diagnose");
    only_keys(d, "diagnose", {"window", "windows"});
    c.diagnose.window = opt(d, "window", c.diagnose.window, "diagnose");
    c.diagnose.windows = opt(d, "windows", c.diagnose.windows, "diagnose");
    if (c.diagnose.window < 2 || c.diagnose.windows < 1) fail("diagnose", "window >= 2 and windows >= 1");
  }
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    only_keys(o, "outputs", {"eigenvectors", "coefficient_grid", "samples", "field"});
    c.outputs.eigenvectors = opt(o, "eigenvectors", c.outputs.eigenvectors, "outputs");
    c.outputs.coefficient_grid = opt(o, "coefficient_grid", c.outputs.coefficient_grid, "outputs");
    c.outputs.samples = opt(o, "samples", c.outputs.samples, "outputs");
    c.outputs.field = opt(o, "field", c.outputs.field, "outputs");
  }
  if (j.contains("checks")) {
    const json& ch = j.at("checks");
    if (!ch.is_array()) fail("checks", "expected an array of names");
    for (const auto& v : ch) {
      if (!v.is_string()) fail("checks", "expected strings");
      const auto name = v.get<std::string>();
      const auto& known = known_checks();
      if (std::find(known.begin(), known.end(), name) == known.end()) fail("checks", "unknown check '" + name + "'");
      c.checks.push_back(name);
    }
  }
  c.independence_bound = opt(j, "independence_bound", c.independence_bound, "root");
  c.seed = opt(j, "seed", c.seed, "root");
  c.solver.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kConfig, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace qpspec
