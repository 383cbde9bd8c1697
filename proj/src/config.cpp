// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "granbath/manifest.hpp"

namespace granbath {

namespace {

const std::set<std::string> kExperiments{"simulate", "steady", "spectrum", "entropy", "sweep", "converge"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x)) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  // accept 1e5 style counts when they are exact integers
  const double x = to_double(key, v);
  if (x < 0.0 || x != std::floor(x) || x > 1.8e19) throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  std::uint64_t u = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, u);
  if (ec == std::errc() && p == end) return u;
  return static_cast<std::uint64_t>(x);
}

Velocity to_vec3(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 3) throw ConfigError(key + ": expected three components");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

bool multiple_of(double T, double dt) {
  const double k = T / dt;
  return std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k) && std::round(k) >= 1.0;
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k{
      "experiment", "alpha",   "alphas",       "u0",           "theta0",         "a",
      "initial",    "initial_u", "initial_theta", "initial_u2", "initial_theta2", "initial_weight",
      "initial_radius", "N",   "dt",           "T",            "sample_every",   "samples",
      "bins",       "T_burn",  "T_avg",        "grid_n",       "R_max",          "det_dt",
      "diss_a",     "tol",        "route",   "coarsen",      "cross_target", "tensor_cache",   "seed",
      "workers",    "outdir"};
  return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "experiment") experiment = v;
  else if (key == "alpha") alpha = to_double(key, v);
  else if (key == "alphas") {
    alphas.clear();
    for (const auto& w : split_list(v)) alphas.push_back(to_double(key, w));
    if (alphas.empty()) throw ConfigError("alphas: empty list");
  } else if (key == "u0") u0 = to_vec3(key, v);
  else if (key == "theta0") theta0 = to_double(key, v);
  else if (key == "a") a = to_double(key, v);
  else if (key == "initial") {
    initial_steady = v == "steady";
    if (initial_steady) return;
    try {
      initial.kind = InitialSpec::parse_kind(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("initial: ") + e.what());
    }
  } else if (key == "initial_u") initial.u = to_vec3(key, v);
  else if (key == "initial_theta") initial.theta = to_double(key, v);
  else if (key == "initial_u2") initial.u2 = to_vec3(key, v);
  else if (key == "initial_theta2") initial.theta2 = to_double(key, v);
  else if (key == "initial_weight") initial.weight = to_double(key, v);
  else if (key == "initial_radius") initial.radius = to_double(key, v);
  else if (key == "N") N = to_uint(key, v);
  else if (key == "dt") dt = to_double(key, v);
  else if (key == "T") T = to_double(key, v);
  else if (key == "sample_every") sample_every = to_double(key, v);
  else if (key == "samples") samples = to_uint(key, v);
  else if (key == "bins") bins = to_uint(key, v);
  else if (key == "T_burn") T_burn = to_double(key, v);
  else if (key == "T_avg") T_avg = to_double(key, v);
  else if (key == "grid_n") grid_n = to_uint(key, v);
  else if (key == "R_max") R_max = to_double(key, v);
  else if (key == "det_dt") det_dt = to_double(key, v);
  else if (key == "tol") tol = to_double(key, v);
  else if (key == "diss_a") diss_a = to_double(key, v);
  else if (key == "route") route = v;
  else if (key == "coarsen") coarsen = to_uint(key, v);
  else if (key == "cross_target") cross_target = to_double(key, v);
  else if (key == "tensor_cache") tensor_cache = v;
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "workers") workers = static_cast<int>(to_uint(key, v));
  else if (key == "outdir") outdir = v;
  else throw ConfigError("unknown key '" + key + "'");
}

std::vector<double> ExperimentConfig::alpha_list() const { return alphas.empty() ? std::vector<double>{alpha} : alphas; }

void ExperimentConfig::validate() const {
  require(kExperiments.count(experiment) == 1, "experiment",
          "must be one of simulate, steady, spectrum, entropy, sweep, converge");
  require(alpha > 0.0 && alpha <= 1.0, "alpha", "must lie in (0, 1]");
  for (double x : alphas) require(x > 0.0 && x <= 1.0, "alphas", "every entry must lie in (0, 1]");
  if (experiment == "sweep") {
    require(!alphas.empty(), "alphas", "sweep needs an alpha list");
    std::set<double> distinct(alphas.begin(), alphas.end());
    require(distinct.size() == alphas.size(), "alphas", "duplicate entries");
  }
  require(u0.allFinite(), "u0", "must be finite");
  require(theta0 > 0.0 && theta0 <= 1e6, "theta0", "must lie in (0, 1e6]");
  require(a > 0.0 && a <= 4.0, "a", "must lie in (0, 4]");
  try {
    initial.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("initial: ") + e.what());
  }
  require(N >= 2 && N <= 100000000, "N", "must lie in [2, 1e8]");
  require(dt > 0.0 && dt <= 1.0, "dt", "must lie in (0, 1]");
  require(T > 0.0 && T <= 1e6, "T", "must lie in (0, 1e6]");
  require(multiple_of(T, dt), "T", "must be a positive integer multiple of dt");
  require(multiple_of(sample_every, dt), "sample_every", "must be a positive integer multiple of dt");
  require(samples >= 1000 && samples <= 100000000, "samples", "must lie in [1e3, 1e8]");
  require(bins >= 4 && bins <= 10000, "bins", "must lie in [4, 1e4]");
  require(T_burn > 0.0 && multiple_of(T_burn, dt), "T_burn", "must be a positive integer multiple of dt");
  require(T_avg > 0.0 && multiple_of(T_avg, dt), "T_avg", "must be a positive integer multiple of dt");
  require(grid_n >= 16 && grid_n <= 1024, "grid_n", "must lie in [16, 1024]");
  require(R_max >= 4.0 * std::sqrt(theta0) && R_max <= 64.0 * std::sqrt(theta0), "R_max",
          "must lie in [4, 64] sqrt(theta0)");
  require(det_dt > 0.0 && det_dt <= 1.0, "det_dt", "must lie in (0, 1]");
  require(tol > 0.0 && tol < 1.0, "tol", "must lie in (0, 1)");
  require(diss_a > 0.0 && diss_a <= 4.0, "diss_a", "must lie in (0, 4]");
  require(route == "dsmc" || route == "deterministic" || route == "both", "route",
          "must be dsmc, deterministic or both");
  require(coarsen >= 1 && coarsen <= grid_n, "coarsen", "must lie in [1, grid_n]");
  require(cross_target > 0.0, "cross_target", "must be positive");
  require(workers >= 1 && workers <= 256, "workers", "must lie in [1, 256]");
  require(!outdir.empty(), "outdir", "must not be empty");
}

nlohmann::json ExperimentConfig::to_json() const {
  auto v3 = [](const Velocity& v) { return std::vector<double>{v.x(), v.y(), v.z()}; };
  return {{"experiment", experiment},
          {"alpha", alpha},
          {"alphas", alphas},
          {"u0", v3(u0)},
          {"theta0", theta0},
          {"a", a},
          {"initial", initial_steady ? std::string("steady") : InitialSpec::kind_name(initial.kind)},
          {"initial_u", v3(initial.u)},
          {"initial_theta", initial.theta},
          {"initial_u2", v3(initial.u2)},
          {"initial_theta2", initial.theta2},
          {"initial_weight", initial.weight},
          {"initial_radius", initial.radius},
          {"N", N},
          {"dt", dt},
          {"T", T},
          {"sample_every", sample_every},
          {"samples", samples},
          {"bins", bins},
          {"T_burn", T_burn},
          {"T_avg", T_avg},
          {"grid_n", grid_n},
          {"R_max", R_max},
          {"det_dt", det_dt},
          {"tol", tol},
          {"diss_a", diss_a},
          {"route", route},
          {"coarsen", coarsen},
          {"cross_target", cross_target},
          {"tensor_cache", tensor_cache},
          {"seed", seed},
          {"workers", workers},
          {"outdir", outdir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  for (const auto& [key, val] : j.items()) {
    std::string s;
    if (val.is_string()) {
      s = val.get<std::string>();
    } else if (val.is_array()) {
      for (const auto& x : val) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g ", x.get<double>());
        s += buf;
      }
      if (key == "alphas" && val.empty()) continue;
    } else if (val.is_number_float()) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", val.get<double>());
      s = buf;
    } else {
      s = val.dump();
    }
    c.set(key, s);
  }
  return c;
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("outdir");
  j.erase("workers");
  return fnv1a_hex(j.dump());
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      c.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace granbath
