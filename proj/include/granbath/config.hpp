// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration. Files are flat `key = value` lines; `#` starts a
// comment, blank lines are ignored, keys may appear once. Lists are comma or
// space separated. Every key can be overridden from the command line.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "granbath/dsmc.hpp"
#include "granbath/kinetics.hpp"

namespace granbath {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string experiment = "simulate";  // simulate | steady | spectrum | entropy | sweep | converge

  // physics
  double alpha = 1.0;
  std::vector<double> alphas;  // sweep, spectrum; empty = {alpha}
  Velocity u0 = Velocity::Zero();
  double theta0 = 1.0;
  double a = 0.5;
  InitialSpec initial = [] {
    InitialSpec s;
    s.theta = 2.0;
    return s;
  }();
  bool initial_steady = false;  // initial = steady: sample the computed steady state

  // particles
  std::size_t N = 100000;
  double dt = 0.05;
  double T = 10.0;
  double sample_every = 0.05;
  std::size_t samples = 20000;  // Monte Carlo draws per functional evaluation
  std::size_t bins = 40;        // entropy histogram shells on [0, 8 sqrt(theta0)]
  double T_burn = 10.0;
  double T_avg = 100.0;

  // grid
  std::size_t grid_n = 64;
  double R_max = 8.0;
  double det_dt = 0.05;
  double tol = 1e-10;
  double diss_a = 2.0;  // weight exponent of the dissipativity check
  std::string route = "both";  // steady: dsmc | deterministic | both
  std::size_t coarsen = 4;
  double cross_target = 3e-2;
  std::string tensor_cache;

  std::uint64_t seed = 1;
  int workers = 1;
  std::string outdir = "runs";

  /// Applies one key; throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Range checks; throws ConfigError naming the offending key.
  void validate() const;
  std::vector<double> alpha_list() const;
  BathMaxwellian bath() const { return {u0, theta0}; }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Hash of the resolved configuration without outdir and workers.
  std::string hash() const;

  static const std::vector<std::string>& keys();
};

/// Parses config text; `origin` names the source in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);

}  // namespace granbath
