// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Steady states of the driven inelastic equation by two independent routes:
// time-averaged particle simulation and deterministic marching on the radial
// grid with the collision tensors.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "granbath/collision_tensor.hpp"
#include "granbath/density.hpp"
#include "granbath/dsmc.hpp"
#include "granbath/kinetics.hpp"
#include "granbath/radial_grid.hpp"

namespace granbath {

class SteadyStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SandwichReport {
  bool passed = false;
  std::string reason;
  double theta_lower = 0.0, theta_upper = 0.0;
  double mass_lower = 0.0, mass_upper = 0.0;  // amplitudes of the enveloping Gaussians
  double theta_eff = 0.0;                     // energy / 3
  double tail_slope = 0.0, core_slope = 0.0;  // d log F / d r^2 on the outer and inner quarter
  double r_min = 0.0, r_max = 0.0;            // resolved range
  std::size_t points = 0;
  double lower(double r) const;
  double upper(double r) const;
  nlohmann::json to_json() const;
};

struct SteadyStateResult {
  std::string route;  // "dsmc" or "deterministic"
  double alpha = 1.0;
  RadialGrid grid;
  DensityEstimate F;          // shell masses on the grid shells
  Eigen::VectorXd nodal;      // mass_k / w_k
  std::vector<double> mass_se;  // per shell (zero for the deterministic route)
  double residual = 0.0;        // X-norm of Q(F, F) + L F
  double residual_tol = 0.0;
  double noise_floor = 0.0;     // expected X-norm of the estimator noise
  double energy = 0.0, energy_se = 0.0;
  double x_to_M = 0.0, y_to_M = 0.0;
  double a = 0.5;
  bool converged = false;
  nlohmann::json info;  // route specific diagnostics
  SandwichReport sandwich;

  std::vector<double> masses() const { return F.masses(); }
  nlohmann::json to_json() const;
  /// r, F(r), lower and upper envelope per node.
  std::string profile_csv() const;
};

struct DsmcSteadyOptions {
  double dt = 0.05;
  double sample_every = 0.25;
  std::size_t batches = 20;
  int max_extensions = 4;
  int workers = 1;
  std::size_t residual_samples = 200000;
  double a = 0.5;
};

/// Time-averaged histogram over [T_burn, T_burn + T_avg] from a bath start.
/// The burn-in is extended while the energy still drifts at 3 sigma or is
/// shorter than five energy correlation times.
SteadyStateResult steady_dsmc(const RestitutionParams& params, const BathMaxwellian& M, std::size_t N, double T_burn,
                              double T_avg, std::uint64_t seed, const RadialGrid& grid,
                              const DsmcSteadyOptions& opts = {});

struct DeterministicOptions {
  double max_time = 200.0;
  double a = 0.5;
  int workers = 1;
  TensorOptions tensor{};
  std::string cache_dir;  // tensor cache; empty = no caching
  std::optional<Eigen::VectorXd> initial;  // nodal values; default bath Maxwellian
};

/// Explicit marching of the shell masses with the well-balanced bath correction
/// (the discrete bath Maxwellian is an exact fixed point at alpha = 1).
SteadyStateResult steady_deterministic(const RadialGrid& grid, const RestitutionParams& params,
                                       const BathMaxwellian& M, double dt, double tol,
                                       const DeterministicOptions& opts = {});

/// Gaussian envelopes of a positive radial profile over the range where it is
/// resolved above ten times its noise floor. `floor` is per node (density units).
SandwichReport sandwich_check(const RadialGrid& grid, const Eigen::VectorXd& F, const std::vector<double>& floor);
SandwichReport sandwich_check(const SteadyStateResult& result);

/// Shell masses of the bath on the grid shells.
std::vector<double> bath_shell_masses(const RadialGrid& grid, const BathMaxwellian& M);

/// Merges `factor` consecutive shells; representative speed is the middle node.
DensityEstimate coarsen(const RadialGrid& grid, const std::vector<double>& masses, std::size_t factor);

struct CrossRoute {
  double x_distance = 0.0;
  double tolerance = 0.0;
  bool agree = false;
};
/// Compares two results on shells coarsened by `factor`.
CrossRoute compare_routes(const SteadyStateResult& a, const SteadyStateResult& b, std::size_t factor, double target);

struct LimitRow {
  double alpha = 1.0;
  double x = 0.0, y = 0.0;
  double floor = 0.0;
};
struct LimitCurve {
  std::string route;
  std::vector<LimitRow> rows;
  double spearman_x = 0.0, spearman_y = 0.0;
  bool strictly_decreasing = false;
  bool limit_at_floor = false;
  double intercept = 0.0, intercept_ci = 0.0;
  bool flagged = false;
  nlohmann::json to_json() const;
};

struct LimitResources {
  RadialGrid grid;
  // deterministic
  double dt = 0.05, tol = 1e-10;
  // dsmc
  std::size_t N = 100000;
  double T_burn = 10.0, T_avg = 100.0;
  std::uint64_t seed = 1;
  int workers = 1;
  double a = 0.5;
};

/// Distances of F_alpha to the bath over an alpha list (at least four values
/// below one; alpha = 1 is added when missing).
LimitCurve elastic_limit_curve(std::vector<double> alphas, const std::string& route, const BathMaxwellian& M,
                               const LimitResources& res);
LimitCurve limit_curve_from(const std::vector<SteadyStateResult>& results, const std::string& route);

}  // namespace granbath
