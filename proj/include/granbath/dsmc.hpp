// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stochastic particle integrator for the homogeneous inelastic Boltzmann
// equation driven by an elastic thermal bath.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "granbath/kinetics.hpp"
#include "granbath/rng.hpp"

namespace granbath {

/// Raised when the simulation produces non-finite state.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitialSpec {
  enum class Kind { Maxwellian, Mixture, Shell, Ball };
  Kind kind = Kind::Maxwellian;
  Velocity u = Velocity::Zero();
  double theta = 1.0;
  // mixture: weight * M(u, theta) + (1 - weight) * M(u2, theta2)
  Velocity u2 = Velocity::Zero();
  double theta2 = 4.0;
  double weight = 0.5;
  double radius = 1.0;  // shell and ball

  static Kind parse_kind(const std::string& name);
  static std::string kind_name(Kind kind);
  void validate() const;
  Velocity mean() const;
  /// E |v|^2 under the initial law.
  double energy() const;
};

struct Ensemble {
  std::vector<Velocity> v;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  Rng rng;

  std::size_t size() const { return v.size(); }
  double weight() const { return 1.0 / static_cast<double>(v.size()); }
};

Ensemble init_ensemble(const InitialSpec& spec, std::size_t N, std::uint64_t seed);

Velocity sample_bath_partner(const BathMaxwellian& M, Rng& rng);

/// Rate bounds used for thinning. Refreshed from the ensemble at every step.
struct MajorantConfig {
  double lambda_self = 0.0;
  double lambda_bath = 0.0;
  double safety = 1.2;
  // certificate radii: every particle must stay within these of the centres
  Velocity centre = Velocity::Zero();
  double radius_self = 0.0;
  double radius_bath = 0.0;

  void refresh(const std::vector<Velocity>& v, const BathMaxwellian& M);
};

struct StepReport {
  std::uint64_t proposed_self = 0, accepted_self = 0;
  std::uint64_t proposed_bath = 0, accepted_bath = 0;
  double rate_self = 0.0;  // accepted per particle per unit time
  double rate_bath = 0.0;
  double energy_dissipated = 0.0;  // per particle, >= 0
  double wall_time = 0.0;
  int majorant_violations = 0;
  int substeps = 1;
  bool low_acceptance = false;
};

/// One accepted collision, reported to an optional observer.
struct CollisionRecord {
  bool bath = false;
  Velocity v, w, sigma;  // pre-collision particle, partner, direction
  Velocity v_out, w_out;
};

struct DsmcConfig {
  RestitutionParams params{1.0};
  BathMaxwellian bath{};
  bool self_channel = true;
  bool bath_channel = true;
  double safety = 1.2;
  double dt_ceiling = 0.5;  // expected candidate events per particle per substep
  int workers = 1;
  std::function<void(const CollisionRecord&)> observer;  // forces sequential application
};

StepReport step(Ensemble& ens, double dt, const DsmcConfig& cfg);

struct Hook {
  std::uint64_t every = 1;  // steps
  std::function<void(const Ensemble&, const StepReport&)> fn;
};

struct RunOptions {
  double T_final = 0.0;  // duration of this run segment
  double dt = 0.01;
  std::vector<Hook> hooks;
  std::uint64_t checkpoint_every = 0;  // steps, 0 = never
  std::string checkpoint_path;
  std::string config_hash;
  std::string forensic_path = "nan_dump.json";
};

/// Number of steps needed for a duration; rejects non-integral multiples.
std::uint64_t step_count(double T, double dt);

std::vector<StepReport> run(Ensemble& ens, const RunOptions& opts, const DsmcConfig& cfg);

struct Moments {
  Velocity momentum = Velocity::Zero();
  double energy = 0.0;
  double p_moment = 0.0;
  double p = 3.0;
};
Moments moments(const Ensemble& ens, double p = 3.0);

struct ExpMoment {
  double value = 1.0;
  double log_value = 0.0;
  double top10_share = 0.0;
  bool unreliable = false;
};
ExpMoment exp_moment(const Ensemble& ens, double r, double s);

}  // namespace granbath
