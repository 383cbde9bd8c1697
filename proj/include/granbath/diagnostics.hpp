// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Histogram estimates of an ensemble and the entropy functionals built on
// them: relative entropy to the bath, the two entropy productions, the
// inelastic energy term, the entropy balance and decay-constant fits.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "granbath/density.hpp"
#include "granbath/dsmc.hpp"
#include "granbath/kinetics.hpp"

namespace granbath {

struct GridSpec {
  enum class Kind { Radial, Cartesian };
  Kind kind = Kind::Radial;
  // radial: explicit edges win; otherwise `bins` equal shells on [0, R]
  std::vector<double> edges;
  std::size_t bins = 0;  // 0 = ceil(N^{1/4})
  double R = 0.0;        // 0 = 8 sqrt(theta_ref)
  double theta_ref = 1.0;
  Velocity center = Velocity::Zero();
  // cartesian
  Velocity lower = Velocity::Constant(-4.0);
  double spacing = 0.5;
  std::array<int, 3> dims{16, 16, 16};

  /// Radial edges this spec resolves to for an ensemble of size N.
  std::vector<double> radial_edges(std::size_t N) const;
};

/// Histogram of the ensemble. Radial estimates carry an anisotropy score and
/// the escaped mass; more than 1e-3 escaped mass means the grid is too small.
DensityEstimate density_estimate(const Ensemble& ens, const GridSpec& spec);
DensityEstimate density_estimate(const std::vector<Velocity>& v, const GridSpec& spec);

/// |mean direction| + Frobenius distance of the direction second moment from I/3.
/// Of order N^{-1/2} for an isotropic sample, O(1) for a beam.
double anisotropy_score(const std::vector<Velocity>& v, const Velocity& center);

constexpr double kCoverageTolerance = 1e-3;
inline bool coverage_ok(const DensityEstimate& f) { return f.escaped_mass <= kCoverageTolerance; }

/// Analytic bath mass of every bin. Radial estimates must be centred at u0.
std::vector<double> maxwellian_bin_masses(const DensityEstimate& f, const BathMaxwellian& M);

struct EntropyValue {
  double value = 0.0;
  std::size_t excluded_bins = 0;  // occupied bins with no representable bath mass
};
/// sum_k f_k log(f_k / M_k) over occupied bins.
EntropyValue relative_entropy(const DensityEstimate& f, const BathMaxwellian& M);
/// sum_k |f_k - M_k| over the bins plus the bath mass outside the grid.
double l1_distance_to_maxwellian(const DensityEstimate& f, const BathMaxwellian& M);

/// Weighted distances on radial estimates: sum |a_k - b_k| e^{a r_k} (and <r_k>).
double x_distance(const DensityEstimate& f, const std::vector<double>& masses, double a);
double y_distance(const DensityEstimate& f, const std::vector<double>& masses, double a);

struct MCValue {
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
  std::size_t resampled = 0;  // draws rejected because the integrand was undefined
};

/// log(f/M) from a histogram: log(f_k / M_k) on occupied bins, undefined elsewhere.
class LogRatio {
 public:
  LogRatio(const DensityEstimate& f, const BathMaxwellian& M);
  std::optional<double> operator()(const Velocity& v) const;
  /// Histogram density modulated by the bath inside each bin: M(v) f_k / M_k.
  std::optional<double> density(const Velocity& v) const;
  const DensityEstimate& estimate() const { return f_; }
  std::optional<std::size_t> bin(const Velocity& v) const { return f_.bin_of(v); }
  const std::vector<double>& bath_masses() const { return Mk_; }

 private:
  DensityEstimate f_;
  BathMaxwellian M_;
  std::vector<double> Mk_;
  std::vector<double> psi_;
  std::vector<char> defined_;
};

/// Entropy production of the bath operator, -int L f log(f/M), by sampling
/// (particle, bath partner, direction).
MCValue entropy_production_D(const Ensemble& ens, const BathMaxwellian& M, const LogRatio& psi, std::size_t n_pairs,
                             std::uint64_t seed);

using DensityFn = std::function<std::optional<double>(const Velocity&)>;

/// (1/2) E_{ff} |q| E_sigma [X - log X - 1], X = g(v')g(w') / (g(v)g(w)), with pairs
/// drawn from the ensemble.
MCValue entropy_production_DH(const Ensemble& ens, const RestitutionParams& params, const DensityFn& g,
                              std::size_t n_triples, std::uint64_t seed);
MCValue entropy_production_DH(const Ensemble& ens, const RestitutionParams& params, const LogRatio& psi,
                              std::size_t n_triples, std::uint64_t seed);

/// E_{ff} |v - w|^p over distinct pairs.
MCValue pair_speed_moment(const Ensemble& ens, double p, std::size_t n_pairs, std::uint64_t seed);

/// ((1 - alpha^2) / (16 theta0)) E_{ff} |v - w|^3.
MCValue qlogM_term(const Ensemble& ens, const RestitutionParams& params, const BathMaxwellian& M,
                   std::size_t n_pairs, std::uint64_t seed);

struct IdentityCheck {
  MCValue lhs;  // int Q(g, g) log g
  MCValue rhs;  // -D_H + (1 - alpha^2) / (2 alpha^2) E|q|
  double residual = 0.0;  // studentized
  bool passed = false;
};
IdentityCheck entropy_identity_check(const Ensemble& ens, const RestitutionParams& params, const DensityFn& g,
                                     std::size_t n_samples, std::uint64_t seed);

/// Everything the entropy balance needs at one sample time.
struct EntropySample {
  double t = 0.0;
  double H = 0.0;
  MCValue D, DH, pair_speed, qlogM;
  double energy = 0.0;
  // exact generator of the histogram entropy minus its first-order part
  double finite_n_drift = 0.0;
  double finite_n_se = 0.0;
  // variance per unit time of the histogram entropy under the jump dynamics
  double jump_variance_rate = 0.0;
  double collision_rate = 0.0;  // per particle
  std::size_t occupied_bins = 0;
  std::size_t N = 0;

  double rhs(double alpha) const;
  double rhs_se(double alpha) const;
};

EntropySample entropy_sample(const Ensemble& ens, const RestitutionParams& params, const BathMaxwellian& M,
                             const GridSpec& grid, std::size_t n_pairs, std::uint64_t seed);

struct BalanceInterval {
  double t0 = 0.0, t1 = 0.0;
  double dHdt = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  double z = 0.0;
};
struct BalanceReport {
  std::vector<BalanceInterval> intervals;
  double fraction_within_3 = 0.0;
  bool undersampled = false;
  std::string guidance;
};
/// Compares finite differences of H with the averaged right-hand side. Refuses
/// (undersampled = true, no intervals) when particles collide more than 0.5
/// times per sampling interval.
BalanceReport entropy_balance(const std::vector<EntropySample>& trajectory, const RestitutionParams& params);

struct LambdaFit {
  double lambda = 0.0, lambda_ci = 0.0;
  double amplitude = 0.0;
  double plateau = 0.0, plateau_ci = 0.0;  // after removing the floor
  double K = 0.0, K_ci = 0.0;              // plateau / (1 - alpha); 0 at alpha = 1
  double efoldings = 0.0;
  std::size_t transient_points = 0;
  bool failed = false;
  std::string message;
  nlohmann::json to_json() const;
};
/// Fits H(t) ~ A e^{-lambda t} + P. `floor` is subtracted from the plateau
/// (estimator bias of the histogram entropy).
LambdaFit lambda_fit(const std::vector<double>& t, const std::vector<double>& H, double alpha, double floor = 0.0);

struct InterpolationCheck {
  bool holds = false;
  bool inconclusive = false;
  double norm_X = 0.0, norm_Y = 0.0;
  double C = 0.0;
  double bound = 0.0;   // C ||f||_X^{1 - eps}
  double margin = 0.0;  // bound - ||f||_Y
  double ratio = 0.0;   // bound / ||f||_Y
};
/// ||f||_Y <= C ||f||_X^{1-eps} with C the (1/eps)-th weighted moment to the power eps.
InterpolationCheck interpolation_check(const DensityEstimate& f, double eps, const WeightSpec& weights);
InterpolationCheck interpolation_check(const DensityEstimate& f, double eps, const WeightSpec& weights, double C);

struct EntropyRow {
  double t = 0.0, H = 0.0, D = 0.0, D_se = 0.0, DH = 0.0, DH_se = 0.0, qlogM = 0.0, E = 0.0;
  double normX_to_M = 0.0, normX_to_Falpha = 0.0;
};
struct EntropyReport {
  double alpha = 1.0;
  std::vector<EntropyRow> rows;
  LambdaFit fit;
  BalanceReport balance;
  double normY_to_M_final = 0.0;
  std::string csv() const;
  nlohmann::json summary() const;
};

}  // namespace granbath
