// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense discretizations of the linearized operators on the isotropic sector:
// the bath scattering operator L, the linearized self-collision part T_alpha,
// their sum, the A/B splitting, and spectral / semigroup diagnostics.
//
// Matrices act on nodal values f_i of a radial density; the mass of f is
// sum_i w_i f_i.
#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "granbath/collision_tensor.hpp"
#include "granbath/kinetics.hpp"
#include "granbath/radial_grid.hpp"

namespace granbath {

struct OperatorMatrix {
  Eigen::MatrixXd A;
  RadialGrid grid;
  std::string tag;  // L | T_alpha | L_alpha | A_alpha | B_alpha
  double alpha = 1.0;
  double a = 0.5;

  /// max_j |sum_i w_i A_ij| relative to max_j sum_i w_i |A_ij|.
  double column_mass_defect() const;
  /// Writes <prefix>.bin (row-major float64, little-endian) and <prefix>.json.
  void export_to(const std::string& prefix) const;
};

/// max |S - S^T| / max |S| for S = D L D^{-1}, D = diag(sqrt(w_i / M_i)).
/// Detailed balance makes the scattering matrix symmetric in this scaling.
double conjugated_symmetry_defect(const OperatorMatrix& L, const Eigen::VectorXd& M_nodal);

/// Induced norm Y -> X of a matrix for the discrete weighted l1 norms.
double norm_Y_to_X(const Eigen::MatrixXd& D, const RadialGrid& grid, double a);
/// Induced norm X -> X.
double norm_X_to_X(const Eigen::MatrixXd& D, const RadialGrid& grid, double a);

struct LAssembly {
  OperatorMatrix L;
  Eigen::MatrixXd K;         // gain part
  Eigen::VectorXd Sigma;     // diagonal used (discrete column sums)
  Eigen::VectorXd Sigma_exact;
  double zero_mode_residual = 0.0;      // |L M_h| / (|L| |M_h|)
  double raw_zero_mode_residual = 0.0;  // same with the exact Sigma on the diagonal
  double frequency_defect = 0.0;        // max |Sigma - Sigma_exact| / Sigma_exact for r <= R_max / 2
  bool flagged = false;
};

/// Nystrom discretization of L = K - Sigma. The diagonal is the discrete
/// column sum of K so mass is conserved exactly.
LAssembly assemble_L(const RadialGrid& grid, const KernelConstants& constants, std::size_t order = 48);

struct TAlphaParts {
  OperatorMatrix T;
  Eigen::MatrixXd K1, K2, K3;
  Eigen::VectorXd sigma;  // discrete column sums of K1
  double C_alpha = 0.0;
};

/// T_alpha h = Q(h, F) + Q(F, h) for nodal F on the grid. K1 uses the plane
/// (Abel) form of the gain kernel, K2 the collision tensor in weak form.
TAlphaParts assemble_T_alpha(const RadialGrid& grid, const Eigen::VectorXd& F, const RestitutionParams& params,
                             const CollisionTensor& tensor, std::size_t order = 48);
/// Same from a radial density estimate on the grid shells; rejects anisotropic
/// or non-normalized estimates.
TAlphaParts assemble_T_alpha(const RadialGrid& grid, const DensityEstimate& F, const RestitutionParams& params,
                             const CollisionTensor& tensor, std::size_t order = 48);

OperatorMatrix assemble_L_alpha(const LAssembly& L, const TAlphaParts& T);

struct Splitting {
  OperatorMatrix A, B;
  double R = 0.0;
  double identity_error = 0.0;  // max |A + B - L_alpha|
};

/// B = off-diagonal (K + K1 + K2) on columns with r_j > R, minus diag(Sigma + sigma); A = L_alpha - B.
Splitting assemble_splitting(const LAssembly& L, const TAlphaParts& T, double R);

struct DissipativityReport {
  double beta_star = 0.0;
  double worst_margin = 0.0;      // over the test battery, per unit Y-norm
  double certified_margin = 0.0;  // over all f: beta_max - beta_star
  double beta_max = 0.0;          // largest certified dissipation rate
  std::size_t tests = 0;
  bool passed = false;
  std::string advisory;
};

/// Checks sum_i sign(f_i) (B f)_i e^{a r_i} w_i <= -beta_star |f|_Y on coordinate
/// vectors, random sign vectors and smooth vectors, and the weighted-l1 bound
/// that covers every f.
DissipativityReport dissipativity_check(const OperatorMatrix& B, double beta_star, std::uint64_t seed = 1);

/// Discrete infima of Sigma / (1 + r) and sigma / (1 + r).
std::pair<double, double> frequency_infima(const LAssembly& L, const TAlphaParts& T);

struct SplittingCalibration {
  double R = 0.0;
  double beta_star = 0.0;
  DissipativityReport report;
  bool found = false;
};
/// Smallest R in `candidates` for which the elastic check passes at
/// beta_star = 0.9 (Sigma_inf + sigma_inf).
SplittingCalibration calibrate_splitting(const LAssembly& L, const TAlphaParts& T1, std::span<const double> candidates);

struct SpectralOptions {
  double a = 0.5;
  std::size_t vectors = 20;
  std::size_t samples = 60;
  double horizon = 5.0;  // in units of 1 / gap
  std::uint64_t seed = 11;
  bool semigroup = true;
};

struct SpectralReport {
  std::vector<std::complex<double>> eigenvalues;  // sorted by decreasing real part
  std::complex<double> lambda0;
  Eigen::VectorXd G;  // unit-mass zero mode
  bool G_positive = false;
  double zero_mode_residual = 0.0;
  double gap = 0.0;
  double second_gap = 0.0;  // distance to the next eigenvalue below the gap
  double mu_hat = 0.0;
  double C_mu = 0.0;
  double mass_leak = 0.0;
  double expm_error = 0.0;
  double projection_agreement = 0.0;
  double eigvec_condition = 0.0;
  bool defective = false;
  nlohmann::json to_json() const;
};

SpectralReport spectral_report(const OperatorMatrix& L_alpha, const SpectralOptions& opts = {});

struct DriftRow {
  double alpha = 1.0;
  double op_drift = 0.0;          // |L_alpha - L_1| (Y -> X)
  double gap = 0.0;
  double lambda0 = 0.0;           // |lambda_0(alpha)|
  double resolvent_drift = 0.0;   // at lambda = gap(1) / 2 on mass-zero vectors (X -> X)
  double projection_drift = 0.0;  // |G_alpha - G_1|_X
};

struct DriftTable {
  std::vector<DriftRow> rows;  // in the order given
  double rho_op = 0.0, rho_resolvent = 0.0, rho_projection = 0.0;  // Spearman against alpha
  double max_lambda0 = 0.0;
  nlohmann::json to_json() const;
};

/// `operators` holds L_alpha for each alpha in `alphas`; the entry with alpha = 1
/// is the reference.
DriftTable alpha_drift(const std::vector<double>& alphas, const std::vector<OperatorMatrix>& operators,
                       const SpectralOptions& opts = {});

}  // namespace granbath
