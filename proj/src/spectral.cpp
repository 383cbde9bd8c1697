// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "granbath/manifest.hpp"
#include "granbath/rng.hpp"
#include "granbath/stats.hpp"

namespace granbath {

namespace {

constexpr double kPi = std::numbers::pi;
using Index = Eigen::Index;

Eigen::VectorXd x_weights(const RadialGrid& g, double a) {
  Eigen::VectorXd rho(static_cast<Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) rho[static_cast<Index>(i)] = std::exp(a * g.r[i]) * g.w[i];
  return rho;
}

double spectral_norm(const Eigen::MatrixXd& A) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()[0];
}

}  // namespace

double OperatorMatrix::column_mass_defect() const {
  const Eigen::VectorXd w = grid.weights();
  const Eigen::RowVectorXd mass = w.transpose() * A;
  const Eigen::RowVectorXd scale = w.transpose() * A.cwiseAbs();
  return mass.cwiseAbs().maxCoeff() / std::max(scale.maxCoeff(), 1e-300);
}

void OperatorMatrix::export_to(const std::string& prefix) const {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(A.size()) * sizeof(double));
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) {
      const double x = A(i, j);
      bytes.append(reinterpret_cast<const char*>(&x), sizeof x);
    }
  {
    std::ofstream os(prefix + ".bin", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + prefix + ".bin");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json j{{"tag", tag},
                   {"alpha", alpha},
                   {"a", a},
                   {"rows", A.rows()},
                   {"cols", A.cols()},
                   {"layout", "row-major float64 little-endian"},
                   {"grid", {{"n", grid.size()}, {"R_max", grid.R_max}, {"hash", grid.hash()}}},
                   {"checksum", fnv1a_hex(bytes)},
                   {"column_mass_defect", column_mass_defect()}};
  std::ofstream(prefix + ".json") << j.dump(2) << "\n";
}

double norm_Y_to_X(const Eigen::MatrixXd& D, const RadialGrid& g, double a) {
  const Eigen::VectorXd rho = x_weights(g, a);
  double best = 0.0;
  for (Index j = 0; j < D.cols(); ++j) {
    const double col = D.col(j).cwiseAbs().dot(rho);
    best = std::max(best, col / (rho[j] * std::sqrt(1.0 + g.r[static_cast<std::size_t>(j)] * g.r[static_cast<std::size_t>(j)])));
  }
  return best;
}

double norm_X_to_X(const Eigen::MatrixXd& D, const RadialGrid& g, double a) {
  const Eigen::VectorXd rho = x_weights(g, a);
  double best = 0.0;
  for (Index j = 0; j < D.cols(); ++j) best = std::max(best, D.col(j).cwiseAbs().dot(rho) / rho[j]);
  return best;
}

LAssembly assemble_L(const RadialGrid& grid, const KernelConstants& constants, std::size_t order) {
  const std::size_t n = grid.size();
  const Index N = static_cast<Index>(n);
  LAssembly out;
  out.K.resize(N, N);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.K(static_cast<Index>(i), static_cast<Index>(j)) =
          scattering_kernel_shell(grid.r[i], grid.r[j], constants, order) * grid.w[j] / (4.0 * kPi);
  const Eigen::VectorXd w = grid.weights();
  out.Sigma = (w.transpose() * out.K).transpose().cwiseQuotient(w);
  BathMaxwellian M(Velocity::Zero(), constants.theta0);
  out.Sigma_exact.resize(N);
  for (std::size_t i = 0; i < n; ++i) out.Sigma_exact[static_cast<Index>(i)] = collision_frequency_bath_radial(M, grid.r[i]);
  out.L.grid = grid;
  out.L.tag = "L";
  out.L.A = out.K;
  out.L.A.diagonal() -= out.Sigma;
  const Eigen::VectorXd Mh = grid.maxwellian(constants.theta0);
  out.zero_mode_residual = (out.L.A * Mh).norm() / (spectral_norm(out.L.A) * Mh.norm());
  Eigen::MatrixXd raw = out.K;
  raw.diagonal() -= out.Sigma_exact;
  out.raw_zero_mode_residual = (raw * Mh).norm() / (spectral_norm(raw) * Mh.norm());
  for (std::size_t i = 0; i < n; ++i)
    if (grid.r[i] <= 0.5 * grid.R_max)
      out.frequency_defect = std::max(out.frequency_defect, std::abs(out.Sigma[static_cast<Index>(i)] - out.Sigma_exact[static_cast<Index>(i)]) /
                                                                out.Sigma_exact[static_cast<Index>(i)]);
  out.flagged = out.zero_mode_residual > 1e-6;
  return out;
}

TAlphaParts assemble_T_alpha(const RadialGrid& grid, const Eigen::VectorXd& F, const RestitutionParams& params,
                             const CollisionTensor& tensor, std::size_t order) {
  const std::size_t n = grid.size();
  const Index N = static_cast<Index>(n);
  if (F.size() != N) throw std::invalid_argument("assemble_T_alpha: F does not match the grid");
  if (tensor.size() != n || tensor.alpha() != params.alpha())
    throw std::invalid_argument("assemble_T_alpha: collision tensor built for another grid or alpha");
  if ((F.array() < 0.0).any()) throw std::invalid_argument("assemble_T_alpha: F must be nonnegative");
  TAlphaParts out;
  out.C_alpha = gain_constant_C_alpha(params);
  const RadialProfile profile(grid.r, std::vector<double>(F.data(), F.data() + N));
  out.K1.resize(N, N);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.K1(static_cast<Index>(i), static_cast<Index>(j)) =
          gain_kernel_K1_shell(grid.r[i], grid.r[j], params, profile, out.C_alpha, order) * grid.w[j] / (4.0 * kPi);
  const Eigen::VectorXd w = grid.weights();
  out.sigma = (w.transpose() * out.K1).transpose().cwiseQuotient(w);
  // K2: F-particle on shell i, h-partner on shell j, outgoing shell k.
  out.K2 = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = grid.w[i] * F[static_cast<Index>(i)];
    if (fi == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const double* e = tensor.entries(i, j);
      const std::size_t k0 = tensor.first(i, j), c = tensor.count(i, j);
      const double coef = fi * grid.w[j];
      for (std::size_t t = 0; t < c; ++t) out.K2(static_cast<Index>(k0 + t), static_cast<Index>(j)) += coef * e[t];
    }
  }
  for (Index k = 0; k < N; ++k) out.K2.row(k) /= w[k];
  out.K3.resize(N, N);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      out.K3(static_cast<Index>(k), static_cast<Index>(j)) = F[static_cast<Index>(k)] * tensor.phi(k, j) * grid.w[j];
  out.T.grid = grid;
  out.T.tag = "T_alpha";
  out.T.alpha = params.alpha();
  out.T.A = out.K1 + out.K2 - out.K3;
  out.T.A.diagonal() -= out.sigma;
  return out;
}

TAlphaParts assemble_T_alpha(const RadialGrid& grid, const DensityEstimate& F, const RestitutionParams& params,
                             const CollisionTensor& tensor, std::size_t order) {
  if (F.anisotropy > 0.05) throw std::invalid_argument("assemble_T_alpha: density estimate is not isotropic");
  if (std::abs(F.total_mass() - 1.0) > 1e-6) throw std::invalid_argument("assemble_T_alpha: F must have unit mass");
  return assemble_T_alpha(grid, grid.from_density(F), params, tensor, order);
}

OperatorMatrix assemble_L_alpha(const LAssembly& L, const TAlphaParts& T) {
  OperatorMatrix out;
  out.grid = L.L.grid;
  out.tag = "L_alpha";
  out.alpha = T.T.alpha;
  out.A = L.L.A + T.T.A;
  return out;
}

Splitting assemble_splitting(const LAssembly& L, const TAlphaParts& T, double R) {
  const RadialGrid& g = L.L.grid;
  if (!(R >= 0.0) || R >= g.R_max) throw std::invalid_argument("assemble_splitting: R must lie inside the grid");
  Splitting s;
  s.R = R;
  const OperatorMatrix La = assemble_L_alpha(L, T);
  Eigen::MatrixXd gain = L.K + T.K1 + T.K2;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (g.r[j] <= R) gain.col(static_cast<Index>(j)).setZero();
  // the singular-cell gain stays in A so that diag(B) = -(Sigma + sigma)
  gain.diagonal().setZero();
  s.B.grid = g;
  s.B.tag = "B_alpha";
  s.B.alpha = T.T.alpha;
  s.B.A = gain;
  s.B.A.diagonal() -= L.Sigma + T.sigma;
  s.A.grid = g;
  s.A.tag = "A_alpha";
  s.A.alpha = T.T.alpha;
  s.A.A = La.A - s.B.A;
  s.identity_error = (s.A.A + s.B.A - La.A).cwiseAbs().maxCoeff();
  return s;
}

DissipativityReport dissipativity_check(const OperatorMatrix& B, double beta_star, std::uint64_t seed) {
  const RadialGrid& g = B.grid;
  const Index N = B.A.rows();
  const Eigen::VectorXd rho = x_weights(g, B.a);
  Eigen::VectorXd bracket(N);
  for (Index i = 0; i < N; ++i) bracket[i] = std::sqrt(1.0 + g.r[static_cast<std::size_t>(i)] * g.r[static_cast<std::size_t>(i)]);
  DissipativityReport rep;
  rep.beta_star = beta_star;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  auto test = [&](const Eigen::VectorXd& f) {
    const Eigen::VectorXd Bf = B.A * f;
    double form = 0.0, normY = 0.0;
    for (Index i = 0; i < N; ++i) {
      const double sg = f[i] > 0.0 ? 1.0 : (f[i] < 0.0 ? -1.0 : 0.0);
      form += sg * Bf[i] * rho[i];
      normY += std::abs(f[i]) * bracket[i] * rho[i];
    }
    if (normY <= 0.0) return;
    rep.worst_margin = std::min(rep.worst_margin, (-form - beta_star * normY) / normY);
    ++rep.tests;
  };
  for (Index j = 0; j < N; ++j) test(Eigen::VectorXd::Unit(N, j));
  Rng rng(mix_seed(seed, 77));
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd f(N);
    for (Index i = 0; i < N; ++i) f[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform() / (bracket[i] * rho[i]);
    test(f);
  }
  for (int t = 0; t < 30; ++t) {
    const double k = 0.2 + 3.0 * rng.uniform(), ph = 2.0 * kPi * rng.uniform(), b = B.a + 2.0 * rng.uniform();
    Eigen::VectorXd f(N);
    for (Index i = 0; i < N; ++i) {
      const double r = g.r[static_cast<std::size_t>(i)];
      f[i] = std::cos(k * r + ph) * std::exp(-b * r);
    }
    test(f);
  }
  // weighted l1 bound: sum_i sign(f_i)(Bf)_i rho_i <= sum_j |f_j| c_j <r_j> rho_j
  double worst_c = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < N; ++j) {
    double c = B.A(j, j) * rho[j];
    for (Index i = 0; i < N; ++i)
      if (i != j) c += std::abs(B.A(i, j)) * rho[i];
    worst_c = std::max(worst_c, c / (bracket[j] * rho[j]));
  }
  rep.beta_max = -worst_c;
  rep.certified_margin = rep.beta_max - beta_star;
  rep.passed = rep.certified_margin > 0.0 && rep.worst_margin > 0.0;
  if (!rep.passed) rep.advisory = "B is not beta*-dissipative at this R; increase R";
  return rep;
}

std::pair<double, double> frequency_infima(const LAssembly& L, const TAlphaParts& T) {
  const RadialGrid& g = L.L.grid;
  double s1 = std::numeric_limits<double>::infinity(), s2 = s1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s1 = std::min(s1, L.Sigma[static_cast<Index>(i)] / (1.0 + g.r[i]));
    s2 = std::min(s2, T.sigma[static_cast<Index>(i)] / (1.0 + g.r[i]));
  }
  return {s1, s2};
}

SplittingCalibration calibrate_splitting(const LAssembly& L, const TAlphaParts& T1, std::span<const double> candidates) {
  SplittingCalibration cal;
  const auto [s1, s2] = frequency_infima(L, T1);
  cal.beta_star = 0.9 * (s1 + s2);
  std::vector<double> Rs(candidates.begin(), candidates.end());
  std::sort(Rs.begin(), Rs.end());
  for (double R : Rs) {
    if (R >= L.L.grid.R_max) continue;
    Splitting sp = assemble_splitting(L, T1, R);
    sp.B.a = L.L.a;
    DissipativityReport rep = dissipativity_check(sp.B, cal.beta_star);
    cal.R = R;
    cal.report = rep;
    if (rep.passed) {
      cal.found = true;
      break;
    }
  }
  return cal;
}

nlohmann::json SpectralReport::to_json() const {
  nlohmann::json ev = nlohmann::json::array();
  for (std::size_t k = 0; k < std::min<std::size_t>(eigenvalues.size(), 12); ++k)
    ev.push_back({eigenvalues[k].real(), eigenvalues[k].imag()});
  return {{"lambda0", {lambda0.real(), lambda0.imag()}},
          {"gap", gap},
          {"second_gap", second_gap},
          {"mu_hat", mu_hat},
          {"C_mu", C_mu},
          {"mass_leak", mass_leak},
          {"expm_error", expm_error},
          {"projection_agreement", projection_agreement},
          {"zero_mode_residual", zero_mode_residual},
          {"G_positive", G_positive},
          {"eigvec_condition", eigvec_condition},
          {"defective", defective},
          {"leading_eigenvalues", ev},
          {"sector", "isotropic"}};
}

SpectralReport spectral_report(const OperatorMatrix& Lm, const SpectralOptions& opts) {
  const RadialGrid& g = Lm.grid;
  const Index N = Lm.A.rows();
  SpectralReport rep;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Lm.A);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_report: eigen-solve failed");
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();
  Index i0 = 0;
  for (Index k = 1; k < N; ++k)
    if (std::abs(lam[k]) < std::abs(lam[i0])) i0 = k;
  rep.lambda0 = lam[i0];
  std::vector<Index> order(static_cast<std::size_t>(N));
  for (Index k = 0; k < N; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return lam[a].real() > lam[b].real(); });
  for (Index k : order) rep.eigenvalues.push_back(lam[k]);
  double top = -std::numeric_limits<double>::infinity(), next = top;
  for (Index k : order) {
    if (k == i0) continue;
    if (lam[k].real() > top) {
      next = top;
      top = lam[k].real();
    } else if (lam[k].real() < top && lam[k].real() > next) {
      next = lam[k].real();
    }
  }
  rep.gap = -top;
  rep.second_gap = -next;
  const Eigen::VectorXd w = g.weights();
  rep.G = V.col(i0).real();
  rep.G /= w.dot(rep.G);
  rep.G_positive = rep.G.minCoeff() > -1e-12 * rep.G.cwiseAbs().maxCoeff();
  rep.zero_mode_residual = (Lm.A * rep.G).norm() / (spectral_norm(Lm.A) * rep.G.norm());

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto& sv = svd.singularValues();
  rep.eigvec_condition = sv[0] / sv[sv.size() - 1];
  rep.defective = !(rep.eigvec_condition < 1e12);

  const Eigen::MatrixXcd Vinv = V.inverse();
  Rng rng(mix_seed(opts.seed, 5));
  const Eigen::VectorXd Mh = g.maxwellian(1.0);
  auto random_vector = [&]() {
    Eigen::VectorXd f(N);
    for (Index i = 0; i < N; ++i) f[i] = rng.normal() * std::sqrt(Mh[i]);
    return f;
  };
  // rank-one projection two ways
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd f = random_vector();
    const Eigen::VectorXd Pe = (V.col(i0) * (Vinv.row(i0) * f.cast<std::complex<double>>())(0)).real();
    const Eigen::VectorXd Pm = w.dot(f) * rep.G;
    rep.projection_agreement = std::max(rep.projection_agreement, g.norm_X(Pe - Pm, opts.a) / g.norm_X(f, opts.a));
  }
  if (!opts.semigroup || !(rep.gap > 0.0)) return rep;

  const double T = opts.horizon / rep.gap;
  const double dt = T / static_cast<double>(opts.samples);
  const Eigen::MatrixXd E = (dt * Lm.A).exp();
  {
    Eigen::VectorXcd ex(N);
    for (Index k = 0; k < N; ++k) ex[k] = std::exp(lam[k] * dt);
    const Eigen::MatrixXd Er = (V * ex.asDiagonal() * Vinv).real();
    rep.expm_error = (Er - E).cwiseAbs().maxCoeff() / E.cwiseAbs().maxCoeff();
  }
  std::vector<double> rates;
  double C = 0.0;
  std::vector<std::vector<double>> logs;
  for (std::size_t v = 0; v < opts.vectors; ++v) {
    Eigen::VectorXd f = random_vector();
    f -= w.dot(f) * rep.G;
    const double n0 = g.norm_X(f, opts.a);
    std::vector<double> ts, ls;
    std::vector<double> norms;
    for (std::size_t s = 0; s <= opts.samples; ++s) {
      const double t = dt * static_cast<double>(s);
      const double nx = g.norm_X(f, opts.a);
      rep.mass_leak = std::max(rep.mass_leak, std::abs(w.dot(f)) / n0);
      norms.push_back(nx / n0);
      if (t >= 2.0 / rep.gap - 1e-12) {
        ts.push_back(t);
        ls.push_back(std::log(nx / n0));
      }
      f = E * f;
    }
    rates.push_back(-linear_fit(ts, ls).slope);
    logs.push_back(norms);
  }
  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end());
  rep.mu_hat = 0.5 * (sorted[(sorted.size() - 1) / 2] + sorted[sorted.size() / 2]);
  for (const auto& norms : logs)
    for (std::size_t s = 0; s < norms.size(); ++s)
      C = std::max(C, norms[s] * std::exp(rep.mu_hat * dt * static_cast<double>(s)));
  rep.C_mu = C;
  return rep;
}

nlohmann::json DriftTable::to_json() const {
  nlohmann::json rowsj = nlohmann::json::array();
  for (const auto& r : rows)
    rowsj.push_back({{"alpha", r.alpha},
                     {"op_drift", r.op_drift},
                     {"gap", r.gap},
                     {"lambda0", r.lambda0},
                     {"resolvent_drift", r.resolvent_drift},
                     {"projection_drift", r.projection_drift}});
  return {{"rows", rowsj},
          {"spearman_op", rho_op},
          {"spearman_resolvent", rho_resolvent},
          {"spearman_projection", rho_projection},
          {"max_lambda0", max_lambda0}};
}

DriftTable alpha_drift(const std::vector<double>& alphas, const std::vector<OperatorMatrix>& ops,
                       const SpectralOptions& opts) {
  if (alphas.size() != ops.size() || alphas.empty()) throw std::invalid_argument("alpha_drift: one operator per alpha");
  const auto ref = std::find(alphas.begin(), alphas.end(), 1.0);
  if (ref == alphas.end()) throw std::invalid_argument("alpha_drift: alpha = 1 reference missing");
  const OperatorMatrix& L1 = ops[static_cast<std::size_t>(ref - alphas.begin())];
  SpectralOptions eig = opts;
  eig.semigroup = false;
  const SpectralReport rep1 = spectral_report(L1, eig);
  const RadialGrid& g = L1.grid;
  const Index N = L1.A.rows();
  const double lambda = 0.5 * rep1.gap;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd R1 = (lambda * I - L1.A).partialPivLu().inverse();
  const Eigen::MatrixXd Pi = I - rep1.G * g.weights().transpose();
  DriftTable table;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    DriftRow row;
    row.alpha = alphas[k];
    const SpectralReport rep = spectral_report(ops[k], eig);
    row.gap = rep.gap;
    row.lambda0 = std::abs(rep.lambda0);
    row.op_drift = norm_Y_to_X(ops[k].A - L1.A, g, opts.a);
    const Eigen::MatrixXd Ra = (lambda * I - ops[k].A).partialPivLu().inverse();
    row.resolvent_drift = norm_X_to_X((Ra - R1) * Pi, g, opts.a);
    row.projection_drift = g.norm_X(rep.G - rep1.G, opts.a);
    table.max_lambda0 = std::max(table.max_lambda0, row.lambda0);
    table.rows.push_back(row);
  }
  std::vector<double> a, op, res, proj;
  for (const auto& r : table.rows) {
    a.push_back(r.alpha);
    op.push_back(r.op_drift);
    res.push_back(r.resolvent_drift);
    proj.push_back(r.projection_drift);
  }
  table.rho_op = spearman(a, op);
  table.rho_resolvent = spearman(a, res);
  table.rho_projection = spearman(a, proj);
  return table;
}

}  // namespace granbath

namespace granbath {

double conjugated_symmetry_defect(const OperatorMatrix& L, const Eigen::VectorXd& M_nodal) {
  const Eigen::VectorXd d = (L.grid.weights().array() / M_nodal.array()).sqrt();
  const Eigen::MatrixXd S = d.asDiagonal() * L.A * d.cwiseInverse().asDiagonal();
  const double scale = S.cwiseAbs().maxCoeff();
  return scale > 0.0 ? (S - S.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
}

}  // namespace granbath
