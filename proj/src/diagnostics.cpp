// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "granbath/stats.hpp"

namespace granbath {

namespace {

// Welford accumulator.
struct Acc {
  std::size_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double se() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0; }
  MCValue value(std::size_t resampled = 0) const { return {mean, se(), n, resampled}; }
};

std::pair<std::size_t, std::size_t> distinct_pair(Rng& rng, std::size_t N) {
  const std::size_t i = rng.index(N);
  std::size_t j = rng.index(N - 1);
  if (j >= i) ++j;
  return {i, j};
}

void require_pairs(const Ensemble& ens) {
  if (ens.size() < 2) throw std::invalid_argument("diagnostics: ensemble needs at least two particles");
}

// Upper tail of |v - u0| under the bath.
double chi3_tail(double r, double theta) {
  if (r <= 0.0) return 1.0;
  return boost::math::gamma_q(1.5, r * r / (2.0 * theta));
}

// Gaussian mass of [lo, hi) for one axis, written to avoid cancellation in the tails.
double axis_mass(double lo, double hi, double mu, double theta) {
  const double s = std::sqrt(2.0 * theta);
  const double a = (lo - mu) / s, b = (hi - mu) / s;
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 1.0 - 0.5 * std::erfc(-a) - 0.5 * std::erfc(b);
}

double speed_of(const DensityEstimate& f, std::size_t k) {
  return f.kind() == DensityEstimate::Kind::Radial ? f.speeds()[k] : f.cell_center(k).norm();
}

// Change of the histogram entropy sum_k (c_k/N) log(c_k / (N M_k)) when the
// listed particles move between bins (npos = outside the grid).
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct Histogram {
  std::vector<double> counts;
  std::vector<double> Mk;
  double N = 1.0;

  double h(std::size_t k, double c) const {
    if (c <= 0.0 || Mk[k] <= 0.0) return 0.0;
    return c / N * std::log(c / (N * Mk[k]));
  }
  double jump(std::initializer_list<std::pair<std::size_t, std::size_t>> moves) const {
    std::array<std::pair<std::size_t, double>, 4> delta{};
    std::size_t used = 0;
    auto bump = [&](std::size_t k, double d) {
      if (k == npos) return;
      for (std::size_t u = 0; u < used; ++u)
        if (delta[u].first == k) {
          delta[u].second += d;
          return;
        }
      delta[used++] = {k, d};
    };
    for (const auto& [from, to] : moves) {
      if (from == to) continue;
      bump(from, -1.0);
      bump(to, 1.0);
    }
    double out = 0.0;
    for (std::size_t u = 0; u < used; ++u) {
      const auto [k, d] = delta[u];
      if (d != 0.0) out += h(k, counts[k] + d) - h(k, counts[k]);
    }
    return out;
  }
};

std::size_t bin_or_npos(const DensityEstimate& f, const Velocity& v) {
  const auto b = f.bin_of(v);
  return b ? *b : npos;
}

}  // namespace

std::vector<double> GridSpec::radial_edges(std::size_t N) const {
  if (!edges.empty()) return edges;
  std::size_t B = bins;
  if (B == 0) B = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(std::max<std::size_t>(N, 1)), 0.25)));
  B = std::max<std::size_t>(B, 1);
  const double Rr = R > 0.0 ? R : 8.0 * std::sqrt(theta_ref);
  std::vector<double> e(B + 1);
  for (std::size_t k = 0; k <= B; ++k) e[k] = Rr * static_cast<double>(k) / static_cast<double>(B);
  return e;
}

double anisotropy_score(const std::vector<Velocity>& v, const Velocity& center) {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Matrix3d T = Eigen::Matrix3d::Zero();
  std::size_t n = 0;
  for (const auto& x : v) {
    const Eigen::Vector3d d = x - center;
    const double r = d.norm();
    if (r == 0.0) continue;
    const Eigen::Vector3d u = d / r;
    m += u;
    T += u * u.transpose();
    ++n;
  }
  if (n == 0) return 0.0;
  m /= static_cast<double>(n);
  T /= static_cast<double>(n);
  T -= Eigen::Matrix3d::Identity() / 3.0;
  return m.norm() + T.norm();
}

DensityEstimate density_estimate(const std::vector<Velocity>& v, const GridSpec& spec) {
  if (v.empty()) throw std::invalid_argument("density_estimate: empty sample");
  const double w = 1.0 / static_cast<double>(v.size());
  DensityEstimate est;
  if (spec.kind == GridSpec::Kind::Radial) {
    auto edges = spec.radial_edges(v.size());
    est = DensityEstimate::radial(edges, std::vector<double>(edges.size() - 1, 0.0), spec.center);
  } else {
    const std::size_t cells = static_cast<std::size_t>(spec.dims[0]) * spec.dims[1] * spec.dims[2];
    est = DensityEstimate::cartesian(spec.lower, spec.spacing, spec.dims, std::vector<double>(cells, 0.0));
  }
  auto& m = est.masses();
  std::size_t out = 0;
  for (const auto& x : v) {
    const auto b = est.bin_of(x);
    if (b)
      m[*b] += w;
    else
      ++out;
  }
  est.escaped_mass = static_cast<double>(out) * w;
  est.samples = v.size();
  if (spec.kind == GridSpec::Kind::Radial) est.anisotropy = anisotropy_score(v, spec.center);
  return est;
}

DensityEstimate density_estimate(const Ensemble& ens, const GridSpec& spec) { return density_estimate(ens.v, spec); }

std::vector<double> maxwellian_bin_masses(const DensityEstimate& f, const BathMaxwellian& M) {
  std::vector<double> out(f.size());
  if (f.kind() == DensityEstimate::Kind::Radial) {
    if ((f.center() - M.u0).norm() > 1e-12)
      throw std::invalid_argument("maxwellian_bin_masses: radial estimate must be centred at the bath velocity");
    const auto& e = f.edges();
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = chi3_tail(e[k], M.theta0) - chi3_tail(e[k + 1], M.theta0);
    return out;
  }
  const double h = f.spacing();
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Velocity c = f.cell_center(k);
    double p = 1.0;
    for (int d = 0; d < 3; ++d) p *= axis_mass(c[d] - 0.5 * h, c[d] + 0.5 * h, M.u0[d], M.theta0);
    out[k] = p;
  }
  return out;
}

EntropyValue relative_entropy(const DensityEstimate& f, const BathMaxwellian& M) {
  const auto Mk = maxwellian_bin_masses(f, M);
  EntropyValue out;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double m = f.masses()[k];
    if (m <= 0.0) continue;
    if (!(Mk[k] > 0.0)) {
      ++out.excluded_bins;
      continue;
    }
    out.value += m * std::log(m / Mk[k]);
  }
  return out;
}

double l1_distance_to_maxwellian(const DensityEstimate& f, const BathMaxwellian& M) {
  const auto Mk = maxwellian_bin_masses(f, M);
  double d = 0.0, inside = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    d += std::abs(f.masses()[k] - Mk[k]);
    inside += Mk[k];
  }
  return d + std::max(0.0, 1.0 - inside) + f.escaped_mass;
}

double x_distance(const DensityEstimate& f, const std::vector<double>& masses, double a) {
  if (masses.size() != f.size()) throw std::invalid_argument("x_distance: size mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) d += std::abs(f.masses()[k] - masses[k]) * std::exp(a * speed_of(f, k));
  return d;
}

double y_distance(const DensityEstimate& f, const std::vector<double>& masses, double a) {
  if (masses.size() != f.size()) throw std::invalid_argument("y_distance: size mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double r = speed_of(f, k);
    d += std::abs(f.masses()[k] - masses[k]) * WeightSpec::bracket(r) * std::exp(a * r);
  }
  return d;
}

LogRatio::LogRatio(const DensityEstimate& f, const BathMaxwellian& M)
    : f_(f), M_(M), Mk_(maxwellian_bin_masses(f, M)), psi_(f.size(), 0.0), defined_(f.size(), 0) {
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double m = f.masses()[k];
    if (m > 0.0 && Mk_[k] > 0.0) {
      psi_[k] = std::log(m / Mk_[k]);
      defined_[k] = 1;
    }
  }
}

std::optional<double> LogRatio::operator()(const Velocity& v) const {
  const auto b = f_.bin_of(v);
  if (!b || !defined_[*b]) return std::nullopt;
  return psi_[*b];
}

std::optional<double> LogRatio::density(const Velocity& v) const {
  const auto p = (*this)(v);
  if (!p) return std::nullopt;
  return M_.density(v) * std::exp(*p);
}

MCValue entropy_production_D(const Ensemble& ens, const BathMaxwellian& M, const LogRatio& psi, std::size_t n_pairs,
                             std::uint64_t seed) {
  require_pairs(ens);
  Rng rng(seed);
  Acc acc;
  std::size_t rejected = 0;
  const std::size_t cap = 20 * n_pairs + 1000;
  while (acc.n < n_pairs && acc.n + rejected < cap) {
    const Velocity& v = ens.v[rng.index(ens.size())];
    const Velocity w = sample_bath_partner(M, rng);
    const Velocity s = rng.unit_vector();
    const Velocity vs = elastic_bath_transform(v, w, s).first;
    const auto p0 = psi(v), p1 = psi(vs);
    if (!p0 || !p1) {
      ++rejected;
      continue;
    }
    acc.add(-(v - w).norm() * (*p1 - *p0));
  }
  return acc.value(rejected);
}

MCValue entropy_production_DH(const Ensemble& ens, const RestitutionParams& params, const DensityFn& g,
                              std::size_t n_triples, std::uint64_t seed) {
  require_pairs(ens);
  Rng rng(seed);
  Acc acc;
  std::size_t rejected = 0;
  const std::size_t cap = 20 * n_triples + 1000;
  while (acc.n < n_triples && acc.n + rejected < cap) {
    const auto [i, j] = distinct_pair(rng, ens.size());
    const Velocity& v = ens.v[i];
    const Velocity& w = ens.v[j];
    const Velocity s = rng.unit_vector();
    const auto [vp, wp] = inelastic_transform(v, w, s, params);
    const auto a = g(v), b = g(w), c = g(vp), d = g(wp);
    if (!a || !b || !c || !d || *a <= 0.0 || *b <= 0.0 || *c <= 0.0 || *d <= 0.0) {
      ++rejected;
      continue;
    }
    const double logX = std::log(*c) + std::log(*d) - std::log(*a) - std::log(*b);
    // X - log X - 1 without cancellation for X near 1
    const double val = std::expm1(logX) - logX;
    acc.add(0.5 * (v - w).norm() * std::max(val, 0.0));
  }
  return acc.value(rejected);
}

MCValue entropy_production_DH(const Ensemble& ens, const RestitutionParams& params, const LogRatio& psi,
                              std::size_t n_triples, std::uint64_t seed) {
  return entropy_production_DH(
      ens, params, [&psi](const Velocity& v) { return psi.density(v); }, n_triples, seed);
}

MCValue pair_speed_moment(const Ensemble& ens, double p, std::size_t n_pairs, std::uint64_t seed) {
  require_pairs(ens);
  Rng rng(seed);
  Acc acc;
  for (std::size_t n = 0; n < n_pairs; ++n) {
    const auto [i, j] = distinct_pair(rng, ens.size());
    acc.add(std::pow((ens.v[i] - ens.v[j]).norm(), p));
  }
  return acc.value();
}

MCValue qlogM_term(const Ensemble& ens, const RestitutionParams& params, const BathMaxwellian& M,
                   std::size_t n_pairs, std::uint64_t seed) {
  const double c = (1.0 - params.alpha() * params.alpha()) / (16.0 * M.theta0);
  if (c == 0.0) return {0.0, 0.0, n_pairs, 0};
  MCValue m = pair_speed_moment(ens, 3.0, n_pairs, seed);
  m.mean *= c;
  m.se *= c;
  return m;
}

IdentityCheck entropy_identity_check(const Ensemble& ens, const RestitutionParams& params, const DensityFn& g,
                                     std::size_t n_samples, std::uint64_t seed) {
  require_pairs(ens);
  const double alpha = params.alpha();
  const double c = (1.0 - alpha * alpha) / (2.0 * alpha * alpha);
  IdentityCheck out;
  {
    // left side: weak form with psi = log g
    Rng rng(mix_seed(seed, 1));
    Acc acc;
    std::size_t rejected = 0;
    while (acc.n < n_samples && acc.n + rejected < 20 * n_samples + 1000) {
      const auto [i, j] = distinct_pair(rng, ens.size());
      const Velocity& v = ens.v[i];
      const Velocity& w = ens.v[j];
      const auto [vp, wp] = inelastic_transform(v, w, rng.unit_vector(), params);
      const auto a = g(v), b = g(w), cc = g(vp), d = g(wp);
      if (!a || !b || !cc || !d || *a <= 0.0 || *b <= 0.0 || *cc <= 0.0 || *d <= 0.0) {
        ++rejected;
        continue;
      }
      acc.add(0.5 * (v - w).norm() * (std::log(*cc) + std::log(*d) - std::log(*a) - std::log(*b)));
    }
    out.lhs = acc.value(rejected);
  }
  {
    // right side from an independent stream
    const MCValue DH = entropy_production_DH(ens, params, g, n_samples, mix_seed(seed, 2));
    MCValue rhs = DH;
    rhs.mean = -DH.mean;
    if (c != 0.0) {
      const MCValue q = pair_speed_moment(ens, 1.0, n_samples, mix_seed(seed, 3));
      rhs.mean += c * q.mean;
      rhs.se = std::hypot(DH.se, c * q.se);
    }
    out.rhs = rhs;
  }
  // rounding floor: at alpha = 1 with g Maxwellian both sides vanish identically
  const double se = std::max(std::hypot(out.lhs.se, out.rhs.se), 1e-12);
  out.residual = (out.lhs.mean - out.rhs.mean) / se;
  out.passed = std::abs(out.residual) <= 3.0;
  return out;
}

double EntropySample::rhs(double alpha) const {
  const double c = (1.0 - alpha * alpha) / (2.0 * alpha * alpha);
  return -D.mean - DH.mean + c * pair_speed.mean - qlogM.mean + finite_n_drift;
}

double EntropySample::rhs_se(double alpha) const {
  const double c = (1.0 - alpha * alpha) / (2.0 * alpha * alpha);
  return std::sqrt(D.se * D.se + DH.se * DH.se + c * c * pair_speed.se * pair_speed.se + qlogM.se * qlogM.se +
                   finite_n_se * finite_n_se);
}

EntropySample entropy_sample(const Ensemble& ens, const RestitutionParams& params, const BathMaxwellian& M,
                             const GridSpec& grid, std::size_t n_pairs, std::uint64_t seed) {
  require_pairs(ens);
  const DensityEstimate est = density_estimate(ens, grid);
  const LogRatio psi(est, M);
  const double N = static_cast<double>(ens.size());
  Histogram hist{std::vector<double>(est.size()), psi.bath_masses(), N};
  std::size_t occupied = 0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    hist.counts[k] = std::round(est.masses()[k] * N);
    if (hist.counts[k] > 0.0) ++occupied;
  }

  EntropySample out;
  out.t = ens.time;
  out.H = relative_entropy(est, M).value;
  out.energy = moments(ens).energy;
  out.N = ens.size();
  out.occupied_bins = occupied;

  const double alpha = params.alpha();
  const double kq = (1.0 - alpha * alpha) / (16.0 * M.theta0);
  double jump_var = 0.0;
  Acc drift;  // exact generator minus first-order part, per sample
  {
    // bath channel
    Rng rng(mix_seed(seed, 11));
    Acc D, rate, exact_all, var;
    std::size_t rejected = 0;
    for (std::size_t n = 0; n < n_pairs; ++n) {
      const Velocity& v = ens.v[rng.index(ens.size())];
      const Velocity w = sample_bath_partner(M, rng);
      const Velocity vs = elastic_bath_transform(v, w, rng.unit_vector()).first;
      const double q = (v - w).norm();
      const double J = hist.jump({{bin_or_npos(est, v), bin_or_npos(est, vs)}});
      rate.add(q);
      exact_all.add(N * q * J);
      var.add(N * q * J * J);
      const auto p0 = psi(v), p1 = psi(vs);
      if (!p0 || !p1) {
        ++rejected;
        continue;
      }
      D.add(-q * (*p1 - *p0));
      drift.add(N * q * J - q * (*p1 - *p0));
    }
    out.D = D.value(rejected);
    out.collision_rate += rate.mean;
    out.finite_n_drift += exact_all.mean + D.mean;
    jump_var += var.mean;
  }
  {
    // self channel, one pass for every pair term
    Rng rng(mix_seed(seed, 12));
    Acc DH, q1, q3, rate, exact_all, first, var, self_drift;
    std::size_t rejected = 0;
    const double inv2theta = 1.0 / (2.0 * M.theta0);
    for (std::size_t n = 0; n < n_pairs; ++n) {
      const auto [i, j] = distinct_pair(rng, ens.size());
      const Velocity& v = ens.v[i];
      const Velocity& w = ens.v[j];
      const auto [vp, wp] = inelastic_transform(v, w, rng.unit_vector(), params);
      const double q = (v - w).norm();
      rate.add(q);
      q1.add(q);
      q3.add(kq * q * q * q);
      const double J =
          hist.jump({{bin_or_npos(est, v), bin_or_npos(est, vp)}, {bin_or_npos(est, w), bin_or_npos(est, wp)}});
      exact_all.add(0.5 * N * q * J);
      var.add(0.5 * N * q * J * J);
      const auto a = psi(v), b = psi(w), c = psi(vp), d = psi(wp);
      if (!a || !b || !c || !d) {
        ++rejected;
        continue;
      }
      const double dpsi = *c + *d - *a - *b;
      const double dE = ((vp - M.u0).squaredNorm() + (wp - M.u0).squaredNorm() - (v - M.u0).squaredNorm() -
                         (w - M.u0).squaredNorm()) *
                        inv2theta;
      const double logX = dpsi - dE;
      DH.add(0.5 * q * std::max(std::expm1(logX) - logX, 0.0));
      first.add(0.5 * q * dpsi);
      self_drift.add(0.5 * N * q * J - 0.5 * q * dpsi);
    }
    out.DH = DH.value(rejected);
    out.pair_speed = q1.value();
    out.qlogM = q3.value();
    out.collision_rate += rate.mean;
    out.finite_n_drift += exact_all.mean - first.mean;
    jump_var += var.mean;
    out.finite_n_se = std::hypot(drift.se(), self_drift.se());
  }
  out.jump_variance_rate = jump_var;
  return out;
}

BalanceReport entropy_balance(const std::vector<EntropySample>& traj, const RestitutionParams& params) {
  BalanceReport rep;
  if (traj.size() < 2) {
    rep.undersampled = true;
    rep.guidance = "need at least two samples";
    return rep;
  }
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double dt = traj[i + 1].t - traj[i].t;
    const double rate = std::max(traj[i].collision_rate, traj[i + 1].collision_rate);
    if (!(dt > 0.0) || dt * rate > 0.5) {
      rep.undersampled = true;
      std::ostringstream os;
      os << "sampling interval " << dt << " allows " << dt * rate
         << " collisions per particle; sample at dt <= " << 0.5 / rate;
      rep.guidance = os.str();
      return rep;
    }
  }
  const double alpha = params.alpha();
  std::size_t within = 0;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const auto& a = traj[i];
    const auto& b = traj[i + 1];
    BalanceInterval iv;
    iv.t0 = a.t;
    iv.t1 = b.t;
    const double dt = b.t - a.t;
    iv.dHdt = (b.H - a.H) / dt;
    iv.rhs = 0.5 * (a.rhs(alpha) + b.rhs(alpha));
    const double var_lhs = 0.5 * (a.jump_variance_rate + b.jump_variance_rate) / dt;
    const double var_rhs = 0.25 * (std::pow(a.rhs_se(alpha), 2) + std::pow(b.rhs_se(alpha), 2));
    iv.se = std::sqrt(var_lhs + var_rhs);
    iv.z = iv.se > 0.0 ? (iv.dHdt - iv.rhs) / iv.se : 0.0;
    if (std::abs(iv.z) <= 3.0) ++within;
    rep.intervals.push_back(iv);
  }
  rep.fraction_within_3 = static_cast<double>(within) / static_cast<double>(rep.intervals.size());
  return rep;
}

nlohmann::json LambdaFit::to_json() const {
  return {{"lambda_hat", lambda}, {"lambda_ci", lambda_ci},     {"amplitude", amplitude},
          {"plateau", plateau},   {"plateau_ci", plateau_ci},   {"K_hat", K},
          {"K_ci", K_ci},         {"efoldings", efoldings},     {"transient_points", transient_points},
          {"failed", failed},     {"message", message}};
}

namespace {

// Least squares of y ~ A e^{-lam t} + P for fixed lam.
struct ProjFit {
  double A = 0.0, P = 0.0, ssr = 0.0;
};
ProjFit project(const std::vector<double>& t, const std::vector<double>& y, double lam) {
  const double n = static_cast<double>(t.size());
  double se = 0, see = 0, sy = 0, sey = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-lam * (t[i] - t.front()));
    se += e;
    see += e * e;
    sy += y[i];
    sey += e * y[i];
  }
  const double det = n * see - se * se;
  ProjFit f;
  if (std::abs(det) < 1e-300) {
    f.P = sy / n;
  } else {
    f.A = (n * sey - se * sy) / det;
    f.P = (sy - f.A * se) / n;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - f.A * std::exp(-lam * (t[i] - t.front())) - f.P;
    f.ssr += r * r;
  }
  return f;
}

double t_quantile(double dof, double level) {
  if (dof < 1.0) return INFINITY;
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.5 + 0.5 * level);
}

}  // namespace

LambdaFit lambda_fit(const std::vector<double>& t, const std::vector<double>& H, double alpha, double floor) {
  LambdaFit fit;
  if (t.size() != H.size()) throw std::invalid_argument("lambda_fit: size mismatch");
  if (t.size() < 20) {
    fit.failed = true;
    fit.message = "need at least 20 points";
    return fit;
  }
  const double span = t.back() - t.front();
  if (!(span > 0.0)) throw std::invalid_argument("lambda_fit: times must increase");

  // variable projection over log(lambda)
  const double lo = std::log(1e-3 / span), hi = std::log(1e3 / span);
  double best = lo, best_ssr = INFINITY;
  for (int k = 0; k <= 120; ++k) {
    const double x = lo + (hi - lo) * k / 120.0;
    const double s = project(t, H, std::exp(x)).ssr;
    if (s < best_ssr) {
      best_ssr = s;
      best = x;
    }
  }
  const double step = (hi - lo) / 120.0;
  const auto r = boost::math::tools::brent_find_minima(
      [&](double x) { return project(t, H, std::exp(x)).ssr; }, best - step, best + step, 60);
  const double lam0 = std::exp(r.first);
  const ProjFit pf = project(t, H, lam0);
  fit.amplitude = pf.A;

  // plateau from the last third after removing the fitted transient
  const std::size_t tail0 = t.size() - t.size() / 3;
  std::vector<double> resid;
  for (std::size_t i = tail0; i < t.size(); ++i) resid.push_back(H[i] - pf.A * std::exp(-lam0 * (t[i] - t.front())));
  const std::size_t batches = std::min<std::size_t>(10, std::max<std::size_t>(2, resid.size() / 2));
  const MeanSE plat = batch_mean_se(resid, batches);
  fit.plateau = plat.mean - floor;
  fit.plateau_ci = t_quantile(static_cast<double>(batches) - 1.0, 0.95) * plat.se;

  // lambda from log-linear regression on the resolved transient
  std::vector<double> tx, ly;
  const double resolve = std::max(10.0 * plat.se, 1e-14 * std::abs(H.front()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = H[i] - plat.mean;
    if (d <= resolve) break;
    tx.push_back(t[i]);
    ly.push_back(std::log(d));
  }
  fit.transient_points = tx.size();
  if (tx.size() < 3) {
    fit.failed = true;
    fit.message = "transient not resolved above the plateau";
    return fit;
  }
  const LinearFit lf = linear_fit(tx, ly);
  fit.lambda = -lf.slope;
  fit.lambda_ci = tx.size() > 2 ? lf.ci_slope(0.95) : INFINITY;
  fit.efoldings = fit.lambda * (tx.back() - tx.front());
  if (alpha < 1.0) {
    fit.K = fit.plateau / (1.0 - alpha);
    fit.K_ci = fit.plateau_ci / (1.0 - alpha);
  }
  if (!(fit.lambda - fit.lambda_ci > 0.0)) {
    fit.failed = true;
    fit.message = "no resolved decay";
  } else if (fit.efoldings < 2.0) {
    fit.failed = true;
    fit.message = "series spans fewer than two e-foldings";
  }
  return fit;
}

InterpolationCheck interpolation_check(const DensityEstimate& f, double eps, const WeightSpec& weights) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("interpolation_check: eps must lie in (0, 1)");
  const double q = 1.0 / eps;
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double r = speed_of(f, k);
    s += std::abs(f.masses()[k]) * weights.inverse_weight(r) * std::pow(WeightSpec::bracket(r), q);
  }
  return interpolation_check(f, eps, weights, std::pow(s, 1.0 / q));
}

InterpolationCheck interpolation_check(const DensityEstimate& f, double eps, const WeightSpec& weights, double C) {
  InterpolationCheck out;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double r = speed_of(f, k);
    const double m = std::abs(f.masses()[k]);
    out.norm_X += m * weights.inverse_weight(r);
    out.norm_Y += m * weights.y_inverse_weight(r);
  }
  out.C = C;
  if (!std::isfinite(C) || !std::isfinite(out.norm_X)) {
    out.inconclusive = true;
    return out;
  }
  out.bound = C * std::pow(out.norm_X, 1.0 - eps);
  out.margin = out.bound - out.norm_Y;
  out.ratio = out.norm_Y > 0.0 ? out.bound / out.norm_Y : INFINITY;
  out.holds = out.margin >= -1e-12 * out.norm_Y;
  return out;
}

std::string EntropyReport::csv() const {
  std::string s = "t,H,D,D_se,DH,DH_se,qlogM,E,normX_to_M,normX_to_Falpha\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.H, r.D,
                  r.D_se, r.DH, r.DH_se, r.qlogM, r.E, r.normX_to_M, r.normX_to_Falpha);
    s += buf;
  }
  return s;
}

nlohmann::json EntropyReport::summary() const {
  nlohmann::json iv = nlohmann::json::array();
  for (const auto& b : balance.intervals)
    iv.push_back({{"t0", b.t0}, {"t1", b.t1}, {"dHdt", b.dHdt}, {"rhs", b.rhs}, {"se", b.se}, {"z", b.z}});
  return {{"alpha", alpha},
          {"fit", fit.to_json()},
          {"balance",
           {{"fraction_within_3", balance.fraction_within_3},
            {"undersampled", balance.undersampled},
            {"guidance", balance.guidance},
            {"intervals", iv}}},
          {"normY_to_M_final", normY_to_M_final}};
}

}  // namespace granbath
