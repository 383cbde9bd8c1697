// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/steady.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "granbath/diagnostics.hpp"
#include "granbath/stats.hpp"

namespace granbath {

namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;

Eigen::VectorXd to_vec(const std::vector<double>& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

double x_norm_masses(const RadialGrid& grid, const Eigen::VectorXd& m, double a) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) s += std::abs(m[static_cast<Eigen::Index>(k)]) * std::exp(a * grid.r[k]);
  return s;
}

double y_norm_masses(const RadialGrid& grid, const Eigen::VectorXd& m, double a) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    s += std::abs(m[static_cast<Eigen::Index>(k)]) * WeightSpec::bracket(grid.r[k]) * std::exp(a * grid.r[k]);
  return s;
}

// Integrated correlation time of a series sampled every `step`.
double correlation_time(const std::vector<double>& x, double step) {
  const std::size_t n = x.size();
  if (n < 8) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  if (c0 <= 0.0) return 0.0;
  double sum = 0.5;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
    const double rho = c / c0;
    if (rho <= 0.0) break;
    sum += rho;
  }
  return sum * step;
}

// Advances by T in steps of dt and calls `sample` every `every` steps.
template <class F>
void advance(Ensemble& ens, const DsmcConfig& cfg, double T, double dt, std::uint64_t every, F&& sample) {
  const std::uint64_t steps = step_count(T, dt);
  for (std::uint64_t s = 1; s <= steps; ++s) {
    step(ens, dt, cfg);
    if (s % every == 0) sample();
  }
}

CollisionTensor tensor_for(const RadialGrid& grid, double alpha, const DeterministicOptions& opts) {
  const RestitutionParams p(alpha);
  if (opts.cache_dir.empty()) return CollisionTensor::build(grid, p, opts.tensor);
  char name[96];
  std::snprintf(name, sizeof name, "tensor_%s_%.17g_%zu_%zu.gbct", grid.hash().c_str(), alpha, opts.tensor.pieces,
                opts.tensor.order);
  const auto path = std::filesystem::path(opts.cache_dir) / name;
  if (std::filesystem::exists(path)) {
    try {
      return CollisionTensor::load(path.string(), grid, alpha);
    } catch (const std::exception&) {
      // stale or damaged cache: rebuild below
    }
  }
  std::filesystem::create_directories(opts.cache_dir);
  CollisionTensor T = CollisionTensor::build(grid, p, opts.tensor);
  T.save(path.string());
  return T;
}

double sandwich_slope_gap(const std::vector<double>& x, const std::vector<double>& y, double s, bool upper,
                          double* intercept) {
  double b = upper ? -INFINITY : INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) b = upper ? std::max(b, y[i] - s * x[i]) : std::min(b, y[i] - s * x[i]);
  double gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) gap += std::abs(b + s * x[i] - y[i]);
  *intercept = b;
  return gap;
}

// Slopes of the edges of the upper (or lower) convex hull of points sorted by x.
std::vector<double> hull_slopes(const std::vector<double>& x, const std::vector<double>& y, bool upper) {
  std::vector<std::size_t> h;
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (h.size() >= 2) {
      const std::size_t a = h[h.size() - 2], b = h.back();
      const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
      if (upper ? cross >= 0.0 : cross <= 0.0)
        h.pop_back();
      else
        break;
    }
    h.push_back(i);
  }
  std::vector<double> s;
  for (std::size_t t = 0; t + 1 < h.size(); ++t) s.push_back((y[h[t + 1]] - y[h[t]]) / (x[h[t + 1]] - x[h[t]]));
  return s;
}

double gaussian_mass(double intercept, double slope) {
  const double theta = -0.5 / slope;
  return std::exp(intercept) * std::pow(2.0 * std::numbers::pi * theta, 1.5);
}

}  // namespace

std::vector<double> bath_shell_masses(const RadialGrid& grid, const BathMaxwellian& M) {
  std::vector<double> m(grid.size());
  auto tail = [&](double r) { return r <= 0.0 ? 1.0 : boost::math::gamma_q(1.5, r * r / (2.0 * M.theta0)); };
  for (std::size_t k = 0; k < grid.size(); ++k) m[k] = tail(grid.edges[k]) - tail(grid.edges[k + 1]);
  return m;
}

DensityEstimate coarsen(const RadialGrid& grid, const std::vector<double>& masses, std::size_t factor) {
  if (factor == 0 || masses.size() != grid.size()) throw std::invalid_argument("coarsen: bad arguments");
  std::vector<double> e{grid.edges.front()}, m, r;
  for (std::size_t k = 0; k < grid.size(); k += factor) {
    const std::size_t end = std::min(grid.size(), k + factor);
    double s = 0.0;
    for (std::size_t t = k; t < end; ++t) s += masses[t];
    m.push_back(s);
    e.push_back(grid.edges[end]);
    r.push_back(grid.r[(k + end - 1) / 2]);
  }
  return DensityEstimate::radial(e, m, Eigen::Vector3d::Zero(), r);
}

double SandwichReport::lower(double r) const {
  if (!(theta_lower > 0.0)) return 0.0;
  return mass_lower * std::pow(2.0 * std::numbers::pi * theta_lower, -1.5) * std::exp(-r * r / (2.0 * theta_lower));
}

double SandwichReport::upper(double r) const {
  if (!(theta_upper > 0.0)) return INFINITY;
  return mass_upper * std::pow(2.0 * std::numbers::pi * theta_upper, -1.5) * std::exp(-r * r / (2.0 * theta_upper));
}

nlohmann::json SandwichReport::to_json() const {
  return {{"passed", passed},       {"reason", reason},         {"theta_lower", theta_lower},
          {"theta_upper", theta_upper}, {"mass_lower", mass_lower}, {"mass_upper", mass_upper},
          {"theta_eff", theta_eff}, {"tail_slope", tail_slope}, {"core_slope", core_slope},
          {"r_min", r_min},         {"r_max", r_max},           {"points", points}};
}

SandwichReport sandwich_check(const RadialGrid& grid, const Eigen::VectorXd& F, const std::vector<double>& floor) {
  SandwichReport rep;
  double mass = 0.0, energy = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    mass += grid.w[k] * F[static_cast<Eigen::Index>(k)];
    energy += grid.w[k] * F[static_cast<Eigen::Index>(k)] * grid.r[k] * grid.r[k];
  }
  rep.theta_eff = mass > 0.0 ? energy / (3.0 * mass) : 0.0;

  std::vector<double> x, y;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double f = F[static_cast<Eigen::Index>(k)];
    if (f > 0.0 && f > 10.0 * floor[k]) {
      x.push_back(grid.r[k] * grid.r[k]);
      y.push_back(std::log(f));
    } else if (!x.empty()) {
      break;  // resolved range ends at the first unresolved node
    }
  }
  rep.points = x.size();
  if (x.size() < 8) {
    rep.reason = "fewer than 8 resolved nodes";
    return rep;
  }
  rep.r_min = std::sqrt(x.front());
  rep.r_max = std::sqrt(x.back());

  const std::size_t q = x.size() / 4;
  const std::span<const double> xs(x), ys(y);
  rep.core_slope = linear_fit(xs.subspan(0, q), ys.subspan(0, q)).slope;
  rep.tail_slope = linear_fit(xs.subspan(x.size() - q), ys.subspan(x.size() - q)).slope;

  // lower envelope: edge of the lower hull with the smallest total gap
  double best_gap = INFINITY, best_s = 0.0, best_b = 0.0, b = 0.0;
  for (double s : hull_slopes(x, y, false)) {
    if (!(s < 0.0)) continue;
    const double g = sandwich_slope_gap(x, y, s, false, &b);
    if (g < best_gap) {
      best_gap = g;
      best_s = s;
      best_b = b;
    }
  }
  const bool lower_ok = std::isfinite(best_gap);
  if (lower_ok) {
    rep.theta_lower = -0.5 / best_s;
    rep.mass_lower = gaussian_mass(best_b, best_s);
  }

  // upper envelope: must not decay faster than the observed tail
  std::vector<double> cand = hull_slopes(x, y, true);
  cand.push_back(rep.tail_slope);
  best_gap = INFINITY;
  for (double s : cand) {
    if (!(s < 0.0) || s < rep.tail_slope) continue;
    const double g = sandwich_slope_gap(x, y, s, true, &b);
    if (g < best_gap) {
      best_gap = g;
      best_s = s;
      best_b = b;
    }
  }
  const bool upper_ok = std::isfinite(best_gap);
  if (upper_ok) {
    rep.theta_upper = -0.5 / best_s;
    rep.mass_upper = gaussian_mass(best_b, best_s);
  }

  const bool tail_ok = rep.tail_slope < 0.0 && rep.core_slope < 0.0 && rep.tail_slope / rep.core_slope >= 0.25;
  if (!lower_ok)
    rep.reason = "no lower Gaussian envelope";
  else if (!upper_ok)
    rep.reason = "no upper Gaussian envelope";
  else if (!tail_ok)
    rep.reason = "tail flattens: no Gaussian bound beyond the resolved range";
  rep.passed = lower_ok && upper_ok && tail_ok;
  return rep;
}

SandwichReport sandwich_check(const SteadyStateResult& res) {
  std::vector<double> floor(res.grid.size());
  const double fmax = res.nodal.maxCoeff();
  for (std::size_t k = 0; k < res.grid.size(); ++k) {
    const double se = res.mass_se.empty() ? 0.0 : res.mass_se[k];
    floor[k] = std::max(se / res.grid.w[k], 1e-14 * fmax);
  }
  return sandwich_check(res.grid, res.nodal, floor);
}

nlohmann::json SteadyStateResult::to_json() const {
  return {{"route", route},
          {"alpha", alpha},
          {"n", grid.size()},
          {"R_max", grid.R_max},
          {"residual", residual},
          {"residual_tol", residual_tol},
          {"noise_floor", noise_floor},
          {"energy", energy},
          {"energy_se", energy_se},
          {"x_to_M", x_to_M},
          {"y_to_M", y_to_M},
          {"a", a},
          {"converged", converged},
          {"sandwich", sandwich.to_json()},
          {"info", info}};
}

std::string SteadyStateResult::profile_csv() const {
  std::string s = "r,F,F_se,lower,upper\n";
  char buf[256];
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double se = mass_se.empty() ? 0.0 : mass_se[k] / grid.w[k];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", grid.r[k], nodal[static_cast<Eigen::Index>(k)],
                  se, sandwich.lower(grid.r[k]), sandwich.upper(grid.r[k]));
    s += buf;
  }
  return s;
}

SteadyStateResult steady_dsmc(const RestitutionParams& params, const BathMaxwellian& M, std::size_t N, double T_burn,
                              double T_avg, std::uint64_t seed, const RadialGrid& grid, const DsmcSteadyOptions& opts) {
  if (!(T_burn > 0.0) || !(T_avg > 0.0)) throw std::invalid_argument("steady_dsmc: durations must be positive");
  InitialSpec spec;
  spec.u = M.u0;
  spec.theta = M.theta0;
  Ensemble ens = init_ensemble(spec, N, seed);
  DsmcConfig cfg;
  cfg.params = params;
  cfg.bath = M;
  cfg.workers = opts.workers;
  const std::uint64_t every = std::max<std::uint64_t>(1, step_count(opts.sample_every, opts.dt));
  const double sample_dt = static_cast<double>(every) * opts.dt;

  SteadyStateResult res;
  res.route = "dsmc";
  res.alpha = params.alpha();
  res.grid = grid;
  res.a = opts.a;

  // burn-in
  double burned = 0.0, tau = 0.0;
  int extensions = 0;
  bool drifting = true;
  std::vector<double> energies;
  while (true) {
    energies.clear();
    advance(ens, cfg, T_burn, opts.dt, every, [&] { energies.push_back(moments(ens).energy); });
    burned += T_burn;
    const std::size_t n = energies.size(), q = n / 4;
    if (q >= 4) {
      const std::span<const double> e(energies);
      const MeanSE a = batch_mean_se(e.subspan(2 * q, q), 4);
      const MeanSE b = batch_mean_se(e.subspan(3 * q, n - 3 * q), 4);
      drifting = std::abs(b.mean - a.mean) > 3.0 * std::hypot(a.se, b.se);
      tau = correlation_time(std::vector<double>(energies.begin() + static_cast<std::ptrdiff_t>(n / 2), energies.end()),
                             sample_dt);
    }
    if (!drifting && burned >= 5.0 * tau) break;
    if (++extensions > opts.max_extensions)
      throw SteadyStateError("steady_dsmc: energy still drifting after burn-in extensions");
  }

  // averaging
  const Eigen::Vector3d center = M.u0;
  const std::uint64_t samples = std::max<std::uint64_t>(opts.batches, step_count(T_avg, opts.dt) / every);
  const std::size_t B = opts.batches;
  std::vector<std::vector<double>> batch(B, std::vector<double>(grid.size(), 0.0));
  std::vector<double> batch_E(B, 0.0);
  std::vector<std::size_t> batch_n(B, 0);
  double escaped = 0.0, exp_sup = 0.0;
  bool exp_unreliable = false;
  double exp_inf = INFINITY;
  std::uint64_t taken = 0;
  auto sample = [&] {
    const std::size_t b = std::min<std::size_t>(B - 1, taken * B / samples);
    const double w = 1.0 / static_cast<double>(N);
    for (const auto& v : ens.v) {
      const double r = (v - center).norm();
      const auto it = std::upper_bound(grid.edges.begin(), grid.edges.end(), r);
      if (it == grid.edges.end()) {
        escaped += w;
        continue;
      }
      batch[b][static_cast<std::size_t>(it - grid.edges.begin()) - 1] += w;
    }
    batch_E[b] += moments(ens).energy;
    ++batch_n[b];
    const ExpMoment em = exp_moment(ens, 1.0, 1.0);
    exp_sup = std::max(exp_sup, em.value);
    exp_inf = std::min(exp_inf, em.value);
    exp_unreliable = exp_unreliable || em.unreliable;
    ++taken;
  };
  const std::uint64_t avg_steps = samples * every;
  for (std::uint64_t s = 1; s <= avg_steps; ++s) {
    step(ens, opts.dt, cfg);
    if (s % every == 0) sample();
  }

  std::vector<double> mass(grid.size(), 0.0), se(grid.size(), 0.0);
  std::vector<double> Eb;
  for (std::size_t b = 0; b < B; ++b) {
    if (batch_n[b] == 0) continue;
    Eb.push_back(batch_E[b] / static_cast<double>(batch_n[b]));
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> xb;
    for (std::size_t b = 0; b < B; ++b)
      if (batch_n[b] > 0) xb.push_back(batch[b][k] / static_cast<double>(batch_n[b]));
    const MeanSE ms = mean_se(xb);
    mass[k] = ms.mean;
    se[k] = ms.se;
  }
  const MeanSE Es = mean_se(Eb);
  res.energy = Es.mean;
  res.energy_se = Es.se;
  res.F = DensityEstimate::radial(grid.edges, mass, center, grid.r);
  res.F.escaped_mass = escaped / static_cast<double>(taken);
  res.F.samples = N;
  res.mass_se = se;
  res.nodal.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) res.nodal[static_cast<Eigen::Index>(k)] = mass[k] / grid.w[k];
  for (std::size_t k = 0; k < grid.size(); ++k) res.noise_floor += kSqrt2OverPi * se[k] * std::exp(opts.a * grid.r[k]);

  const auto Mk = bath_shell_masses(grid, M);
  res.x_to_M = x_norm_masses(grid, to_vec(mass) - to_vec(Mk), opts.a);
  res.y_to_M = y_norm_masses(grid, to_vec(mass) - to_vec(Mk), opts.a);

  // residual against shell indicators on the final snapshot
  {
    Rng rng(mix_seed(seed, 77));
    const std::size_t n = opts.residual_samples;
    std::vector<double> s1(grid.size(), 0.0), s2(grid.size(), 0.0);
    auto shell = [&](const Velocity& v) -> std::ptrdiff_t {
      const double r = (v - center).norm();
      const auto it = std::upper_bound(grid.edges.begin(), grid.edges.end(), r);
      return it == grid.edges.end() ? -1 : (it - grid.edges.begin()) - 1;
    };
    auto add = [&](std::ptrdiff_t from, std::ptrdiff_t to, double q) {
      if (from == to) return;
      // each event contributes +q to one shell and -q to another; second moments per shell
      if (to >= 0) {
        s1[static_cast<std::size_t>(to)] += q;
        s2[static_cast<std::size_t>(to)] += q * q;
      }
      if (from >= 0) {
        s1[static_cast<std::size_t>(from)] -= q;
        s2[static_cast<std::size_t>(from)] += q * q;
      }
    };
    for (std::size_t t = 0; t < n; ++t) {
      // bath event
      const Velocity& v = ens.v[rng.index(N)];
      const Velocity w = sample_bath_partner(M, rng);
      const Velocity vs = elastic_bath_transform(v, w, rng.unit_vector()).first;
      add(shell(v), shell(vs), (v - w).norm());
    }
    std::vector<double> b1 = s1, b2 = s2;
    std::fill(s1.begin(), s1.end(), 0.0);
    std::fill(s2.begin(), s2.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = rng.index(N);
      std::size_t j = rng.index(N - 1);
      if (j >= i) ++j;
      const Velocity vp = inelastic_transform(ens.v[i], ens.v[j], rng.unit_vector(), params).first;
      add(shell(ens.v[i]), shell(vp), (ens.v[i] - ens.v[j]).norm());
    }
    const double nn = static_cast<double>(n);
    double resid = 0.0, floor = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double mean = (b1[k] + s1[k]) / nn;
      const double var = (b2[k] / nn - std::pow(b1[k] / nn, 2) + s2[k] / nn - std::pow(s1[k] / nn, 2)) / nn;
      const double wgt = std::exp(opts.a * grid.r[k]);
      resid += std::abs(mean) * wgt;
      floor += kSqrt2OverPi * std::sqrt(std::max(var, 0.0)) * wgt;
    }
    res.residual = resid;
    // sampling noise plus the finite-ensemble fluctuation of the snapshot itself
    res.residual_tol = 3.0 * floor * std::sqrt(1.0 + nn / static_cast<double>(N));
  }
  res.converged = res.residual <= res.residual_tol;
  res.info = {{"N", N},
              {"T_burn", burned},
              {"T_avg", static_cast<double>(avg_steps) * opts.dt},
              {"burn_extensions", extensions},
              {"energy_correlation_time", tau},
              {"samples", taken},
              {"escaped_mass", res.F.escaped_mass},
              {"exp_moment_sup", exp_sup},
              {"exp_moment_inf", exp_inf},
              {"exp_moment_unreliable", exp_unreliable},
              {"seed", seed}};
  res.sandwich = sandwich_check(res);
  return res;
}

SteadyStateResult steady_deterministic(const RadialGrid& grid, const RestitutionParams& params,
                                       const BathMaxwellian& M, double dt, double tol,
                                       const DeterministicOptions& opts) {
  if (!(dt > 0.0) || !(tol > 0.0)) throw std::invalid_argument("steady_deterministic: dt and tol must be positive");
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t n = grid.size();
  const Eigen::VectorXd w = grid.weights();
  const Eigen::VectorXd mM = w.cwiseProduct(grid.maxwellian(M.theta0));

  const CollisionTensor T1 = tensor_for(grid, 1.0, opts);
  const CollisionTensor Ta = params.elastic() ? T1 : tensor_for(grid, params.alpha(), opts);
  // discretization error of the equilibrium, removed so M_h is an exact fixed point at alpha = 1
  const Eigen::VectorXd S = 2.0 * (T1.gain(mM, mM) - T1.loss(mM, mM));

  auto rate = [&](const Eigen::VectorXd& m) -> Eigen::VectorXd {
    return Ta.gain(m, m) - Ta.loss(m, m) + T1.gain(m, mM) - T1.loss(m, mM) - S;
  };

  Eigen::VectorXd m = opts.initial ? Eigen::VectorXd(w.cwiseProduct(*opts.initial)) : mM;
  if (m.size() != static_cast<Eigen::Index>(n)) throw std::invalid_argument("steady_deterministic: initial size");
  m /= m.sum();

  double t = 0.0, max_renorm = 0.0, h = dt, res = INFINITY;
  std::size_t steps = 0, halvings = 0;
  Eigen::VectorXd r = rate(m);
  res = x_norm_masses(grid, r, opts.a);
  while (res >= tol && t < opts.max_time) {
    Eigen::VectorXd next = m + h * r;
    bool negative = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double f = next[static_cast<Eigen::Index>(k)] / grid.w[k];
      if (f < -1e-12) negative = true;
      if (f < 0.0) next[static_cast<Eigen::Index>(k)] = 0.0;
    }
    if (negative) {
      h *= 0.5;
      ++halvings;
      if (h < 1e-8) throw SteadyStateError("steady_deterministic: time step underflow");
      continue;
    }
    const double total = next.sum();
    max_renorm = std::max(max_renorm, std::abs(total - 1.0));
    m = next / total;
    t += h;
    ++steps;
    r = rate(m);
    res = x_norm_masses(grid, r, opts.a);
  }

  SteadyStateResult out;
  out.route = "deterministic";
  out.alpha = params.alpha();
  out.grid = grid;
  out.a = opts.a;
  out.residual = res;
  out.residual_tol = tol;
  out.converged = res < tol;
  std::vector<double> mass(m.data(), m.data() + m.size());
  out.F = DensityEstimate::radial(grid.edges, mass, M.u0, grid.r);
  out.mass_se.assign(n, 0.0);
  out.nodal = m.cwiseQuotient(w);
  for (std::size_t k = 0; k < n; ++k) out.energy += mass[k] * grid.r[k] * grid.r[k];
  out.x_to_M = x_norm_masses(grid, m - mM, opts.a);
  out.y_to_M = y_norm_masses(grid, m - mM, opts.a);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  out.info = {{"steps", steps},
              {"time", t},
              {"dt_final", h},
              {"dt_halvings", halvings},
              {"max_renormalization", max_renorm},
              {"renormalization_ok", max_renorm <= 1e-10},
              {"tensor_max_escape", std::max(T1.max_escape, Ta.max_escape)},
              {"equilibrium_correction_x", x_norm_masses(grid, S, opts.a)},
              {"wall_time", wall}};
  out.sandwich = sandwich_check(out);
  return out;
}

CrossRoute compare_routes(const SteadyStateResult& a, const SteadyStateResult& b, std::size_t factor, double target) {
  if (a.grid.hash() != b.grid.hash()) throw std::invalid_argument("compare_routes: results live on different grids");
  const DensityEstimate ca = coarsen(a.grid, a.masses(), factor);
  const DensityEstimate cb = coarsen(b.grid, b.masses(), factor);
  CrossRoute out;
  out.x_distance = x_distance(ca, cb.masses(), a.a);
  // coarse noise floors: shell errors add in quadrature inside a coarse bin
  auto floor = [&](const SteadyStateResult& r) {
    double f = 0.0;
    for (std::size_t k = 0, c = 0; k < r.grid.size(); k += factor, ++c) {
      double v = 0.0;
      for (std::size_t t = k; t < std::min(r.grid.size(), k + factor); ++t) v += r.mass_se[t] * r.mass_se[t];
      f += kSqrt2OverPi * std::sqrt(v) * std::exp(r.a * ca.speeds()[c]);
    }
    return f;
  };
  out.tolerance = std::max(target, 3.0 * (floor(a) + floor(b)) + a.residual_tol + b.residual_tol);
  out.agree = out.x_distance <= target;
  return out;
}

nlohmann::json LimitCurve::to_json() const {
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : rows) rj.push_back({{"alpha", r.alpha}, {"x", r.x}, {"y", r.y}, {"floor", r.floor}});
  return {{"route", route},
          {"rows", rj},
          {"spearman_x", spearman_x},
          {"spearman_y", spearman_y},
          {"strictly_decreasing", strictly_decreasing},
          {"limit_at_floor", limit_at_floor},
          {"intercept", intercept},
          {"intercept_ci", intercept_ci},
          {"flagged", flagged}};
}

LimitCurve limit_curve_from(const std::vector<SteadyStateResult>& results, const std::string& route) {
  LimitCurve c;
  c.route = route;
  for (const auto& r : results) c.rows.push_back({r.alpha, r.x_to_M, r.y_to_M, r.noise_floor});
  std::sort(c.rows.begin(), c.rows.end(), [](const LimitRow& a, const LimitRow& b) { return a.alpha < b.alpha; });
  std::vector<double> al, xs, ys, om;
  for (const auto& r : c.rows) {
    al.push_back(r.alpha);
    xs.push_back(r.x);
    ys.push_back(r.y);
    om.push_back(1.0 - r.alpha);
  }
  c.spearman_x = spearman(al, xs);
  c.spearman_y = spearman(al, ys);
  c.strictly_decreasing = true;
  for (std::size_t i = 0; i + 1 < c.rows.size(); ++i) {
    if (c.rows[i + 1].alpha >= 1.0) break;
    if (!(c.rows[i + 1].x < c.rows[i].x) || !(c.rows[i + 1].y < c.rows[i].y)) c.strictly_decreasing = false;
  }
  const auto& last = c.rows.back();
  if (last.alpha >= 1.0) c.limit_at_floor = last.x <= std::max(3.0 * last.floor, 1e-8);
  if (c.rows.size() >= 3) {
    const LinearFit f = linear_fit(om, xs);
    c.intercept = f.intercept;
    c.intercept_ci = f.ci_intercept(0.95);
  }
  c.flagged = !c.strictly_decreasing || c.spearman_x > -0.9 || c.spearman_y > -0.9;
  return c;
}

LimitCurve elastic_limit_curve(std::vector<double> alphas, const std::string& route, const BathMaxwellian& M,
                               const LimitResources& res) {
  std::size_t below = 0;
  bool has_one = false;
  for (double a : alphas) {
    if (a < 1.0) ++below;
    if (a == 1.0) has_one = true;
  }
  if (below < 4) throw std::invalid_argument("elastic_limit_curve: need at least four alpha values below 1");
  if (!has_one) alphas.push_back(1.0);
  std::vector<SteadyStateResult> results;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const RestitutionParams p(alphas[i]);
    if (route == "deterministic") {
      DeterministicOptions o;
      o.a = res.a;
      o.workers = res.workers;
      results.push_back(steady_deterministic(res.grid, p, M, res.dt, res.tol, o));
    } else if (route == "dsmc") {
      DsmcSteadyOptions o;
      o.a = res.a;
      o.workers = res.workers;
      results.push_back(steady_dsmc(p, M, res.N, res.T_burn, res.T_avg, mix_seed(res.seed, i), res.grid, o));
    } else {
      throw std::invalid_argument("elastic_limit_curve: unknown route " + route);
    }
  }
  return limit_curve_from(results, route);
}

}  // namespace granbath
