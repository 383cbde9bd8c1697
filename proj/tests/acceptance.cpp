// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails. Pass criterion numbers as arguments to run a subset.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "granbath/config.hpp"
#include "granbath/diagnostics.hpp"
#include "granbath/experiments.hpp"
#include "granbath/manifest.hpp"
#include "granbath/stats.hpp"

using namespace granbath;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cache;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig base(const Context& ctx, const std::string& experiment, const std::string& dir) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.outdir = (ctx.work / dir).string();
  c.tensor_cache = ctx.cache;
  return c;
}

Velocity random_velocity(std::mt19937_64& g, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(g), n(g), n(g)};
}

Velocity random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  return Velocity(n(g), n(g), n(g)).normalized();
}

// ---------------------------------------------------------------------------

Outcome collision_identities(const Context&) {
  std::mt19937_64 g(2026);
  std::uniform_real_distribution<double> ua(0.01, 1.0);
  const SphereQuadrature sphere;
  double mom = 0.0, en = 0.0, ang = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Velocity v = random_velocity(g, 2.0), w = random_velocity(g, 2.0), s = random_unit(g);
    const RestitutionParams p(k % 10 == 0 ? 1.0 : ua(g));
    auto [a, b] = inelastic_transform(v, w, s, p);
    const Velocity q = v - w;
    mom = std::max(mom, ((a + b) - (v + w)).norm() / (1.0 + v.norm() + w.norm()));
    const double formula = -(1.0 - p.alpha() * p.alpha()) / 4.0 * q.norm() * (q.norm() - q.dot(s));
    const double dE = a.squaredNorm() + b.squaredNorm() - v.squaredNorm() - w.squaredNorm();
    en = std::max(en, std::abs(dE - formula) / (1.0 + v.squaredNorm() + w.squaredNorm()));
    const double A = angular_average_A([](const Velocity& x) { return x.squaredNorm(); }, v, w, p, sphere);
    ang = std::max(ang, std::abs(A + (1.0 - p.alpha() * p.alpha()) / 4.0 * q.squaredNorm()) / (1.0 + q.squaredNorm()));
  }
  return {mom <= 1e-12 && en <= 1e-12 && ang <= 1e-8,
          fmt("10^4 draws: momentum %.1e, energy %.1e, angular |.|^2 %.1e (order %zu)", mom, en, ang, sphere.order())};
}

Outcome kernel_suite(const Context&) {
  const BathMaxwellian M;
  const KernelConstants c = calibrated_constants(M);
  std::mt19937_64 g(7);
  double db = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Velocity v = random_velocity(g, 1.5), w = random_velocity(g, 1.5);
    const double l = scattering_kernel_k(v, w, c) * M.density(w), r = scattering_kernel_k(w, v, c) * M.density(v);
    db = std::max(db, std::abs(l - r) / std::max(l, r));
  }
  const double chi_mean = std::sqrt(8.0 * M.theta0 / M_PI);
  const double sig = std::abs(collision_frequency_bath(M, Velocity::Zero()) - chi_mean) / chi_mean;
  return {db <= 1e-10 && c.calibration_spread <= 1e-6 && sig <= 1e-6,
          fmt("detailed balance %.1e, C0 spread %.1e (3 probes), Sigma(0) rel. error %.1e", db, c.calibration_spread,
              sig)};
}

Outcome elastic_stationarity(const Context&) {
  const std::size_t N = 100000;
  Ensemble ens = init_ensemble(InitialSpec{}, N, 31);
  std::vector<double> s0;
  for (const auto& v : ens.v) s0.push_back(v.norm());
  DsmcConfig cfg;
  const double band = 3.0 * std::sqrt(6.0 / static_cast<double>(N));
  double worst = std::abs(moments(ens).energy - 3.0);
  for (int t = 1; t <= 10; ++t) {
    RunOptions o;
    o.T_final = 1.0;
    o.dt = 0.05;
    run(ens, o, cfg);
    worst = std::max(worst, std::abs(moments(ens).energy - 3.0));
  }
  std::vector<double> s1;
  for (const auto& v : ens.v) s1.push_back(v.norm());
  const double ks = ks_statistic(s0, s1), crit = ks_critical_01(N, N);
  return {worst <= band && ks < crit,
          fmt("max |E - 3| %.4f vs 3 sigma band %.4f; KS %.4f vs 1%% critical %.4f", worst, band, ks, crit)};
}

Outcome entropy_decay(const Context& ctx) {
  ExperimentConfig c = base(ctx, "entropy", "c4_entropy");
  c.alpha = 1.0;
  c.N = 100000;
  c.T = 4.0;
  c.sample_every = 0.05;
  const auto res = run_experiment(c);
  const auto& ch = res.summary["checks"];
  const auto& f = res.summary["fitted"];
  const double H0 = ch["H0"].get<double>();
  const double exact = 1.5 * (2.0 - 1.0 - std::log(2.0));
  // sd of log(f/M) under f for theta = 2: ((1 - 1/2) / 2)^2 Var|v|^2, Var|v|^2 = 6 theta^2
  const double sd = std::sqrt(0.0625 * 24.0 / static_cast<double>(c.N));
  const double lam = f["lambda_hat"].get<double>(), ci = f["lambda_ci"].get<double>();
  const double frac = ch["balance_fraction_within_3"].get<double>();
  const bool ok = std::abs(H0 - exact) <= 3.0 * sd && ch["monotone_within_noise"].get<bool>() && lam - ci > 0.0 &&
                  frac >= 0.95 && res.flags.empty();
  return {ok, fmt("H0 %.4f (closed form %.4f, 3 sd %.4f), monotone %s, lambda %.3f +- %.3f, balance %.1f%% within 3 sigma",
                  H0, exact, 3 * sd, ch["monotone_within_noise"].get<bool>() ? "yes" : "no", lam, ci, 100 * frac)};
}

// criteria 5 and 6 share one sweep
const ExperimentResult& sweep_result(const Context& ctx) {
  static std::optional<ExperimentResult> res;
  if (!res) {
    ExperimentConfig c = base(ctx, "sweep", "c5_sweep");
    c.alphas = {0.8, 0.9, 0.95, 0.99};
    c.N = 100000;
    c.T = 5.0;
    c.T_burn = 10.0;
    c.T_avg = 100.0;
    c.route = "both";
    res = run_experiment(c);
  }
  return *res;
}

Outcome plateau_scaling(const Context& ctx) {
  const auto& s = sweep_result(ctx).summary;
  if (!s["trends"].contains("plateau")) return {false, "plateau regression missing: " + s["failure_ledger"].dump()};
  const auto& p = s["trends"]["plateau"];
  const bool ok = p["slope_positive"].get<bool>() && p["intercept_contains_zero"].get<bool>() &&
                  p["spearman"].get<double>() > 0.9;
  return {ok, fmt("slope %.4f +- %.4f, intercept %.5f +- %.5f, Spearman %.2f", p["slope"].get<double>(),
                  p["slope_ci"].get<double>(), p["intercept"].get<double>(), p["intercept_ci"].get<double>(),
                  p["spearman"].get<double>())};
}

Outcome elastic_limit(const Context& ctx) {
  const auto& t = sweep_result(ctx).summary["trends"];
  bool ok = true;
  std::string d;
  for (const char* route : {"deterministic", "dsmc"}) {
    const std::string key = std::string("limit_") + route;
    if (!t.contains(key)) {
      ok = false;
      d += std::string(route) + ": missing; ";
      continue;
    }
    const auto& c = t[key];
    const bool r_ok = c["strictly_decreasing"].get<bool>() && c["limit_at_floor"].get<bool>();
    ok = ok && r_ok;
    d += fmt("%s: X", route);
    for (const auto& row : c["rows"]) d += fmt(" %.4f", row["x"].get<double>());
    d += fmt(" (alpha=1 floor %.4f), decreasing %s, at floor %s; ", c["rows"].back()["floor"].get<double>(),
             c["strictly_decreasing"].get<bool>() ? "yes" : "no", c["limit_at_floor"].get<bool>() ? "yes" : "no");
  }
  return {ok, d};
}

Outcome cross_validation(const Context& ctx) {
  ExperimentConfig c = base(ctx, "steady", "c7_steady");
  c.alpha = 0.95;
  c.route = "both";
  c.grid_n = 128;
  c.N = 100000;
  c.T_burn = 10.0;
  c.T_avg = 100.0;
  c.coarsen = 4;
  c.cross_target = 3e-2;
  const auto res = run_experiment(c);
  const auto& s = res.summary;
  const double x = s["cross_route"]["x_distance"].get<double>();
  const bool agree = s["cross_route"]["agree"].get<bool>();
  const bool sw_det = s["routes"]["deterministic"]["sandwich"]["passed"].get<bool>();
  const bool sw_mc = s["routes"]["dsmc"]["sandwich"]["passed"].get<bool>();
  const auto& info = s["routes"]["dsmc"]["info"];
  const double sup = info["exp_moment_sup"].get<double>(), inf = info["exp_moment_inf"].get<double>();
  const bool bounded = std::isfinite(sup) && !info["exp_moment_unreliable"].get<bool>() && sup <= 1.25 * inf;
  return {agree && sw_det && sw_mc && bounded,
          fmt("X distance %.4f (target 3e-2), sandwich det %s / dsmc %s, E exp(|v|) in [%.3f, %.3f] along the run",
              x, sw_det ? "pass" : "fail", sw_mc ? "pass" : "fail", inf, sup)};
}

// ---------------------------------------------------------------------------
// spectral criteria

struct SpectralSetup {
  RadialGrid grid;
  LAssembly L;
  TAlphaParts T1;
  OperatorMatrix L1;
};

SpectralSetup spectral_setup(std::size_t n, double R_max, const std::string& cache) {
  SpectralSetup s;
  s.grid = build_grid(n, R_max);
  s.L = assemble_L(s.grid, calibrated_constants(BathMaxwellian{}));
  s.L.L.a = 2.0;
  s.L1 = linearized_operator(s.grid, s.L, s.grid.maxwellian(1.0), 1.0, cache, &s.T1);
  return s;
}

double l1_zero_mode_residual(const SpectralSetup& s) {
  const Eigen::VectorXd M = s.grid.maxwellian(1.0);
  const double a = 0.5;
  return s.grid.norm_X(s.L1.A * M, a) / (norm_X_to_X(s.L1.A, s.grid, a) * s.grid.norm_X(M, a));
}

Outcome spectral_suite(const Context& ctx) {
  const double R_max = 12.0;
  std::vector<double> res;
  std::string rd;
  for (std::size_t n : {32, 64, 128}) {
    res.push_back(l1_zero_mode_residual(spectral_setup(n, R_max, ctx.cache)));
    rd += fmt(" n=%zu %.2e", n, res.back());
  }
  const bool res_ok = res.back() <= 1e-6 && res[1] < res[0] && res[2] < res[1];

  const SpectralSetup s = spectral_setup(128, R_max, ctx.cache);
  const SpectralSetup f = spectral_setup(256, R_max, ctx.cache);
  SpectralOptions so;
  so.semigroup = false;
  const double g1 = spectral_report(s.L1, so).gap, g2 = spectral_report(f.L1, so).gap;
  const bool gap_ok = g1 > 0.0 && std::abs(g2 - g1) <= 0.1 * g1;

  std::vector<double> cand;
  for (double R = 0.3 * R_max; R <= 0.85 * R_max + 1e-12; R += R_max / 24.0) cand.push_back(R);
  const SplittingCalibration cal = calibrate_splitting(s.L, s.T1, cand);
  bool split_ok = cal.found;
  double id1 = 0.0, id99 = 0.0, m1 = 0.0, m99 = 0.0;
  if (cal.found) {
    Splitting sp = assemble_splitting(s.L, s.T1, cal.R);
    sp.B.a = 2.0;
    id1 = sp.identity_error / s.L1.A.cwiseAbs().maxCoeff();
    const auto d1 = dissipativity_check(sp.B, cal.beta_star);
    m1 = d1.worst_margin;

    ExperimentConfig c;
    c.grid_n = 128;
    c.R_max = R_max;
    c.tensor_cache = ctx.cache;
    const SteadyStateResult F = steady_state_for(c, s.grid, 0.99);
    TAlphaParts T99;
    const OperatorMatrix L99 = linearized_operator(s.grid, s.L, F.nodal, 0.99, ctx.cache, &T99);
    Splitting s99 = assemble_splitting(s.L, T99, cal.R);
    s99.B.a = 2.0;
    id99 = s99.identity_error / L99.A.cwiseAbs().maxCoeff();
    const auto d99 = dissipativity_check(s99.B, cal.beta_star);
    m99 = d99.worst_margin;
    split_ok = d1.passed && m1 > 0.0 && std::abs(m99 - m1) <= 0.05 * m1 && id1 <= 1e-12 && id99 <= 1e-12;
  }
  const double sym = conjugated_symmetry_defect(s.L.L, s.grid.maxwellian(1.0));
  const bool ok = res_ok && gap_ok && split_ok && sym <= 1e-8;
  return {ok, fmt("L1 zero-mode residual%s [%s]; gap %.4f (n=128) vs %.4f (n=256); R %.2f beta* %.4f, margins %.4f "
                  "(alpha=1) %.4f (0.99), A+B-L %.1e; symmetry %.1e",
                  rd.c_str(), res_ok ? "ok" : "FAIL", g1, g2, cal.R, cal.beta_star, m1, m99, std::max(id1, id99), sym)};
}

// criteria 9 and 10 share one spectrum run
const ExperimentResult& spectrum_result(const Context& ctx) {
  static std::optional<ExperimentResult> res;
  if (!res) {
    ExperimentConfig c = base(ctx, "spectrum", "c9_spectrum");
    c.alphas = {0.9, 0.95, 0.99, 1.0};
    c.grid_n = 128;
    c.R_max = 12.0;
    res = run_experiment(c);
  }
  return *res;
}

Outcome perturbation_drift(const Context& ctx) {
  const auto& s = spectrum_result(ctx).summary;
  const auto& d = s["drift"];
  const double ro = d["spearman_op"].get<double>(), rr = d["spearman_resolvent"].get<double>(),
               rp = d["spearman_projection"].get<double>();
  double g1 = 0.0;
  for (const auto& r : d["rows"])
    if (r["alpha"].get<double>() == 1.0) g1 = r["gap"].get<double>();
  bool gaps = g1 > 0.0;
  std::string gd;
  for (const auto& r : d["rows"]) {
    const double a = r["alpha"].get<double>(), g = r["gap"].get<double>();
    gd += fmt(" %.2f:%.4f", a, g);
    if (a >= 0.95 && g < 0.8 * g1) gaps = false;
  }
  const bool ok = ro < -0.9 && rr < -0.9 && rp < -0.9 && gaps;
  return {ok, fmt("Spearman op %.2f, resolvent %.2f, zero-mode projection %.2f (max |lambda0| %.1e); gaps%s", ro, rr, rp,
                  d["max_lambda0"].get<double>(), gd.c_str())};
}

Outcome semigroup_consistency(const Context& ctx) {
  const auto& s = spectrum_result(ctx).summary;
  bool ok = true;
  std::string d = "mu/nu:";
  for (const auto& r : s["per_alpha"]) {
    const double q = r["mu_hat"].get<double>() / r["gap"].get<double>();
    ok = ok && q >= 0.8 && q <= 1.1;
    d += fmt(" %.2f:%.3f", r["alpha"].get<double>(), q);
  }
  d += "; nu_hat/nu_h:";
  for (double alpha : {0.95, 1.0}) {
    ExperimentConfig c = base(ctx, "converge", fmt("c10_converge_%g", alpha));
    c.alpha = alpha;
    c.N = 100000;
    c.T = 10.0;
    const auto res = run_experiment(c);
    const double q = res.summary["checks"]["nu_ratio"].get<double>();
    ok = ok && q >= 0.5 && q <= 1.5 && res.flags.empty();
    d += fmt(" %.2f:%.3f (nu_hat %.3f)", alpha, q, res.summary["fitted"]["nu_hat"].get<double>());
  }
  return {ok, d};
}

Outcome reproducibility(const Context& ctx) {
  auto outputs = [](const fs::path& dir) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().filename() != "manifest.json") m[e.path().filename().string()] = slurp(e.path());
    return m;
  };
  std::vector<ExperimentConfig> cfgs;
  {
    ExperimentConfig c = base(ctx, "simulate", "c11/simulate");
    c.alpha = 0.9;
    c.N = 20000;
    c.T = 2.0;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c = base(ctx, "steady", "c11/steady");
    c.alpha = 0.9;
    c.N = 10000;
    c.T_burn = 5.0;
    c.T_avg = 10.0;
    c.grid_n = 32;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c = base(ctx, "entropy", "c11/entropy");
    c.alpha = 0.95;
    c.N = 10000;
    c.T = 1.0;
    c.grid_n = 32;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c = base(ctx, "converge", "c11/converge");
    c.alpha = 1.0;
    c.N = 20000;
    c.T = 4.0;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c = base(ctx, "spectrum", "c11/spectrum");
    c.alphas = {0.95, 1.0};
    c.grid_n = 32;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c = base(ctx, "sweep", "c11/sweep");
    c.alphas = {0.9, 0.95, 0.99};
    c.N = 5000;
    c.T = 2.0;
    c.T_burn = 5.0;
    c.T_avg = 10.0;
    c.grid_n = 32;
    cfgs.push_back(c);
  }
  bool ok = true;
  std::string d;
  for (const auto& c : cfgs) {
    run_experiment(c);
    // re-run from the manifest alone
    const RunManifest man = RunManifest::read((fs::path(c.outdir) / "manifest.json").string());
    ExperimentConfig again = ExperimentConfig::from_json(man.config);
    again.outdir = c.outdir + "_rerun";
    run_experiment(again);
    const bool same = outputs(c.outdir) == outputs(again.outdir) && man.config_hash == again.hash();
    // two workers, same seed
    ExperimentConfig par = c;
    par.workers = 2;
    par.outdir = c.outdir + "_w2";
    run_experiment(par);
    const bool indep = outputs(c.outdir) == outputs(par.outdir);
    ok = ok && same && indep;
    d += fmt("%s %s/%s; ", c.experiment.c_str(), same ? "identical" : "DIFFERS", indep ? "worker-independent"
                                                                                     : "WORKER-DEPENDENT");
  }
  return {ok, "manifest rerun / workers=2: " + d};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  Context ctx;
  ctx.work = fs::temp_directory_path() / "granbath_acceptance";
  fs::remove_all(ctx.work);
  fs::create_directories(ctx.work);
  ctx.cache = (ctx.work / "tensor_cache").string();

  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
      {"collision identities", collision_identities},
      {"kernel suite", kernel_suite},
      {"elastic stationarity", elastic_stationarity},
      {"entropy decay", entropy_decay},
      {"plateau scaling", plateau_scaling},
      {"elastic-limit curve", elastic_limit},
      {"steady-state cross-validation", cross_validation},
      {"spectral suite", spectral_suite},
      {"perturbation drift", perturbation_drift},
      {"semigroup/nonlinear consistency", semigroup_consistency},
      {"reproducibility", reproducibility}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %2d %-32s %s  %s  [%.0f s]\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
