// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "granbath/manifest.hpp"
#include "granbath/stats.hpp"

namespace granbath {

namespace {

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string g17(double x) { return fmt("%.17g", x); }

class Outputs {
 public:
  Outputs(const std::string& dir, RunManifest& man, ExperimentResult& res) : dir_(dir), man_(man), res_(res) {
    std::filesystem::create_directories(dir_);
  }
  void write(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    man_.add_output(path.string());
    res_.files.push_back(name);
  }

 private:
  std::string dir_;
  RunManifest& man_;
  ExperimentResult& res_;
};

std::vector<double> coarse_edges(const RadialGrid& grid, std::size_t factor) {
  std::vector<double> e;
  for (std::size_t k = 0; k < grid.size(); k += factor) e.push_back(grid.edges[k]);
  e.push_back(grid.edges.back());
  return e;
}

GridSpec entropy_grid(const ExperimentConfig& cfg) {
  GridSpec gs;
  gs.bins = cfg.bins;
  gs.theta_ref = cfg.theta0;
  gs.center = cfg.u0;
  return gs;
}

GridSpec shell_grid(const std::vector<double>& edges, const Velocity& center) {
  GridSpec gs;
  gs.edges = edges;
  gs.center = center;
  return gs;
}

Ensemble initial_ensemble(const ExperimentConfig& cfg, const RadialGrid& grid, const std::vector<double>& F_masses,
                          std::uint64_t seed) {
  if (cfg.initial_steady) return sample_from_shells(grid, F_masses, cfg.u0, cfg.N, seed);
  return init_ensemble(cfg.initial, cfg.N, seed);
}

DsmcConfig dsmc_config(const ExperimentConfig& cfg, double alpha) {
  DsmcConfig d;
  d.params = RestitutionParams(alpha);
  d.bath = cfg.bath();
  d.workers = cfg.workers;
  return d;
}

nlohmann::json envelope(const std::string& experiment, const nlohmann::json& alpha) {
  return {{"experiment", experiment},
          {"alpha", alpha},
          {"fitted", nlohmann::json::object()},
          {"flags", nlohmann::json::array()},
          {"manifest_ref", "manifest.json"}};
}

// --------------------------------------------------------------------------
// simulate

void simulate(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const RadialGrid grid = experiment_grid(cfg);
  std::vector<double> F;
  if (cfg.initial_steady) F = steady_state_for(cfg, grid, cfg.alpha).masses();
  Ensemble ens = initial_ensemble(cfg, grid, F, cfg.seed);
  const DsmcConfig dc = dsmc_config(cfg, cfg.alpha);
  std::string csv = "t,energy,px,py,pz,rate_self,rate_bath,dissipated,exp_moment\n";
  double exp_sup = 0.0;
  int violations = 0;
  bool low_acceptance = false, exp_unreliable = false;
  auto row = [&](const Ensemble& e, const StepReport* r) {
    const Moments m = moments(e);
    const ExpMoment x = exp_moment(e, 1.0, 1.0);
    exp_sup = std::max(exp_sup, x.value);
    exp_unreliable = exp_unreliable || x.unreliable;
    char buf[400];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.time, m.energy,
                  m.momentum.x(), m.momentum.y(), m.momentum.z(), r ? r->rate_self : 0.0, r ? r->rate_bath : 0.0,
                  r ? r->energy_dissipated : 0.0, x.value);
    csv += buf;
  };
  row(ens, nullptr);
  RunOptions ro;
  ro.T_final = cfg.T;
  ro.dt = cfg.dt;
  ro.forensic_path = (std::filesystem::path(cfg.outdir) / "nan_dump.json").string();
  Hook h;
  h.every = step_count(cfg.sample_every, cfg.dt);
  h.fn = [&](const Ensemble& e, const StepReport& r) {
    row(e, &r);
    violations += r.majorant_violations;
    low_acceptance = low_acceptance || r.low_acceptance;
  };
  ro.hooks.push_back(h);
  run(ens, ro, dc);
  out.write("simulate.csv", csv);

  const Moments m = moments(ens);
  res.summary["fitted"] = {{"final_energy", m.energy},
                           {"final_momentum", {m.momentum.x(), m.momentum.y(), m.momentum.z()}},
                           {"exp_moment_sup", exp_sup}};
  res.summary["diagnostics"] = {{"majorant_violations", violations},
                                {"low_acceptance", low_acceptance},
                                {"exp_moment_unreliable", exp_unreliable}};
}

// --------------------------------------------------------------------------
// steady

void steady(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const RadialGrid grid = experiment_grid(cfg);
  const BathMaxwellian M = cfg.bath();
  nlohmann::json routes = nlohmann::json::object();
  std::optional<SteadyStateResult> det, mc;
  if (cfg.route != "dsmc") {
    det = steady_state_for(cfg, grid, cfg.alpha);
    out.write("steady_deterministic.csv", det->profile_csv());
    routes["deterministic"] = det->to_json();
    if (!det->converged) res.flags.push_back("deterministic_not_converged");
    if (!det->info.value("renormalization_ok", true)) res.flags.push_back("mass_renormalization_above_1e-10");
  }
  if (cfg.route != "deterministic") {
    DsmcSteadyOptions o;
    o.dt = cfg.dt;
    o.a = cfg.a;
    o.workers = cfg.workers;
    o.sample_every = cfg.sample_every < 0.25 ? cfg.dt * std::round(0.25 / cfg.dt) : cfg.sample_every;
    mc = steady_dsmc(RestitutionParams(cfg.alpha), M, cfg.N, cfg.T_burn, cfg.T_avg, cfg.seed, grid, o);
    out.write("steady_dsmc.csv", mc->profile_csv());
    routes["dsmc"] = mc->to_json();
    if (mc->F.escaped_mass > kCoverageTolerance) res.flags.push_back("grid_coverage");
  }
  res.summary["routes"] = routes;
  nlohmann::json checks = nlohmann::json::object();
  const SteadyStateResult& any = det ? *det : *mc;
  checks["sandwich"] = any.sandwich.passed;
  checks["energy_below_bath"] = cfg.alpha < 1.0 ? any.energy < 3.0 * cfg.theta0 : true;
  if (mc) {
    checks["dsmc_residual_within_tolerance"] = mc->converged;
    checks["exp_moment_bounded"] = !mc->info.value("exp_moment_unreliable", false);
  }
  if (det && mc) {
    const CrossRoute c = compare_routes(*det, *mc, cfg.coarsen, cfg.cross_target);
    res.summary["cross_route"] = {{"x_distance", c.x_distance}, {"target", cfg.cross_target},
                                  {"combined_tolerance", c.tolerance}, {"agree", c.agree}};
    checks["routes_agree"] = c.agree;
  }
  res.summary["fitted"] = {{"energy", any.energy}, {"x_to_M", any.x_to_M}, {"y_to_M", any.y_to_M},
                           {"theta_lower", any.sandwich.theta_lower}, {"theta_upper", any.sandwich.theta_upper}};
  res.summary["checks"] = checks;
}

// --------------------------------------------------------------------------
// spectrum

struct SpectrumRow {
  double alpha;
  SpectralReport rep;
  DissipativityReport diss;
  double identity_error;
  double column_mass;
};

void spectrum(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const RadialGrid grid = experiment_grid(cfg);
  const BathMaxwellian M = cfg.bath();
  LAssembly L = assemble_L(grid, calibrated_constants(M));
  L.L.a = cfg.diss_a;
  const Eigen::VectorXd Mh = grid.maxwellian(cfg.theta0);

  // calibrate the splitting on the elastic operator first
  TAlphaParts T1;
  const OperatorMatrix L1 = linearized_operator(grid, L, Mh, 1.0, cfg.tensor_cache, &T1);
  std::vector<double> candidates;
  for (double R = 0.3 * grid.R_max; R <= 0.85 * grid.R_max + 1e-12; R += grid.R_max / 24.0) candidates.push_back(R);
  const SplittingCalibration cal = calibrate_splitting(L, T1, candidates);

  SpectralOptions so;
  so.a = cfg.a;
  so.seed = cfg.seed;
  std::vector<SpectrumRow> rows;
  std::vector<OperatorMatrix> ops;
  std::vector<double> alphas = cfg.alpha_list();
  std::string eig_csv = "alpha,index,re,im\n";
  for (double alpha : alphas) {
    TAlphaParts parts;
    OperatorMatrix La = alpha == 1.0 ? L1 : OperatorMatrix{};
    if (alpha == 1.0) {
      parts = T1;
    } else {
      const SteadyStateResult F = steady_state_for(cfg, grid, alpha);
      if (!F.converged) res.flags.push_back("steady_state_not_converged_alpha_" + g17(alpha));
      La = linearized_operator(grid, L, F.nodal, alpha, cfg.tensor_cache, &parts);
    }
    SpectrumRow r{alpha, spectral_report(La, so), {}, 0.0, La.column_mass_defect()};
    if (cal.found) {
      Splitting sp = assemble_splitting(L, parts, cal.R);
      sp.B.a = cfg.diss_a;
      r.diss = dissipativity_check(sp.B, cal.beta_star, cfg.seed);
      r.identity_error = sp.identity_error;
    }
    for (std::size_t i = 0; i < r.rep.eigenvalues.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", alpha, i, r.rep.eigenvalues[i].real(),
                    r.rep.eigenvalues[i].imag());
      eig_csv += buf;
    }
    if (r.rep.defective) res.flags.push_back("defective_matrix_alpha_" + g17(alpha));
    rows.push_back(std::move(r));
    ops.push_back(std::move(La));
  }
  out.write("spectrum_eigenvalues.csv", eig_csv);

  std::string csv =
      "alpha,gap,second_gap,mu_hat,C_mu,lambda0,zero_mode_residual,column_mass_defect,G_positive,"
      "worst_margin,certified_margin,dissipative,splitting_identity_error\n";
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : rows) {
    char buf[600];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%d,%.17g\n",
                  r.alpha, r.rep.gap, r.rep.second_gap, r.rep.mu_hat, r.rep.C_mu, std::abs(r.rep.lambda0),
                  r.rep.zero_mode_residual, r.column_mass, r.rep.G_positive ? 1 : 0, r.diss.worst_margin,
                  r.diss.certified_margin, r.diss.passed ? 1 : 0, r.identity_error);
    csv += buf;
    nlohmann::json j = r.rep.to_json();
    j["alpha"] = r.alpha;
    j["dissipativity"] = {{"worst_margin", r.diss.worst_margin},
                          {"certified_margin", r.diss.certified_margin},
                          {"beta_max", r.diss.beta_max},
                          {"passed", r.diss.passed},
                          {"advisory", r.diss.advisory}};
    j["splitting_identity_error"] = r.identity_error;
    j["column_mass_defect"] = r.column_mass;
    per.push_back(j);
  }
  out.write("spectrum.csv", csv);

  res.summary["per_alpha"] = per;
  res.summary["L"] = {{"zero_mode_residual", L.zero_mode_residual},
                      {"raw_zero_mode_residual", L.raw_zero_mode_residual},
                      {"frequency_defect", L.frequency_defect},
                      {"symmetry_defect", conjugated_symmetry_defect(L.L, Mh)},
                      {"flagged", L.flagged}};
  res.summary["splitting"] = {{"found", cal.found}, {"R", cal.R}, {"beta_star", cal.beta_star}, {"a", cfg.diss_a}};
  if (!cal.found) res.flags.push_back("no_dissipative_splitting");
  if (L.flagged) res.flags.push_back("L_zero_mode_residual");

  nlohmann::json fitted = nlohmann::json::object();
  for (const auto& r : rows)
    fitted[g17(r.alpha)] = {{"nu_h", r.rep.gap}, {"mu_hat", r.rep.mu_hat}, {"C_mu", r.rep.C_mu}};
  res.summary["fitted"] = fitted;

  bool has_one = false;
  for (double a : alphas) has_one = has_one || a == 1.0;
  if (has_one && alphas.size() >= 2) {
    const DriftTable dt = alpha_drift(alphas, ops, so);
    std::string dcsv = "alpha,op_drift,gap,lambda0,resolvent_drift,projection_drift\n";
    for (const auto& r : dt.rows) {
      char buf[300];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.alpha, r.op_drift, r.gap, r.lambda0,
                    r.resolvent_drift, r.projection_drift);
      dcsv += buf;
    }
    out.write("drift.csv", dcsv);
    res.summary["drift"] = dt.to_json();
  }
}

// --------------------------------------------------------------------------
// entropy

void entropy(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const RadialGrid grid = experiment_grid(cfg);
  const SteadyStateResult F = steady_state_for(cfg, grid, cfg.alpha);
  const EntropyReport rep = entropy_run(cfg, cfg.alpha, cfg.seed, grid, F.masses());
  out.write("entropy.csv", rep.csv());
  res.summary["report"] = rep.summary();
  const double H0 = rep.rows.front().H;
  // monotone within noise: no increase beyond 3 sigma of the histogram entropy fluctuation
  bool monotone = true;
  const double tol = 3.0 * std::sqrt(2.0) * (rep.fit.plateau_ci > 0.0 ? rep.fit.plateau_ci : 1e-3);
  double running_min = H0;
  for (const auto& r : rep.rows) {
    if (r.H > running_min + tol) monotone = false;
    running_min = std::min(running_min, r.H);
  }
  res.summary["fitted"] = {{"lambda_hat", rep.fit.lambda},
                           {"lambda_ci", rep.fit.lambda_ci},
                           {"plateau", rep.fit.plateau},
                           {"plateau_ci", rep.fit.plateau_ci},
                           {"K_hat", rep.fit.K},
                           {"K_ci", rep.fit.K_ci}};
  res.summary["checks"] = {{"H0", H0},
                           {"monotone_within_noise", monotone},
                           {"balance_fraction_within_3", rep.balance.fraction_within_3},
                           {"balance_ok", !rep.balance.undersampled && rep.balance.fraction_within_3 >= 0.95},
                           {"lambda_positive", !rep.fit.failed}};
  if (rep.balance.undersampled) res.flags.push_back("entropy_balance_undersampled");
  if (rep.fit.failed) res.flags.push_back("lambda_fit_failed");
}

// --------------------------------------------------------------------------
// converge

void converge(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const ConvergeReport rep = converge_experiment(cfg);
  out.write("converge.csv", rep.csv());
  res.summary["report"] = rep.to_json();
  res.summary["fitted"] = {{"nu_hat", rep.nu_hat},
                           {"nu_ci", rep.nu_ci},
                           {"K_hat", rep.K_hat},
                           {"K_ci", rep.K_ci},
                           {"lambda_hat", rep.fit.lambda},
                           {"nu_h", rep.nu_h}};
  res.summary["checks"] = {{"nu_ratio", rep.ratio},
                           {"nu_in_bracket", rep.ratio >= 0.5 && rep.ratio <= 1.5},
                           {"decay_resolved", !rep.fit.failed}};
  if (rep.noise_dominated) res.flags.push_back("distance_at_noise_floor_increase_N");
}

// --------------------------------------------------------------------------
// sweep

void sweep(const ExperimentConfig& cfg, Outputs& out, ExperimentResult& res) {
  const RadialGrid grid = experiment_grid(cfg);
  const BathMaxwellian M = cfg.bath();
  std::vector<double> alphas = cfg.alpha_list();
  std::sort(alphas.begin(), alphas.end());
  std::vector<double> with_one = alphas;
  if (with_one.back() != 1.0) with_one.push_back(1.0);

  nlohmann::json failures = nlohmann::json::array();
  auto attempt = [&](const std::string& stage, double alpha, auto&& fn) {
    try {
      fn();
      return true;
    } catch (const std::exception& e) {
      failures.push_back({{"stage", stage}, {"alpha", alpha}, {"error", e.what()}});
      return false;
    }
  };

  // entropy plateau per alpha
  std::string pcsv = "alpha,plateau,plateau_ci,lambda,lambda_ci,K,K_ci,balance_fraction\n";
  std::vector<double> om, plateau;
  std::vector<SteadyStateResult> det, mc;
  for (std::size_t i = 0; i < with_one.size(); ++i) {
    const double alpha = with_one[i];
    std::optional<SteadyStateResult> F;
    attempt("steady_deterministic", alpha, [&] {
      F = steady_state_for(cfg, grid, alpha);
      if (!F->converged) throw SteadyStateError("not converged");
      det.push_back(*F);
    });
    if (cfg.route != "deterministic")
      attempt("steady_dsmc", alpha, [&] {
        DsmcSteadyOptions o;
        o.dt = cfg.dt;
        o.a = cfg.a;
        o.workers = cfg.workers;
        mc.push_back(steady_dsmc(RestitutionParams(alpha), M, cfg.N, cfg.T_burn, cfg.T_avg, mix_seed(cfg.seed, 100 + i),
                                 grid, o));
      });
    if (alpha == 1.0 && std::find(alphas.begin(), alphas.end(), 1.0) == alphas.end()) continue;
    if (!F) continue;
    attempt("entropy", alpha, [&] {
      const EntropyReport rep = entropy_run(cfg, alpha, mix_seed(cfg.seed, 200 + i), grid, F->masses());
      if (rep.fit.failed && rep.fit.transient_points < 3) throw std::runtime_error(rep.fit.message);
      char buf[400];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", alpha, rep.fit.plateau,
                    rep.fit.plateau_ci, rep.fit.lambda, rep.fit.lambda_ci, rep.fit.K, rep.fit.K_ci,
                    rep.balance.fraction_within_3);
      pcsv += buf;
      om.push_back(1.0 - alpha);
      plateau.push_back(rep.fit.plateau);
    });
  }
  out.write("sweep_plateau.csv", pcsv);

  nlohmann::json trends = nlohmann::json::object();
  if (om.size() >= 3) {
    const LinearFit f = linear_fit(om, plateau);
    const double ci = f.ci_intercept(0.95);
    trends["plateau"] = {{"slope", f.slope},
                         {"slope_ci", f.ci_slope(0.95)},
                         {"intercept", f.intercept},
                         {"intercept_ci", ci},
                         {"spearman", spearman(om, plateau)},
                         {"slope_positive", f.slope > 0.0},
                         {"intercept_contains_zero", std::abs(f.intercept) <= ci},
                         {"monotone", spearman(om, plateau) > 0.9}};
  }

  std::string lcsv = "route,alpha,x,y,floor\n";
  for (const auto* set : {&det, &mc}) {
    if (set->size() < 2) continue;
    const LimitCurve c = limit_curve_from(*set, set->front().route);
    for (const auto& r : c.rows) {
      char buf[300];
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", c.route.c_str(), r.alpha, r.x, r.y, r.floor);
      lcsv += buf;
    }
    trends["limit_" + c.route] = c.to_json();
  }
  out.write("sweep_limit.csv", lcsv);

  // spectral drift on the deterministic states
  attempt("drift", 1.0, [&] {
    if (det.size() < 2) return;
    LAssembly L = assemble_L(grid, calibrated_constants(M));
    std::vector<double> al;
    std::vector<OperatorMatrix> ops;
    for (const auto& F : det) {
      al.push_back(F.alpha);
      ops.push_back(linearized_operator(grid, L, F.alpha == 1.0 ? grid.maxwellian(cfg.theta0) : F.nodal, F.alpha,
                                        cfg.tensor_cache));
    }
    SpectralOptions so;
    so.a = cfg.a;
    so.seed = cfg.seed;
    so.semigroup = false;
    const DriftTable dt = alpha_drift(al, ops, so);
    std::string dcsv = "alpha,op_drift,gap,lambda0,resolvent_drift,projection_drift\n";
    for (const auto& r : dt.rows) {
      char buf[300];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.alpha, r.op_drift, r.gap, r.lambda0,
                    r.resolvent_drift, r.projection_drift);
      dcsv += buf;
    }
    out.write("sweep_drift.csv", dcsv);
    trends["drift"] = dt.to_json();
  });

  res.summary["trends"] = trends;
  res.summary["failure_ledger"] = failures;
  if (trends.contains("plateau")) {
    res.summary["fitted"] = {{"K_hat", trends["plateau"]["slope"]}, {"K_ci", trends["plateau"]["slope_ci"]}};
  }
  if (!failures.empty()) res.flags.push_back("sub_run_failures");
}

}  // namespace

// --------------------------------------------------------------------------

RadialGrid experiment_grid(const ExperimentConfig& cfg) {
  return build_grid(cfg.grid_n, cfg.R_max, Placement::GaussLegendre, cfg.theta0);
}

KernelConstants calibrated_constants(const BathMaxwellian& M) {
  const double s = std::sqrt(M.theta0);
  const Velocity probes[3] = {M.u0, M.u0 + Velocity(s, 0.0, 0.0), M.u0 + Velocity(0.0, 2.0 * s, 0.0)};
  return calibrate_C0(M, probes);
}

SteadyStateResult steady_state_for(const ExperimentConfig& cfg, const RadialGrid& grid, double alpha) {
  DeterministicOptions o;
  o.a = cfg.a;
  o.workers = cfg.workers;
  o.cache_dir = cfg.tensor_cache;
  o.tensor.workers = cfg.workers;
  SteadyStateResult r = steady_deterministic(grid, RestitutionParams(alpha), cfg.bath(), cfg.det_dt, cfg.tol, o);
  r.info.erase("wall_time");
  return r;
}

OperatorMatrix linearized_operator(const RadialGrid& grid, const LAssembly& L, const Eigen::VectorXd& F, double alpha,
                                   const std::string& cache_dir, TAlphaParts* parts) {
  DeterministicOptions o;
  o.cache_dir = cache_dir;
  const RestitutionParams p(alpha);
  CollisionTensor T = [&] {
    if (cache_dir.empty()) return CollisionTensor::build(grid, p, o.tensor);
    // reuse the steady-state cache layout
    char name[96];
    std::snprintf(name, sizeof name, "tensor_%s_%.17g_%zu_%zu.gbct", grid.hash().c_str(), alpha, o.tensor.pieces,
                  o.tensor.order);
    const auto path = std::filesystem::path(cache_dir) / name;
    if (std::filesystem::exists(path)) return CollisionTensor::load(path.string(), grid, alpha);
    std::filesystem::create_directories(cache_dir);
    CollisionTensor t = CollisionTensor::build(grid, p, o.tensor);
    t.save(path.string());
    return t;
  }();
  TAlphaParts tp = assemble_T_alpha(grid, F, p, T);
  OperatorMatrix La = assemble_L_alpha(L, tp);
  if (parts) *parts = std::move(tp);
  return La;
}

Ensemble sample_from_shells(const RadialGrid& grid, const std::vector<double>& masses, const Velocity& center,
                            std::size_t N, std::uint64_t seed) {
  Ensemble ens = init_ensemble(InitialSpec{}, N, seed);
  std::vector<double> cdf(masses.size());
  double s = 0.0;
  for (std::size_t k = 0; k < masses.size(); ++k) cdf[k] = s += std::max(masses[k], 0.0);
  Rng rng(mix_seed(seed, 0x5eed));
  for (auto& v : ens.v) {
    const double u = rng.uniform() * s;
    const std::size_t k = std::min<std::size_t>(masses.size() - 1,
                                                std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const double a3 = std::pow(grid.edges[k], 3), b3 = std::pow(grid.edges[k + 1], 3);
    const double r = std::cbrt(a3 + rng.uniform() * (b3 - a3));
    v = center + r * rng.unit_vector();
  }
  return ens;
}

EntropyReport entropy_run(const ExperimentConfig& cfg, double alpha, std::uint64_t seed, const RadialGrid& grid,
                          const std::vector<double>& F_masses) {
  const BathMaxwellian M = cfg.bath();
  const RestitutionParams params(alpha);
  Ensemble ens = initial_ensemble(cfg, grid, F_masses, seed);
  const DsmcConfig dc = dsmc_config(cfg, alpha);
  const GridSpec hist = entropy_grid(cfg);
  const GridSpec shells = shell_grid(grid.edges, cfg.u0);
  const std::vector<double> Mk = bath_shell_masses(grid, M);

  EntropyReport rep;
  rep.alpha = alpha;
  std::vector<EntropySample> traj;
  const std::uint64_t every = step_count(cfg.sample_every, cfg.dt);
  const std::uint64_t steps = step_count(cfg.T, cfg.dt);
  for (std::uint64_t s = 0;; ++s) {
    if (s % every == 0) {
      traj.push_back(entropy_sample(ens, params, M, hist, cfg.samples, mix_seed(seed, 1000 + s)));
      const EntropySample& e = traj.back();
      const DensityEstimate est = density_estimate(ens, shells);
      rep.rows.push_back({e.t, e.H, e.D.mean, e.D.se, e.DH.mean, e.DH.se, e.qlogM.mean, e.energy,
                          x_distance(est, Mk, cfg.a), x_distance(est, F_masses, cfg.a)});
      if (s == steps) rep.normY_to_M_final = y_distance(est, Mk, cfg.a);
    }
    if (s == steps) break;
    step(ens, cfg.dt, dc);
  }
  rep.balance = entropy_balance(traj, params);
  std::vector<double> t, H;
  double floor = 0.0;
  std::size_t tail = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    t.push_back(traj[i].t);
    H.push_back(traj[i].H);
    if (3 * i >= 2 * traj.size()) {
      floor += (static_cast<double>(traj[i].occupied_bins) - 1.0) / (2.0 * static_cast<double>(traj[i].N));
      ++tail;
    }
  }
  rep.fit = lambda_fit(t, H, alpha, tail ? floor / static_cast<double>(tail) : 0.0);
  return rep;
}

std::string ConvergeReport::csv() const {
  std::string s = "t,H,distance_X,energy\n";
  char buf[300];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t[i], H[i], distance[i], energy[i]);
    s += buf;
  }
  return s;
}

nlohmann::json ConvergeReport::to_json() const {
  return {{"alpha", alpha},           {"nu_hat", nu_hat}, {"nu_ci", nu_ci},         {"K_hat", K_hat},
          {"K_ci", K_ci},             {"nu_h", nu_h},     {"ratio", ratio},         {"t_window", t_window},
          {"entropy_floor", floor},   {"fit", fit.to_json()}, {"noise_dominated", noise_dominated}};
}

ConvergeReport converge_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const RadialGrid grid = experiment_grid(cfg);
  const BathMaxwellian M = cfg.bath();
  const double alpha = cfg.alpha;
  const SteadyStateResult F = steady_state_for(cfg, grid, alpha);
  if (!F.converged) throw SteadyStateError("converge: steady state did not converge");

  ConvergeReport rep;
  rep.alpha = alpha;
  {
    const LAssembly L = assemble_L(grid, calibrated_constants(M));
    const OperatorMatrix La = linearized_operator(grid, L, alpha == 1.0 ? grid.maxwellian(cfg.theta0) : F.nodal,
                                                  alpha, cfg.tensor_cache);
    SpectralOptions so;
    so.a = cfg.a;
    so.semigroup = false;
    rep.nu_h = spectral_report(La, so).gap;
  }

  const std::vector<double> Fm = F.masses();
  const DensityEstimate Fc = coarsen(grid, Fm, cfg.coarsen);
  const GridSpec coarse = shell_grid(coarse_edges(grid, cfg.coarsen), cfg.u0);
  const GridSpec hist = entropy_grid(cfg);
  Ensemble ens = initial_ensemble(cfg, grid, Fm, cfg.seed);
  const DsmcConfig dc = dsmc_config(cfg, alpha);
  const std::uint64_t every = step_count(cfg.sample_every, cfg.dt);
  const std::uint64_t steps = step_count(cfg.T, cfg.dt);
  std::vector<double> floors;
  for (std::uint64_t s = 0;; ++s) {
    if (s % every == 0) {
      const DensityEstimate h = density_estimate(ens, hist);
      std::size_t occupied = 0;
      for (double m : h.masses()) occupied += m > 0.0;
      rep.t.push_back(ens.time);
      rep.H.push_back(relative_entropy(h, M).value);
      floors.push_back((static_cast<double>(occupied) - 1.0) / (2.0 * static_cast<double>(cfg.N)));
      rep.distance.push_back(x_distance(density_estimate(ens, coarse), Fc.masses(), cfg.a));
      rep.energy.push_back(moments(ens).energy);
    }
    if (s == steps) break;
    step(ens, cfg.dt, dc);
  }
  {
    // entropy floor of the run: mean of the last third, bias included
    const std::size_t n = rep.H.size(), b = n - n / 3;
    double hf = 0.0, bias = 0.0;
    for (std::size_t i = b; i < n; ++i) {
      hf += rep.H[i];
      bias += floors[i];
    }
    rep.floor = bias / static_cast<double>(n - b);
    hf /= static_cast<double>(n - b);
    // window: after the entropy has shed all but 1/e of its initial excess
    const double excess0 = rep.H.front() - hf;
    std::size_t w = 0;
    if (excess0 > 0.0)
      while (w + 1 < n && rep.H[w] - hf > excess0 / std::numbers::e) ++w;
    rep.t_window = rep.t[w];
    const std::vector<double> tw(rep.t.begin() + static_cast<std::ptrdiff_t>(w), rep.t.end());
    const std::vector<double> dw(rep.distance.begin() + static_cast<std::ptrdiff_t>(w), rep.distance.end());
    rep.fit = lambda_fit(tw, dw, 1.0);
  }
  rep.nu_hat = rep.fit.lambda;
  rep.nu_ci = rep.fit.lambda_ci;
  rep.K_hat = rep.fit.amplitude * std::exp(rep.nu_hat * rep.t_window);
  rep.K_ci = rep.K_hat * rep.t_window * rep.nu_ci;
  rep.ratio = rep.nu_h > 0.0 ? rep.nu_hat / rep.nu_h : 0.0;
  rep.noise_dominated = rep.fit.transient_points < 3 || rep.fit.efoldings < 1.0;
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  RunManifest man;
  man.experiment = cfg.experiment;
  man.config_hash = cfg.hash();
  man.code_version = GRANBATH_VERSION;
  man.seeds = {cfg.seed};
  man.config = cfg.to_json();
  man.started = utc_timestamp();
  Outputs out(cfg.outdir, man, res);

  const std::vector<double> al = cfg.alpha_list();
  res.summary = envelope(cfg.experiment, al.size() == 1 ? nlohmann::json(al.front()) : nlohmann::json(al));
  res.summary["config_hash"] = man.config_hash;

  if (cfg.experiment == "simulate") simulate(cfg, out, res);
  else if (cfg.experiment == "steady") steady(cfg, out, res);
  else if (cfg.experiment == "spectrum") spectrum(cfg, out, res);
  else if (cfg.experiment == "entropy") entropy(cfg, out, res);
  else if (cfg.experiment == "converge") converge(cfg, out, res);
  else if (cfg.experiment == "sweep") sweep(cfg, out, res);

  res.summary["flags"] = res.flags;
  out.write("summary.json", res.summary.dump(2) + "\n");
  man.finished = utc_timestamp();
  man.write((std::filesystem::path(cfg.outdir) / "manifest.json").string());
  return res;
}

}  // namespace granbath
