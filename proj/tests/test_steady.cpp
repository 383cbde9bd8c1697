// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <doctest.h>

#include "granbath/diagnostics.hpp"
#include "granbath/steady.hpp"

using namespace granbath;

namespace {

const RadialGrid& grid32() {
  static const RadialGrid g = build_grid(32, 8.0);
  return g;
}

const SteadyStateResult& det09() {
  static const SteadyStateResult r = steady_deterministic(grid32(), RestitutionParams(0.9), BathMaxwellian{}, 0.05, 1e-9);
  return r;
}

}  // namespace

TEST_CASE("bath shell masses") {
  const auto& g = grid32();
  const auto m = bath_shell_masses(g, BathMaxwellian{});
  double s = 0.0;
  for (double x : m) s += x;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  // shell masses and nodal values agree to quadrature accuracy in the bulk
  const auto M = g.maxwellian(1.0);
  for (std::size_t i = 4; i < g.size(); i += 4)
    if (g.r[i] < 4.0) CHECK(m[i] == doctest::Approx(M[i] * g.w[i]).epsilon(2e-2));
  const auto c = coarsen(g, m, 4);
  CHECK(c.size() == 8);
  CHECK(c.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("deterministic route at alpha = 1 stays at the bath") {
  const auto r = steady_deterministic(grid32(), RestitutionParams(1.0), BathMaxwellian{}, 0.05, 1e-10);
  CHECK(r.converged);
  CHECK(r.info["steps"].get<int>() <= 1);
  CHECK(r.residual < 1e-10);
  CHECK(r.x_to_M < 1e-10);
  CHECK(r.F.total_mass() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("deterministic route at alpha = 0.9") {
  const auto& r = det09();
  CHECK(r.converged);
  CHECK(r.residual < 1e-9);
  CHECK(r.F.total_mass() == doctest::Approx(1.0).epsilon(1e-8));
  for (double m : r.F.masses()) CHECK(m >= 0.0);
  CHECK(r.energy > 0.0);
  CHECK(r.energy < 3.0);
  CHECK(r.info["max_renormalization"].get<double>() <= 1e-10);
  CHECK(r.sandwich.passed);
  CHECK(r.sandwich.theta_lower <= r.sandwich.theta_eff);
  CHECK(r.sandwich.theta_eff <= r.sandwich.theta_upper);
  CHECK(r.x_to_M <= r.y_to_M);

  // tighter tolerance: smaller residual, same fixed point
  const auto t = steady_deterministic(grid32(), RestitutionParams(0.9), BathMaxwellian{}, 0.05, 1e-10);
  CHECK(t.residual < 1e-10);
  CHECK(x_distance(t.F, r.F.masses(), 0.5) < 1e-8);

  // cooler at smaller alpha
  const auto c = steady_deterministic(grid32(), RestitutionParams(0.8), BathMaxwellian{}, 0.05, 1e-9);
  CHECK(c.energy < r.energy);
  CHECK(c.x_to_M > r.x_to_M);
}

TEST_CASE("sandwich check") {
  const auto& g = grid32();
  const std::vector<double> floor(g.size(), 1e-14);
  const auto M = g.maxwellian(1.0);
  const auto s = sandwich_check(g, M, floor);
  CHECK(s.passed);
  CHECK(s.theta_lower == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.theta_upper == doctest::Approx(1.0).epsilon(1e-6));

  Eigen::VectorXd heavy(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) heavy[i] = std::pow(1.0 + g.r[i], -4.0);
  heavy /= g.integrate(heavy);
  const auto h = sandwich_check(g, heavy, floor);
  CHECK_FALSE(h.passed);
  CHECK_FALSE(h.reason.empty());

  const auto j = s.to_json();
  CHECK(j["passed"] == true);
}

TEST_CASE("particle route") {
  const auto& g = grid32();
  DsmcSteadyOptions o;
  o.residual_samples = 50000;
  const auto e = steady_dsmc(RestitutionParams(1.0), BathMaxwellian{}, 10000, 5.0, 20.0, 3, g, o);
  CHECK(e.route == "dsmc");
  CHECK(e.F.total_mass() == doctest::Approx(1.0).epsilon(1e-8));
  // the bath within estimator noise
  CHECK(e.x_to_M <= 3.0 * e.noise_floor);
  CHECK(std::abs(e.energy - 3.0) <= 4.0 * e.energy_se);
  CHECK(e.residual <= e.residual_tol);

  const auto a = steady_dsmc(RestitutionParams(0.9), BathMaxwellian{}, 10000, 5.0, 20.0, 4, g, o);
  const auto b = steady_dsmc(RestitutionParams(0.9), BathMaxwellian{}, 10000, 5.0, 20.0, 5, g, o);
  CHECK(a.energy + 3.0 * a.energy_se < 3.0);
  // two seeds agree within their combined noise
  CHECK(x_distance(a.F, b.masses(), 0.5) <= 3.0 * std::hypot(a.noise_floor, b.noise_floor));
  CHECK(a.sandwich.passed);

  // cross-route agreement with the deterministic state
  const auto cr = compare_routes(a, det09(), 4, 3e-2);
  CHECK(cr.agree);
  CHECK(cr.x_distance <= 3e-2);
  const auto csv = a.profile_csv();
  CHECK(csv.rfind("r,", 0) == 0);
}

TEST_CASE("limit curve bookkeeping") {
  std::vector<SteadyStateResult> rs;
  for (double a : {0.8, 0.9, 0.95, 1.0}) {
    SteadyStateResult r;
    r.alpha = a;
    r.x_to_M = 0.2 * (1 - a);
    r.y_to_M = 0.3 * (1 - a);
    r.noise_floor = 1e-3;
    rs.push_back(r);
  }
  const auto c = limit_curve_from(rs, "deterministic");
  CHECK(c.strictly_decreasing);
  CHECK(c.limit_at_floor);
  CHECK(c.spearman_x == doctest::Approx(-1.0));
  CHECK(std::abs(c.intercept) <= c.intercept_ci + 1e-12);
  CHECK_FALSE(c.flagged);
  rs[1].x_to_M = 0.5;
  CHECK(limit_curve_from(rs, "deterministic").flagged);
}
