// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <doctest.h>

#include "granbath/diagnostics.hpp"
#include "granbath/stats.hpp"

using namespace granbath;

namespace {

// Mass of an isotropic Gaussian of temperature theta inside [a, b).
double gaussian_shell(double a, double b, double theta) {
  return boost::math::gamma_p(1.5, b * b / (2 * theta)) - boost::math::gamma_p(1.5, a * a / (2 * theta));
}

DensityEstimate gaussian_estimate(double theta, std::size_t bins, double R) {
  std::vector<double> edges(bins + 1), masses(bins);
  for (std::size_t k = 0; k <= bins; ++k) edges[k] = R * k / bins;
  for (std::size_t k = 0; k < bins; ++k) masses[k] = gaussian_shell(edges[k], edges[k + 1], theta);
  return DensityEstimate::radial(edges, masses);
}

Ensemble gaussian_ensemble(double theta, std::size_t N, std::uint64_t seed) {
  InitialSpec s;
  s.theta = theta;
  return init_ensemble(s, N, seed);
}

// E|Z|^3 for Z ~ N(0, 2 I_3) by a radial midpoint rule on the chi(3) density.
double pair_cube_oracle() {
  double acc = 0.0;
  const int n = 200000;
  const double R = 40.0, h = R / n;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * h;
    acc += std::sqrt(2.0 / M_PI) * x * x * std::exp(-0.5 * x * x) * std::pow(std::sqrt(2.0) * x, 3) * h;
  }
  return acc;
}

}  // namespace

TEST_CASE("density estimate of bath samples") {
  const std::size_t N = 1000000;
  const auto ens = gaussian_ensemble(1.0, N, 21);
  GridSpec g;
  g.bins = 40;
  const auto f = density_estimate(ens, g);
  CHECK(f.size() == 40);
  CHECK(f.total_mass() + f.escaped_mass == doctest::Approx(1.0));
  CHECK(coverage_ok(f));
  CHECK(f.anisotropy < 0.01);
  const BathMaxwellian M;
  const auto Mk = maxwellian_bin_masses(f, M);
  // expected sampling error sum_k E|f_k - M_k| = sum_k sqrt(2 M_k / (pi N))
  double expected = 0.0;
  for (double m : Mk) expected += std::sqrt(2.0 * m / (M_PI * N));
  CHECK(l1_distance_to_maxwellian(f, M) <= 2.0 * expected);
  CHECK(l1_distance_to_maxwellian(f, M) > 0.2 * expected);
}

TEST_CASE("density estimate: point mass, beam, escape") {
  std::vector<Velocity> same(100, Velocity(0.3, 0.1, 0.0));
  GridSpec g;
  g.bins = 10;
  const auto f = density_estimate(same, g);
  std::size_t occupied = 0;
  for (double m : f.masses()) occupied += m > 0.0;
  CHECK(occupied == 1);
  CHECK(f.total_mass() == doctest::Approx(1.0));

  std::vector<Velocity> beam;
  std::mt19937_64 r(2);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int k = 0; k < 5000; ++k) beam.emplace_back(1.0 + n(r), n(r), n(r));
  CHECK(anisotropy_score(beam, Velocity::Zero()) > 0.5);

  std::vector<Velocity> wide(1000, Velocity::Zero());
  for (int k = 0; k < 10; ++k) wide[k] = Velocity(100, 0, 0);
  const auto e = density_estimate(wide, g);
  CHECK(e.escaped_mass == doctest::Approx(0.01));
  CHECK_FALSE(coverage_ok(e));
  CHECK_THROWS_AS(density_estimate(std::vector<Velocity>{}, g), std::invalid_argument);
}

TEST_CASE("relative entropy") {
  const BathMaxwellian M;
  CHECK(std::abs(relative_entropy(gaussian_estimate(1.0, 40, 8.0), M).value) < 1e-14);
  // closed form (3/2)(theta - 1 - log theta) at theta = 2; binning only lowers it
  const double exact = 1.5 * (1.0 - std::log(2.0));
  CHECK(exact == doctest::Approx(0.4603).epsilon(1e-4));
  const double fine = relative_entropy(gaussian_estimate(2.0, 400, 16.0), M).value;
  CHECK(fine <= exact + 1e-12);
  CHECK(fine == doctest::Approx(exact).epsilon(1e-4));
  CHECK(relative_entropy(gaussian_estimate(2.0, 40, 16.0), M).value <= fine);

  // Csiszar-Kullback on random densities
  std::mt19937_64 r(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t B = 20;
    std::vector<double> edges(B + 1), m(B);
    for (std::size_t k = 0; k <= B; ++k) edges[k] = 8.0 * k / B;
    double s = 0.0;
    for (auto& x : m) s += (x = u(r) * u(r));
    for (auto& x : m) x /= s;
    const auto f = DensityEstimate::radial(edges, m);
    const double H = relative_entropy(f, M).value;
    const double l1 = l1_distance_to_maxwellian(f, M);
    CHECK(H >= 0.0);
    CHECK(l1 * l1 <= 2.0 * H + 1e-12);
  }
}

TEST_CASE("weighted distances") {
  const auto f = gaussian_estimate(2.0, 40, 16.0);
  const auto g = gaussian_estimate(1.0, 40, 16.0);
  const double x = x_distance(f, g.masses(), 0.5);
  const double y = y_distance(f, g.masses(), 0.5);
  CHECK(x > 0.0);
  CHECK(x <= y);
  CHECK(x_distance(f, f.masses(), 0.5) == 0.0);
  CHECK_THROWS_AS(x_distance(f, std::vector<double>(3, 0.0), 0.5), std::invalid_argument);
}

TEST_CASE("entropy productions at equilibrium and away from it") {
  const BathMaxwellian M;
  GridSpec g;
  g.bins = 30;
  const auto eq = gaussian_ensemble(1.0, 100000, 31);
  const LogRatio psi_eq(density_estimate(eq, g), M);
  const auto D0 = entropy_production_D(eq, M, psi_eq, 200000, 1);
  CHECK(std::abs(D0.mean) <= 2.0 * D0.se + 2e-3);

  const auto hot = gaussian_ensemble(2.0, 100000, 32);
  GridSpec gh = g;
  gh.R = 12.0;
  const LogRatio psi_hot(density_estimate(hot, gh), M);
  const auto D1 = entropy_production_D(hot, M, psi_hot, 200000, 2);
  CHECK(D1.mean > 5.0 * D1.se);

  // doubling the sample count halves the variance
  const auto Dh = entropy_production_D(hot, M, psi_hot, 400000, 3);
  CHECK(Dh.se * Dh.se / (D1.se * D1.se) == doctest::Approx(0.5).epsilon(0.15));

  DensityFn bath = [&](const Velocity& v) -> std::optional<double> { return M.density(v); };
  const auto DH1 = entropy_production_DH(eq, RestitutionParams(1.0), bath, 100000, 4);
  CHECK(std::abs(DH1.mean) < 1e-12);
  const auto DH8 = entropy_production_DH(eq, RestitutionParams(0.8), bath, 100000, 5);
  CHECK(DH8.mean > 5.0 * DH8.se);
  const auto DHh = entropy_production_DH(hot, RestitutionParams(0.8), psi_hot, 100000, 6);
  CHECK(DHh.mean >= 0.0);
}

TEST_CASE("entropy identity") {
  const BathMaxwellian M;
  const auto eq = gaussian_ensemble(1.0, 100000, 41);
  DensityFn bath = [&](const Velocity& v) -> std::optional<double> { return M.density(v); };
  for (double a : {1.0, 0.8}) {
    const auto c = entropy_identity_check(eq, RestitutionParams(a), bath, 200000, 7);
    CHECK(c.passed);
    CHECK(std::abs(c.residual) <= 3.0);
  }
}

TEST_CASE("qlogM term") {
  const BathMaxwellian M;
  const auto eq = gaussian_ensemble(1.0, 100000, 51);
  const double cube = pair_cube_oracle();
  CHECK(cube == doctest::Approx(16.0 * std::sqrt(2.0 / M_PI) * 2.0 * std::sqrt(2.0) / 2.0).epsilon(1e-6));
  const double oracle = (1.0 - 0.64) / 16.0 * cube;
  CHECK(oracle == doctest::Approx(0.4062).epsilon(1e-3));
  const auto q = qlogM_term(eq, RestitutionParams(0.8), M, 200000, 8);
  CHECK(std::abs(q.mean - oracle) < 4.0 * q.se + 4e-3);
  CHECK(qlogM_term(eq, RestitutionParams(1.0), M, 1000, 8).mean == 0.0);
  // linear in 1 - alpha^2 at a fixed sample
  const auto q9 = qlogM_term(eq, RestitutionParams(0.9), M, 200000, 8);
  CHECK(q9.mean / q.mean == doctest::Approx((1 - 0.81) / (1 - 0.64)).epsilon(1e-12));
}

TEST_CASE("entropy balance refuses coarse sampling") {
  std::vector<EntropySample> traj(3);
  for (int k = 0; k < 3; ++k) {
    traj[k].t = k * 1.0;
    traj[k].collision_rate = 2.0;
    traj[k].N = 1000;
  }
  const auto rep = entropy_balance(traj, RestitutionParams(1.0));
  CHECK(rep.undersampled);
  CHECK(rep.intervals.empty());
  CHECK_FALSE(rep.guidance.empty());
}

TEST_CASE("entropy balance at equilibrium") {
  const BathMaxwellian M;
  auto ens = gaussian_ensemble(1.0, 20000, 61);
  DsmcConfig cfg;
  GridSpec g;
  g.bins = 20;
  std::vector<EntropySample> traj;
  traj.push_back(entropy_sample(ens, cfg.params, M, g, 20000, 100));
  for (int k = 1; k <= 40; ++k) {
    step(ens, 0.05, cfg);
    traj.push_back(entropy_sample(ens, cfg.params, M, g, 20000, 100 + k));
  }
  const auto rep = entropy_balance(traj, cfg.params);
  CHECK_FALSE(rep.undersampled);
  CHECK(rep.intervals.size() == 40);
  CHECK(rep.fraction_within_3 >= 0.9);
}

TEST_CASE("lambda fit") {
  std::vector<double> t, H;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.05 * i);
    H.push_back(std::exp(-2.0 * t.back()) + 0.01);
  }
  const auto fit = lambda_fit(t, H, 0.9);
  CHECK_FALSE(fit.failed);
  CHECK(fit.lambda == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(std::abs(fit.K - 0.1) <= std::max(fit.K_ci, 1e-3));

  // pure decay with noise at alpha = 1
  std::mt19937_64 r(5);
  std::normal_distribution<double> n(0.0, 1e-4);
  std::vector<double> Hn;
  for (double x : t) Hn.push_back(0.46 * std::exp(-1.5 * x) + n(r));
  const auto f1 = lambda_fit(t, Hn, 1.0);
  CHECK_FALSE(f1.failed);
  CHECK(f1.lambda > 0.0);
  CHECK(f1.lambda - f1.lambda_ci > 0.0);
  CHECK(std::abs(f1.plateau) <= f1.plateau_ci + 1e-4);
  CHECK(f1.K == 0.0);

  // flat series: nothing to fit
  const auto flat = lambda_fit(t, std::vector<double>(t.size(), 0.3), 1.0);
  CHECK(flat.failed);
  const auto short_series = lambda_fit({0, 1, 2}, {1, 0.5, 0.25}, 1.0);
  CHECK(short_series.failed);
}

TEST_CASE("interpolation inequality") {
  const WeightSpec w(0.5);
  const auto f = gaussian_estimate(1.0, 80, 10.0);
  const auto c = interpolation_check(f, 0.25, w);
  CHECK(c.holds);
  CHECK(c.margin > 0.0);

  const auto point = DensityEstimate::radial({0.0, 1e-6, 1.0}, {1.0, 0.0});
  CHECK(interpolation_check(point, 0.25, w).holds);

  auto scaled = f;
  for (auto& m : scaled.masses()) m *= 0.3;
  const auto s = interpolation_check(scaled, 0.25, w, c.C);
  CHECK(s.holds);
  CHECK(s.ratio > c.ratio);
  CHECK_THROWS_AS(interpolation_check(f, 1.5, w), std::invalid_argument);
}

TEST_CASE("stats helpers") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10.5};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  const std::vector<double> z{5, 4, 3, 2, 1};
  CHECK(spearman(x, z) == doctest::Approx(-1.0));
  const auto lf = linear_fit(x, y);
  CHECK(lf.slope == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(chi2_sf(0.0, 3.0) == doctest::Approx(1.0));
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
}
