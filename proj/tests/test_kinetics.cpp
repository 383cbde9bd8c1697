// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <doctest.h>

#include "granbath/kinetics.hpp"
#include "granbath/profile.hpp"
#include "granbath/quadrature.hpp"

using namespace granbath;

namespace {

Velocity random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  Velocity s(n(g), n(g), n(g));
  return s.normalized();
}

Velocity random_velocity(std::mt19937_64& g, double scale = 2.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(g), n(g), n(g)};
}

}  // namespace

TEST_CASE("inelastic transform: worked cases") {
  const Velocity v(1, 0, 0), w(-1, 0, 0);
  auto [a, b] = inelastic_transform(v, w, Velocity(1, 0, 0), RestitutionParams(0.5));
  CHECK((a - v).norm() == 0.0);
  CHECK((b - w).norm() == 0.0);

  auto [c, d] = inelastic_transform(v, w, Velocity(0, 1, 0), RestitutionParams(1.0));
  CHECK((c - Velocity(0, 1, 0)).norm() < 1e-15);
  CHECK((d - Velocity(0, -1, 0)).norm() < 1e-15);
}

TEST_CASE("inelastic transform: pair sum preserved, bad sigma rejected") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> ua(0.05, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const Velocity v = random_velocity(g), w = random_velocity(g);
    auto [a, b] = inelastic_transform(v, w, random_unit(g), RestitutionParams(ua(g)));
    CHECK(((a + b) - (v + w)).norm() <= 1e-12 * (1.0 + v.norm() + w.norm()));
  }
  CHECK_THROWS_AS(inelastic_transform(Velocity(1, 0, 0), Velocity::Zero(), Velocity(1, 1, 0), RestitutionParams(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(RestitutionParams(0.0), std::invalid_argument);
  CHECK_THROWS_AS(RestitutionParams(1.2), std::invalid_argument);
  // v == w is legal and leaves the pair alone
  auto [a, b] = inelastic_transform(Velocity(1, 2, 3), Velocity(1, 2, 3), Velocity(0, 0, 1), RestitutionParams(0.7));
  CHECK(a == Velocity(1, 2, 3));
  CHECK(b == Velocity(1, 2, 3));
}

TEST_CASE("elastic bath transform") {
  const Velocity v(1, 0, 0), w(-1, 0, 0);
  auto [a, b] = elastic_bath_transform(v, w, Velocity(0, 1, 0));
  CHECK((a - Velocity(0, 1, 0)).norm() < 1e-15);
  CHECK((b - Velocity(0, -1, 0)).norm() < 1e-15);
  auto [c, d] = elastic_bath_transform(v, w, Velocity(1, 0, 0));
  CHECK(c == v);
  CHECK(d == w);

  std::mt19937_64 g(5);
  for (int k = 0; k < 1000; ++k) {
    const Velocity x = random_velocity(g), y = random_velocity(g), s = random_unit(g);
    auto [p, q] = elastic_bath_transform(x, y, s);
    const double e0 = x.squaredNorm() + y.squaredNorm();
    CHECK(std::abs(p.squaredNorm() + q.squaredNorm() - e0) <= 1e-12 * e0);
    auto [p1, q1] = inelastic_transform(x, y, s, RestitutionParams(1.0));
    CHECK((p - p1).norm() <= 1e-14 * (1 + x.norm() + y.norm()));
    CHECK((q - q1).norm() <= 1e-14 * (1 + x.norm() + y.norm()));
  }
}

TEST_CASE("energy loss") {
  // oracle: energies recomputed from the transformed pair
  const Velocity v(1, 0, 0), w(-1, 0, 0), s(0, 1, 0);
  const RestitutionParams p(0.5);
  auto [a, b] = inelastic_transform(v, w, s, p);
  const double direct = a.squaredNorm() + b.squaredNorm() - v.squaredNorm() - w.squaredNorm();
  CHECK(direct == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK(energy_loss(v, w, s, p) == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK(energy_loss(v, w, s, RestitutionParams(1.0)) == 0.0);
  CHECK(energy_loss(v, w, Velocity(1, 0, 0), p) == 0.0);

  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> ua(0.05, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const Velocity x = random_velocity(g), y = random_velocity(g), sg = random_unit(g);
    const RestitutionParams pr(ua(g));
    auto [c, d] = inelastic_transform(x, y, sg, pr);
    const double e = energy_loss(x, y, sg, pr);
    const double scale = x.squaredNorm() + y.squaredNorm();
    CHECK(e <= 0.0);
    CHECK(std::abs(e - (c.squaredNorm() + d.squaredNorm() - scale)) <= 1e-12 * scale);
  }
}

TEST_CASE("angular average") {
  const SphereQuadrature sphere;
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> ua(0.05, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Velocity v = random_velocity(g), w = random_velocity(g);
    const RestitutionParams p(ua(g));
    CHECK(std::abs(angular_average_A([](const Velocity&) { return 1.0; }, v, w, p, sphere)) < 1e-13);
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(angular_average_A([c](const Velocity& x) { return x[c]; }, v, w, p, sphere)) <
            1e-12 * (1 + v.norm() + w.norm()));
    const double exact = -(1.0 - p.alpha() * p.alpha()) / 4.0 * (v - w).squaredNorm();
    const double got = angular_average_A([](const Velocity& x) { return x.squaredNorm(); }, v, w, p, sphere);
    CHECK(std::abs(got - exact) <= 1e-10 * (v - w).squaredNorm());
  }
}

TEST_CASE("sphere quadrature weights") {
  const SphereQuadrature s(12);
  double sum = 0.0;
  for (double w : s.weights()) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  // <x^2> over the sphere is 1/3
  CHECK(s.average([](const Velocity& d) { return d.x() * d.x(); }) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("maxwellian density") {
  const BathMaxwellian M;
  CHECK(maxwellian_density(M, Velocity::Zero()) == doctest::Approx(std::pow(2 * M_PI, -1.5)));
  CHECK(maxwellian_density(M, Velocity(1, 0, 0)) == doctest::Approx(0.038508).epsilon(1e-5));
  const BathMaxwellian M2(Velocity(0.5, -1, 2), 2.5);
  CHECK(maxwellian_density(M2, M2.u0) == doctest::Approx(std::pow(2 * M_PI * 2.5, -1.5)));
  // unit mass: radial midpoint rule on a large ball
  double mass = 0.0;
  const int n = 20000;
  const double R = 12.0 * std::sqrt(2.5), h = R / n;
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) * h;
    mass += 4 * M_PI * r * r * M2.radial_density(r) * h;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("bath collision frequency") {
  const BathMaxwellian M;
  // mean of the chi(3) law
  CHECK(collision_frequency_bath(M, Velocity::Zero()) == doctest::Approx(std::sqrt(8.0 / M_PI)).epsilon(1e-10));
  const Velocity far(40, 0, 0);
  CHECK(collision_frequency_bath(M, far) / far.norm() == doctest::Approx(1.0).epsilon(2e-3));
  const BathMaxwellian shifted(Velocity(1, -2, 0.5), 1.0);
  CHECK(collision_frequency_bath(shifted, shifted.u0) ==
        doctest::Approx(collision_frequency_bath(M, Velocity::Zero())).epsilon(1e-13));
  for (double r : {0.0, 0.5, 2.0, 5.0}) {
    const Velocity v(r, 0, 0);
    CHECK(collision_frequency_bath(M, v) >= r - std::sqrt(8.0 / M_PI));
  }
  // Theta scaling: Sigma = sqrt(theta) * Sigma_1(v / sqrt(theta))
  const BathMaxwellian hot(Velocity::Zero(), 4.0);
  CHECK(collision_frequency_bath(hot, Velocity(2, 0, 0)) ==
        doctest::Approx(2.0 * collision_frequency_bath(M, Velocity(1, 0, 0))).epsilon(1e-12));
}

TEST_CASE("shell mean speed") {
  // oracle: angular average of |v - w| by quadrature in cos(theta)
  for (auto [r, s] : {std::pair{0.3, 1.7}, std::pair{2.0, 2.0}, std::pair{4.0, 0.1}}) {
    const auto rule = gauss_legendre(400, -1.0, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      acc += 0.5 * rule.weights[i] * std::sqrt(r * r + s * s - 2 * r * s * rule.nodes[i]);
    CHECK(shell_mean_speed(r, s) == doctest::Approx(acc).epsilon(1e-7));
  }
}

TEST_CASE("scattering kernel: detailed balance and calibration") {
  const BathMaxwellian M(Velocity(0.3, -0.2, 0.1), 1.3);
  const Velocity probes[] = {M.u0, M.u0 + Velocity(1, 0, 0), M.u0 + Velocity(0, 2, 0)};
  const KernelConstants c = calibrate_C0(M, probes);
  CHECK(c.C0 > 0.0);
  CHECK(c.beta0 == doctest::Approx(1.0 / (8.0 * 1.3)));
  CHECK(c.calibration_spread <= 1e-6);

  std::mt19937_64 g(13);
  for (int k = 0; k < 1000; ++k) {
    const Velocity v = M.u0 + random_velocity(g, 1.5), w = M.u0 + random_velocity(g, 1.5);
    const double lhs = scattering_kernel_k(v, w, c) * M.density(w);
    const double rhs = scattering_kernel_k(w, v, c) * M.density(v);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(lhs, rhs));
  }
  CHECK_THROWS_AS(scattering_kernel_k(Velocity(1, 1, 1), Velocity(1, 1, 1), c), SingularPointError);

  // temperature rescaling keeps the spread small
  for (double theta : {0.25, 4.0}) {
    const BathMaxwellian Mt(Velocity::Zero(), theta);
    const double s = std::sqrt(theta);
    const Velocity pt[] = {Velocity::Zero(), Velocity(s, 0, 0), Velocity(0, 2 * s, 0)};
    CHECK(calibrate_C0(Mt, pt).calibration_spread <= 1e-6);
  }
  const Velocity single[] = {M.u0};
  CHECK(calibrate_C0(M, single).C0 == doctest::Approx(c.C0).epsilon(1e-6));
}

TEST_CASE("upper gain kernel") {
  const BathMaxwellian M;
  const Velocity probes[] = {Velocity::Zero(), Velocity(1, 0, 0), Velocity(0, 2, 0)};
  KernelConstants c = calibrate_C0(M, probes);
  const RestitutionParams el(1.0);
  set_upper_maxwellian(c, el, 1.0, Velocity::Zero(), 1.0);
  CHECK(el.mu() == 0.0);
  // at alpha = 1 the dominating kernel has the k form with (beta1, u1)
  KernelConstants as_k = c;
  as_k.C0 = c.Cbar_alpha;
  as_k.beta0 = c.beta1;
  as_k.u0 = c.u1;
  const Velocity v(0.4, 1.0, -0.3), w(-0.8, 0.2, 0.5);
  CHECK(gain_kernel_upper(v, w, el, c) == doctest::Approx(scattering_kernel_k(v, w, as_k)).epsilon(1e-13));

  const RestitutionParams p(0.8);
  set_upper_maxwellian(c, p, 1.5, Velocity::Zero(), 1.2);
  // far-field monotonicity along a ray
  const Velocity w0(0.3, 0.1, 0.0);
  double prev = gain_kernel_upper(Velocity(3, 0, 0), w0, p, c);
  for (double s = 3.5; s <= 10.0; s += 0.5) {
    const double cur = gain_kernel_upper(Velocity(s, 0, 0), w0, p, c);
    CHECK(cur < prev);
    prev = cur;
  }
  // |w - u1| <= r/2, |v - u1| > r
  const double r = 2.0;
  std::mt19937_64 g(17);
  for (int k = 0; k < 200; ++k) {
    Velocity ww = random_unit(g) * (r / 2) * std::uniform_real_distribution<double>(0, 1)(g);
    Velocity vv = random_unit(g) * (r + std::uniform_real_distribution<double>(0.01, 4)(g));
    const double bound = 2 * c.Cbar_alpha / r * std::exp(-1.5 * c.beta1 * (1 + p.mu()) * vv.squaredNorm());
    CHECK(gain_kernel_upper(vv, ww, p, c) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("K1 gain kernel") {
  const BathMaxwellian M;
  const Velocity probes[] = {Velocity::Zero(), Velocity(1, 0, 0), Velocity(0, 2, 0)};
  const KernelConstants c = calibrate_C0(M, probes);
  std::vector<double> nodes;
  for (int i = 0; i <= 400; ++i) nodes.push_back(i * 0.03);
  const auto F = RadialProfile::gaussian(1.0, 1.0, nodes);
  const RestitutionParams el(1.0);
  const double Ca = gain_constant_C_alpha(el);

  // alpha = 1 against the bath: K1 and k describe the same elastic gain
  std::mt19937_64 g(19);
  double ratio0 = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Velocity v = random_velocity(g, 1.0), w = random_velocity(g, 1.0);
    const double ratio = gain_kernel_K1(v, w, el, F, Ca) / scattering_kernel_k(v, w, c);
    if (k == 0) ratio0 = ratio;
    CHECK(ratio == doctest::Approx(ratio0).epsilon(1e-6));
  }
  // pointwise plane quadrature agrees with the exact radial plane integral
  const RestitutionParams p(0.8);
  const double Cp = gain_constant_C_alpha(p);
  CHECK(Cp == doctest::Approx(4.0 / (M_PI * 1.8 * 1.8)));
  auto Fv = [&](const Velocity& x) { return M.density(x); };
  for (int k = 0; k < 20; ++k) {
    const Velocity v = random_velocity(g, 1.0), w = random_velocity(g, 1.0);
    CHECK(gain_kernel_K1(v, w, p, Fv, Cp) == doctest::Approx(gain_kernel_K1(v, w, p, F, Cp)).epsilon(1e-6));
  }
  // F = 0
  auto zero = [](const Velocity&) { return 0.0; };
  CHECK(gain_kernel_K1(Velocity(1, 0, 0), Velocity(0, 1, 0), p, zero, Cp) == 0.0);

  // F <= Mbar pointwise implies K1 <= dominating kernel
  KernelConstants cu = c;
  set_upper_maxwellian(cu, p, 1.0, Velocity::Zero(), 1.0);
  for (int k = 0; k < 200; ++k) {
    const Velocity v = random_velocity(g, 1.5), w = random_velocity(g, 1.5);
    CHECK(gain_kernel_K1(v, w, p, F, Cp) <= gain_kernel_upper(v, w, p, cu) * (1 + 1e-9));
  }
}

TEST_CASE("weight spec") {
  const WeightSpec ws(0.5);
  for (double s : {0.0, 1.0, 3.0}) {
    CHECK(ws.inverse_weight(s) == doctest::Approx(std::exp(0.5 * s)));
    CHECK(ws.y_inverse_weight(s) >= ws.inverse_weight(s));
  }
  CHECK_THROWS_AS(WeightSpec(0.0), std::invalid_argument);
}

TEST_CASE("kernel constants json round trip") {
  KernelConstants c;
  c.C0 = 0.25;
  c.beta0 = 0.125;
  c.u0 = Velocity(1, 2, 3);
  nlohmann::json j = c;
  const auto back = j.get<KernelConstants>();
  CHECK(back.C0 == 0.25);
  CHECK(back.u0 == Velocity(1, 2, 3));
}
