// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "granbath/density.hpp"
#include "granbath/profile.hpp"

namespace granbath {

namespace {

constexpr double kPi = std::numbers::pi;

void check_unit(const Velocity& sigma) {
  if (!sigma.allFinite() || std::abs(sigma.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("collision direction sigma must be a unit vector");
}

void check_finite(const Velocity& v) {
  if (!v.allFinite()) throw std::invalid_argument("velocity components must be finite");
}

// (2 pi / (r s)) int_{|r-s|}^{r+s} g(u) du: the integral over directions of w
// (|w| = s) of a kernel that depends on |v - w| = u only through g(u) / u, with
// |v| = r. `split` is an interior point where g has its steepest feature.
template <class G>
double shell_reduce(double r, double s, G&& g, double split, std::size_t order) {
  const double big = std::max(r, s), small = std::min(r, s);
  if (big <= 0.0) return 0.0;
  if (small < 1e-10 * big) return 4.0 * kPi * g(big) / big;
  const double lo = big - small, hi = big + small;
  const Rule1D& rule = [&]() -> const Rule1D& {
    thread_local std::size_t cached = 0;
    thread_local Rule1D r1;
    if (cached != order) {
      r1 = gauss_legendre(order);
      cached = order;
    }
    return r1;
  }();
  auto piece = [&](double a, double b) {
    if (b <= a) return 0.0;
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) acc += rule.weights[q] * g(mid + half * rule.nodes[q]);
    return half * acc;
  };
  double cuts[3] = {lo, hi, hi};
  int nc = 2;
  if (split > lo && split < hi) {
    cuts[1] = split;
    nc = 3;
  }
  double acc = 0.0;
  for (int c = 0; c + 1 < nc; ++c) {
    // two unequal pieces, the shorter one at the lower end
    const double a = cuts[c], b = cuts[c + 1], m = a + 0.25 * (b - a);
    acc += piece(a, m) + piece(m, b);
  }
  return 2.0 * kPi / (r * s) * acc;
}

double chi_shell_speed(const BathMaxwellian& M, double r);

}  // namespace

RestitutionParams::RestitutionParams(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("restitution coefficient must lie in (0, 1]");
}

BathMaxwellian::BathMaxwellian(Velocity u, double theta) : u0(std::move(u)), theta0(theta) {
  check_finite(u0);
  if (!(theta > 0.0) || !std::isfinite(theta)) throw std::invalid_argument("bath temperature must be positive");
}

double BathMaxwellian::density(const Velocity& v) const { return radial_density((v - u0).norm()); }

double BathMaxwellian::radial_density(double r) const {
  return std::pow(2.0 * kPi * theta0, -1.5) * std::exp(-r * r / (2.0 * theta0));
}

WeightSpec::WeightSpec(double a_) : a(a_) {
  if (!(a_ > 0.0) || !std::isfinite(a_)) throw std::invalid_argument("weight exponent a must be positive");
}

double WeightSpec::inverse_weight(double speed) const { return std::exp(a * speed); }
double WeightSpec::y_inverse_weight(double speed) const { return bracket(speed) * std::exp(a * speed); }
double WeightSpec::bracket(double speed) { return std::sqrt(1.0 + speed * speed); }

void to_json(nlohmann::json& j, const KernelConstants& c) {
  j = nlohmann::json{{"C0", c.C0},
                     {"beta0", c.beta0},
                     {"u0", {c.u0[0], c.u0[1], c.u0[2]}},
                     {"theta0", c.theta0},
                     {"calibration_spread", c.calibration_spread},
                     {"Cbar_alpha", c.Cbar_alpha},
                     {"beta1", c.beta1},
                     {"u1", {c.u1[0], c.u1[1], c.u1[2]}},
                     {"theta1", c.theta1}};
}

void from_json(const nlohmann::json& j, KernelConstants& c) {
  c.C0 = j.at("C0").get<double>();
  c.beta0 = j.at("beta0").get<double>();
  for (int d = 0; d < 3; ++d) c.u0[d] = j.at("u0").at(d).get<double>();
  c.theta0 = j.at("theta0").get<double>();
  c.calibration_spread = j.value("calibration_spread", 0.0);
  c.Cbar_alpha = j.value("Cbar_alpha", 0.0);
  c.beta1 = j.value("beta1", 0.0);
  if (j.contains("u1"))
    for (int d = 0; d < 3; ++d) c.u1[d] = j.at("u1").at(d).get<double>();
  c.theta1 = j.value("theta1", 1.0);
}

std::pair<Velocity, Velocity> inelastic_transform(const Velocity& v, const Velocity& w, const Velocity& sigma,
                                                  const RestitutionParams& params) {
  check_unit(sigma);
  check_finite(v);
  check_finite(w);
  const Velocity q = v - w;
  const Velocity dv = params.transfer() * (q.norm() * sigma - q);
  return {v + dv, w - dv};
}

std::pair<Velocity, Velocity> elastic_bath_transform(const Velocity& v, const Velocity& w, const Velocity& sigma) {
  static const RestitutionParams elastic(1.0);
  return inelastic_transform(v, w, sigma, elastic);
}

double energy_loss(const Velocity& v, const Velocity& w, const Velocity& sigma, const RestitutionParams& params) {
  check_unit(sigma);
  const Velocity q = v - w;
  const double qn = q.norm();
  const double alpha = params.alpha();
  return -0.25 * (1.0 - alpha * alpha) * qn * (qn - q.dot(sigma));
}

double angular_average_A(const std::function<double(const Velocity&)>& psi, const Velocity& v, const Velocity& w,
                         const RestitutionParams& params, const SphereQuadrature& sphere) {
  const double before = psi(v) + psi(w);
  const Velocity q = v - w;
  const double qn = q.norm();
  const double beta = params.transfer();
  return sphere.average([&](const Eigen::Vector3d& sigma) {
    const Velocity dv = beta * (qn * sigma - q);
    return psi(v + dv) + psi(w - dv) - before;
  });
}

double maxwellian_density(const BathMaxwellian& M, const Velocity& v) { return M.density(v); }

double shell_mean_speed(double r, double s) {
  const double big = std::max(r, s), small = std::min(r, s);
  if (big <= 0.0) return 0.0;
  return big + small * small / (3.0 * big);
}

namespace {

double chi_shell_speed(const BathMaxwellian& M, double r) {
  // int M(s) 4 pi s^2 shell_mean(r, s) ds, split at the kink s = r.
  static const Rule1D rule = gauss_legendre(48);
  const double scale = std::sqrt(M.theta0);
  auto integrate = [&](double a, double b) {
    if (b <= a) return 0.0;
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double s = mid + half * rule.nodes[q];
      acc += rule.weights[q] * 4.0 * kPi * s * s * M.radial_density(s) * shell_mean_speed(r, s);
    }
    return half * acc;
  };
  const double top = r + 14.0 * scale;
  double acc = integrate(0.0, std::min(r, top));
  const int pieces = 6;
  for (int p = 0; p < pieces; ++p) acc += integrate(r + (top - r) * p / pieces, r + (top - r) * (p + 1) / pieces);
  return acc;
}

}  // namespace

double collision_frequency_bath_radial(const BathMaxwellian& M, double r) { return chi_shell_speed(M, r); }

double collision_frequency_bath(const BathMaxwellian& M, const Velocity& v) {
  check_finite(v);
  return chi_shell_speed(M, (v - M.u0).norm());
}

double collision_frequency_state(const DensityEstimate& F, const Velocity& v) {
  check_finite(v);
  if (F.size() == 0 || !(F.total_mass() > 0.0))
    throw std::invalid_argument("collision_frequency_state: density estimate has no mass");
  double acc = 0.0;
  if (F.kind() == DensityEstimate::Kind::Cartesian) {
    for (std::size_t b = 0; b < F.size(); ++b)
      if (F.masses()[b] > 0.0) acc += F.masses()[b] * (v - F.cell_center(b)).norm();
    return acc;
  }
  // Uniform density inside each shell: average the shell mean speed over the
  // shell volume with a 4-point rule in s^3.
  static const Rule1D rule = gauss_legendre(4, 0.0, 1.0);
  const double r = (v - F.center()).norm();
  const auto& e = F.edges();
  for (std::size_t b = 0; b < F.size(); ++b) {
    const double m = F.masses()[b];
    if (m <= 0.0) continue;
    const double a3 = e[b] * e[b] * e[b], b3 = e[b + 1] * e[b + 1] * e[b + 1];
    double mean = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      mean += rule.weights[q] * shell_mean_speed(r, std::cbrt(a3 + (b3 - a3) * rule.nodes[q]));
    acc += m * mean;
  }
  return acc;
}

double scattering_kernel_k(const Velocity& v, const Velocity& w, const KernelConstants& c) {
  const double u = (v - w).norm();
  if (!(u > 0.0)) throw SingularPointError("scattering_kernel_k: v == w");
  const double t = u + ((v - c.u0).squaredNorm() - (w - c.u0).squaredNorm()) / u;
  return c.C0 / u * std::exp(-c.beta0 * t * t);
}

double scattering_kernel_shell(double r, double s, const KernelConstants& c, std::size_t order) {
  const double d2 = r * r - s * s;
  auto g = [&](double u) {
    const double t = u + d2 / u;
    return c.C0 * std::exp(-c.beta0 * t * t);
  };
  return shell_reduce(r, s, g, std::sqrt(std::abs(d2)), order);
}

KernelConstants calibrate_C0(const BathMaxwellian& M, std::span<const Velocity> probes) {
  if (probes.empty()) throw std::invalid_argument("calibrate_C0: at least one probe required");
  KernelConstants c;
  c.u0 = M.u0;
  c.theta0 = M.theta0;
  c.beta0 = 1.0 / (8.0 * M.theta0);
  c.C0 = 1.0;
  using boost::math::quadrature::gauss_kronrod;
  std::vector<double> ratios;
  for (const Velocity& p : probes) {
    check_finite(p);
    const double s = (p - M.u0).norm();
    double integral;
    if (s < 1e-8 * std::sqrt(M.theta0)) {
      integral = 4.0 * kPi * M.theta0;
    } else {
      // int r^2 kbar(r, s) dr with the angular integral done by adaptive
      // Gauss-Kronrod in u as well.
      auto inner = [&](double r) {
        if (r <= 0.0) return 0.0;
        const double d2 = r * r - s * s;
        auto g = [&](double u) {
          const double t = u + d2 / u;
          return std::exp(-c.beta0 * t * t);
        };
        const double lo = std::abs(r - s), hi = r + s, mid = std::sqrt(std::abs(d2));
        double val = 0.0;
        if (mid > lo && mid < hi)
          val = gauss_kronrod<double, 31>::integrate(g, lo, mid, 12, 1e-13) +
                gauss_kronrod<double, 31>::integrate(g, mid, hi, 12, 1e-13);
        else
          val = gauss_kronrod<double, 31>::integrate(g, lo, hi, 12, 1e-13);
        return r * r * 2.0 * kPi / (r * s) * val;
      };
      const double top = std::sqrt(s * s + 90.0 * M.theta0) + 2.0 * std::sqrt(M.theta0);
      double err = 0.0;
      integral = gauss_kronrod<double, 61>::integrate(inner, 0.0, s, 15, 1e-12, &err) +
                 gauss_kronrod<double, 61>::integrate(inner, s, top, 15, 1e-12, &err);
    }
    ratios.push_back(collision_frequency_bath(M, p) / integral);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  double mean = 0.0;
  for (double x : ratios) mean += x;
  mean /= static_cast<double>(ratios.size());
  c.C0 = mean;
  c.calibration_spread = (*hi - *lo) / mean;
  if (c.calibration_spread > 1e-4)
    throw CalibrationError("calibrate_C0: probe constants spread by " + std::to_string(c.calibration_spread));
  return c;
}

double gain_constant_C_alpha(const RestitutionParams& params) {
  const double a1 = 1.0 + params.alpha();
  return 4.0 / (a1 * a1 * kPi);
}

void set_upper_maxwellian(KernelConstants& c, const RestitutionParams& params, double mbar, const Velocity& u1,
                          double theta1) {
  if (!(mbar > 0.0) || !(theta1 > 0.0)) throw std::invalid_argument("upper Maxwellian needs positive mass and temperature");
  c.u1 = u1;
  c.theta1 = theta1;
  c.beta1 = 1.0 / (8.0 * theta1);
  c.Cbar_alpha = gain_constant_C_alpha(params) * mbar / std::sqrt(2.0 * kPi * theta1);
}

double gain_kernel_upper(const Velocity& v, const Velocity& w, const RestitutionParams& params,
                         const KernelConstants& c) {
  const double u = (v - w).norm();
  if (!(u > 0.0)) throw SingularPointError("gain_kernel_upper: v == w");
  const double t = (1.0 + params.mu()) * u + ((v - c.u1).squaredNorm() - (w - c.u1).squaredNorm()) / u;
  return c.Cbar_alpha / u * std::exp(-c.beta1 * t * t);
}

double gain_kernel_K1(const Velocity& v, const Velocity& w, const RestitutionParams& params,
                      const std::function<double(const Velocity&)>& F, double C_alpha, const PlaneQuadrature& plane) {
  const Velocity q = w - v;
  const double u = q.norm();
  if (!(u > 0.0)) throw SingularPointError("gain_kernel_K1: v == w");
  const Velocity n = q / u;
  const double kappa = (1.0 - params.alpha()) / (1.0 + params.alpha());
  const Velocity p0 = v - kappa * q;
  // orthonormal basis of the plane
  Velocity e1 = std::abs(n[0]) < 0.9 ? Velocity(1, 0, 0) : Velocity(0, 1, 0);
  e1 = (e1 - e1.dot(n) * n).normalized();
  const Velocity e2 = n.cross(e1);
  // centre the Gauss-Hermite rule on the foot of the envelope centre
  const Velocity foot = plane.envelope_center - (plane.envelope_center - p0).dot(n) * n;
  const double scale = std::sqrt(2.0 * plane.envelope_theta);
  thread_local std::size_t cached = 0;
  thread_local Rule1D gh;
  if (cached != plane.nodes) {
    gh = gauss_hermite(plane.nodes);
    cached = plane.nodes;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    for (std::size_t j = 0; j < gh.size(); ++j) {
      const double x = gh.nodes[i], y = gh.nodes[j];
      const Velocity z = foot + scale * (x * e1 + y * e2);
      acc += gh.weights[i] * gh.weights[j] * std::exp(x * x + y * y) * F(z);
    }
  }
  return C_alpha / u * scale * scale * acc;
}

namespace {
double plane_distance(double r, double s, double u, double kappa) {
  return std::abs((s * s - r * r - u * u) / (2.0 * u) - kappa * u);
}
}  // namespace

double gain_kernel_K1(const Velocity& v, const Velocity& w, const RestitutionParams& params, const RadialProfile& F,
                      double C_alpha) {
  const double u = (v - w).norm();
  if (!(u > 0.0)) throw SingularPointError("gain_kernel_K1: v == w");
  const double kappa = (1.0 - params.alpha()) / (1.0 + params.alpha());
  return C_alpha / u * F.abel(plane_distance(v.norm(), w.norm(), u, kappa));
}

double gain_kernel_K1_shell(double r, double s, const RestitutionParams& params, const RadialProfile& F,
                            double C_alpha, std::size_t order) {
  const double kappa = (1.0 - params.alpha()) / (1.0 + params.alpha());
  auto g = [&](double u) { return C_alpha * F.abel(plane_distance(r, s, u, kappa)); };
  const double split = s > r ? std::sqrt((s * s - r * r) / (1.0 + 2.0 * kappa)) : 0.0;
  return shell_reduce(r, s, g, split, order);
}

std::pair<double, double> calibrate_C_alpha(const RestitutionParams& params, const RadialProfile& F,
                                            std::span<const double> probe_speeds) {
  if (probe_speeds.empty()) throw std::invalid_argument("calibrate_C_alpha: at least one probe required");
  using boost::math::quadrature::gauss_kronrod;
  const double reach = F.nodes().back() + 8.0;
  std::vector<double> ratios;
  for (double s : probe_speeds) {
    // sigma_alpha(s) against int K^1(v, w) dv with C_alpha = 1
    auto sig_integrand = [&](double x) { return 4.0 * kPi * x * x * F.value(x) * shell_mean_speed(s, x); };
    const double sigma = gauss_kronrod<double, 61>::integrate(sig_integrand, 0.0, std::max(s, 1e-12), 15, 1e-12) +
                         gauss_kronrod<double, 61>::integrate(sig_integrand, std::max(s, 1e-12), reach, 15, 1e-12);
    auto mass_integrand = [&](double r) { return r * r * gain_kernel_K1_shell(r, s, params, F, 1.0, 64); };
    const double gain = gauss_kronrod<double, 61>::integrate(mass_integrand, 0.0, std::max(s, 1e-12), 15, 1e-11) +
                        gauss_kronrod<double, 61>::integrate(mass_integrand, std::max(s, 1e-12), reach, 15, 1e-11);
    ratios.push_back(sigma / gain);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  double mean = 0.0;
  for (double x : ratios) mean += x;
  mean /= static_cast<double>(ratios.size());
  return {mean, (*hi - *lo) / mean};
}

}  // namespace granbath
