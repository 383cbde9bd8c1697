// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/radial_grid.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "granbath/manifest.hpp"
#include "granbath/quadrature.hpp"

namespace granbath {

namespace {
constexpr double kPi = std::numbers::pi;
}

Placement parse_placement(const std::string& name) {
  if (name == "gauss" || name == "gauss-legendre") return Placement::GaussLegendre;
  if (name == "midpoint") return Placement::Midpoint;
  throw std::invalid_argument("unknown grid placement '" + name + "'");
}

RadialGrid build_grid(std::size_t n, double R_max, Placement placement, double theta0) {
  if (n < 16) throw std::invalid_argument("build_grid: need at least 16 nodes");
  if (!(R_max > 0.0) || !std::isfinite(R_max)) throw std::invalid_argument("build_grid: R_max must be positive");
  RadialGrid g;
  g.R_max = R_max;
  g.placement = placement;
  g.r.resize(n);
  g.w.resize(n);
  if (placement == Placement::GaussLegendre) {
    const Rule1D rule = gauss_legendre(n, 0.0, R_max);
    for (std::size_t k = 0; k < n; ++k) {
      g.r[k] = rule.nodes[k];
      g.w[k] = 4.0 * kPi * rule.nodes[k] * rule.nodes[k] * rule.weights[k];
    }
  } else {
    const double h = R_max / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      g.r[k] = (static_cast<double>(k) + 0.5) * h;
      g.w[k] = 4.0 * kPi * g.r[k] * g.r[k] * h;
    }
  }
  g.edges.resize(n + 1);
  g.edges[0] = 0.0;
  double vol = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    vol += g.w[k];
    g.edges[k + 1] = std::cbrt(3.0 * vol / (4.0 * kPi));
  }
  const Eigen::VectorXd M = g.maxwellian(theta0);
  const double mass = g.integrate(M);
  const double energy = g.moment(M, 2.0);
  if (std::abs(mass - 1.0) > 1e-8 || std::abs(energy - 3.0 * theta0) > 1e-8 * 3.0 * theta0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "build_grid: bath mass %.3e / energy %.3e residual too large", mass - 1.0,
                  energy - 3.0 * theta0);
    throw GridError(buf);
  }
  return g;
}

Eigen::VectorXd RadialGrid::maxwellian(double theta0) const {
  Eigen::VectorXd M(static_cast<Eigen::Index>(size()));
  const double norm = std::pow(2.0 * kPi * theta0, -1.5);
  for (std::size_t k = 0; k < size(); ++k) M[static_cast<Eigen::Index>(k)] = norm * std::exp(-r[k] * r[k] / (2.0 * theta0));
  return M;
}

double RadialGrid::integrate(const Eigen::VectorXd& f) const { return weights().dot(f); }

double RadialGrid::moment(const Eigen::VectorXd& f, double power) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < size(); ++k) acc += w[k] * std::pow(r[k], power) * f[static_cast<Eigen::Index>(k)];
  return acc;
}

double RadialGrid::norm_X(const Eigen::VectorXd& f, double a) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < size(); ++k) acc += std::abs(f[static_cast<Eigen::Index>(k)]) * std::exp(a * r[k]) * w[k];
  return acc;
}

double RadialGrid::norm_Y(const Eigen::VectorXd& f, double a) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < size(); ++k)
    acc += std::abs(f[static_cast<Eigen::Index>(k)]) * std::sqrt(1.0 + r[k] * r[k]) * std::exp(a * r[k]) * w[k];
  return acc;
}

DensityEstimate RadialGrid::to_density(const Eigen::VectorXd& f) const {
  std::vector<double> m(size());
  for (std::size_t k = 0; k < size(); ++k) m[k] = std::max(0.0, w[k] * f[static_cast<Eigen::Index>(k)]);
  return DensityEstimate::radial(edges, std::move(m), Eigen::Vector3d::Zero(), r);
}

Eigen::VectorXd RadialGrid::from_density(const DensityEstimate& est) const {
  if (est.kind() != DensityEstimate::Kind::Radial || est.size() != size())
    throw std::invalid_argument("from_density: estimate is not on this grid");
  Eigen::VectorXd f(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) f[static_cast<Eigen::Index>(k)] = est.masses()[k] / w[k];
  return f;
}

std::string RadialGrid::hash() const {
  std::string bytes;
  auto add = [&](const std::vector<double>& x) {
    bytes.append(reinterpret_cast<const char*>(x.data()), x.size() * sizeof(double));
  };
  add(r);
  add(w);
  return fnv1a_hex(bytes);
}

}  // namespace granbath
