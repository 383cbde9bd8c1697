// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace granbath {

Rule1D gauss_legendre(std::size_t n, double lo, double hi) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n == 1) {
    rule.nodes[0] = mid;
    rule.weights[0] = hi - lo;
  }
  return rule;
}

Rule1D gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
  // Golub-Welsch on the Jacobi matrix of the Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k) / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
    const double v0 = solver.eigenvectors()(0, static_cast<Eigen::Index>(i));
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

SphereQuadrature::SphereQuadrature(std::size_t order) : order_(order) {
  if (order < 2) throw std::invalid_argument("SphereQuadrature: order must be at least 2");
  const Rule1D polar = gauss_legendre(order, -1.0, 1.0);
  const std::size_t n_phi = 2 * order;
  directions_.reserve(order * n_phi);
  weights_.reserve(order * n_phi);
  for (std::size_t i = 0; i < order; ++i) {
    const double ct = polar.nodes[i];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (std::size_t j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(n_phi);
      directions_.emplace_back(st * std::cos(phi), st * std::sin(phi), ct);
      weights_.push_back(0.5 * polar.weights[i] / static_cast<double>(n_phi));
    }
  }
}

}  // namespace granbath
