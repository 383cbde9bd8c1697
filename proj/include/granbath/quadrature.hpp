// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace granbath {

/// Nodes and weights of a one-dimensional rule.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [lo, hi]. Nodes are increasing.
Rule1D gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0);

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line.
Rule1D gauss_hermite(std::size_t n);

/// Product rule on the unit sphere: Gauss-Legendre in cos(theta) times the
/// trapezoid rule in phi. Weights sum to 1 (normalized surface measure).
class SphereQuadrature {
 public:
  explicit SphereQuadrature(std::size_t order = 24);

  std::size_t order() const { return order_; }
  std::size_t size() const { return directions_.size(); }
  const std::vector<Eigen::Vector3d>& directions() const { return directions_; }
  const std::vector<double>& weights() const { return weights_; }

  template <class F>
  double average(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < directions_.size(); ++i) acc += weights_[i] * f(directions_[i]);
    return acc;
  }

 private:
  std::size_t order_;
  std::vector<Eigen::Vector3d> directions_;
  std::vector<double> weights_;
};

}  // namespace granbath
