// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "granbath/quadrature.hpp"

namespace granbath {

namespace {
constexpr double kPi = std::numbers::pi;
}

RadialProfile::RadialProfile(std::vector<double> nodes, std::vector<double> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  if (nodes_.size() != values_.size() || nodes_.size() < 2)
    throw std::invalid_argument("RadialProfile: need at least two nodes with matching values");
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!(nodes_[k] >= 0.0) || (k > 0 && !(nodes_[k] > nodes_[k - 1])))
      throw std::invalid_argument("RadialProfile: nodes must be nonnegative and increasing");
    if (!(values_[k] >= 0.0) || !std::isfinite(values_[k]))
      throw std::invalid_argument("RadialProfile: values must be finite and nonnegative");
  }
  // Leading segment [0, r_0] continues the first log-slope.
  Segment first = segment(0);
  first.x0 = 0.0;
  first.x1 = nodes_[0] * nodes_[0];
  segments_.push_back(first);
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) segments_.push_back(segment(k));
  const Segment& last = segments_.back();
  if (last.log_linear && last.b < 0.0) {
    has_tail_ = true;
    tail_a_ = last.a;
    tail_b_ = last.b;
  }
  suffix_.assign(segments_.size() + 1, 0.0);
  if (has_tail_) suffix_.back() = -0.5 * std::exp(tail_a_ + tail_b_ * segments_.back().x1) / tail_b_;
  for (std::size_t k = segments_.size(); k-- > 0;) suffix_[k] = suffix_[k + 1] + segment_abel(segments_[k], 0.0);
}

RadialProfile RadialProfile::gaussian(double theta, double scale, std::vector<double> nodes) {
  std::vector<double> values(nodes.size());
  const double norm = scale * std::pow(2.0 * kPi * theta, -1.5);
  for (std::size_t k = 0; k < nodes.size(); ++k) values[k] = norm * std::exp(-nodes[k] * nodes[k] / (2.0 * theta));
  return RadialProfile(std::move(nodes), std::move(values));
}

RadialProfile::Segment RadialProfile::segment(std::size_t k) const {
  Segment s{};
  s.x0 = nodes_[k] * nodes_[k];
  s.x1 = nodes_[k + 1] * nodes_[k + 1];
  const double f0 = values_[k], f1 = values_[k + 1];
  const double dx = s.x1 - s.x0;
  if (f0 > 0.0 && f1 > 0.0) {
    s.log_linear = true;
    s.b = (std::log(f1) - std::log(f0)) / dx;
    s.a = std::log(f0) - s.b * s.x0;
  } else {
    s.log_linear = false;
    s.b = (f1 - f0) / dx;
    s.a = f0 - s.b * s.x0;
  }
  return s;
}

double RadialProfile::value(double r) const {
  if (nodes_.empty()) return 0.0;
  const double x = r * r;
  if (r > nodes_.back()) return has_tail_ ? std::exp(tail_a_ + tail_b_ * x) : 0.0;
  std::size_t k = 0;
  if (r > nodes_[0]) {
    k = static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), r) - nodes_.begin());
    k = std::min(k, segments_.size() - 1);
  }
  const Segment& s = segments_[k];
  return s.log_linear ? std::exp(s.a + s.b * x) : std::max(0.0, s.a + s.b * x);
}

// int_{x_lo}^{x1} of F with respect to x = r^2, halved: int x F dx in r equals
// (1/2) int F d(r^2).
double RadialProfile::segment_abel(const Segment& s, double x_lo) const {
  const double lo = std::max(x_lo, s.x0);
  if (lo >= s.x1) return 0.0;
  if (s.log_linear) {
    if (std::abs(s.b) * (s.x1 - lo) < 1e-10) return 0.5 * std::exp(s.a + s.b * lo) * (s.x1 - lo);
    return 0.5 * (std::exp(s.a + s.b * s.x1) - std::exp(s.a + s.b * lo)) / s.b;
  }
  return 0.5 * (s.a * (s.x1 - lo) + 0.5 * s.b * (s.x1 * s.x1 - lo * lo));
}

double RadialProfile::abel(double d) const {
  if (nodes_.empty()) return 0.0;
  const double x = d * d;
  if (x >= segments_.back().x1) {
    if (!has_tail_) return 0.0;
    return 2.0 * kPi * (-0.5 * std::exp(tail_a_ + tail_b_ * x) / tail_b_);
  }
  // segment holding x, then whole segments above it from the suffix sums
  std::size_t k = 0;
  if (d > nodes_[0])
    k = static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), d) - nodes_.begin());
  return 2.0 * kPi * (segment_abel(segments_[k], x) + suffix_[k + 1]);
}

double RadialProfile::radial_moment(int power) const {
  if (nodes_.empty()) return 0.0;
  // Piecewise Gauss-Legendre in r; the integrand is smooth on every segment.
  static const Rule1D rule = gauss_legendre(12);
  double acc = 0.0;
  auto integrate = [&](double lo, double hi) {
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double r = mid + half * rule.nodes[q];
      acc += half * rule.weights[q] * 4.0 * kPi * r * r * std::pow(r, power) * value(r);
    }
  };
  integrate(0.0, nodes_[0]);
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) integrate(nodes_[k], nodes_[k + 1]);
  if (has_tail_) {
    const double width = std::sqrt(40.0 / -tail_b_);
    const double start = nodes_.back();
    for (int piece = 0; piece < 8; ++piece) integrate(start + width * piece / 8.0, start + width * (piece + 1) / 8.0);
  }
  return acc;
}

double RadialProfile::mass() const { return radial_moment(0); }
double RadialProfile::energy() const { return radial_moment(2); }

}  // namespace granbath
