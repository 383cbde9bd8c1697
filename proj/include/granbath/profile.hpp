// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pointwise evaluation of a radial density from its values at a set of speeds.
#pragma once

#include <vector>

namespace granbath {

/// Radial density F(|v|) interpolated log-linearly in r^2 between nodes, so a
/// Gaussian is reproduced exactly. Segments touching a zero value fall back to
/// linear interpolation in r^2. Beyond the last node the last log-slope is
/// continued when it is decreasing, otherwise F is zero there.
class RadialProfile {
 public:
  RadialProfile() = default;
  RadialProfile(std::vector<double> nodes, std::vector<double> values);

  /// Exact Gaussian (2 pi theta)^{-3/2} scale * exp(-r^2 / (2 theta)) sampled at nodes.
  static RadialProfile gaussian(double theta, double scale, std::vector<double> nodes);

  double value(double r) const;
  /// 2 pi int_d^inf F(x) x dx, the integral of F(|z|) over a plane at distance d.
  double abel(double d) const;
  /// int F(|v|) dv over R^3.
  double mass() const;
  /// int F(|v|) |v|^2 dv.
  double energy() const;

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return nodes_.empty(); }

 private:
  struct Segment {
    double x0, x1;  // r^2 at the ends
    bool log_linear;
    double a, b;    // log F = a + b r^2, or F = a + b r^2
  };
  Segment segment(std::size_t k) const;
  double segment_abel(const Segment& s, double x_lo) const;
  double radial_moment(int power) const;

  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<Segment> segments_;  // [0, r_0], then node intervals
  std::vector<double> suffix_;     // abel contribution of segments k.. plus tail
  bool has_tail_ = false;
  double tail_b_ = 0.0;
  double tail_a_ = 0.0;
};

}  // namespace granbath
