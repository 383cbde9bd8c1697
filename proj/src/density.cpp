// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace granbath {

DensityEstimate DensityEstimate::radial(std::vector<double> edges, std::vector<double> masses, Eigen::Vector3d center,
                                        std::vector<double> speeds) {
  if (edges.size() != masses.size() + 1 || masses.empty())
    throw std::invalid_argument("DensityEstimate: radial estimate needs n masses and n+1 edges");
  for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    if (!(edges[k + 1] > edges[k]) || edges[k] < 0.0)
      throw std::invalid_argument("DensityEstimate: radial edges must be nonnegative and increasing");
  for (double m : masses)
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("DensityEstimate: masses must be nonnegative");
  if (speeds.empty()) {
    speeds.resize(masses.size());
    for (std::size_t k = 0; k < masses.size(); ++k) {
      // radius splitting the shell volume in half
      const double a3 = std::pow(edges[k], 3), b3 = std::pow(edges[k + 1], 3);
      speeds[k] = std::cbrt(0.5 * (a3 + b3));
    }
  } else if (speeds.size() != masses.size()) {
    throw std::invalid_argument("DensityEstimate: one representative speed per shell");
  }
  DensityEstimate est;
  est.kind_ = Kind::Radial;
  est.edges_ = std::move(edges);
  est.masses_ = std::move(masses);
  est.speeds_ = std::move(speeds);
  est.center_ = center;
  return est;
}

DensityEstimate DensityEstimate::cartesian(Eigen::Vector3d lower, double spacing, std::array<int, 3> dims,
                                           std::vector<double> masses) {
  if (!(spacing > 0.0) || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
    throw std::invalid_argument("DensityEstimate: bad Cartesian grid");
  if (masses.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])
    throw std::invalid_argument("DensityEstimate: mass array does not match grid");
  for (double m : masses)
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("DensityEstimate: masses must be nonnegative");
  DensityEstimate est;
  est.kind_ = Kind::Cartesian;
  est.lower_ = lower;
  est.spacing_ = spacing;
  est.dims_ = dims;
  est.masses_ = std::move(masses);
  return est;
}

double DensityEstimate::total_mass() const { return std::accumulate(masses_.begin(), masses_.end(), 0.0); }

std::optional<std::size_t> DensityEstimate::bin_of(const Eigen::Vector3d& v) const {
  if (kind_ == Kind::Radial) {
    const double r = (v - center_).norm();
    if (r < edges_.front() || r >= edges_.back()) return std::nullopt;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), r);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
  }
  std::array<int, 3> idx{};
  for (int d = 0; d < 3; ++d) {
    const double x = (v[d] - lower_[d]) / spacing_;
    if (!(x >= 0.0) || x >= dims_[d]) return std::nullopt;
    idx[d] = static_cast<int>(x);
  }
  return static_cast<std::size_t>(idx[0] + dims_[0] * (idx[1] + dims_[1] * idx[2]));
}

double DensityEstimate::volume(std::size_t bin) const {
  if (kind_ == Kind::Radial)
    return 4.0 * std::numbers::pi / 3.0 * (std::pow(edges_[bin + 1], 3) - std::pow(edges_[bin], 3));
  return spacing_ * spacing_ * spacing_;
}

double DensityEstimate::density_at(const Eigen::Vector3d& v) const {
  const auto b = bin_of(v);
  return b ? density(*b) : 0.0;
}

RadialProfile DensityEstimate::profile() const {
  if (kind_ != Kind::Radial) throw std::logic_error("DensityEstimate::profile: radial estimate required");
  std::vector<double> values(masses_.size());
  for (std::size_t k = 0; k < masses_.size(); ++k) values[k] = density(k);
  return RadialProfile(speeds_, values);
}

Eigen::Vector3d DensityEstimate::cell_center(std::size_t bin) const {
  const int i = static_cast<int>(bin % dims_[0]);
  const int j = static_cast<int>((bin / dims_[0]) % dims_[1]);
  const int k = static_cast<int>(bin / (static_cast<std::size_t>(dims_[0]) * dims_[1]));
  return lower_ + spacing_ * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
}

}  // namespace granbath
