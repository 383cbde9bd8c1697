// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binned nonnegative estimate of a velocity density, either on radial shells
// about a center or on a regular Cartesian grid.
#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "granbath/profile.hpp"

namespace granbath {

class DensityEstimate {
 public:
  enum class Kind { Radial, Cartesian };

  DensityEstimate() = default;

  /// Radial shells [edges[k], edges[k+1]) about `center`. `speeds` are the
  /// representative speeds of the shells; empty means volume-weighted midpoints.
  static DensityEstimate radial(std::vector<double> edges, std::vector<double> masses,
                                Eigen::Vector3d center = Eigen::Vector3d::Zero(), std::vector<double> speeds = {});

  /// Regular grid of cells of side `spacing`, first cell corner at `lower`,
  /// masses in x-fastest order.
  static DensityEstimate cartesian(Eigen::Vector3d lower, double spacing, std::array<int, 3> dims,
                                   std::vector<double> masses);

  Kind kind() const { return kind_; }
  std::size_t size() const { return masses_.size(); }
  const std::vector<double>& masses() const { return masses_; }
  std::vector<double>& masses() { return masses_; }
  double total_mass() const;

  /// Bin index holding v, or nullopt outside the grid.
  std::optional<std::size_t> bin_of(const Eigen::Vector3d& v) const;
  double volume(std::size_t bin) const;
  double density(std::size_t bin) const { return masses_[bin] / volume(bin); }
  /// Piecewise-constant density; zero outside the grid.
  double density_at(const Eigen::Vector3d& v) const;

  // Radial accessors.
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& speeds() const { return speeds_; }
  const Eigen::Vector3d& center() const { return center_; }
  /// Interpolating radial profile through (speed_k, density_k).
  RadialProfile profile() const;

  // Cartesian accessors.
  Eigen::Vector3d cell_center(std::size_t bin) const;
  double spacing() const { return spacing_; }
  const std::array<int, 3>& dims() const { return dims_; }

  /// Mass that fell outside the grid when the estimate was built.
  double escaped_mass = 0.0;
  /// Isotropy defect of the sample a radial estimate was reduced from (0 = isotropic).
  double anisotropy = 0.0;
  /// Number of samples behind the estimate (0 when built from values).
  std::size_t samples = 0;

 private:
  Kind kind_ = Kind::Radial;
  std::vector<double> masses_;
  std::vector<double> edges_;
  std::vector<double> speeds_;
  Eigen::Vector3d center_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d lower_ = Eigen::Vector3d::Zero();
  double spacing_ = 0.0;
  std::array<int, 3> dims_{0, 0, 0};
};

}  // namespace granbath
