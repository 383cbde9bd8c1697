// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Isotropic reduction of the inelastic collision operator on a radial grid.
// For a particle on shell i meeting a partner on shell j, R(k | i, j) is the
// collision rate |v - w| times the probability that the outgoing speed lands
// in shell k, averaged over the relative angle and the scattering direction.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "granbath/kinetics.hpp"
#include "granbath/radial_grid.hpp"

namespace granbath {

struct TensorOptions {
  std::size_t pieces = 24;  // sub-intervals in |v - w|
  std::size_t order = 6;    // Gauss-Legendre points per piece
  int workers = 1;
};

class CollisionTensor {
 public:
  CollisionTensor() = default;
  static CollisionTensor build(const RadialGrid& grid, const RestitutionParams& params, const TensorOptions& opts = {});

  std::size_t size() const { return n_; }
  double alpha() const { return alpha_; }
  /// Shell mean of |v - w| between nodes i and j.
  double phi(std::size_t i, std::size_t j) const { return phi_[i * n_ + j]; }
  const std::vector<double>& phi_matrix() const { return phi_; }

  /// Entries R(k | i, j) for k in [first(i, j), first(i, j) + count(i, j)).
  std::size_t first(std::size_t i, std::size_t j) const { return kstart_[i * n_ + j]; }
  std::size_t count(std::size_t i, std::size_t j) const { return offset_[i * n_ + j + 1] - offset_[i * n_ + j]; }
  const double* entries(std::size_t i, std::size_t j) const { return values_.data() + offset_[i * n_ + j]; }
  double entry(std::size_t k, std::size_t i, std::size_t j) const;

  /// Gain masses sum_ij a_i b_j R(k | i, j) for shell masses a (first) and b (partner).
  Eigen::VectorXd gain(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  /// Loss masses a_k sum_j b_j phi(k, j).
  Eigen::VectorXd loss(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  /// Largest fraction of phi whose outgoing speed fell beyond the grid; those
  /// collisions leave the particle in its own shell.
  double max_escape = 0.0;
  std::string grid_hash;

  void save(const std::string& path) const;
  /// Loads a cache; throws if the grid hash, alpha or checksum do not match.
  static CollisionTensor load(const std::string& path, const RadialGrid& grid, double alpha);
  std::string checksum() const;

 private:
  std::size_t n_ = 0;
  double alpha_ = 1.0;
  std::vector<double> phi_;
  std::vector<std::uint32_t> kstart_;
  std::vector<std::size_t> offset_;
  std::vector<double> values_;
};

}  // namespace granbath
