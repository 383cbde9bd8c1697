// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Radial speed grid for isotropic densities. Each node carries a weight for
// int phi(|v|) dv and a shell [edge_k, edge_{k+1}) of exactly that volume, so
// nodal values and shell masses are interchangeable (mass_k = w_k f_k).
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "granbath/density.hpp"
#include "granbath/kinetics.hpp"

namespace granbath {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Placement { GaussLegendre, Midpoint };

Placement parse_placement(const std::string& name);

struct RadialGrid {
  std::vector<double> r;      // nodes, increasing, r[0] > 0
  std::vector<double> w;      // weights including 4 pi r^2
  std::vector<double> edges;  // n + 1 shell edges, edges[0] = 0
  double R_max = 0.0;
  Placement placement = Placement::GaussLegendre;

  std::size_t size() const { return r.size(); }
  Eigen::VectorXd nodes() const { return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())); }
  Eigen::VectorXd weights() const { return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())); }

  /// Nodal values of the bath Maxwellian (bath centred at the origin).
  Eigen::VectorXd maxwellian(double theta0) const;
  double integrate(const Eigen::VectorXd& f) const;
  double moment(const Eigen::VectorXd& f, double power) const;
  /// Discrete X and Y norms: sum |f_i| e^{a r_i} w_i and the same with <r_i>.
  double norm_X(const Eigen::VectorXd& f, double a) const;
  double norm_Y(const Eigen::VectorXd& f, double a) const;
  /// Shell masses of nodal values as a density estimate.
  DensityEstimate to_density(const Eigen::VectorXd& f) const;
  /// Nodal values of a radial density estimate defined on the same shells.
  Eigen::VectorXd from_density(const DensityEstimate& est) const;
  std::string hash() const;
};

/// Nodes on [0, R_max]; throws GridError if the bath mass or energy is off by
/// more than 1e-8.
RadialGrid build_grid(std::size_t n, double R_max, Placement placement = Placement::GaussLegendre,
                      double theta0 = 1.0);

}  // namespace granbath
