// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small statistics helpers shared by the diagnostics and experiments.
#pragma once

#include <span>
#include <vector>

namespace granbath {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
MeanSE mean_se(std::span<const double> x);

/// Mean and standard error from non-overlapping batch means (correlated series).
MeanSE batch_mean_se(std::span<const double> x, std::size_t batches = 10);

struct LinearFit {
  double intercept = 0.0, slope = 0.0;
  double se_intercept = 0.0, se_slope = 0.0;
  double residual_sd = 0.0;
  std::size_t n = 0;
  /// Two-sided confidence half-widths at the given level (Student t, n - 2 dof).
  double ci_intercept(double level = 0.95) const;
  double ci_slope(double level = 0.95) const;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation (average ranks for ties). Returns 0 for constant input.
double spearman(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);
/// Asymptotic critical value of the two-sample KS statistic at level 0.01.
double ks_critical_01(std::size_t n, std::size_t m);

/// Upper tail probability of the chi-square distribution.
double chi2_sf(double x, double dof);

}  // namespace granbath
