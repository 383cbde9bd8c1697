// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration. Every run writes its CSV tables, a JSON summary
// and a manifest into the configured output directory. Outputs depend only on
// the resolved configuration; timestamps live in the manifest alone.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "granbath/config.hpp"
#include "granbath/diagnostics.hpp"
#include "granbath/radial_grid.hpp"
#include "granbath/spectral.hpp"
#include "granbath/steady.hpp"

namespace granbath {

struct ExperimentResult {
  nlohmann::json summary;
  std::vector<std::string> flags;  // numerical failures; non-empty means exit code 3
  std::vector<std::string> files;  // written outputs, relative to outdir
  bool failed() const { return !flags.empty(); }
};

/// Validates, runs cfg.experiment and writes outputs plus manifest.json.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Building blocks shared by the experiments and the acceptance suite.

RadialGrid experiment_grid(const ExperimentConfig& cfg);
KernelConstants calibrated_constants(const BathMaxwellian& M);

/// Deterministic steady state on the experiment grid (alpha = 1 gives the bath).
SteadyStateResult steady_state_for(const ExperimentConfig& cfg, const RadialGrid& grid, double alpha);

/// Linearized operator L_alpha around nodal F on the grid.
OperatorMatrix linearized_operator(const RadialGrid& grid, const LAssembly& L, const Eigen::VectorXd& F, double alpha,
                                   const std::string& cache_dir, TAlphaParts* parts = nullptr);

/// Ensemble drawn from shell masses on the grid: shell by mass, uniform in
/// volume inside the shell, isotropic about `center`.
Ensemble sample_from_shells(const RadialGrid& grid, const std::vector<double>& masses, const Velocity& center,
                            std::size_t N, std::uint64_t seed);

/// Entropy trajectory of a particle run from cfg.initial at the given alpha.
/// F_masses are the steady-state masses on the grid shells (distance column).
EntropyReport entropy_run(const ExperimentConfig& cfg, double alpha, std::uint64_t seed, const RadialGrid& grid,
                          const std::vector<double>& F_masses);

struct ConvergeReport {
  double alpha = 1.0;
  std::vector<double> t, H, distance, energy;
  double floor = 0.0;     // histogram entropy bias at the end of the run
  double t_window = 0.0;  // fit window start
  LambdaFit fit;          // decay of the distance to F_alpha
  double nu_hat = 0.0, nu_ci = 0.0;
  double K_hat = 0.0, K_ci = 0.0;
  double nu_h = 0.0;      // isotropic-sector gap of L_alpha
  double ratio = 0.0;     // nu_hat / nu_h
  bool noise_dominated = false;
  std::string csv() const;
  nlohmann::json to_json() const;
};
ConvergeReport converge_experiment(const ExperimentConfig& cfg);

}  // namespace granbath
