// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random stream. The transforms on top of the engine are written out
// here so streams are identical across standard library implementations.
#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

namespace granbath {

/// splitmix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  double exponential(double rate);
  /// Standard normal pair by Box-Muller.
  std::pair<double, double> normal_pair();
  double normal() { return normal_pair().first; }
  Eigen::Vector3d gaussian_vector();
  Eigen::Vector3d unit_vector();

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace granbath
