// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container:
//   "GBCK" | u32 version | u64 header bytes | JSON header | N x 3 float64 (LE)
#pragma once

#include <string>

#include "granbath/dsmc.hpp"

namespace granbath {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointInfo {
  std::string config_hash;
  std::uint32_t version = 0;
};

void save_checkpoint(const std::string& path, const Ensemble& ens, const std::string& config_hash);
Ensemble load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace granbath
