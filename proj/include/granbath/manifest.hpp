// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run manifests: what produced each artifact on disk.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace granbath {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string fnv1a_hex(const std::string& bytes);
/// Checksum of a file's bytes; throws std::runtime_error if unreadable.
std::string file_checksum(const std::string& path);

struct RunManifest {
  std::string experiment;
  std::string config_hash;
  std::string code_version;
  std::vector<std::uint64_t> seeds;
  std::string started;
  std::string finished;
  nlohmann::json config;  // resolved configuration echo
  std::vector<std::pair<std::string, std::string>> inputs;   // path, checksum
  std::vector<std::pair<std::string, std::string>> outputs;  // path, checksum

  void add_output(const std::string& path);
  void add_input(const std::string& path);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

std::string utc_timestamp();

}  // namespace granbath
