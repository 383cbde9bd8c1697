// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace granbath {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string file_checksum(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a_hex(ss.str());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_output(const std::string& path) {
  outputs.emplace_back(std::filesystem::path(path).filename().string(), file_checksum(path));
}

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, file_checksum(path)); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["config_hash"] = config_hash;
  j["code_version"] = code_version;
  j["seeds"] = seeds;
  j["started"] = started;
  j["finished"] = finished;
  j["config"] = config;
  auto files = [](const auto& list) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [p, c] : list) a.push_back({{"path", p}, {"checksum", c}});
    return a;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.experiment = j.value("experiment", "");
  m.config_hash = j.value("config_hash", "");
  m.code_version = j.value("code_version", "");
  m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  m.started = j.value("started", "");
  m.finished = j.value("finished", "");
  m.config = j.value("config", nlohmann::json::object());
  for (const auto& f : j.value("inputs", nlohmann::json::array()))
    m.inputs.emplace_back(f.at("path").get<std::string>(), f.at("checksum").get<std::string>());
  for (const auto& f : j.value("outputs", nlohmann::json::array()))
    m.outputs.emplace_back(f.at("path").get<std::string>(), f.at("checksum").get<std::string>());
  return m;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest " + path);
  os << to_json().dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest " + path);
  return from_json(nlohmann::json::parse(is));
}

}  // namespace granbath
