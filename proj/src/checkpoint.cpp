// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace granbath {

namespace {

constexpr char kMagic[4] = {'G', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T x) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &x, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T x;
  std::memcpy(&x, buf, sizeof(T));
  return x;
}

}  // namespace

void save_checkpoint(const std::string& path, const Ensemble& ens, const std::string& config_hash) {
  nlohmann::json header{{"seed", ens.seed},   {"time", ens.time},         {"steps", ens.steps},
                        {"N", ens.size()},    {"rng_state", ens.rng.state()}, {"config_hash", config_hash}};
  // exact round trip of the clock
  header["time_bits"] = std::bit_cast<std::uint64_t>(ens.time);
  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + tmp);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& v : ens.v)
      for (int d = 0; d < 3; ++d) put<double>(os, v[d]);
    os.flush();
    if (!os) throw CheckpointError("checkpoint write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into place: " + path);
}

Ensemble load_checkpoint(const std::string& path, CheckpointInfo* info) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a checkpoint file: " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(is);
  if (len > (1u << 20)) throw CheckpointError("checkpoint header too large");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw CheckpointError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  Ensemble ens;
  ens.seed = header.at("seed").get<std::uint64_t>();
  ens.steps = header.at("steps").get<std::uint64_t>();
  ens.time = std::bit_cast<double>(header.at("time_bits").get<std::uint64_t>());
  ens.rng.set_state(header.at("rng_state").get<std::string>());
  const auto N = header.at("N").get<std::size_t>();
  ens.v.resize(N);
  for (auto& v : ens.v)
    for (int d = 0; d < 3; ++d) v[d] = get<double>(is);
  if (info) {
    info->config_hash = header.value("config_hash", "");
    info->version = version;
  }
  return ens;
}

}  // namespace granbath
