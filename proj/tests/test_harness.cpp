// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "granbath/config.hpp"
#include "granbath/experiments.hpp"
#include "granbath/manifest.hpp"

using namespace granbath;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("granbath_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(GRANBATH_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("config grammar") {
  const auto c = parse_config(
      "# sweep over alpha\n"
      "experiment = sweep\n"
      "alphas = 0.8, 0.9 0.95   # mixed separators\n"
      "N = 1e4\n"
      "u0 = 0 0.5 0\n"
      "\n"
      "initial = mixture\n");
  CHECK(c.experiment == "sweep");
  CHECK(c.alphas == std::vector<double>{0.8, 0.9, 0.95});
  CHECK(c.N == 10000);
  CHECK(c.u0 == Velocity(0, 0.5, 0));
  CHECK(c.initial.kind == InitialSpec::Kind::Mixture);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_WITH_AS(parse_config("alpha = 0.5\nalpha = 0.6\n", "x.cfg"), "x.cfg:2: duplicate key 'alpha'",
                       ConfigError);
  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("N = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("u0 = 1 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alphas =\n"), ConfigError);
  CHECK(parse_config("initial = steady\n").initial_steady);
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.experiment = "sweep";
  CHECK_THROWS_AS(c.validate(), ConfigError);  // empty alpha list
  c.alphas = {0.9, 0.9};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.alphas = {0.9, 0.95};
  CHECK_NOTHROW(c.validate());

  auto bad = [](const std::string& key, const std::string& value) {
    ExperimentConfig x;
    x.set(key, value);
    CHECK_THROWS_AS(x.validate(), ConfigError);
  };
  bad("alpha", "0");
  bad("alpha", "1.5");
  bad("theta0", "-1");
  bad("N", "1");
  bad("T", "1.03");
  bad("grid_n", "8");
  bad("route", "both-ways");
  bad("experiment", "dance");
  bad("coarsen", "0");
}

TEST_CASE("config hash and json round trip") {
  ExperimentConfig c;
  c.set("alphas", "0.8 0.9");
  c.set("u0", "0.1 0 0");
  c.set("seed", "17");
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  ExperimentConfig d = c;
  d.outdir = "elsewhere";
  d.workers = 4;
  CHECK(d.hash() == c.hash());
  d.seed = 18;
  CHECK(d.hash() != c.hash());
}

TEST_CASE("manifest round trip") {
  const auto dir = scratch("manifest");
  write(dir / "a.csv", "x\n1\n");
  RunManifest m;
  m.experiment = "simulate";
  m.config_hash = "abc";
  m.seeds = {1, 2};
  m.add_output((dir / "a.csv").string());
  m.write((dir / "manifest.json").string());
  const auto r = RunManifest::read((dir / "manifest.json").string());
  CHECK(r.config_hash == "abc");
  CHECK(r.seeds == std::vector<std::uint64_t>{1, 2});
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0].second == file_checksum((dir / "a.csv").string()));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  write(dir / "good.cfg", "experiment = steady\nalpha = 0.9\n");
  write(dir / "bad.cfg", "alpha = 2\n");
  write(dir / "empty_sweep.cfg", "experiment = sweep\n");
  CHECK(cli("validate-config " + (dir / "good.cfg").string()) == 0);
  CHECK(cli("validate-config " + (dir / "bad.cfg").string()) == 2);
  CHECK(cli("validate-config " + (dir / "empty_sweep.cfg").string()) == 2);
  CHECK(cli("validate-config " + (dir / "missing.cfg").string()) == 2);
  CHECK(cli("simulate --no-such-flag 1") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("converge --alpha 0") == 2);
  CHECK(cli("--version") == 0);
}

TEST_CASE("converge plumbing and byte-identical reruns") {
  const auto dir = scratch("converge");
  const std::string args = "converge --alpha 1.0 --n 20000 --seed 7 --outdir ";
  REQUIRE(cli(args + (dir / "a").string()) == 0);
  REQUIRE(cli(args + (dir / "b").string()) == 0);
  for (const char* f : {"converge.csv", "summary.json"}) {
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(fs::exists(dir / "a" / "manifest.json"));
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary["experiment"] == "converge");
  CHECK(summary["manifest_ref"] == "manifest.json");
  CHECK(summary["flags"].empty());
  CHECK(summary["fitted"]["nu_hat"].get<double>() > 0.0);
  CHECK(summary.dump().find("started") == std::string::npos);

  // the manifest alone reproduces the run
  const auto man = RunManifest::read((dir / "a" / "manifest.json").string());
  CHECK(man.config_hash == summary["config_hash"]);
  for (const auto& [path, sum] : man.outputs) CHECK(file_checksum((dir / "a" / path).string()) == sum);
  REQUIRE(cli("converge --from-manifest " + (dir / "a" / "manifest.json").string() + " --outdir " +
              (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "converge.csv") == slurp(dir / "c" / "converge.csv"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "c" / "summary.json"));
}

TEST_CASE("simulate through the library entry point") {
  const auto dir = scratch("simulate");
  ExperimentConfig c;
  c.experiment = "simulate";
  c.alpha = 0.9;
  c.N = 2000;
  c.T = 1.0;
  c.outdir = dir.string();
  const auto r = run_experiment(c);
  CHECK_FALSE(r.failed());
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "summary.json"));
  for (const auto& f : r.files) CHECK(fs::exists(dir / f));
  ExperimentConfig w = c;
  w.workers = 2;
  w.outdir = (dir / "w2").string();
  const auto r2 = run_experiment(w);
  for (const auto& f : r.files) CHECK(slurp(dir / f) == slurp(dir / "w2" / f));
  (void)r2;
}
