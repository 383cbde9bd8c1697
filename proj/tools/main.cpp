// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// granbath command line: one subcommand per experiment plus validate-config.
// Exit codes: 0 success, 2 invalid configuration or usage, 3 numerical failure.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "granbath/checkpoint.hpp"
#include "granbath/config.hpp"
#include "granbath/experiments.hpp"
#include "granbath/manifest.hpp"
#include "granbath/radial_grid.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kNumerical = 3;

struct Sources {
  std::string config_path;
  std::string manifest_path;
  std::map<std::string, std::string> overrides;
};

// Registers --<key> for every configuration key. `N` also answers to --n.
void add_config_flags(CLI::App* sub, Sources& src) {
  for (const auto& key : granbath::ExperimentConfig::keys()) {
    if (key == "experiment") continue;
    std::string names = "--" + key;
    if (key == "N") names += ",--n";
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    sub->add_option_function<std::string>(
        names, [&src, key](const std::string& v) { src.overrides[key] = v; }, "config key " + key);
  }
  sub->add_option("--config,-c", src.config_path, "config file (key = value lines)");
  sub->add_option("--from-manifest", src.manifest_path, "re-run the configuration recorded in a manifest");
}

granbath::ExperimentConfig resolve(const std::string& experiment, const Sources& src) {
  granbath::ExperimentConfig cfg;
  if (!src.manifest_path.empty()) {
    const auto man = granbath::RunManifest::read(src.manifest_path);
    cfg = granbath::ExperimentConfig::from_json(man.config);
  }
  if (!src.config_path.empty()) {
    const auto file = granbath::load_config(src.config_path);
    if (!src.manifest_path.empty())
      throw granbath::ConfigError("--config and --from-manifest are mutually exclusive");
    cfg = file;
  }
  const bool outdir_given = src.overrides.count("outdir") || !src.manifest_path.empty() || cfg.outdir != "runs";
  for (const auto& [k, v] : src.overrides) cfg.set(k, v);
  if (!experiment.empty()) {
    if (!src.config_path.empty() && cfg.experiment != "simulate" && cfg.experiment != experiment)
      throw granbath::ConfigError("config file is for experiment '" + cfg.experiment + "'");
    cfg.experiment = experiment;
  }
  if (!outdir_given) cfg.outdir = "runs/" + cfg.experiment;
  cfg.validate();
  return cfg;
}

int report(const granbath::ExperimentResult& res, const granbath::ExperimentConfig& cfg) {
  std::cout << "outputs in " << cfg.outdir << ":";
  for (const auto& f : res.files) std::cout << ' ' << f;
  std::cout << " manifest.json\n";
  if (res.failed()) {
    std::cout << "numerical failure flags:";
    for (const auto& f : res.flags) std::cout << ' ' << f;
    std::cout << '\n';
    return kNumerical;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven inelastic hard spheres in a thermal bath: simulation, steady states, spectra, entropy."};
  app.require_subcommand(1);
  app.set_version_flag("--version", GRANBATH_VERSION);

  std::map<std::string, Sources> sources;
  const char* experiments[][2] = {
      {"simulate", "particle simulation with moment time series"},
      {"steady", "steady state by particle averaging and deterministic marching"},
      {"spectrum", "linearized operators: gap, semigroup decay, splitting, drift"},
      {"entropy", "relative entropy trajectory, balance check and decay fit"},
      {"sweep", "alpha sweep: plateau scaling, elastic limit, spectral drift"},
      {"converge", "decay towards the steady state and comparison with the gap"}};
  for (const auto& e : experiments) add_config_flags(app.add_subcommand(e[0], e[1]), sources[e[0]]);

  auto* vc = app.add_subcommand("validate-config", "check a config file and print the resolved configuration");
  std::string vc_path;
  vc->add_option("file", vc_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kInvalid;
  }

  try {
    if (vc->parsed()) {
      const auto cfg = granbath::load_config(vc_path);
      cfg.validate();
      std::cout << cfg.to_json().dump(2) << '\n';
      return kOk;
    }
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      const auto cfg = resolve(name, sources[name]);
      return report(granbath::run_experiment(cfg), cfg);
    }
  } catch (const granbath::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
