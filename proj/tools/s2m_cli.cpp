// Copyright 2026 The s2m Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// s2m command-line tool: run, sweep, validate and report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "s2m/errors.hpp"
#include "s2m/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  bool verbose = false;
};

s2m::ExperimentConfig load(const Options& o) {
  s2m::ExperimentConfig config = s2m::load_config(o.config);
  if (o.seed) config.seed = *o.seed;
  if (o.output) config.output_dir = *o.output;
  return config;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", o.seed, "Override the config seed");
  cmd->add_option("-o,--output", o.output, "Override the output directory");
  cmd->add_flag("-v,--verbose", o.verbose, "Print more detail");
}

void print_manifest(const s2m::RunManifest& m, const std::string& dir) {
  std::cout << "wrote";
  for (const auto& f : m.files) std::cout << " " << (std::filesystem::path(dir) / f).string();
  std::cout << "\nconfig hash " << m.config_hash << "\n";
}

int run(const Options& o) {
  const auto config = load(o);
  const auto manifest = s2m::run_and_write(config);
  std::ifstream in(std::filesystem::path(config.output_dir) / "report.json");
  std::cout << s2m::render_report_file(nlohmann::json::parse(in));
  if (o.verbose) print_manifest(manifest, config.output_dir);
  return 0;
}

int sweep(const Options& o) {
  const auto config = load(o);
  const auto manifest = s2m::sweep_and_write(config);
  if (o.verbose) {
    std::ifstream in(std::filesystem::path(config.output_dir) / "sweep.csv");
    std::cout << in.rdbuf();
  }
  print_manifest(manifest, config.output_dir);
  return 0;
}

int validate(const Options& o) {
  const auto config = load(o);
  s2m::validate_config(config);
  std::cout << "ok " << config.name << " (" << s2m::config_hash(config) << ")\n";
  if (o.verbose) std::cout << s2m::config_to_json(config).dump(2) << "\n";
  return 0;
}

int report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw s2m::Error("cannot open " + path);
  std::cout << s2m::render_report_file(nlohmann::json::parse(in));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample joint classes from a pretrained generator with Metropolis-Hastings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(s2m::kArtifactVersion));

  Options opts;
  std::string report_path;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its artifacts");
  add_common(run_cmd, opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the config's parameter grid");
  add_common(sweep_cmd, opts);
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without sampling");
  add_common(validate_cmd, opts);
  auto* report_cmd = app.add_subcommand("report", "Print a report.json as a table");
  report_cmd->add_option("report", report_path, "Path to report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(opts);
    if (*sweep_cmd) return sweep(opts);
    if (*validate_cmd) return validate(opts);
    if (*report_cmd) return report(report_path);
  } catch (const s2m::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
