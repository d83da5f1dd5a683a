// Copyright 2026 The binmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// binmoe: config-driven runner.
//
//   binmoe run      --config C [--seed N] [--out DIR] [--method M] [--quiet]
//   binmoe simulate --config C ...
//   binmoe process  --config C --input mics.wav ...
//   binmoe eval     --config C ...
//   binmoe pattern  --config C ...
//
// Exit codes: 0 ok, 2 invalid config or usage, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "binmoe/config.hpp"
#include "binmoe/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON run configuration")->required();
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--out", c.out, "override the output directory");
  sub->add_option("--method", c.method,
                  "override the method (bsm, compass, dbsm, moe-bsm, moe-dbsm, moe-compass)");
  sub->add_flag("--quiet", c.quiet, "no progress output");
}

binmoe::RunConfig resolve(const Common& c) {
  binmoe::RunConfig cfg = binmoe::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.method) {
    try {
      cfg.method = binmoe::parse_method(*c.method);
    } catch (const binmoe::Error&) {
      throw binmoe::ConfigError("method", "unknown method '" + *c.method + "'");
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binaural rendering from wearable arrays with a mixture of experts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", binmoe::kVersion);

  Common common;
  std::string input;
  auto* run = app.add_subcommand("run", "simulate, process and evaluate");
  auto* simulate = app.add_subcommand("simulate", "scene simulation only");
  auto* process = app.add_subcommand("process", "render an existing recording");
  auto* eval = app.add_subcommand("eval", "metrics from an existing output directory");
  auto* pattern = app.add_subcommand("pattern", "directional gain over a gamma sweep");
  for (auto* s : {run, simulate, process, eval, pattern}) add_common(s, common);
  process->add_option("--input", input, "multichannel WAV, one channel per mic")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  binmoe::RunConfig cfg;
  try {
    cfg = resolve(common);
  } catch (const binmoe::ConfigError& e) {
    std::cerr << "binmoe: invalid config: " << e.what() << '\n';
    return kExitConfig;
  }

  binmoe::RunnerOptions opts;
  if (!common.quiet) opts.log = [](const std::string& line) { std::cerr << line << '\n'; };
  try {
    if (run->parsed()) binmoe::run_all(cfg, opts);
    if (simulate->parsed()) binmoe::run_simulate(cfg, opts);
    if (process->parsed()) binmoe::run_process(cfg, input, opts);
    if (eval->parsed()) binmoe::run_eval(cfg, opts);
    if (pattern->parsed()) binmoe::run_pattern(cfg, opts);
  } catch (const binmoe::StageError& e) {
    std::cerr << "binmoe: stage '" << e.stage() << "' failed: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "binmoe: failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
