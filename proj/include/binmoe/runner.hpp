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

#ifndef BINMOE_RUNNER_HPP_
#define BINMOE_RUNNER_HPP_

#include "binmoe/config.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace binmoe {

inline constexpr const char* kVersion = "0.1.0";

// A failure inside one pipeline stage (setup, simulate, reference, process,
// eval, pattern, write).
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunnerOptions {
  // Progress lines; null means silent.
  std::function<void(const std::string&)> log;
};

// Files written, relative to the output directory. manifest.json is always
// last.
struct RunOutputs {
  std::vector<std::string> files;
};

// Each entry point writes into cfg.output_dir (created if missing) and ends
// with manifest.json. All throw StageError.

// simulate -> process (method + baselines) -> eval.
RunOutputs run_all(const RunConfig& cfg, const RunnerOptions& opts = {});

// Scene only: mics.wav, reference.wav, ground_truth.csv.
RunOutputs run_simulate(const RunConfig& cfg, const RunnerOptions& opts = {});

// Renders an existing multichannel recording (channel order = array layout).
RunOutputs run_process(const RunConfig& cfg, const std::string& mics_wav,
                       const RunnerOptions& opts = {});

// Metrics from files already in the output directory: reference.wav,
// binaural_<method>.wav, ground_truth.csv and, for MoE methods,
// moe_tracking.csv.
RunOutputs run_eval(const RunConfig& cfg, const RunnerOptions& opts = {});

// Directional gain of the gain-controlled BSM over a gamma sweep:
// pattern.csv (gamma, azimuth_deg, in_fov, left_db, right_db).
RunOutputs run_pattern(const RunConfig& cfg, const RunnerOptions& opts = {});

// 64-bit FNV-1a of a file's bytes.
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace binmoe

#endif  // BINMOE_RUNNER_HPP_
