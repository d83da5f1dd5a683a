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

#ifndef BINMOE_CONFIG_HPP_
#define BINMOE_CONFIG_HPP_

#include "binmoe/hrtf.hpp"
#include "binmoe/pipeline.hpp"
#include "binmoe/scene.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace binmoe {

inline constexpr int kSchemaVersion = 1;

// Raised for any invalid configuration; `key` is the dotted path of the
// offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct FovConfig {
  double center_deg = 0.0;
  double width_deg = 60.0;
  std::vector<std::size_t> indices;  // overrides the azimuth window
  double gamma = 0.0;
  double delta = 0.0;
  double compass_boost = 1.0;

  FovSpec to_spec(const DirectionGrid& grid) const;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  Method method = Method::kMoeCompass;
  std::vector<Method> baselines{Method::kBsm};

  // Source: synthetic speech-like signal unless `source_wav` is set.
  std::optional<std::string> source_wav;
  double source_duration = 10.0;

  SceneConfig scene;
  std::vector<Eigen::Vector3d> mics;  // empty: glasses layout
  std::size_t grid_count = 60;
  double grid_elevation_deg = 0.0;
  StftConfig stft;

  std::optional<std::string> hrtf_file;
  SphereHeadParams head;

  PipelineOptions pipeline;  // method copied in at run time
  std::optional<FovConfig> fov;

  double tolerance_deg = 12.0;
  double burn_in_s = 0.5;
  double voiced_dbfs = -50.0;

  ArrayGeometry geometry() const;
  DirectionGrid grid() const;
  PipelineOptions pipeline_for(Method m) const;
};

// Throws ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Fully resolved configuration, every key present.
std::string config_to_json(const RunConfig& cfg);

}  // namespace binmoe

#endif  // BINMOE_CONFIG_HPP_
