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

#ifndef BINMOE_PIPELINE_HPP_
#define BINMOE_PIPELINE_HPP_

#include "binmoe/moe.hpp"

#include <optional>
#include <string>
#include <vector>

namespace binmoe {

enum class Method { kBsm, kCompass, kDbsm, kMoeBsm, kMoeDbsm, kMoeCompass };

const char* to_string(Method m);
Method parse_method(const std::string& name);  // throws InvalidArgument
bool is_moe(Method m);

struct PipelineOptions {
  Method method = Method::kMoeCompass;
  BsmOptions bsm;
  MoeOptions moe;  // moe.experts.design follows `method`
  std::optional<FovSpec> fov;
  // COMPASS / d-BSM parametric stage.
  std::size_t num_sources = 1;
  std::size_t update_every = 8;
  double cov_beta = 0.9;
  double lcmv_loading = 1e-3;
};

struct PipelineResult {
  Audio binaural;  // 2 x samples
  std::vector<SpectralFrame> frames;
  std::optional<MoeRun> moe;
  // Grid index of the first DOA per frame (parametric methods).
  std::vector<std::size_t> doa_track;
};

// STFT-domain rendering of an N_m x samples recording.
PipelineResult process_recording(const Audio& mics, const SteeringSet& a,
                                 const HrtfSet& h, const StftConfig& stft,
                                 const PipelineOptions& opts);

}  // namespace binmoe

#endif  // BINMOE_PIPELINE_HPP_
