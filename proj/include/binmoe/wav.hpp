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

#ifndef BINMOE_WAV_HPP_
#define BINMOE_WAV_HPP_

#include "binmoe/stft.hpp"

#include <optional>
#include <string>

namespace binmoe {

struct WavData {
  Audio audio;  // channels x samples, full scale +-1
  double sample_rate = 0.0;
};

// PCM 16/24/32-bit integer or 32-bit float, any channel count.
WavData read_wav(const std::string& path);

// 24-bit PCM. Returns the linear gain applied: with `peak_dbfs` set the
// signal is scaled so its peak sits at that level, otherwise gain is 1 and
// samples are clipped to +-1.
double write_wav(const std::string& path, const Audio& audio, double sample_rate,
                 std::optional<double> peak_dbfs = std::nullopt);

}  // namespace binmoe

#endif  // BINMOE_WAV_HPP_
