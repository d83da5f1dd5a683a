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

#ifndef BINMOE_STFT_HPP_
#define BINMOE_STFT_HPP_

#include "binmoe/core.hpp"

#include <vector>

namespace binmoe {

// Multichannel audio, one row per channel.
using Audio = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;

enum class Window { kHann };

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  Window window = Window::kHann;
  double sample_rate = 48000.0;

  void validate() const;
  FreqGrid freq_grid() const { return FreqGrid(sample_rate, fft_size); }
};

// X[t, f]: column f holds the N_m channel values of bin f.
struct SpectralFrame {
  std::size_t time_index = 0;
  ComplexMat x;

  std::size_t num_channels() const { return std::size_t(x.rows()); }
  std::size_t num_bins() const { return std::size_t(x.cols()); }
};

// Periodic Hann window of length n.
RealVec hann_window(std::size_t n);

// Overlap-add normalization: sum over frames of window^2 at any sample.
double ola_gain(const StftConfig& cfg);

std::vector<SpectralFrame> analyze(const Audio& audio, const StftConfig& cfg);

// Weighted overlap-add. Output length is (T - 1) * hop + fft_size.
Audio synthesize(const std::vector<SpectralFrame>& frames,
                 const StftConfig& cfg);

// Processing framing: the signal is zero padded by fft_size - hop in front
// and at least that much behind (rounded up to whole hops) so every input
// sample is covered by the full overlap of frames.
std::size_t frame_padding(const StftConfig& cfg);
std::vector<SpectralFrame> analyze_padded(const Audio& audio,
                                          const StftConfig& cfg);
// Inverse of analyze_padded, trimmed back to `length` samples.
Audio synthesize_trimmed(const std::vector<SpectralFrame>& frames,
                         const StftConfig& cfg, std::size_t length);
// Centre of padded frame t on the unpadded timeline, in seconds.
double frame_center_seconds(std::size_t t, const StftConfig& cfg);

}  // namespace binmoe

#endif  // BINMOE_STFT_HPP_
