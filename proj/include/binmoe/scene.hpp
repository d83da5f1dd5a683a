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

#ifndef BINMOE_SCENE_HPP_
#define BINMOE_SCENE_HPP_

#include "binmoe/core.hpp"
#include "binmoe/stft.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace binmoe {

// Microphone positions in metres, relative to the array reference point
// (the centroid, which the constructor subtracts out).
class ArrayGeometry {
 public:
  using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  ArrayGeometry() = default;
  explicit ArrayGeometry(const Positions& positions);

  // Four mics on the corners of a 0.15 m (left-right) x 0.05 m (front-back)
  // horizontal rectangle: a smartglasses-sized aperture.
  static ArrayGeometry glasses();

  std::size_t num_mics() const { return std::size_t(positions_.rows()); }
  const Positions& positions() const { return positions_; }
  Eigen::Vector3d mic(std::size_t m) const {
    return positions_.row(Eigen::Index(m)).transpose();
  }
  double aperture() const;

 private:
  Positions positions_;
};

// A[f] over a direction grid: a[f] is N_m x Q, column q is the steering
// vector of grid direction q.
struct SteeringSet {
  DirectionGrid grid;
  FreqGrid freqs;
  std::vector<ComplexMat> a;

  std::size_t num_mics() const { return a.empty() ? 0 : std::size_t(a[0].rows()); }
  std::size_t num_bins() const { return a.size(); }
  std::size_t num_dirs() const { return grid.size(); }
};

// Far-field plane-wave response, N_m x num_bins (column per bin).
ComplexMat steering_vector(const ArrayGeometry& geom, const Direction& dir,
                           const FreqGrid& freqs);

SteeringSet build_steering_set(const ArrayGeometry& geom,
                               const DirectionGrid& grid,
                               const FreqGrid& freqs);

enum class Sense { kCcw, kCw };

struct TrajectoryConfig {
  Eigen::Vector3d start_position{7.0, 4.0, 2.0};
  double azimuth_step = 6.0 * kPi / 180.0;
  double step_duration = 0.167;
  std::size_t num_steps = 59;
  Sense sense = Sense::kCcw;

  double duration() const { return step_duration * double(num_steps); }
};

struct SceneConfig {
  Eigen::Vector3d room_dims{8.0, 8.0, 5.0};
  double rt60_target = 0.2;
  Eigen::Vector3d array_center{4.0, 4.0, 2.0};
  TrajectoryConfig trajectory;
  double noise_level_db = -40.0;
  double sample_rate = 48000.0;
  int max_image_order = 20;
};

// Source positions for every step: the start point rotated about the
// vertical axis through the array centre.
std::vector<Eigen::Vector3d> trajectory_positions(const SceneConfig& cfg);

// Azimuth of `pos` seen from the array centre, as a Direction.
Direction direction_from_array(const SceneConfig& cfg,
                               const Eigen::Vector3d& pos);

// Uniform wall reflection coefficient (pressure) whose Eyring decay matches
// `rt60` in the given room. Zero for rt60 == 0.
double eyring_reflection(const Eigen::Vector3d& room_dims, double rt60);

// Image-source impulse response for one source/receiver pair with uniform
// pressure reflection coefficient `beta`. Direct path gain is 1/distance.
std::vector<double> image_source_rir(const Eigen::Vector3d& room_dims,
                                     const Eigen::Vector3d& source,
                                     const Eigen::Vector3d& receiver,
                                     double beta, int max_order,
                                     double sample_rate, std::size_t length);

// Schroeder backward integration, -5 to -25 dB line fit, extrapolated to
// 60 dB.
double measure_rt60(std::span<const double> rir, double sample_rate);

struct SimulationResult {
  Audio mics;
  // Direct-path source signal as it arrives at the array reference point.
  std::vector<double> reference;
  std::vector<Eigen::Vector3d> step_positions;
  std::vector<Direction> step_directions;
  double reflection = 0.0;
  double measured_rt60 = 0.0;
  double noise_rms = 0.0;
  std::size_t step_samples = 0;
  double direct_delay = 0.0;  // seconds, source to array centre
};

SimulationResult simulate_shoebox(const SceneConfig& cfg,
                                  const ArrayGeometry& geom,
                                  std::span<const double> source_audio,
                                  std::uint64_t seed);

// True source direction for each frame of analyze_padded().
std::vector<Direction> frame_truth(const SimulationResult& sim,
                                   const StftConfig& stft,
                                   std::size_t num_frames);

// Amplitude-modulated noise band limited to 100-4000 Hz with syllable-like
// bursts and pauses. Deterministic for a given seed.
std::vector<double> speech_like_signal(double duration, double sample_rate,
                                       std::uint64_t seed);

}  // namespace binmoe

#endif  // BINMOE_SCENE_HPP_
