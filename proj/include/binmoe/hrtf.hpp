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

#ifndef BINMOE_HRTF_HPP_
#define BINMOE_HRTF_HPP_

#include "binmoe/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace binmoe {

// Left/right ear transfer functions on a direction grid. h[f] is Q x 2:
// column 0 is the left ear, column 1 the right ear.
struct HrtfSet {
  DirectionGrid grid;
  FreqGrid freqs;
  std::vector<ComplexMat> h;
  // Bins above the source data's Nyquist filled by holding the last bin.
  std::size_t held_bins = 0;

  std::size_t num_bins() const { return h.size(); }
  std::size_t num_dirs() const { return grid.size(); }
  ComplexVec left(std::size_t q) const;
  ComplexVec right(std::size_t q) const;
};

struct SphereHeadParams {
  double radius = 0.0875;
  // Left ear at +ear_azimuth, right ear at -ear_azimuth.
  double ear_azimuth = 100.0 * kPi / 180.0;
  double speed_of_sound = kSpeedOfSound;
};

// Far-field rigid-sphere response at one surface point, relative to the
// free-field pressure at the sphere centre. `cos_incidence` is the cosine of
// the angle between the source direction and the receiver point.
cdouble sphere_response(double ka, double cos_incidence);

// Per-bin (left, right) response of the rigid-sphere head.
std::pair<ComplexVec, ComplexVec> sphere_hrtf(const SphereHeadParams& params,
                                              const Direction& dir,
                                              const FreqGrid& freqs);

HrtfSet sphere_hrtf_set(const SphereHeadParams& params,
                        const DirectionGrid& grid, const FreqGrid& freqs);

// CSV grid format: header `az_deg,el_deg,freq_hz,re_L,im_L,re_R,im_R`, one
// row per (direction, bin), any order, '#' comment lines.
void save_hrtf_grid(const HrtfSet& set, const std::string& path);
HrtfSet load_hrtf_grid(const std::string& path, const DirectionGrid& grid,
                       const FreqGrid& freqs);

// Interaural time difference in seconds, positive when the left ear leads.
// Mean over 200-1500 Hz of the unwrapped interaural phase delay.
double itd_of(const HrtfSet& set, std::size_t q);

// Interaural level difference (dB, left over right) at bin k.
double ild_at(const HrtfSet& set, std::size_t q, std::size_t k);

}  // namespace binmoe

#endif  // BINMOE_HRTF_HPP_
