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

#ifndef BINMOE_FOV_HPP_
#define BINMOE_FOV_HPP_

#include "binmoe/filters.hpp"

#include <functional>
#include <vector>

namespace binmoe {

// Field of view: a region of directions plus the out-of-region gain
// reduction `gamma` and distortion allowance `delta`, both in [0, 1].
struct FovSpec {
  std::function<bool(const Direction&)> region;
  double gamma = 0.0;
  double delta = 0.0;
  // Extra in-region gain on the COMPASS direct path (>= 1).
  double compass_boost = 1.0;

  // Azimuths within +-width/2 of `center` (radians).
  static FovSpec azimuth_window(double center, double width, double gamma,
                                double delta);
  // Exactly the listed grid directions.
  static FovSpec from_indices(const DirectionGrid& grid,
                              const std::vector<std::size_t>& indices,
                              double gamma, double delta);

  std::vector<bool> mask(const DirectionGrid& grid) const;
  // Throws InvalidArgument for out-of-range parameters or an empty region.
  void validate(const DirectionGrid& grid) const;
};

// Out-of-region HRTF rows scaled by (1 - gamma).
HrtfSet apply_gain_control(const HrtfSet& h, const FovSpec& fov);

// Diagonal of D: 1 inside the region, 1 - delta outside.
RealVec distortion_matrix(const DirectionGrid& grid, const FovSpec& fov);

// c = H^T D A^H (A D A^H + eps I)^-1, with the same MagLS treatment as
// design_bsm above the cutoff.
BinauralFilter design_weighted_bsm(const SteeringSet& a, const HrtfSet& h,
                                   const RealVec& d, const BsmOptions& opts = {});

// d-BSM with R_s replaced by D^{1/2} R_s D^{1/2}, one bin.
ComplexMat design_weighted_dbsm(const ComplexMat& a, const ComplexMat& h,
                                const ComplexMat& r_s, const ComplexMat& r_n,
                                const RealVec& d);

struct GainPattern {
  std::vector<double> azimuth_deg;
  std::vector<double> left_db;
  std::vector<double> right_db;
};

// Rendered energy for a unit plane wave from each grid direction relative
// to the reference HRTF energy, summed over bins, per ear.
GainPattern directional_gain_pattern(const BinauralFilter& c,
                                     const SteeringSet& a,
                                     const HrtfSet& h_ref);

}  // namespace binmoe

#endif  // BINMOE_FOV_HPP_
