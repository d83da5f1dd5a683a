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

#include "binmoe/fov.hpp"

#include <algorithm>

namespace binmoe {

FovSpec FovSpec::azimuth_window(double center, double width, double gamma,
                                double delta) {
  FovSpec f;
  const double half_deg = 0.5 * width * 180.0 / kPi;
  const double center_deg = Direction(center).azimuth_deg();
  f.region = [center_deg, half_deg](const Direction& d) {
    return circular_distance_deg(d.azimuth_deg(), center_deg) <= half_deg + 1e-9;
  };
  f.gamma = gamma;
  f.delta = delta;
  return f;
}

FovSpec FovSpec::from_indices(const DirectionGrid& grid,
                              const std::vector<std::size_t>& indices,
                              double gamma, double delta) {
  std::vector<Direction> members;
  for (std::size_t i : indices) {
    if (i >= grid.size()) {
      throw Error(Errc::kInvalidArgument,
                  "fov: grid index " + std::to_string(i) + " out of range");
    }
    members.push_back(grid[i]);
  }
  FovSpec f;
  f.region = [members](const Direction& d) {
    return std::find(members.begin(), members.end(), d) != members.end();
  };
  f.gamma = gamma;
  f.delta = delta;
  return f;
}

std::vector<bool> FovSpec::mask(const DirectionGrid& grid) const {
  std::vector<bool> m(grid.size(), false);
  for (std::size_t q = 0; q < grid.size(); ++q) m[q] = region && region(grid[q]);
  return m;
}

void FovSpec::validate(const DirectionGrid& grid) const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "fov: gamma must be in [0, 1]");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "fov: delta must be in [0, 1]");
  }
  if (!(compass_boost >= 1.0)) {
    throw Error(Errc::kInvalidArgument, "fov: compass_boost must be >= 1");
  }
  const auto m = mask(grid);
  if (std::none_of(m.begin(), m.end(), [](bool b) { return b; })) {
    throw Error(Errc::kInvalidArgument, "fov: region contains no grid direction");
  }
}

HrtfSet apply_gain_control(const HrtfSet& h, const FovSpec& fov) {
  fov.validate(h.grid);
  HrtfSet out = h;
  if (fov.gamma == 0.0) return out;
  const auto m = fov.mask(h.grid);
  const double g = 1.0 - fov.gamma;
  for (auto& hk : out.h) {
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (!m[q]) hk.row(Eigen::Index(q)) *= g;
    }
  }
  return out;
}

RealVec distortion_matrix(const DirectionGrid& grid, const FovSpec& fov) {
  fov.validate(grid);
  const auto m = fov.mask(grid);
  RealVec d(Eigen::Index(grid.size()));
  for (std::size_t q = 0; q < m.size(); ++q) {
    d[Eigen::Index(q)] = m[q] ? 1.0 : 1.0 - fov.delta;
  }
  return d;
}

BinauralFilter design_weighted_bsm(const SteeringSet& a, const HrtfSet& h,
                                   const RealVec& d, const BsmOptions& opts) {
  if (d.size() != 0 && (d.array() < 0.0).any()) {
    throw Error(Errc::kInvalidArgument, "design_weighted_bsm: negative weight");
  }
  return design_bsm_weighted(a, h, d, opts);
}

ComplexMat design_weighted_dbsm(const ComplexMat& a, const ComplexMat& h,
                                const ComplexMat& r_s, const ComplexMat& r_n,
                                const RealVec& d) {
  if (d.size() != r_s.rows() || (d.array() < 0.0).any()) {
    throw Error(Errc::kInvalidArgument, "design_weighted_dbsm: bad weights");
  }
  const Eigen::VectorXcd root = d.cwiseSqrt().cast<cdouble>();
  const ComplexMat r_w = root.asDiagonal() * r_s * root.asDiagonal();
  return design_dbsm(a, h, r_w, r_n);
}

GainPattern directional_gain_pattern(const BinauralFilter& c,
                                     const SteeringSet& a,
                                     const HrtfSet& h_ref) {
  if (c.num_bins() != a.num_bins() || h_ref.num_bins() != a.num_bins() ||
      !(a.grid == h_ref.grid)) {
    throw Error(Errc::kGridMismatch, "directional_gain_pattern: grid mismatch");
  }
  const std::size_t q_count = a.num_dirs();
  Eigen::MatrixXd rendered = Eigen::MatrixXd::Zero(2, Eigen::Index(q_count));
  Eigen::MatrixXd reference = Eigen::MatrixXd::Zero(2, Eigen::Index(q_count));
  for (std::size_t k = 0; k < a.num_bins(); ++k) {
    rendered += (c.c[k] * a.a[k]).cwiseAbs2();
    reference += h_ref.h[k].transpose().cwiseAbs2();
  }
  constexpr double kFloor = 1e-30;
  GainPattern g;
  for (std::size_t q = 0; q < q_count; ++q) {
    const auto i = Eigen::Index(q);
    g.azimuth_deg.push_back(a.grid[q].azimuth_deg());
    g.left_db.push_back(10.0 * std::log10(std::max(rendered(0, i), kFloor) /
                                          std::max(reference(0, i), kFloor)));
    g.right_db.push_back(10.0 * std::log10(std::max(rendered(1, i), kFloor) /
                                           std::max(reference(1, i), kFloor)));
  }
  return g;
}

}  // namespace binmoe
