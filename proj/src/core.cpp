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

#include "binmoe/core.hpp"

#include <algorithm>
#include <limits>

namespace binmoe {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::kNonHermitian: return "NonHermitian";
    case Errc::kSingular: return "Singular";
    case Errc::kRankDeficient: return "RankDeficient";
    case Errc::kGridMismatch: return "GridMismatch";
    case Errc::kChannelMismatch: return "ChannelMismatch";
    case Errc::kTooShort: return "TooShort";
    case Errc::kInconsistentFrames: return "InconsistentFrames";
    case Errc::kSourceOutsideRoom: return "SourceOutsideRoom";
    case Errc::kTrajectoryExitsRoom: return "TrajectoryExitsRoom";
    case Errc::kDecayTooShort: return "DecayTooShort";
    case Errc::kSeriesNotConverged: return "SeriesNotConverged";
    case Errc::kParseError: return "ParseError";
    case Errc::kNegativeLoss: return "NegativeLoss";
    case Errc::kDirectionOffGrid: return "DirectionOffGrid";
    case Errc::kTimelineMismatch: return "TimelineMismatch";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kIo: return "Io";
  }
  return "Unknown";
}

namespace {

double wrap_azimuth(double az) {
  double w = std::fmod(az, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a value just below 0 can round up to exactly 2pi.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

}  // namespace

Direction::Direction(double azimuth, double elevation)
    : azimuth_(wrap_azimuth(azimuth)), elevation_(elevation) {
  if (!std::isfinite(azimuth) || !std::isfinite(elevation) ||
      elevation < -kPi / 2.0 - 1e-12 || elevation > kPi / 2.0 + 1e-12) {
    throw Error(Errc::kInvalidArgument, "Direction: elevation out of range");
  }
}

Eigen::Vector3d Direction::unit() const {
  const double ce = std::cos(elevation_);
  return {ce * std::cos(azimuth_), ce * std::sin(azimuth_),
          std::sin(elevation_)};
}

bool Direction::operator==(const Direction& other) const {
  constexpr double kTol = 1e-9;
  if (std::abs(elevation_ - other.elevation_) > kTol) return false;
  // At the poles azimuth is meaningless.
  if (std::abs(std::abs(elevation_) - kPi / 2.0) <= kTol) return true;
  double d = std::abs(azimuth_ - other.azimuth_);
  d = std::min(d, kTwoPi - d);
  return d <= kTol;
}

double angular_distance(const Direction& a, const Direction& b) {
  const double c = std::clamp(a.unit().dot(b.unit()), -1.0, 1.0);
  return std::acos(c);
}

double circular_distance_deg(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

DirectionGrid::DirectionGrid(std::vector<Direction> directions)
    : directions_(std::move(directions)) {
  if (directions_.empty()) {
    throw Error(Errc::kInvalidArgument, "DirectionGrid: empty grid");
  }
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    for (std::size_t j = i + 1; j < directions_.size(); ++j) {
      if (directions_[i] == directions_[j]) {
        throw Error(Errc::kInvalidArgument,
                    "DirectionGrid: duplicate direction at indices " +
                        std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

DirectionGrid DirectionGrid::ring(std::size_t count, double elevation) {
  if (count == 0) {
    throw Error(Errc::kInvalidArgument, "DirectionGrid::ring: count == 0");
  }
  std::vector<Direction> dirs;
  dirs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    dirs.emplace_back(kTwoPi * double(i) / double(count), elevation);
  }
  return DirectionGrid(std::move(dirs));
}

std::size_t DirectionGrid::find(const Direction& dir) const {
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    if (directions_[i] == dir) return i;
  }
  return directions_.size();
}

std::size_t DirectionGrid::nearest(const Direction& dir) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    const double d = angular_distance(directions_[i], dir);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double DirectionGrid::spacing() const {
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    for (std::size_t j = i + 1; j < directions_.size(); ++j) {
      s = std::min(s, angular_distance(directions_[i], directions_[j]));
    }
  }
  return std::isfinite(s) ? s : 0.0;
}

bool DirectionGrid::operator==(const DirectionGrid& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(directions_[i] == other.directions_[i])) return false;
  }
  return true;
}

FreqGrid::FreqGrid(double sample_rate, std::size_t fft_size)
    : sample_rate_(sample_rate), fft_size_(fft_size) {
  if (!(sample_rate > 0.0) || fft_size < 2 || fft_size % 2 != 0) {
    throw Error(Errc::kInvalidArgument,
                "FreqGrid: need sample_rate > 0 and even fft_size >= 2");
  }
  bins_.resize(fft_size / 2 + 1);
  for (std::size_t k = 0; k < bins_.size(); ++k) {
    bins_[k] = double(k) * sample_rate / double(fft_size);
  }
}

std::size_t FreqGrid::bin_of(double hz) const {
  const double k = std::round(hz * double(fft_size_) / sample_rate_);
  if (k <= 0.0) return 0;
  return std::min<std::size_t>(std::size_t(k), bins_.size() - 1);
}

}  // namespace binmoe
