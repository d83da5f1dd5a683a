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

#ifndef BINMOE_CORE_HPP_
#define BINMOE_CORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace binmoe {

template <typename T>
using CMatrix = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using CVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;
template <typename T>
using RVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using ComplexMat = CMatrix<double>;
using ComplexVec = CVector<double>;
using RealVec = RVector<double>;
using cdouble = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfSound = 343.0;

enum class Errc {
  kNonHermitian,
  kSingular,
  kRankDeficient,
  kGridMismatch,
  kChannelMismatch,
  kTooShort,
  kInconsistentFrames,
  kSourceOutsideRoom,
  kTrajectoryExitsRoom,
  kDecayTooShort,
  kSeriesNotConverged,
  kParseError,
  kNegativeLoss,
  kDirectionOffGrid,
  kTimelineMismatch,
  kInvalidArgument,
  kIo,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Azimuth is counterclockwise from +x (front), elevation up from the
// horizontal plane. Azimuth is always stored wrapped into [0, 2pi).
class Direction {
 public:
  Direction() = default;
  Direction(double azimuth, double elevation = 0.0);

  static Direction from_degrees(double az_deg, double el_deg = 0.0) {
    return Direction(az_deg * kPi / 180.0, el_deg * kPi / 180.0);
  }

  double azimuth() const { return azimuth_; }
  double elevation() const { return elevation_; }
  double azimuth_deg() const { return azimuth_ * 180.0 / kPi; }
  double elevation_deg() const { return elevation_ * 180.0 / kPi; }

  Eigen::Vector3d unit() const;

  // Equality within 1e-9 rad, azimuth compared on the circle.
  bool operator==(const Direction& other) const;

 private:
  double azimuth_ = 0.0;
  double elevation_ = 0.0;
};

double angular_distance(const Direction& a, const Direction& b);

// Smallest absolute difference between two azimuths in degrees, in [0, 180].
double circular_distance_deg(double a_deg, double b_deg);

class DirectionGrid {
 public:
  DirectionGrid() = default;
  explicit DirectionGrid(std::vector<Direction> directions);

  // `count` azimuths evenly spaced from 0 at fixed elevation.
  static DirectionGrid ring(std::size_t count, double elevation = 0.0);

  std::size_t size() const { return directions_.size(); }
  const Direction& operator[](std::size_t i) const { return directions_[i]; }
  const std::vector<Direction>& directions() const { return directions_; }
  auto begin() const { return directions_.begin(); }
  auto end() const { return directions_.end(); }

  // Index of the grid direction equal to `dir`, or size() if absent.
  std::size_t find(const Direction& dir) const;
  std::size_t nearest(const Direction& dir) const;
  // Smallest angular distance between any two grid points (0 if Q == 1).
  double spacing() const;

  bool operator==(const DirectionGrid& other) const;

 private:
  std::vector<Direction> directions_;
};

class FreqGrid {
 public:
  FreqGrid() = default;
  FreqGrid(double sample_rate, std::size_t fft_size);

  double sample_rate() const { return sample_rate_; }
  std::size_t fft_size() const { return fft_size_; }
  std::size_t num_bins() const { return bins_.size(); }
  double operator[](std::size_t k) const { return bins_[k]; }
  const std::vector<double>& bins() const { return bins_; }
  // Nearest bin index for a frequency in Hz, clamped to the grid.
  std::size_t bin_of(double hz) const;

  bool operator==(const FreqGrid& other) const {
    return sample_rate_ == other.sample_rate_ && fft_size_ == other.fft_size_;
  }

 private:
  double sample_rate_ = 0.0;
  std::size_t fft_size_ = 0;
  std::vector<double> bins_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.norm();
  return (m - m.adjoint()).norm() <= rel_tol * (scale > 0.0 ? scale : 1.0);
}

// (eps I + M)^-1 rhs for Hermitian M, through an LDL^T factorization.
template <typename T>
CMatrix<T> solve_regularized(const CMatrix<T>& m, const CMatrix<T>& rhs,
                             T eps) {
  if (m.rows() != m.cols() || rhs.rows() != m.rows()) {
    throw Error(Errc::kInvalidArgument, "solve_regularized: shape mismatch");
  }
  if (eps < T(0)) {
    throw Error(Errc::kInvalidArgument, "solve_regularized: eps < 0");
  }
  if (!is_hermitian(m, 1e-10)) {
    throw Error(Errc::kNonHermitian, "solve_regularized: matrix not Hermitian");
  }
  CMatrix<T> loaded = m;
  loaded.diagonal().array() += std::complex<T>(eps, T(0));
  // Symmetrize away rounding so the LDLT sees an exactly Hermitian input.
  loaded = (T(0.5) * (loaded + loaded.adjoint())).eval();
  Eigen::LDLT<CMatrix<T>> ldlt(loaded);
  if (ldlt.info() != Eigen::Success) {
    throw Error(Errc::kSingular, "solve_regularized: factorization failed");
  }
  const T rcond = ldlt.rcond();
  if (!(rcond > T(1e-14))) {
    if (eps == T(0) || !(rcond > T(0))) {
      throw Error(Errc::kSingular, "solve_regularized: condition estimate " +
                                       std::to_string(1.0 / double(rcond)));
    }
  }
  CMatrix<T> out = ldlt.solve(rhs);
  if (!out.allFinite()) {
    throw Error(Errc::kSingular, "solve_regularized: non-finite result");
  }
  return out;
}

// M^-1 rhs for a general square M via partially pivoted LU.
template <typename T>
CMatrix<T> solve_general(const CMatrix<T>& m, const CMatrix<T>& rhs) {
  if (m.rows() != m.cols() || rhs.rows() != m.rows()) {
    throw Error(Errc::kInvalidArgument, "solve_general: shape mismatch");
  }
  if (!m.allFinite()) {
    throw Error(Errc::kInvalidArgument, "solve_general: non-finite matrix");
  }
  Eigen::PartialPivLU<CMatrix<T>> lu(m);
  const T rcond = lu.rcond();
  if (!(rcond > T(1e-14))) {
    throw Error(Errc::kSingular, "solve_general: condition estimate " +
                                     std::to_string(1.0 / double(rcond)));
  }
  CMatrix<T> out = lu.solve(rhs);
  if (!out.allFinite()) {
    throw Error(Errc::kSingular, "solve_general: non-finite result");
  }
  return out;
}

}  // namespace binmoe

#endif  // BINMOE_CORE_HPP_
