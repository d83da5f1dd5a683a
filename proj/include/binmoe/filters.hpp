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

#ifndef BINMOE_FILTERS_HPP_
#define BINMOE_FILTERS_HPP_

#include "binmoe/core.hpp"
#include "binmoe/hrtf.hpp"
#include "binmoe/scene.hpp"
#include "binmoe/stft.hpp"

#include <optional>
#include <vector>

namespace binmoe {

// Per-bin 2 x N_m filter; p = c[f] * x[f].
struct BinauralFilter {
  std::vector<ComplexMat> c;

  std::size_t num_bins() const { return c.size(); }
  std::size_t num_mics() const { return c.empty() ? 0 : std::size_t(c[0].cols()); }
};

struct BsmOptions {
  // eps = eps_scale * trace(A A^H) / N_m per bin unless `eps` is set.
  double eps_scale = 1e-4;
  std::optional<double> eps;
  // Bins strictly above this frequency use the magnitude-LS refinement.
  double magls_cutoff_hz = 2000.0;
};

double regularization_for(const ComplexMat& a, const BsmOptions& opts);

// First bin strictly above `hz`; num_bins if none.
std::size_t first_bin_above(const FreqGrid& freqs, double hz);

// ---------------------------------------------------------------------------
// Signal-independent BSM.

// Regularized LS solution for one bin: c = H^T D A^H (A D A^H + eps I)^-1,
// with D = diag(weights). `h` is Q x 2, `a` is N_m x Q. An empty `weights`
// means D = I.
ComplexMat bsm_bin(const ComplexMat& a, const ComplexMat& h, double eps,
                   const RealVec& weights = RealVec());

// Complex LS below the MagLS cutoff, magnitude LS above it.
BinauralFilter design_bsm(const SteeringSet& a, const HrtfSet& h,
                          const BsmOptions& opts = {});

// Same design with per-direction distortion weights.
BinauralFilter design_bsm_weighted(const SteeringSet& a, const HrtfSet& h,
                                   const RealVec& weights,
                                   const BsmOptions& opts = {});

// Magnitude-LS refinement for bins >= cutoff_bin. Each bin takes its target
// phase from the previous bin's rendered response and keeps whichever of the
// refined or initial filter has the smaller magnitude error.
BinauralFilter magls_refine(const BinauralFilter& c_init, const SteeringSet& a,
                            const HrtfSet& h, std::size_t cutoff_bin,
                            const BsmOptions& opts = {},
                            const RealVec& weights = RealVec());

// || (|c A| - |H^T|) D^{1/2} ||_F for one bin.
double magnitude_error(const ComplexMat& c, const ComplexMat& a,
                       const ComplexMat& h, const RealVec& weights = RealVec());

// ---------------------------------------------------------------------------
// Second-order statistics.

struct CovEstimate {
  std::vector<ComplexMat> r;
  std::size_t frames = 0;
  double beta = 0.9;
};

// Recursive average R[t] = beta R[t-1] + (1 - beta) x x^H, started from
// x[0] x[0]^H + 1e-8 I.
class CovarianceTracker {
 public:
  CovarianceTracker(double beta);
  void update(const SpectralFrame& frame);
  const CovEstimate& estimate() const { return est_; }

 private:
  CovEstimate est_;
};

CovEstimate estimate_covariance(const std::vector<SpectralFrame>& frames,
                                double beta);

// ---------------------------------------------------------------------------
// COMPASS-BSM.

// W_d = (A_d^H R^-1 A_d)^-1 A_d^H R^-1 with R diagonally loaded by
// loading * trace(R) / N_m. Returns num_d x N_m.
ComplexMat lcmv_direct(const ComplexMat& a_d, const ComplexMat& r_x,
                       double loading = 1e-6);

// c = c_bsm (I - A_d W_d) + H_d^T W_d; `h_d` is num_d x 2.
ComplexMat design_compass(const ComplexMat& a_d, const ComplexMat& h_d,
                          const ComplexMat& w_d, const ComplexMat& c_bsm);

struct DoaResult {
  std::vector<std::size_t> indices;
  std::vector<Direction> directions;
  RealVec power;  // steered response power per grid direction
  bool fewer_than_requested = false;
  bool low_confidence = false;
};

// Steered response power over the grid, each bin normalized by trace(R_x)
// and summed over [low_hz, high_hz]; picks the strongest local maxima at
// least two grid steps apart.
DoaResult estimate_doa(const CovEstimate& cov, const SteeringSet& a,
                       std::size_t num_sources, double low_hz = 200.0,
                       double high_hz = 6000.0);

// ---------------------------------------------------------------------------
// Directional BSM.

struct SourceCovEstimate {
  std::vector<ComplexMat> r_direct;  // num_d x num_d per bin
  std::vector<double> sigma_r2;      // diffuse floor per bin
  std::size_t frames = 0;
  double beta = 0.9;

  // [R_sd 0; 0 0] + sigma_r2 I of size `total` for bin k.
  ComplexMat full(std::size_t k, std::size_t total) const;
};

class SourceCovTracker {
 public:
  explicit SourceCovTracker(double beta);
  // `s_d` is num_d x bins, `residual` is N_m x bins.
  void update(const ComplexMat& s_d, const ComplexMat& residual);
  const SourceCovEstimate& estimate() const { return est_; }

 private:
  SourceCovEstimate est_;
};

SourceCovEstimate build_source_cov(const std::vector<ComplexMat>& s_d_frames,
                                   const std::vector<ComplexMat>& residual_frames,
                                   double beta);

// c = H^T R_s A^H (A R_s A^H + R_n)^-1 for one bin.
ComplexMat design_dbsm(const ComplexMat& a, const ComplexMat& h,
                       const ComplexMat& r_s, const ComplexMat& r_n);

}  // namespace binmoe

#endif  // BINMOE_FILTERS_HPP_
