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

#include "binmoe/filters.hpp"

#include <algorithm>
#include <numeric>

namespace binmoe {

namespace {

void check_grids(const SteeringSet& a, const HrtfSet& h) {
  if (!(a.grid == h.grid)) {
    throw Error(Errc::kGridMismatch, "steering and HRTF direction grids differ");
  }
  if (!(a.freqs == h.freqs) || a.num_bins() != h.num_bins()) {
    throw Error(Errc::kGridMismatch, "steering and HRTF frequency grids differ");
  }
}

ComplexMat weighted_columns(const ComplexMat& a, const RealVec& weights) {
  if (weights.size() == 0) return a;
  if (weights.size() != a.cols()) {
    throw Error(Errc::kInvalidArgument, "weights length differs from Q");
  }
  return a * weights.cast<cdouble>().asDiagonal();
}

}  // namespace

double regularization_for(const ComplexMat& a, const BsmOptions& opts) {
  if (opts.eps) return *opts.eps;
  return opts.eps_scale * a.squaredNorm() / double(a.rows());
}

std::size_t first_bin_above(const FreqGrid& freqs, double hz) {
  for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
    if (freqs[k] > hz) return k;
  }
  return freqs.num_bins();
}

ComplexMat bsm_bin(const ComplexMat& a, const ComplexMat& h, double eps,
                   const RealVec& weights) {
  if (h.rows() != a.cols() || h.cols() != 2) {
    throw Error(Errc::kInvalidArgument, "bsm_bin: H must be Q x 2");
  }
  const ComplexMat ad = weighted_columns(a, weights);
  const ComplexMat gram = ad * a.adjoint();
  const ComplexMat rhs = ad * h.conjugate();
  return solve_regularized<double>(gram, rhs, eps).adjoint();
}

double magnitude_error(const ComplexMat& c, const ComplexMat& a,
                       const ComplexMat& h, const RealVec& weights) {
  Eigen::MatrixXd diff =
      (c * a).cwiseAbs() - h.transpose().cwiseAbs();
  if (weights.size() != 0) diff = diff * weights.cwiseSqrt().asDiagonal();
  return diff.norm();
}

BinauralFilter magls_refine(const BinauralFilter& c_init, const SteeringSet& a,
                            const HrtfSet& h, std::size_t cutoff_bin,
                            const BsmOptions& opts, const RealVec& weights) {
  check_grids(a, h);
  BinauralFilter out = c_init;
  for (std::size_t k = std::max<std::size_t>(cutoff_bin, 1); k < out.num_bins(); ++k) {
    const ComplexMat& ak = a.a[k];
    const ComplexMat prev = out.c[k - 1] * ak;  // 2 x Q
    ComplexMat target(2, ak.cols());
    for (Eigen::Index e = 0; e < 2; ++e) {
      for (Eigen::Index q = 0; q < ak.cols(); ++q) {
        const double mag = std::abs(h.h[k](q, e));
        const double ph = std::abs(prev(e, q)) > 0.0 ? std::arg(prev(e, q))
                                                    : std::arg(h.h[k](q, e));
        target(e, q) = std::polar(mag, ph);
      }
    }
    const ComplexMat refined =
        bsm_bin(ak, target.transpose(), regularization_for(ak, opts), weights);
    if (magnitude_error(refined, ak, h.h[k], weights) <=
        magnitude_error(c_init.c[k], ak, h.h[k], weights)) {
      out.c[k] = refined;
    }
  }
  return out;
}

BinauralFilter design_bsm_weighted(const SteeringSet& a, const HrtfSet& h,
                                   const RealVec& weights,
                                   const BsmOptions& opts) {
  check_grids(a, h);
  BinauralFilter c;
  c.c.reserve(a.num_bins());
  for (std::size_t k = 0; k < a.num_bins(); ++k) {
    c.c.push_back(bsm_bin(a.a[k], h.h[k], regularization_for(a.a[k], opts), weights));
  }
  const std::size_t cutoff = first_bin_above(a.freqs, opts.magls_cutoff_hz);
  if (cutoff < a.num_bins()) return magls_refine(c, a, h, cutoff, opts, weights);
  return c;
}

BinauralFilter design_bsm(const SteeringSet& a, const HrtfSet& h,
                          const BsmOptions& opts) {
  return design_bsm_weighted(a, h, RealVec(), opts);
}

CovarianceTracker::CovarianceTracker(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "covariance: beta must be in (0, 1]");
  }
  est_.beta = beta;
}

void CovarianceTracker::update(const SpectralFrame& frame) {
  const std::size_t bins = frame.num_bins();
  const auto nm = Eigen::Index(frame.num_channels());
  if (est_.frames == 0) {
    est_.r.assign(bins, ComplexMat());
    for (std::size_t k = 0; k < bins; ++k) {
      const ComplexVec x = frame.x.col(Eigen::Index(k));
      est_.r[k] = x * x.adjoint();
      est_.r[k].diagonal().array() += 1e-8;
    }
  } else {
    if (est_.r.size() != bins || est_.r[0].rows() != nm) {
      throw Error(Errc::kInconsistentFrames, "covariance: frame shape changed");
    }
    const double b = est_.beta;
    for (std::size_t k = 0; k < bins; ++k) {
      const ComplexVec x = frame.x.col(Eigen::Index(k));
      est_.r[k] = b * est_.r[k] + (1.0 - b) * (x * x.adjoint());
    }
  }
  ++est_.frames;
}

CovEstimate estimate_covariance(const std::vector<SpectralFrame>& frames,
                                double beta) {
  CovarianceTracker tracker(beta);
  for (const auto& f : frames) tracker.update(f);
  return tracker.estimate();
}

ComplexMat lcmv_direct(const ComplexMat& a_d, const ComplexMat& r_x,
                       double loading) {
  const Eigen::Index nm = r_x.rows();
  if (a_d.rows() != nm || r_x.cols() != nm) {
    throw Error(Errc::kInvalidArgument, "lcmv_direct: shape mismatch");
  }
  if (a_d.cols() == 0) return ComplexMat(0, nm);
  if (a_d.cols() > nm) {
    throw Error(Errc::kRankDeficient, "lcmv_direct: more constraints than mics");
  }
  Eigen::JacobiSVD<ComplexMat> svd(a_d);
  const RealVec sv = svd.singularValues();
  if (!(sv.minCoeff() > 1e-8 * sv.maxCoeff())) {
    throw Error(Errc::kRankDeficient,
                "lcmv_direct: constraint directions not separable");
  }
  ComplexMat r = r_x;
  const double load = loading * r.trace().real() / double(nm);
  r.diagonal().array() += load;
  const ComplexMat rinv_a = solve_regularized<double>(r, a_d, 0.0);
  const ComplexMat gram = a_d.adjoint() * rinv_a;
  return solve_general<double>(gram, rinv_a.adjoint());
}

ComplexMat design_compass(const ComplexMat& a_d, const ComplexMat& h_d,
                          const ComplexMat& w_d, const ComplexMat& c_bsm) {
  const Eigen::Index nm = c_bsm.cols();
  if (a_d.cols() == 0) return c_bsm;
  if (a_d.rows() != nm || w_d.cols() != nm || w_d.rows() != a_d.cols() ||
      h_d.rows() != a_d.cols() || h_d.cols() != 2) {
    throw Error(Errc::kInvalidArgument, "design_compass: shape mismatch");
  }
  const ComplexMat residual_proj =
      ComplexMat::Identity(nm, nm) - a_d * w_d;
  return c_bsm * residual_proj + h_d.transpose() * w_d;
}

DoaResult estimate_doa(const CovEstimate& cov, const SteeringSet& a,
                       std::size_t num_sources, double low_hz, double high_hz) {
  if (num_sources == 0) {
    throw Error(Errc::kInvalidArgument, "estimate_doa: num_sources must be >= 1");
  }
  if (cov.r.size() != a.num_bins()) {
    throw Error(Errc::kGridMismatch, "estimate_doa: bin count mismatch");
  }
  const std::size_t q_count = a.num_dirs();
  DoaResult res;
  res.power = RealVec::Zero(Eigen::Index(q_count));
  for (std::size_t k = 0; k < a.num_bins(); ++k) {
    const double f = a.freqs[k];
    if (f < low_hz || f > high_hz) continue;
    const double tr = cov.r[k].trace().real();
    if (!(tr > 0.0)) continue;
    const ComplexMat& ak = a.a[k];
    const ComplexMat ra = cov.r[k] * ak;
    for (std::size_t q = 0; q < q_count; ++q) {
      const auto col = ak.col(Eigen::Index(q));
      const double num = col.dot(ra.col(Eigen::Index(q))).real();
      res.power[Eigen::Index(q)] += num / (col.squaredNorm() * tr);
    }
  }
  const double pmax = res.power.maxCoeff();
  const double pmin = res.power.minCoeff();
  res.low_confidence = !(pmax - pmin > 1e-9 * std::abs(pmax));

  const double step = a.grid.spacing();
  std::vector<std::size_t> peaks;
  for (std::size_t q = 0; q < q_count; ++q) {
    bool is_max = true;
    for (std::size_t j = 0; j < q_count && is_max; ++j) {
      if (j == q) continue;
      if (angular_distance(a.grid[q], a.grid[j]) <= 1.01 * step &&
          res.power[Eigen::Index(j)] > res.power[Eigen::Index(q)]) {
        is_max = false;
      }
    }
    if (is_max) peaks.push_back(q);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t l, std::size_t r) {
    return res.power[Eigen::Index(l)] > res.power[Eigen::Index(r)];
  });
  for (std::size_t q : peaks) {
    if (res.indices.size() == num_sources) break;
    const bool separated = std::all_of(
        res.indices.begin(), res.indices.end(), [&](std::size_t p) {
          return angular_distance(a.grid[q], a.grid[p]) >= 1.99 * step;
        });
    if (separated) res.indices.push_back(q);
  }
  res.fewer_than_requested = res.indices.size() < num_sources;
  for (std::size_t q : res.indices) res.directions.push_back(a.grid[q]);
  return res;
}

ComplexMat SourceCovEstimate::full(std::size_t k, std::size_t total) const {
  const Eigen::Index nd = r_direct[k].rows();
  if (Eigen::Index(total) < nd) {
    throw Error(Errc::kInvalidArgument, "SourceCovEstimate: total < num_d");
  }
  ComplexMat r = ComplexMat::Zero(Eigen::Index(total), Eigen::Index(total));
  r.topLeftCorner(nd, nd) = r_direct[k];
  r.diagonal().array() += sigma_r2[k];
  return r;
}

SourceCovTracker::SourceCovTracker(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "source covariance: beta must be in (0, 1]");
  }
  est_.beta = beta;
}

void SourceCovTracker::update(const ComplexMat& s_d, const ComplexMat& residual) {
  if (s_d.cols() != residual.cols()) {
    throw Error(Errc::kInconsistentFrames, "source covariance: bin count mismatch");
  }
  const auto bins = std::size_t(s_d.cols());
  const double nm = double(residual.rows());
  const bool first = est_.frames == 0;
  if (first) {
    est_.r_direct.assign(bins, ComplexMat());
    est_.sigma_r2.assign(bins, 0.0);
  }
  const double b = first ? 0.0 : est_.beta;
  for (std::size_t k = 0; k < bins; ++k) {
    const ComplexVec s = s_d.col(Eigen::Index(k));
    const ComplexMat inst = s * s.adjoint();
    est_.r_direct[k] = first ? inst : ComplexMat(b * est_.r_direct[k] + (1.0 - b) * inst);
    // Mean per-mic residual power, spread over N_m diffuse components.
    const double floor = residual.col(Eigen::Index(k)).squaredNorm() / nm / nm;
    est_.sigma_r2[k] = b * est_.sigma_r2[k] + (1.0 - b) * floor;
  }
  ++est_.frames;
}

SourceCovEstimate build_source_cov(const std::vector<ComplexMat>& s_d_frames,
                                   const std::vector<ComplexMat>& residual_frames,
                                   double beta) {
  if (s_d_frames.size() != residual_frames.size()) {
    throw Error(Errc::kInconsistentFrames, "build_source_cov: frame count mismatch");
  }
  SourceCovTracker tracker(beta);
  for (std::size_t t = 0; t < s_d_frames.size(); ++t) {
    tracker.update(s_d_frames[t], residual_frames[t]);
  }
  return tracker.estimate();
}

ComplexMat design_dbsm(const ComplexMat& a, const ComplexMat& h,
                       const ComplexMat& r_s, const ComplexMat& r_n) {
  const Eigen::Index nm = a.rows();
  if (h.rows() != a.cols() || h.cols() != 2 || r_s.rows() != a.cols() ||
      r_s.cols() != a.cols() || r_n.rows() != nm || r_n.cols() != nm) {
    throw Error(Errc::kInvalidArgument, "design_dbsm: shape mismatch");
  }
  const ComplexMat ar = a * r_s;
  const ComplexMat m = ar * a.adjoint() + r_n;
  const ComplexMat rhs = ar * h.conjugate();
  return solve_regularized<double>(m, rhs, 0.0).adjoint();
}

}  // namespace binmoe
