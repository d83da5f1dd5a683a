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

#include "binmoe/pipeline.hpp"

namespace binmoe {

const char* to_string(Method m) {
  switch (m) {
    case Method::kBsm: return "bsm";
    case Method::kCompass: return "compass";
    case Method::kDbsm: return "dbsm";
    case Method::kMoeBsm: return "moe-bsm";
    case Method::kMoeDbsm: return "moe-dbsm";
    case Method::kMoeCompass: return "moe-compass";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kBsm, Method::kCompass, Method::kDbsm, Method::kMoeBsm,
                   Method::kMoeDbsm, Method::kMoeCompass}) {
    if (name == to_string(m)) return m;
  }
  throw Error(Errc::kInvalidArgument, "unknown method '" + name + "'");
}

bool is_moe(Method m) {
  return m == Method::kMoeBsm || m == Method::kMoeDbsm || m == Method::kMoeCompass;
}

namespace {

struct Prepared {
  HrtfSet h;    // gain-controlled
  RealVec d;    // empty without FoV
  RealVec boost;
};

Prepared prepare(const SteeringSet& a, const HrtfSet& h,
                 const std::optional<FovSpec>& fov) {
  Prepared p{h, RealVec(), RealVec::Ones(Eigen::Index(a.num_dirs()))};
  if (fov) {
    p.h = apply_gain_control(h, *fov);
    p.d = distortion_matrix(a.grid, *fov);
    const auto mask = fov->mask(a.grid);
    for (std::size_t q = 0; q < mask.size(); ++q) {
      if (mask[q]) p.boost[Eigen::Index(q)] = fov->compass_boost;
    }
  }
  return p;
}

ComplexMat columns(const ComplexMat& m, const std::vector<std::size_t>& idx) {
  ComplexMat out(m.rows(), Eigen::Index(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(Eigen::Index(i)) = m.col(Eigen::Index(idx[i]));
  return out;
}

ComplexMat rows(const ComplexMat& m, const std::vector<std::size_t>& idx) {
  ComplexMat out(Eigen::Index(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(Eigen::Index(i)) = m.row(Eigen::Index(idx[i]));
  return out;
}

// LCMV with the strongest directions first; drops trailing constraints when
// they are not separable at this bin.
ComplexMat direct_extractor(const ComplexMat& a_d, const ComplexMat& r,
                            double loading, Eigen::Index& used) {
  for (used = a_d.cols(); used > 0; --used) {
    try {
      return lcmv_direct(a_d.leftCols(used), r, loading);
    } catch (const Error& e) {
      if (e.code() != Errc::kRankDeficient) throw;
    }
  }
  return ComplexMat(0, r.rows());
}

std::vector<SpectralFrame> run_static(const std::vector<SpectralFrame>& in,
                                      const BinauralFilter& c) {
  std::vector<SpectralFrame> out(in.size());
  for (std::size_t t = 0; t < in.size(); ++t) {
    out[t].time_index = in[t].time_index;
    out[t].x = render(c, in[t]);
  }
  return out;
}

std::vector<SpectralFrame> run_parametric(const std::vector<SpectralFrame>& in,
                                          const SteeringSet& a, const Prepared& p,
                                          const PipelineOptions& opts,
                                          std::vector<std::size_t>& doa_track) {
  const bool dbsm = opts.method == Method::kDbsm;
  const std::size_t bins = a.num_bins();
  const Eigen::Index nm = Eigen::Index(a.num_mics());
  const Eigen::Index q_count = Eigen::Index(a.num_dirs());
  BinauralFilter c_bsm;
  if (!dbsm) c_bsm = design_bsm_weighted(a, p.h, p.d, opts.bsm);

  CovarianceTracker cov(opts.cov_beta);
  SourceCovTracker src_cov(opts.cov_beta);
  std::vector<std::size_t> dirs;
  std::vector<ComplexMat> w_d(bins);
  BinauralFilter c;
  c.c.assign(bins, ComplexMat::Zero(2, nm));

  std::vector<SpectralFrame> out(in.size());
  for (std::size_t t = 0; t < in.size(); ++t) {
    const SpectralFrame& x = in[t];
    cov.update(x);
    if (t % opts.update_every == 0) {
      const DoaResult doa = estimate_doa(cov.estimate(), a, opts.num_sources);
      if (doa.indices.size() != dirs.size()) src_cov = SourceCovTracker(opts.cov_beta);
      dirs = doa.indices;
      for (std::size_t k = 0; k < bins; ++k) {
        const ComplexMat a_d = columns(a.a[k], dirs);
        Eigen::Index used = 0;
        const ComplexMat w = direct_extractor(a_d, cov.estimate().r[k],
                                              opts.lcmv_loading, used);
        w_d[k] = ComplexMat::Zero(Eigen::Index(dirs.size()), nm);
        w_d[k].topRows(used) = w;
        if (!dbsm) {
          ComplexMat h_d = rows(p.h.h[k], dirs);
          for (std::size_t i = 0; i < dirs.size(); ++i) {
            h_d.row(Eigen::Index(i)) *= p.boost[Eigen::Index(dirs[i])];
          }
          c.c[k] = design_compass(a_d.leftCols(used), h_d.topRows(used), w,
                                  c_bsm.c[k]);
        }
      }
    }
    if (dbsm) {
      const auto nd = Eigen::Index(dirs.size());
      ComplexMat s_d(nd, Eigen::Index(bins)), resid(nm, Eigen::Index(bins));
      for (std::size_t k = 0; k < bins; ++k) {
        const auto kk = Eigen::Index(k);
        s_d.col(kk) = w_d[k] * x.x.col(kk);
        resid.col(kk) = x.x.col(kk) - columns(a.a[k], dirs) * s_d.col(kk);
      }
      src_cov.update(s_d, resid);
      if (t % opts.update_every == 0) {
        const SourceCovEstimate& est = src_cov.estimate();
        for (std::size_t k = 0; k < bins; ++k) {
          ComplexMat a_full(nm, nd + q_count);
          a_full << columns(a.a[k], dirs), a.a[k];
          ComplexMat h_full(nd + q_count, 2);
          h_full << rows(p.h.h[k], dirs), p.h.h[k];
          const ComplexMat r_s = est.full(k, std::size_t(nd + q_count));
          RealVec d = RealVec::Ones(nd + q_count);
          if (p.d.size() != 0) {
            for (Eigen::Index i = 0; i < nd; ++i) d[i] = p.d[Eigen::Index(dirs[std::size_t(i)])];
            d.tail(q_count) = p.d;
          }
          const Eigen::VectorXcd root = d.cwiseSqrt().cast<cdouble>();
          const ComplexMat r_w = root.asDiagonal() * r_s * root.asDiagonal();
          const double tr = (a_full * r_w * a_full.adjoint()).trace().real();
          ComplexMat r_n = ComplexMat::Zero(nm, nm);
          r_n.diagonal().setConstant(std::max(opts.bsm.eps_scale * tr / double(nm), 1e-300));
          c.c[k] = design_dbsm(a_full, h_full, r_w, r_n);
        }
      }
    }
    doa_track.push_back(dirs.empty() ? a.num_dirs() : dirs.front());
    out[t].time_index = x.time_index;
    out[t].x = render(c, x);
  }
  return out;
}

}  // namespace

PipelineResult process_recording(const Audio& mics, const SteeringSet& a,
                                 const HrtfSet& h, const StftConfig& stft,
                                 const PipelineOptions& opts) {
  if (std::size_t(mics.rows()) != a.num_mics()) {
    throw Error(Errc::kChannelMismatch, "process: recording has " +
                                            std::to_string(mics.rows()) +
                                            " channels, array has " +
                                            std::to_string(a.num_mics()));
  }
  if (!(a.freqs == stft.freq_grid())) {
    throw Error(Errc::kGridMismatch, "process: steering grid does not match STFT");
  }
  if (opts.update_every == 0) {
    throw Error(Errc::kInvalidArgument, "process: update_every must be >= 1");
  }
  const auto frames = analyze_padded(mics, stft);
  const Prepared p = prepare(a, h, opts.fov);
  PipelineResult res;
  switch (opts.method) {
    case Method::kBsm:
      res.frames = run_static(frames, design_bsm_weighted(a, p.h, p.d, opts.bsm));
      break;
    case Method::kCompass:
    case Method::kDbsm:
      res.frames = run_parametric(frames, a, p, opts, res.doa_track);
      break;
    case Method::kMoeBsm:
    case Method::kMoeDbsm:
    case Method::kMoeCompass: {
      MoeOptions mo = opts.moe;
      mo.experts.design = opts.method == Method::kMoeBsm   ? ExpertDesign::kBsmDirectional
                          : opts.method == Method::kMoeDbsm ? ExpertDesign::kDbsm
                                                            : ExpertDesign::kCompass;
      mo.experts.bsm = opts.bsm;
      mo.experts.fov = opts.fov;
      MoeRun run = run_moe(frames, a, h, mo);
      res.frames = std::move(run.binaural);
      run.binaural.clear();
      res.moe = std::move(run);
      break;
    }
  }
  res.binaural = synthesize_trimmed(res.frames, stft, std::size_t(mics.cols()));
  return res;
}

}  // namespace binmoe
