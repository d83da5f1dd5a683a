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

#include "binmoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace binmoe {

const char* to_string(ExpertDesign d) {
  switch (d) {
    case ExpertDesign::kBsmDirectional: return "bsm-directional";
    case ExpertDesign::kDbsm: return "dbsm";
    case ExpertDesign::kCompass: return "compass";
  }
  return "?";
}

ExpertDesign parse_expert_design(const std::string& name) {
  if (name == "bsm-directional" || name == "bsm") return ExpertDesign::kBsmDirectional;
  if (name == "dbsm") return ExpertDesign::kDbsm;
  if (name == "compass") return ExpertDesign::kCompass;
  throw Error(Errc::kInvalidArgument, "unknown expert design '" + name + "'");
}

ComplexMat ExpertBank::filter(std::size_t q, std::size_t k) const {
  ComplexMat c(2, left[k].cols());
  c.row(0) = left[k].row(Eigen::Index(q));
  c.row(1) = right[k].row(Eigen::Index(q));
  return c;
}

BinauralFilter ExpertBank::expert(std::size_t q) const {
  BinauralFilter f;
  f.c.reserve(num_bins());
  for (std::size_t k = 0; k < num_bins(); ++k) f.c.push_back(filter(q, k));
  return f;
}

ExpertDesigner::ExpertDesigner(const SteeringSet& a, const HrtfSet& h,
                               ExpertOptions opts)
    : a_(a), h_(h), opts_(std::move(opts)) {
  if (!(a.grid == h.grid) || !(a.freqs == h.freqs) ||
      a.num_bins() != h.num_bins()) {
    throw Error(Errc::kGridMismatch, "expert bank: steering and HRTF grids differ");
  }
  if (a.num_dirs() == 0) {
    throw Error(Errc::kInvalidArgument, "expert bank: no experts");
  }
  const auto q_count = Eigen::Index(a.num_dirs());
  d_ = RealVec::Ones(q_count);
  boost_ = RealVec::Ones(q_count);
  if (opts_.fov) {
    h_ = apply_gain_control(h, *opts_.fov);
    d_ = distortion_matrix(a.grid, *opts_.fov);
    const auto mask = opts_.fov->mask(a.grid);
    for (Eigen::Index q = 0; q < q_count; ++q) {
      if (mask[std::size_t(q)]) boost_[q] = opts_.fov->compass_boost;
    }
  }
  if (opts_.design == ExpertDesign::kCompass) {
    c_bsm_ = design_weighted_bsm(a_, h_, d_, opts_.bsm);
  }
}

ComplexMat ExpertDesigner::mvdr_rows(std::size_t k, const ComplexMat* r) const {
  const ComplexMat& a = a_.a[k];
  const Eigen::Index nm = a.rows();
  ComplexMat rl = r ? *r : ComplexMat(ComplexMat::Identity(nm, nm));
  const double load = opts_.estimator_loading * rl.trace().real() / double(nm);
  rl.diagonal().array() += load;
  const ComplexMat rinv_a = solve_regularized<double>(rl, a, 0.0);
  ComplexMat w = rinv_a.adjoint();
  for (Eigen::Index q = 0; q < a.cols(); ++q) {
    const double denom = (a.col(q).adjoint() * rinv_a.col(q))(0, 0).real();
    w.row(q) /= denom;
  }
  return w;
}

void ExpertDesigner::design_compass_bin(ExpertBank& bank, std::size_t k) const {
  // c_q = c_bsm + (g_q H_q - c_bsm a_q) w_q
  const ComplexMat& a = a_.a[k];
  const ComplexMat& w = bank.w[k];
  const ComplexMat& cb = c_bsm_.c[k];
  const ComplexMat& h = h_.h[k];
  const ComplexMat rendered = (cb * a).transpose();  // Q x 2
  const Eigen::VectorXcd g = boost_.cast<cdouble>();
  const Eigen::VectorXcd gl = g.cwiseProduct(h.col(0)) - rendered.col(0);
  const Eigen::VectorXcd gr = g.cwiseProduct(h.col(1)) - rendered.col(1);
  bank.left[k] = gl.asDiagonal() * w;
  bank.left[k].rowwise() += cb.row(0);
  bank.right[k] = gr.asDiagonal() * w;
  bank.right[k].rowwise() += cb.row(1);
}

void ExpertDesigner::design_dbsm_bin(ExpertBank& bank, std::size_t k,
                                     const ComplexMat& r,
                                     bool signal_dependent) const {
  // R_s = D^{1/2} (sigma^2 I + p_q e_q e_q^T) D^{1/2}; the rank-one term keeps
  // every expert at one N_m x N_m solve.
  const ComplexMat& a = a_.a[k];
  const ComplexMat& h = h_.h[k];
  const Eigen::Index nm = a.rows();
  const Eigen::Index q_count = a.cols();
  const ComplexMat ad = a * d_.cast<cdouble>().asDiagonal();
  const ComplexMat base_m = ad * a.adjoint();
  const ComplexMat base_rhs = ad * h.conjugate();
  const double eps_fixed = regularization_for(a, opts_.bsm);
  bank.left[k].resize(q_count, nm);
  bank.right[k].resize(q_count, nm);
  for (Eigen::Index q = 0; q < q_count; ++q) {
    const ComplexVec aq = a.col(q);
    double sigma2 = 1.0;
    double p = opts_.directional_rho;
    if (signal_dependent) {
      const ComplexMat wq = bank.w[k].row(q);
      p = (wq * r * wq.adjoint())(0, 0).real();
      const ComplexMat proj = ComplexMat::Identity(nm, nm) - aq * wq;
      sigma2 = (proj * r * proj.adjoint()).trace().real() / double(nm * nm);
    }
    const double pd = p * d_[q];
    ComplexMat m = sigma2 * base_m + pd * (aq * aq.adjoint());
    const double noise = signal_dependent
                             ? opts_.bsm.eps_scale * m.trace().real() / double(nm)
                             : eps_fixed;
    m.diagonal().array() += noise;
    const ComplexMat rhs =
        sigma2 * base_rhs + pd * (aq * h.row(q).conjugate());
    const ComplexMat c = solve_regularized<double>(m, rhs, 0.0).adjoint();
    bank.left[k].row(q) = c.row(0);
    bank.right[k].row(q) = c.row(1);
  }
}

ExpertBank ExpertDesigner::design(const CovEstimate* cov) const {
  if (cov && cov->r.size() != a_.num_bins()) {
    throw Error(Errc::kGridMismatch, "expert bank: covariance bin count");
  }
  ExpertBank bank;
  bank.grid = a_.grid;
  bank.freqs = a_.freqs;
  bank.a = a_.a;
  const std::size_t bins = a_.num_bins();
  bank.w.resize(bins);
  bank.left.resize(bins);
  bank.right.resize(bins);
  const Eigen::Index nm = Eigen::Index(a_.num_mics());
  const ComplexMat eye = ComplexMat::Identity(nm, nm);
  for (std::size_t k = 0; k < bins; ++k) {
    const ComplexMat* r = cov ? &cov->r[k] : nullptr;
    bank.w[k] = mvdr_rows(k, r);
    switch (opts_.design) {
      case ExpertDesign::kCompass:
        design_compass_bin(bank, k);
        break;
      case ExpertDesign::kDbsm:
        design_dbsm_bin(bank, k, r ? *r : eye, true);
        break;
      case ExpertDesign::kBsmDirectional:
        design_dbsm_bin(bank, k, eye, false);
        break;
    }
  }
  return bank;
}

void ExpertDesigner::refresh_estimators(ExpertBank& bank,
                                        const CovEstimate* cov) const {
  for (std::size_t k = 0; k < bank.num_bins(); ++k) {
    bank.w[k] = mvdr_rows(k, cov ? &cov->r[k] : nullptr);
  }
}

ExpertBank make_expert_bank(const SteeringSet& a, const HrtfSet& h,
                            const ExpertOptions& opts, const CovEstimate* cov) {
  return ExpertDesigner(a, h, opts).design(cov);
}

// ---------------------------------------------------------------------------

Residual expert_residual(const ComplexVec& x, const ComplexVec& a_q,
                         const ComplexVec& w_q) {
  Residual res;
  res.s = (w_q.transpose() * x).value();
  res.r = x - a_q * res.s;
  res.loss = res.r.squaredNorm();
  return res;
}

RealVec expert_losses(const ComplexVec& x, const ComplexMat& a,
                      const ComplexMat& w) {
  const Eigen::VectorXcd s = w * x;
  ComplexMat r = -(a * s.asDiagonal());
  r.colwise() += x;
  return r.colwise().squaredNorm().transpose();
}

void update_losses(RealVec& cumulative, const RealVec& loss, double lambda) {
  if (cumulative.size() != loss.size()) {
    throw Error(Errc::kInvalidArgument, "update_losses: size mismatch");
  }
  if ((loss.array() < 0.0).any()) {
    throw Error(Errc::kNegativeLoss, "update_losses: negative loss");
  }
  cumulative = lambda * cumulative + loss;
}

RealVec blend_weights(const RealVec& cumulative, double eta) {
  if (!(eta > 0.0)) {
    throw Error(Errc::kInvalidArgument, "blend_weights: eta must be positive");
  }
  const double lo = cumulative.minCoeff();
  RealVec e = (-eta * (cumulative.array() - lo)).exp();
  return e / e.sum();
}

BlendState::BlendState(std::size_t num_experts, std::size_t num_bins,
                       double eta_, double lambda_)
    : cumulative(Eigen::MatrixXd::Zero(Eigen::Index(num_experts),
                                       Eigen::Index(num_bins))),
      alpha(Eigen::MatrixXd::Constant(Eigen::Index(num_experts),
                                      Eigen::Index(num_bins),
                                      1.0 / double(num_experts))),
      eta(eta_),
      lambda(lambda_) {}

void BlendState::update(const Eigen::MatrixXd& losses) {
  if (losses.rows() != cumulative.rows() || losses.cols() != cumulative.cols()) {
    throw Error(Errc::kInvalidArgument, "blend state: loss shape mismatch");
  }
  for (Eigen::Index k = 0; k < losses.cols(); ++k) {
    RealVec l = cumulative.col(k);
    update_losses(l, losses.col(k), lambda);
    cumulative.col(k) = l;
    alpha.col(k) = blend_weights(l, eta);
  }
}

ComplexMat blend_filters(const RealVec& alpha, const ExpertBank& bank,
                         std::size_t k) {
  if (std::size_t(alpha.size()) != bank.num_experts()) {
    throw Error(Errc::kInvalidArgument, "blend_filters: weight count");
  }
  ComplexMat c(2, bank.left[k].cols());
  const Eigen::RowVectorXcd at = alpha.transpose().cast<cdouble>();
  c.row(0) = at * bank.left[k];
  c.row(1) = at * bank.right[k];
  return c;
}

BinauralFilter blend_filters(const Eigen::MatrixXd& alpha,
                             const ExpertBank& bank) {
  BinauralFilter f;
  f.c.reserve(bank.num_bins());
  for (std::size_t k = 0; k < bank.num_bins(); ++k) {
    f.c.push_back(blend_filters(RealVec(alpha.col(Eigen::Index(k))), bank, k));
  }
  return f;
}

ComplexMat render(const BinauralFilter& c, const SpectralFrame& x) {
  if (c.num_bins() != x.num_bins() || c.num_mics() != x.num_channels()) {
    throw Error(Errc::kChannelMismatch, "render: filter and frame shapes differ");
  }
  ComplexMat p(2, Eigen::Index(x.num_bins()));
  for (std::size_t k = 0; k < c.num_bins(); ++k) {
    p.col(Eigen::Index(k)) = c.c[k] * x.x.col(Eigen::Index(k));
  }
  return p;
}

// ---------------------------------------------------------------------------

RegretLedger::RegretLedger(std::size_t num_experts)
    : totals_(RealVec::Zero(Eigen::Index(num_experts))) {
  if (num_experts == 0) {
    throw Error(Errc::kInvalidArgument, "regret ledger: no experts");
  }
}

void RegretLedger::record(double mixture_loss, const RealVec& expert_losses) {
  if (expert_losses.size() != totals_.size()) {
    throw Error(Errc::kInvalidArgument, "regret ledger: expert count");
  }
  mixture_.push_back(mixture_loss);
  mixture_prefix_.push_back((mixture_prefix_.empty() ? 0.0 : mixture_prefix_.back()) +
                            mixture_loss);
  totals_ += expert_losses;
  expert_prefix_.push_back(totals_);
}

double RegretLedger::regret(std::size_t t) const {
  if (t == 0 || t > frames()) {
    throw Error(Errc::kInvalidArgument, "regret: T out of range");
  }
  return mixture_prefix_[t - 1] - expert_prefix_[t - 1].minCoeff();
}

std::size_t RegretLedger::best_expert(std::size_t t) const {
  if (t == 0 || t > frames()) {
    throw Error(Errc::kInvalidArgument, "regret: T out of range");
  }
  Eigen::Index best = 0;
  expert_prefix_[t - 1].minCoeff(&best);  // first minimum
  return std::size_t(best);
}

// ---------------------------------------------------------------------------

void MoeOptions::validate() const {
  if (!(eta > 0.0)) throw Error(Errc::kInvalidArgument, "moe: eta must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "moe: lambda must be in [0, 1]");
  }
  if (redesign_every == 0) {
    throw Error(Errc::kInvalidArgument, "moe: redesign_every must be >= 1");
  }
  if (!(cov_beta > 0.0 && cov_beta < 1.0)) {
    throw Error(Errc::kInvalidArgument, "moe: cov_beta must be in (0, 1)");
  }
  if (!(norm_mu >= 0.0 && norm_mu < 1.0)) {
    throw Error(Errc::kInvalidArgument, "moe: norm_mu must be in [0, 1)");
  }
  if (!(pool_low_hz >= 0.0 && pool_high_hz > pool_low_hz)) {
    throw Error(Errc::kInvalidArgument, "moe: bad pooling band");
  }
}

MoeEngine::MoeEngine(const SteeringSet& a, const HrtfSet& h, MoeOptions opts)
    : opts_((opts.validate(), std::move(opts))),
      grid_(a.grid),
      designer_(a, h, opts_.experts),
      cov_(opts_.cov_beta),
      state_(a.num_dirs(), a.num_bins(), opts_.eta, opts_.lambda),
      norm_(RealVec::Zero(Eigen::Index(a.num_bins()))),
      norm_ready_(a.num_bins(), false),
      pooled_cumulative_(RealVec::Zero(Eigen::Index(a.num_dirs()))),
      ledger_(a.num_dirs()) {
  const FreqGrid& f = a.freqs;
  pool_lo_ = f.num_bins();
  pool_hi_ = 0;
  for (std::size_t k = 0; k < f.num_bins(); ++k) {
    if (f[k] >= opts_.pool_low_hz && f[k] <= opts_.pool_high_hz) {
      pool_lo_ = std::min(pool_lo_, k);
      pool_hi_ = std::max(pool_hi_, k + 1);
    }
  }
  if (pool_hi_ <= pool_lo_) {
    throw Error(Errc::kInvalidArgument, "moe: pooling band holds no bins");
  }
}

SpectralFrame MoeEngine::process(const SpectralFrame& x) {
  const auto bins = std::size_t(state_.alpha.cols());
  if (x.num_bins() != bins ||
      (t_ > 0 && x.num_channels() != bank_.num_mics())) {
    throw Error(Errc::kChannelMismatch, "moe: frame shape differs from bank");
  }
  cov_.update(x);
  if (t_ % opts_.redesign_every == 0) {
    if (opts_.experts.design == ExpertDesign::kBsmDirectional && t_ > 0) {
      designer_.refresh_estimators(bank_, &cov_.estimate());
    } else {
      bank_ = designer_.design(&cov_.estimate());
    }
  }
  const auto q_count = Eigen::Index(bank_.num_experts());
  const auto nb = Eigen::Index(bins);

  Eigen::MatrixXd losses(q_count, nb);
  Eigen::MatrixXcd s_hat(q_count, nb);
  for (Eigen::Index k = 0; k < nb; ++k) {
    const ComplexVec xk = x.x.col(k);
    s_hat.col(k) = bank_.w[std::size_t(k)] * xk;
    ComplexMat r = -(bank_.a[std::size_t(k)] * s_hat.col(k).asDiagonal());
    r.colwise() += xk;
    losses.col(k) = r.colwise().squaredNorm().transpose();
    const double mean = losses.col(k).mean();
    auto ready = norm_ready_[std::size_t(k)];
    if (!ready) {
      if (mean > 0.0) {
        norm_[k] = mean;
        ready = true;
      }
    } else {
      norm_[k] = opts_.norm_mu * norm_[k] + (1.0 - opts_.norm_mu) * mean;
    }
    if (norm_[k] > 0.0) {
      losses.col(k) /= norm_[k];
    } else {
      losses.col(k).setZero();
    }
  }
  state_.update(losses);

  const RealVec pooled =
      losses.middleCols(Eigen::Index(pool_lo_), Eigen::Index(pool_hi_ - pool_lo_))
          .rowwise()
          .mean();
  update_losses(pooled_cumulative_, pooled, opts_.lambda);
  MoeFrameDiag d;
  d.pooled_alpha = blend_weights(pooled_cumulative_, opts_.eta);
  d.pooled_cumulative = pooled_cumulative_;
  Eigen::Index best = 0;
  pooled_cumulative_.minCoeff(&best);
  d.argmin = std::size_t(best);

  SpectralFrame out;
  out.time_index = x.time_index;
  out.x.resize(2, nb);
  double mixture_loss = 0.0;
  for (Eigen::Index k = 0; k < nb; ++k) {
    const RealVec alpha =
        opts_.pooling == Pooling::kPooled ? d.pooled_alpha : RealVec(state_.alpha.col(k));
    const ComplexMat c = blend_filters(alpha, bank_, std::size_t(k));
    const ComplexVec xk = x.x.col(k);
    out.x.col(k) = c * xk;
    mixture_loss += alpha.dot(losses.col(k));
  }
  ledger_.record(mixture_loss, losses.rowwise().sum());
  diag_.push_back(std::move(d));
  ++t_;
  return out;
}

MoeRun run_moe(const std::vector<SpectralFrame>& frames, const SteeringSet& a,
               const HrtfSet& h, const MoeOptions& opts) {
  MoeEngine engine(a, h, opts);
  MoeRun run;
  run.binaural.reserve(frames.size());
  for (const auto& f : frames) run.binaural.push_back(engine.process(f));
  run.diagnostics = engine.diagnostics();
  run.ledger = engine.ledger();
  return run;
}

void write_diagnostics_csv(const std::vector<MoeFrameDiag>& diag,
                           const DirectionGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out << "frame,argmin,argmin_azimuth_deg";
  for (std::size_t q = 0; q < grid.size(); ++q) out << ",alpha_" << q;
  for (std::size_t q = 0; q < grid.size(); ++q) out << ",loss_" << q;
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < diag.size(); ++t) {
    const auto& d = diag[t];
    std::snprintf(buf, sizeof buf, "%.6f", grid[d.argmin].azimuth_deg());
    out << t << ',' << d.argmin << ',' << buf;
    for (Eigen::Index q = 0; q < d.pooled_alpha.size(); ++q) {
      std::snprintf(buf, sizeof buf, ",%.9g", d.pooled_alpha[q]);
      out << buf;
    }
    for (Eigen::Index q = 0; q < d.pooled_cumulative.size(); ++q) {
      std::snprintf(buf, sizeof buf, ",%.9g", d.pooled_cumulative[q]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::kIo, "write failed: " + path);
}

}  // namespace binmoe
