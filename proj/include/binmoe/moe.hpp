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

#ifndef BINMOE_MOE_HPP_
#define BINMOE_MOE_HPP_

#include "binmoe/filters.hpp"
#include "binmoe/fov.hpp"

#include <optional>
#include <string>
#include <vector>

namespace binmoe {

enum class ExpertDesign { kBsmDirectional, kDbsm, kCompass };

const char* to_string(ExpertDesign d);
ExpertDesign parse_expert_design(const std::string& name);

struct ExpertOptions {
  ExpertDesign design = ExpertDesign::kCompass;
  BsmOptions bsm;
  // Diagonal loading of R_x for the per-expert MVDR rows, relative to
  // trace(R_x) / N_m.
  double estimator_loading = 1.0;
  // bsm-directional: R_s = rho e_q e_q^T + I.
  double directional_rho = 10.0;
  std::optional<FovSpec> fov;
};

// One expert per grid direction. Per bin k: a[k] is N_m x Q, w[k] holds the
// MVDR rows (Q x N_m) and left[k] / right[k] hold each expert's ear filters
// as rows (Q x N_m).
struct ExpertBank {
  DirectionGrid grid;
  FreqGrid freqs;
  std::vector<ComplexMat> a;
  std::vector<ComplexMat> w;
  std::vector<ComplexMat> left;
  std::vector<ComplexMat> right;

  std::size_t num_experts() const { return grid.size(); }
  std::size_t num_bins() const { return a.size(); }
  std::size_t num_mics() const { return a.empty() ? 0 : std::size_t(a[0].rows()); }

  // Expert q's 2 x N_m filter at bin k.
  ComplexMat filter(std::size_t q, std::size_t k) const;
  BinauralFilter expert(std::size_t q) const;
};

// Holds the signal-independent parts of the bank design so periodic
// redesigns only redo the covariance-dependent work.
class ExpertDesigner {
 public:
  ExpertDesigner(const SteeringSet& a, const HrtfSet& h, ExpertOptions opts);

  // `cov` may be null: R_x = I is assumed.
  ExpertBank design(const CovEstimate* cov) const;
  // Recomputes only the MVDR rows; the filters of bsm-directional experts
  // do not depend on R_x.
  void refresh_estimators(ExpertBank& bank, const CovEstimate* cov) const;

  const ExpertOptions& options() const { return opts_; }
  // Static weighted BSM used as the COMPASS residual renderer.
  const BinauralFilter& residual_filter() const { return c_bsm_; }

 private:
  ComplexMat mvdr_rows(std::size_t k, const ComplexMat* r) const;
  void design_compass_bin(ExpertBank& bank, std::size_t k) const;
  void design_dbsm_bin(ExpertBank& bank, std::size_t k, const ComplexMat& r,
                       bool signal_dependent) const;

  SteeringSet a_;
  HrtfSet h_;  // after gain control
  ExpertOptions opts_;
  RealVec d_;  // distortion weights, ones without FoV
  RealVec boost_;
  BinauralFilter c_bsm_;
};

ExpertBank make_expert_bank(const SteeringSet& a, const HrtfSet& h,
                            const ExpertOptions& opts,
                            const CovEstimate* cov = nullptr);

// ---------------------------------------------------------------------------
// Exponential weights.

struct Residual {
  ComplexVec r;
  cdouble s = 0.0;
  double loss = 0.0;
};

// s = w_q x, r = x - a_q s, loss = ||r||^2.
Residual expert_residual(const ComplexVec& x, const ComplexVec& a_q,
                         const ComplexVec& w_q);

// Losses of all experts at one bin: `a` is N_m x Q, `w` is Q x N_m.
RealVec expert_losses(const ComplexVec& x, const ComplexMat& a,
                      const ComplexMat& w);

// L = lambda L + loss. Throws NegativeLoss.
void update_losses(RealVec& cumulative, const RealVec& loss, double lambda);

// Softmax of -eta L, shifted by min L.
RealVec blend_weights(const RealVec& cumulative, double eta);

// Per-bin weights and losses, Q x bins.
struct BlendState {
  Eigen::MatrixXd cumulative;
  Eigen::MatrixXd alpha;
  double eta = 1.0;
  double lambda = 0.995;

  BlendState() = default;
  BlendState(std::size_t num_experts, std::size_t num_bins, double eta,
             double lambda);
  void update(const Eigen::MatrixXd& losses);
};

// 2 x N_m convex combination at bin k.
ComplexMat blend_filters(const RealVec& alpha, const ExpertBank& bank,
                         std::size_t k);
BinauralFilter blend_filters(const Eigen::MatrixXd& alpha,
                             const ExpertBank& bank);

// p = c x per bin; result is 2 x bins.
ComplexMat render(const BinauralFilter& c, const SpectralFrame& x);

// ---------------------------------------------------------------------------
// Regret accounting.

// Per-frame losses summed over bins. The engine records the mixture loss as
// sum_q alpha_q l_q with the weights it renders with; the blended extractor's
// own residual never exceeds it (the residual is convex in alpha).
class RegretLedger {
 public:
  explicit RegretLedger(std::size_t num_experts = 1);

  void record(double mixture_loss, const RealVec& expert_losses);

  std::size_t frames() const { return mixture_.size(); }
  std::size_t num_experts() const { return std::size_t(totals_.size()); }
  // Sum of mixture loss minus the best expert's sum over frames [0, T).
  double regret(std::size_t t) const;
  double average_regret(std::size_t t) const { return regret(t) / double(t); }
  // Lowest index among the best experts over [0, T).
  std::size_t best_expert(std::size_t t) const;
  const std::vector<double>& mixture_losses() const { return mixture_; }

 private:
  std::vector<double> mixture_;
  std::vector<double> mixture_prefix_;
  std::vector<RealVec> expert_prefix_;
  RealVec totals_;
};

// ---------------------------------------------------------------------------
// Online engine.

enum class Pooling { kPerBin, kPooled };

struct MoeOptions {
  double eta = 1.0;
  double lambda = 0.995;
  std::size_t redesign_every = 8;
  double cov_beta = 0.9;
  Pooling pooling = Pooling::kPerBin;
  double pool_low_hz = 200.0;
  double pool_high_hz = 6000.0;
  // Running-mean factor of the per-bin loss normalizer.
  double norm_mu = 0.9;
  ExpertOptions experts;

  void validate() const;
};

struct MoeFrameDiag {
  std::size_t argmin = 0;
  RealVec pooled_alpha;
  RealVec pooled_cumulative;
};

class MoeEngine {
 public:
  MoeEngine(const SteeringSet& a, const HrtfSet& h, MoeOptions opts);

  // Consumes one N_m x bins frame, returns the 2 x bins binaural frame.
  SpectralFrame process(const SpectralFrame& x);

  const ExpertBank& bank() const { return bank_; }
  const BlendState& state() const { return state_; }
  const RegretLedger& ledger() const { return ledger_; }
  const std::vector<MoeFrameDiag>& diagnostics() const { return diag_; }
  const DirectionGrid& grid() const { return grid_; }
  const MoeOptions& options() const { return opts_; }

 private:
  MoeOptions opts_;
  DirectionGrid grid_;
  ExpertDesigner designer_;
  CovarianceTracker cov_;
  ExpertBank bank_;
  BlendState state_;
  RealVec norm_;          // per-bin loss normalizer
  std::vector<bool> norm_ready_;
  RealVec pooled_cumulative_;
  std::size_t pool_lo_ = 0, pool_hi_ = 0;
  RegretLedger ledger_;
  std::vector<MoeFrameDiag> diag_;
  std::size_t t_ = 0;
};

struct MoeRun {
  std::vector<SpectralFrame> binaural;
  std::vector<MoeFrameDiag> diagnostics;
  RegretLedger ledger;
};

MoeRun run_moe(const std::vector<SpectralFrame>& frames, const SteeringSet& a,
               const HrtfSet& h, const MoeOptions& opts);

// Columns: frame, argmin, argmin_azimuth_deg, alpha_<q>..., loss_<q>...
void write_diagnostics_csv(const std::vector<MoeFrameDiag>& diag,
                           const DirectionGrid& grid, const std::string& path);

}  // namespace binmoe

#endif  // BINMOE_MOE_HPP_
