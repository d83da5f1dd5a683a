#include "doctest.h"
#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "binmoe/fov.hpp"
#include "binmoe/hrtf.hpp"
#include "binmoe/moe.hpp"

using namespace binmoe;
using binmoe::test::random_complex;
using binmoe::test::random_psd;
using binmoe::test::rel_err;

namespace {

struct Setup {
  DirectionGrid grid = DirectionGrid::ring(12);
  FreqGrid freqs{48000.0, 64};
  SteeringSet a = build_steering_set(ArrayGeometry::glasses(), grid, freqs);
  HrtfSet h = sphere_hrtf_set(SphereHeadParams{}, grid, freqs);
};

const Setup& setup() {
  static const Setup s;
  return s;
}

CovEstimate random_cov(std::size_t bins, Eigen::Index nm, std::mt19937_64& rng) {
  CovEstimate c;
  for (std::size_t k = 0; k < bins; ++k) {
    c.r.push_back(random_psd(nm, rng) + 0.1 * ComplexMat::Identity(nm, nm));
  }
  c.frames = 1;
  return c;
}

std::vector<SpectralFrame> random_frames(std::size_t n, Eigen::Index nm,
                                         std::size_t bins, std::mt19937_64& rng) {
  std::vector<SpectralFrame> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    out[t].time_index = t;
    out[t].x = random_complex(nm, Eigen::Index(bins), rng);
  }
  return out;
}

// Plain softmax over -eta L, no shift.
RealVec softmax_oracle(const RealVec& l, double eta) {
  RealVec e(l.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    e[i] = std::exp(-eta * l[i]);
    s += e[i];
  }
  return e / s;
}

}  // namespace

TEST_CASE("compass experts match the single-direction design") {
  const auto& s = setup();
  std::mt19937_64 rng(11);
  const auto cov = random_cov(s.a.num_bins(), 4, rng);
  ExpertOptions o;
  o.estimator_loading = 0.5;
  const ExpertDesigner designer(s.a, s.h, o);
  const ExpertBank bank = designer.design(&cov);
  REQUIRE(bank.num_experts() == 12);
  double worst = 0.0, worst_resp = 0.0;
  for (std::size_t k = 1; k < bank.num_bins(); ++k) {
    const ComplexMat& cb = designer.residual_filter().c[k];
    for (std::size_t q = 0; q < bank.num_experts(); ++q) {
      const ComplexMat aq = s.a.a[k].col(Eigen::Index(q));
      const ComplexMat hq = s.h.h[k].row(Eigen::Index(q));
      const ComplexMat w = lcmv_direct(aq, cov.r[k], 0.5);
      const ComplexMat ref = design_compass(aq, hq, w, cb);
      worst = std::max(worst, rel_err(bank.filter(q, k), ref));
      // Distortionless toward its own direction.
      worst_resp = std::max(worst_resp, rel_err(bank.filter(q, k) * aq, hq.transpose()));
    }
  }
  CHECK(worst < 1e-8);
  CHECK(worst_resp < 1e-8);
}

TEST_CASE("single-expert bank equals the one-direction design") {
  std::mt19937_64 rng(12);
  const ComplexMat a = random_complex(4, 1, rng), h = random_complex(1, 2, rng);
  const SteeringSet sa{DirectionGrid::ring(1), FreqGrid(48000.0, 2), {a, a}};
  const HrtfSet sh{DirectionGrid::ring(1), FreqGrid(48000.0, 2), {h, h}, 0};
  const ExpertDesigner designer(sa, sh, ExpertOptions{});
  const auto bank = designer.design(nullptr);
  const ComplexMat eye = ComplexMat::Identity(4, 4);
  for (std::size_t k = 0; k < 2; ++k) {
    const ComplexMat ref =
        design_compass(a, h, lcmv_direct(a, eye), designer.residual_filter().c[k]);
    CHECK(rel_err(bank.filter(0, k), ref) < 1e-10);
  }
}

TEST_CASE("gain control removes out-of-region experts") {
  const auto& s = setup();
  ExpertOptions o;
  o.fov = FovSpec::azimuth_window(0.0, 60.0 * kPi / 180.0, 1.0, 0.0);
  const auto mask = o.fov->mask(s.grid);
  const auto bank = make_expert_bank(s.a, s.h, o);
  double out_worst = 0.0, in_worst = 0.0;
  for (std::size_t k = 1; k < bank.num_bins(); ++k) {
    for (std::size_t q = 0; q < bank.num_experts(); ++q) {
      const ComplexMat aq = s.a.a[k].col(Eigen::Index(q));
      const ComplexMat resp = bank.filter(q, k) * aq;
      if (mask[q]) {
        const ComplexMat hq = s.h.h[k].row(Eigen::Index(q)).transpose();
        in_worst = std::max(in_worst, rel_err(resp, hq));
      } else {
        out_worst = std::max(out_worst, resp.norm() / s.h.h[k].row(Eigen::Index(q)).norm());
      }
    }
  }
  CHECK(out_worst < 1e-8);
  CHECK(in_worst < 1e-8);
}

TEST_CASE("expert residual") {
  std::mt19937_64 rng(13);
  const ComplexVec a = random_complex(4, 1, rng);
  // Distortionless row on a pure plane wave: no residual.
  const ComplexVec w = (a / a.squaredNorm()).conjugate();
  const cdouble s0(0.7, -1.3);
  auto r = expert_residual(a * s0, a, w);
  CHECK(std::abs(r.s - s0) < 1e-12);
  CHECK(r.loss < 1e-24);
  // Zero row: the residual is the input.
  const ComplexVec x = random_complex(4, 1, rng);
  r = expert_residual(x, a, ComplexVec::Zero(4));
  CHECK(r.s == cdouble(0.0));
  CHECK(std::abs(r.loss - x.squaredNorm()) < 1e-12);
  // Element-wise oracle.
  const ComplexVec w2 = random_complex(4, 1, rng);
  r = expert_residual(x, a, w2);
  cdouble s = 0.0;
  for (int m = 0; m < 4; ++m) s += w2[m] * x[m];
  double loss = 0.0;
  for (int m = 0; m < 4; ++m) loss += std::norm(x[m] - a[m] * s);
  CHECK(std::abs(r.s - s) < 1e-12);
  CHECK(std::abs(r.loss - loss) < 1e-10 * loss);
  // Matched filter: the loss is the energy outside span(a).
  const ComplexVec wm = (a / a.squaredNorm()).conjugate();
  r = expert_residual(x, a, wm);
  const double proj = x.squaredNorm() - std::norm(a.dot(x)) / a.squaredNorm();
  CHECK(std::abs(r.loss - proj) < 1e-12 * x.squaredNorm());
  // Batched losses agree.
  const ComplexMat A = random_complex(4, 6, rng), W = random_complex(6, 4, rng);
  const RealVec l = expert_losses(x, A, W);
  for (Eigen::Index q = 0; q < 6; ++q) {
    const double lq = expert_residual(x, A.col(q), W.row(q).transpose()).loss;
    CHECK(std::abs(l[q] - lq) < 1e-10 * lq);
  }
}

TEST_CASE("cumulative loss recursion") {
  RealVec l = RealVec::Zero(2);
  update_losses(l, (RealVec(2) << 1.0, 2.0).finished(), 1.0);
  CHECK(l[0] == 1.0);
  CHECK(l[1] == 2.0);
  RealVec m = (RealVec(2) << 5.0, 7.0).finished();
  update_losses(m, (RealVec(2) << 0.25, 0.5).finished(), 0.0);
  CHECK(m[0] == 0.25);
  CHECK(m[1] == 0.5);
  RealVec n = (RealVec(2) << 4.0, 0.0).finished();
  update_losses(n, (RealVec(2) << 0.0, 1.0).finished(), 0.5);
  CHECK(n[0] == 2.0);
  CHECK(n[1] == 1.0);
  CHECK_THROWS_AS(update_losses(n, (RealVec(2) << -1e-3, 1.0).finished(), 0.5), Error);
  CHECK_THROWS_AS(update_losses(n, RealVec::Zero(3), 0.5), Error);
}

TEST_CASE("blend weights: fixed cases") {
  auto w = blend_weights(RealVec::Constant(5, 3.0), 2.0);
  for (Eigen::Index q = 0; q < 5; ++q) CHECK(std::abs(w[q] - 0.2) < 1e-15);
  w = blend_weights((RealVec(2) << 0.0, std::log(2.0)).finished(), 1.0);
  CHECK(std::abs(w[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(w[1] - 1.0 / 3.0) < 1e-15);
  w = blend_weights((RealVec(2) << 0.0, 1e6).finished(), 1.0);
  CHECK(w[0] == 1.0);
  CHECK(w[1] < 1e-300);
  // Huge common offset: no overflow.
  w = blend_weights((RealVec(2) << 1e300, 1e300).finished(), 1.0);
  CHECK(std::abs(w[0] - 0.5) < 1e-15);
  CHECK_THROWS_AS(blend_weights(RealVec::Zero(2), 0.0), Error);
}

TEST_CASE("blend weights: randomized properties") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> qd(2, 24);
  std::uniform_real_distribution<double> ld(0.0, 50.0), le(-3.0, 3.0), sh(-1e3, 1e3);
  int fails = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int q = qd(rng);
    RealVec l(q);
    for (int i = 0; i < q; ++i) l[i] = ld(rng);
    const double eta = std::pow(10.0, le(rng));
    const RealVec w = blend_weights(l, eta);
    bool ok = std::abs(w.sum() - 1.0) < 1e-12 && (w.array() >= 0.0).all();
    ok = ok && (blend_weights((l.array() + sh(rng)).matrix(), eta) - w).norm() < 1e-9;
    Eigen::Index amax = 0, amin = 0;
    w.maxCoeff(&amax);
    l.minCoeff(&amin);
    ok = ok && amax == amin;
    if (eta < 1.0) ok = ok && (w - softmax_oracle(l, eta)).norm() < 1e-12;
    const RealVec flat = blend_weights(l, 1e-8);
    ok = ok && (flat.array() - 1.0 / q).abs().maxCoeff() < 1e-6;
    const RealVec sharp = blend_weights(l, 1e8);
    ok = ok && std::abs(sharp[amin] - 1.0) < 1e-9;
    if (!ok) ++fails;
  }
  CHECK(fails == 0);
}

TEST_CASE("weights concentrate on a consistently better expert") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealVec l = RealVec::Zero(4);
  double prev = 0.25;
  bool monotone = true;
  for (int t = 0; t < 200; ++t) {
    RealVec loss(4);
    loss[0] = 0.1 * u(rng);
    for (int q = 1; q < 4; ++q) loss[q] = 0.2 + u(rng);
    update_losses(l, loss, 1.0);
    const double w0 = blend_weights(l, 0.5)[0];
    monotone = monotone && w0 >= prev;
    prev = w0;
  }
  CHECK(monotone);
  CHECK(prev > 0.999);
}

TEST_CASE("blend state tracks bins independently") {
  BlendState st(3, 2, 1.0, 1.0);
  CHECK(st.alpha.col(0).isApproxToConstant(1.0 / 3.0));
  Eigen::MatrixXd losses(3, 2);
  losses << 0.0, 5.0, 1.0, 5.0, 2.0, 0.0;
  st.update(losses);
  const RealVec a0 = softmax_oracle(RealVec(losses.col(0)), 1.0);
  CHECK((RealVec(st.alpha.col(0)) - a0).norm() < 1e-14);
  CHECK(st.alpha(2, 1) > 0.98);
  CHECK_THROWS_AS(st.update(Eigen::MatrixXd::Zero(2, 2)), Error);
}

TEST_CASE("filter blending") {
  const auto& s = setup();
  const auto bank = make_expert_bank(s.a, s.h, ExpertOptions{});
  const std::size_t k = 10;
  RealVec one_hot = RealVec::Zero(12);
  one_hot[7] = 1.0;
  CHECK(rel_err(blend_filters(one_hot, bank, k), bank.filter(7, k)) < 1e-15);
  ComplexMat mean = ComplexMat::Zero(2, 4);
  for (std::size_t q = 0; q < 12; ++q) mean += bank.filter(q, k) / 12.0;
  CHECK(rel_err(blend_filters(RealVec::Constant(12, 1.0 / 12.0), bank, k), mean) < 1e-12);
  // Random convex weights: explicit sum, and every entry stays inside the
  // bounding box of the expert entries.
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealVec alpha(12);
  for (int q = 0; q < 12; ++q) alpha[q] = u(rng);
  alpha /= alpha.sum();
  const ComplexMat c = blend_filters(alpha, bank, k);
  ComplexMat ref = ComplexMat::Zero(2, 4);
  for (std::size_t q = 0; q < 12; ++q) ref += alpha[Eigen::Index(q)] * bank.filter(q, k);
  CHECK(rel_err(c, ref) < 1e-12);
  bool inside = true;
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index m = 0; m < 4; ++m) {
      double lo_re = 1e300, hi_re = -1e300, lo_im = 1e300, hi_im = -1e300;
      for (std::size_t q = 0; q < 12; ++q) {
        const cdouble v = bank.filter(q, k)(i, m);
        lo_re = std::min(lo_re, v.real());
        hi_re = std::max(hi_re, v.real());
        lo_im = std::min(lo_im, v.imag());
        hi_im = std::max(hi_im, v.imag());
      }
      const cdouble v = c(i, m);
      inside = inside && v.real() >= lo_re - 1e-12 && v.real() <= hi_re + 1e-12 &&
               v.imag() >= lo_im - 1e-12 && v.imag() <= hi_im + 1e-12;
    }
  }
  CHECK(inside);
  // Blending filters equals blending the experts' renders.
  const SpectralFrame x{0, random_complex(4, Eigen::Index(bank.num_bins()), rng)};
  Eigen::MatrixXd amat(12, bank.num_bins());
  for (Eigen::Index j = 0; j < amat.cols(); ++j) amat.col(j) = alpha;
  ComplexMat mix = ComplexMat::Zero(2, amat.cols());
  for (std::size_t q = 0; q < 12; ++q) mix += alpha[Eigen::Index(q)] * render(bank.expert(q), x);
  CHECK(rel_err(render(blend_filters(amat, bank), x), mix) < 1e-12);
  CHECK_THROWS_AS(blend_filters(RealVec::Ones(3), bank, k), Error);
}

TEST_CASE("rendering") {
  std::mt19937_64 rng(17);
  BinauralFilter c;
  for (int k = 0; k < 5; ++k) c.c.push_back(random_complex(2, 3, rng));
  SpectralFrame x{0, ComplexMat::Zero(3, 5)};
  CHECK(render(c, x).norm() == 0.0);
  // One mic: a scalar gain per ear and bin.
  BinauralFilter c1;
  for (int k = 0; k < 5; ++k) c1.c.push_back(random_complex(2, 1, rng));
  const SpectralFrame x1{0, random_complex(1, 5, rng)};
  const ComplexMat p1 = render(c1, x1);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(p1(0, k) - c1.c[std::size_t(k)](0, 0) * x1.x(0, k)) < 1e-14);
    CHECK(std::abs(p1(1, k) - c1.c[std::size_t(k)](1, 0) * x1.x(0, k)) < 1e-14);
  }
  const SpectralFrame xa{0, random_complex(3, 5, rng)}, xb{0, random_complex(3, 5, rng)};
  const cdouble g(0.3, -2.0);
  const SpectralFrame xs{0, xa.x + g * xb.x};
  CHECK(rel_err(render(c, xs), render(c, xa) + g * render(c, xb)) < 1e-13);
  CHECK_THROWS_AS(render(c, x1), Error);
}

TEST_CASE("regret ledger") {
  RegretLedger one(1);
  for (int t = 0; t < 50; ++t) {
    const double l = 0.01 * t;
    one.record(l, RealVec::Constant(1, l));
  }
  CHECK(one.regret(50) == 0.0);
  CHECK(one.best_expert(50) == 0);
  CHECK_THROWS_AS(one.regret(0), Error);
  CHECK_THROWS_AS(one.regret(51), Error);

  // Alternating losses against a hedge learner with the tuned rate.
  for (std::size_t T : {100u, 1000u, 10000u}) {
    const double eta = std::sqrt(8.0 * std::log(2.0) / double(T));
    RegretLedger led(2);
    RealVec l = RealVec::Zero(2);
    for (std::size_t t = 0; t < T; ++t) {
      RealVec loss(2);
      loss[0] = double(t % 2);
      loss[1] = 1.0 - loss[0];
      const RealVec w = blend_weights(l, eta);
      led.record(w.dot(loss), loss);
      update_losses(l, loss, 1.0);
    }
    const double bound = std::log(2.0) / eta + eta * double(T) / 8.0;
    CHECK(led.regret(T) <= bound);
    CHECK(led.regret(T) >= -1e-9);
  }
}

TEST_CASE("single-expert engine equals a fixed tracked design") {
  std::mt19937_64 rng(18);
  const FreqGrid f(48000.0, 32);
  const auto grid = DirectionGrid::ring(1);
  const auto a = build_steering_set(ArrayGeometry::glasses(), grid, f);
  const auto h = sphere_hrtf_set(SphereHeadParams{}, grid, f);
  MoeOptions o;
  o.redesign_every = 3;
  const auto frames = random_frames(10, 4, f.num_bins(), rng);
  const auto run = run_moe(frames, a, h, o);

  CovarianceTracker cov(o.cov_beta);
  ExpertBank bank;
  bool equal = true;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    cov.update(frames[t]);
    if (t % o.redesign_every == 0) bank = make_expert_bank(a, h, o.experts, &cov.estimate());
    const ComplexMat p = render(bank.expert(0), frames[t]);
    equal = equal && p == run.binaural[t].x;
  }
  CHECK(equal);
  CHECK(run.ledger.regret(10) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("engine follows a static plane wave") {
  const auto& s = setup();
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t target = 4;
  std::vector<SpectralFrame> frames(60);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    frames[t].time_index = t;
    frames[t].x.resize(4, Eigen::Index(s.freqs.num_bins()));
    for (std::size_t k = 0; k < s.freqs.num_bins(); ++k) {
      const cdouble src(n(rng), n(rng));
      frames[t].x.col(Eigen::Index(k)) =
          s.a.a[k].col(Eigen::Index(target)) * src + 0.01 * random_complex(4, 1, rng);
    }
  }
  MoeOptions o;
  o.lambda = 1.0;
  o.pooling = Pooling::kPooled;
  MoeEngine engine(s.a, s.h, o);
  for (const auto& fr : frames) engine.process(fr);
  CHECK(engine.diagnostics().back().argmin == target);
  CHECK(engine.diagnostics().back().pooled_alpha[Eigen::Index(target)] > 0.9);
  CHECK(engine.ledger().frames() == 60);
  CHECK(engine.ledger().best_expert(60) == target);

  const auto path = (std::filesystem::temp_directory_path() / "binmoe_moe_diag.csv").string();
  write_diagnostics_csv(engine.diagnostics(), engine.grid(), path);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("frame,argmin,argmin_azimuth_deg,alpha_0,", 0) == 0);
  CHECK(header.find("loss_11") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 60);
  std::filesystem::remove(path);
}

TEST_CASE("engine option validation") {
  const auto& s = setup();
  MoeOptions o;
  o.eta = 0.0;
  CHECK_THROWS_AS(MoeEngine(s.a, s.h, o), Error);
  o = MoeOptions{};
  o.lambda = 1.5;
  CHECK_THROWS_AS(MoeEngine(s.a, s.h, o), Error);
  o = MoeOptions{};
  o.redesign_every = 0;
  CHECK_THROWS_AS(MoeEngine(s.a, s.h, o), Error);
  o = MoeOptions{};
  o.pool_low_hz = 30000.0;
  o.pool_high_hz = 40000.0;
  CHECK_THROWS_AS(MoeEngine(s.a, s.h, o), Error);
}
