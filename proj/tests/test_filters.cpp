#include "doctest.h"
#include "test_util.hpp"

#include <Eigen/QR>

#include "binmoe/filters.hpp"
#include "binmoe/hrtf.hpp"

using namespace binmoe;
using binmoe::test::random_complex;
using binmoe::test::random_psd;
using binmoe::test::rel_err;

namespace {

// One-bin steering/HRTF sets wrapping explicit matrices.
SteeringSet one_bin_steering(const ComplexMat& a) {
  return SteeringSet{DirectionGrid::ring(std::size_t(a.cols())), FreqGrid(48000.0, 2), {a, a}};
}
HrtfSet one_bin_hrtf(const ComplexMat& h) {
  return HrtfSet{DirectionGrid::ring(std::size_t(h.rows())), FreqGrid(48000.0, 2), {h, h}, 0};
}

// Regularized LS objective ||cA - H^T||^2 + eps ||c||^2.
double bsm_objective(const ComplexMat& c, const ComplexMat& a, const ComplexMat& h, double eps) {
  return (c * a - h.transpose()).squaredNorm() + eps * c.squaredNorm();
}

ComplexMat unitary(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<ComplexMat> qr(random_complex(n, n, rng));
  return qr.householderQ() * ComplexMat::Identity(n, n);
}

}  // namespace

TEST_CASE("bsm scalar identity and unitary array") {
  ComplexMat a(1, 1);
  a(0, 0) = 1.0;
  ComplexMat h(1, 2);
  h << cdouble(0.3, 0.1), cdouble(-0.2, 0.5);
  const ComplexMat c = bsm_bin(a, h, 0.0);
  CHECK(rel_err(c, h.transpose()) < 1e-14);

  std::mt19937_64 rng(21);
  const ComplexMat u = unitary(4, rng);
  const ComplexMat hu = random_complex(4, 2, rng);
  const ComplexMat cu = bsm_bin(u, hu, 0.0);
  CHECK(rel_err(cu, hu.transpose() * u.adjoint()) < 1e-12);
  CHECK(rel_err(cu * u, hu.transpose()) < 1e-12);
}

TEST_CASE("bsm matches an independent normal-equations solve") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMat a = random_complex(4, 60, rng);
    const ComplexMat h = random_complex(60, 2, rng);
    const double eps = 1e-4 * (a * a.adjoint()).trace().real() / 4.0;
    BsmOptions o;
    CHECK(regularization_for(a, o) == doctest::Approx(eps));
    const ComplexMat c = bsm_bin(a, h, eps);
    // (A A^H + eps I)^T c^T = conj(A) H
    ComplexMat lhs = (a * a.adjoint()).transpose();
    lhs.diagonal().array() += eps;
    const ComplexMat ct = lhs.completeOrthogonalDecomposition().solve(a.conjugate() * h);
    CHECK(rel_err(c, ct.transpose()) < 1e-8);

    // No small perturbation improves the objective.
    const double base = bsm_objective(c, a, h, eps);
    for (int p = 0; p < 10; ++p) {
      ComplexMat d = random_complex(2, 4, rng);
      d *= 1e-3 / d.norm();
      CHECK(bsm_objective(c + d, a, h, eps) >= base);
    }
  }
}

TEST_CASE("magls refinement") {
  std::mt19937_64 rng(23);
  // One mic, one direction: the refined response magnitude equals |H|.
  {
    ComplexMat a(1, 1);
    a(0, 0) = std::polar(1.0, 0.7);
    ComplexMat h(1, 2);
    h << cdouble(0.4, -0.3), cdouble(1.2, 0.2);
    const auto sa = one_bin_steering(a);
    const auto sh = one_bin_hrtf(h);
    BsmOptions o;
    o.eps = 0.0;
    const BinauralFilter c0{{ComplexMat::Zero(2, 1), ComplexMat::Zero(2, 1)}};
    const auto c = magls_refine(c0, sa, sh, 0, o);
    const ComplexMat resp = c.c[1] * a;
    CHECK(std::abs(std::abs(resp(0, 0)) - std::abs(h(0, 0))) < 1e-12);
    CHECK(std::abs(std::abs(resp(1, 0)) - std::abs(h(0, 1))) < 1e-12);
  }
  // Cutoff at Nyquist: nothing changes.
  {
    const ComplexMat a = random_complex(4, 8, rng), h = random_complex(8, 2, rng);
    const auto sa = one_bin_steering(a);
    const auto sh = one_bin_hrtf(h);
    const BinauralFilter c0{{random_complex(2, 4, rng), random_complex(2, 4, rng)}};
    const auto c = magls_refine(c0, sa, sh, 2);
    CHECK(c.c[0] == c0.c[0]);
    CHECK(c.c[1] == c0.c[1]);
  }
  // Real array: refinement never raises the magnitude error.
  const auto grid = DirectionGrid::ring(60);
  const FreqGrid f(48000.0, 256);
  const auto sa = build_steering_set(ArrayGeometry::glasses(), grid, f);
  const auto sh = sphere_hrtf_set(SphereHeadParams{}, grid, f);
  BsmOptions complex_only;
  complex_only.magls_cutoff_hz = 1e9;
  const auto c_ls = design_bsm(sa, sh, complex_only);
  const std::size_t cutoff = first_bin_above(f, 2000.0);
  const auto c_mag = magls_refine(c_ls, sa, sh, cutoff);
  for (std::size_t k = cutoff; k < f.num_bins(); ++k) {
    CHECK(magnitude_error(c_mag.c[k], sa.a[k], sh.h[k]) <=
          magnitude_error(c_ls.c[k], sa.a[k], sh.h[k]) + 1e-12);
  }
  // design_bsm applies exactly this refinement above 2 kHz.
  const auto c_def = design_bsm(sa, sh);
  for (std::size_t k = 0; k < f.num_bins(); ++k) CHECK(rel_err(c_def.c[k], c_mag.c[k]) < 1e-12);
}

TEST_CASE("covariance tracker") {
  std::mt19937_64 rng(24);
  const ComplexMat x = random_complex(3, 5, rng);
  SpectralFrame fr{0, x};
  CovarianceTracker tr(0.8);
  for (int t = 0; t < 200; ++t) tr.update(fr);
  for (Eigen::Index k = 0; k < 5; ++k) {
    const ComplexMat want = x.col(k) * x.col(k).adjoint();
    CHECK(rel_err(tr.estimate().r[std::size_t(k)], want) < 1e-6);
  }

  CovarianceTracker frozen(1.0);
  frozen.update(fr);
  const auto init = frozen.estimate().r;
  for (int t = 0; t < 10; ++t) frozen.update(SpectralFrame{0, random_complex(3, 5, rng)});
  for (std::size_t k = 0; k < 5; ++k) CHECK(frozen.estimate().r[k] == init[k]);

  // White frames, sigma^2 = 2 per mic. A beta = 0.95 average spans ~39
  // frames, so single-bin off-diagonals fluctuate near 0.16 sigma^2; the
  // check averages the estimate over all bins.
  std::vector<SpectralFrame> frames;
  for (int t = 0; t < 2000; ++t) frames.push_back({std::size_t(t), random_complex(4, 257, rng)});
  const auto est = estimate_covariance(frames, 0.95);
  ComplexMat mean = ComplexMat::Zero(4, 4);
  for (const auto& r : est.r) mean += r;
  mean /= double(est.r.size());
  const double sigma2 = 2.0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(mean(i, i).real() == doctest::Approx(sigma2).epsilon(0.05));
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (i != j) CHECK(std::abs(mean(i, j)) < 0.1 * sigma2);
    }
  }
  CHECK_THROWS_AS(CovarianceTracker(0.0), Error);
}

TEST_CASE("lcmv extractor") {
  std::mt19937_64 rng(25);
  const ComplexMat a = random_complex(4, 1, rng);
  const ComplexMat w = lcmv_direct(a, ComplexMat::Identity(4, 4));
  CHECK(rel_err(w, a.adjoint() / a.squaredNorm()) < 1e-12);

  const auto grid = DirectionGrid::ring(60);
  const auto sa = build_steering_set(ArrayGeometry::glasses(), grid, FreqGrid(48000.0, 1024));
  for (int trial = 0; trial < 20; ++trial) {
    ComplexMat ad(4, 2);
    ad.col(0) = sa.a[100].col(0);
    ad.col(1) = sa.a[100].col(15);
    ComplexMat r = random_psd(4, rng);
    r.diagonal().array() += 0.1;
    const ComplexMat wd = lcmv_direct(ad, r);
    CHECK((wd * ad - ComplexMat::Identity(2, 2)).norm() < 1e-8);
  }
  ComplexMat dup(4, 2);
  dup.col(0) = a.col(0);
  dup.col(1) = a.col(0);
  try {
    lcmv_direct(dup, ComplexMat::Identity(4, 4));
    FAIL("duplicate columns accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kRankDeficient);
  }
}

TEST_CASE("compass single stage equals the two-stage pipeline") {
  std::mt19937_64 rng(26);
  const ComplexMat c_bsm0 = random_complex(2, 4, rng);
  CHECK(rel_err(design_compass(ComplexMat(4, 0), ComplexMat(0, 2), ComplexMat(0, 4), c_bsm0), c_bsm0) < 1e-15);

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index nd = 1 + trial % 2;
    const ComplexMat ad = random_complex(4, nd, rng);
    const ComplexMat hd = random_complex(nd, 2, rng);
    ComplexMat r = random_psd(4, rng);
    r.diagonal().array() += 0.05;
    const ComplexMat wd = lcmv_direct(ad, r);
    const ComplexMat c_bsm = random_complex(2, 4, rng);
    const ComplexMat c = design_compass(ad, hd, wd, c_bsm);
    const ComplexMat x = random_complex(4, 1, rng);
    // Direct part through the HRTF, residual after back-projection through BSM.
    const ComplexMat s = wd * x;
    const ComplexMat two_stage = hd.transpose() * s + c_bsm * (x - ad * s);
    CHECK(rel_err(c * x, two_stage) < 1e-10);
  }
}

TEST_CASE("compass renders the detected direction through its HRTF") {
  const auto grid = DirectionGrid::ring(60);
  const FreqGrid f(48000.0, 1024);
  const auto sa = build_steering_set(ArrayGeometry::glasses(), grid, f);
  const auto sh = sphere_hrtf_set(SphereHeadParams{}, grid, f);
  const auto c_bsm = design_bsm(sa, sh);
  const std::size_t q = 7;
  for (std::size_t k : {10u, 100u, 300u}) {
    const ComplexMat ad = sa.a[k].col(Eigen::Index(q));
    ComplexMat r = ad * ad.adjoint();
    r.diagonal().array() += 1e-3;
    const ComplexMat wd = lcmv_direct(ad, r);
    const ComplexMat hd = sh.h[k].row(Eigen::Index(q));
    const ComplexMat c = design_compass(ad, hd, wd, c_bsm.c[k]);
    CHECK(rel_err(c * ad, hd.transpose()) < 1e-8);
  }
}

TEST_CASE("steered response power DOA") {
  const auto grid = DirectionGrid::ring(60);
  const FreqGrid f(48000.0, 1024);
  const auto sa = build_steering_set(ArrayGeometry::glasses(), grid, f);
  auto cov_of = [&](const std::vector<std::size_t>& dirs, double noise) {
    CovEstimate c;
    for (std::size_t k = 0; k < f.num_bins(); ++k) {
      ComplexMat r = noise * ComplexMat::Identity(4, 4);
      for (std::size_t q : dirs) r += sa.a[k].col(Eigen::Index(q)) * sa.a[k].col(Eigen::Index(q)).adjoint();
      c.r.push_back(r);
    }
    return c;
  };
  const auto one = estimate_doa(cov_of({5}, 0.0), sa, 1);
  REQUIRE(one.indices.size() == 1);
  CHECK(grid[one.indices[0]].azimuth_deg() == doctest::Approx(30.0));
  CHECK_FALSE(one.low_confidence);

  const auto flat = estimate_doa(cov_of({}, 1.0), sa, 1);
  CHECK(flat.low_confidence);
  REQUIRE(flat.indices.size() == 1);
  CHECK(flat.indices[0] == 0);

  const auto two = estimate_doa(cov_of({0, 15}, 1.0), sa, 2);
  REQUIRE(two.indices.size() == 2);
  std::vector<double> az{grid[two.indices[0]].azimuth_deg(), grid[two.indices[1]].azimuth_deg()};
  std::sort(az.begin(), az.end());
  CHECK(circular_distance_deg(az[0], 0.0) <= 6.0);
  CHECK(circular_distance_deg(az[1], 90.0) <= 6.0);
}

TEST_CASE("source covariance estimator") {
  std::mt19937_64 rng(27);
  const Eigen::Index bins = 4;
  std::vector<ComplexMat> s_frames, r_frames;
  for (int t = 0; t < 50; ++t) {
    s_frames.push_back(random_complex(1, bins, rng));
    r_frames.push_back(ComplexMat::Zero(4, bins));
  }
  const auto zero_res = build_source_cov(s_frames, r_frames, 0.9);
  for (double s2 : zero_res.sigma_r2) CHECK(s2 == 0.0);

  // No direct part, residual with per-mic power p: R_s = (p / N_m) I.
  const double p = 3.0;
  std::vector<ComplexMat> none, white;
  for (int t = 0; t < 1; ++t) {
    none.push_back(ComplexMat::Zero(0, bins));
    white.push_back(ComplexMat::Constant(4, bins, cdouble(std::sqrt(p), 0.0)));
  }
  const auto diffuse = build_source_cov(none, white, 0.9);
  for (std::size_t k = 0; k < std::size_t(bins); ++k) {
    CHECK(rel_err(diffuse.full(k, 6), (p / 4.0) * ComplexMat::Identity(6, 6)) < 1e-12);
  }

  std::vector<ComplexMat> ones(100, ComplexMat::Ones(1, bins)), zeros(100, ComplexMat::Zero(4, bins));
  const auto fixed = build_source_cov(ones, zeros, 0.9);
  for (const auto& r : fixed.r_direct) CHECK(std::abs(r(0, 0) - 1.0) < 1e-12);
  CHECK_THROWS_AS(build_source_cov(ones, std::vector<ComplexMat>(3, ComplexMat::Zero(4, bins)), 0.9), Error);
}

TEST_CASE("d-BSM reductions and source-power sweep") {
  std::mt19937_64 rng(28);
  const auto grid = DirectionGrid::ring(60);
  const FreqGrid f(48000.0, 1024);
  const auto sa = build_steering_set(ArrayGeometry::glasses(), grid, f);
  const auto sh = sphere_hrtf_set(SphereHeadParams{}, grid, f);
  for (std::size_t k : {5u, 60u, 200u}) {
    const ComplexMat& a = sa.a[k];
    const double eps = regularization_for(a, BsmOptions{});
    const ComplexMat eye = ComplexMat::Identity(60, 60);
    const ComplexMat rn = eps * ComplexMat::Identity(4, 4);
    CHECK(rel_err(design_dbsm(a, sh.h[k], eye, rn), bsm_bin(a, sh.h[k], eps)) < 1e-12);
    CHECK(design_dbsm(a, sh.h[k], ComplexMat::Zero(60, 60), rn).norm() == 0.0);

    const std::size_t q = 11;
    double prev = 1e300;
    for (double pw : {1.0, 10.0, 100.0, 1000.0}) {
      ComplexMat rs = 0.1 * eye;
      rs(Eigen::Index(q), Eigen::Index(q)) += pw;
      const ComplexMat c = design_dbsm(a, sh.h[k], rs, rn);
      const double err = (c * a.col(Eigen::Index(q)) - sh.h[k].row(Eigen::Index(q)).transpose()).norm();
      CHECK(err < prev);
      prev = err;
    }
  }
}
