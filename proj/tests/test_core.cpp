#include "doctest.h"
#include "test_util.hpp"

#include "binmoe/core.hpp"

using namespace binmoe;
using binmoe::test::random_complex;
using binmoe::test::random_psd;

TEST_CASE("solve_regularized closed forms") {
  const ComplexMat eye = ComplexMat::Identity(2, 2);
  CHECK(solve_regularized<double>(eye, eye, 0.0).isApprox(eye, 1e-14));
  const ComplexMat zero = ComplexMat::Zero(2, 2);
  CHECK(solve_regularized<double>(zero, eye, 0.5).isApprox(2.0 * eye, 1e-14));
}

TEST_CASE("solve_regularized residual on random PSD") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMat m = random_psd(4, rng);
    const ComplexMat rhs = random_complex(4, 3, rng);
    for (double eps : {1e-3, 1.0}) {
      const ComplexMat x = solve_regularized<double>(m, rhs, eps);
      ComplexMat loaded = m;
      loaded.diagonal().array() += eps;
      CHECK((loaded * x - rhs).norm() / rhs.norm() < 1e-9);
    }
  }
}

TEST_CASE("solve_regularized at eps 0 matches the general solver") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    ComplexMat m = random_psd(4, rng);
    m.diagonal().array() += 1.0;
    const ComplexMat rhs = random_complex(4, 2, rng);
    const ComplexMat a = solve_regularized<double>(m, rhs, 0.0);
    const ComplexMat b = solve_general<double>(m, rhs);
    CHECK(binmoe::test::rel_err(a, b) < 1e-8);
  }
}

TEST_CASE("solve_regularized errors") {
  ComplexMat m(2, 2);
  m << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(solve_regularized<double>(m, ComplexMat::Identity(2, 2), 0.0), Error);
  try {
    solve_regularized<double>(m, ComplexMat::Identity(2, 2), 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kNonHermitian);
  }
  const ComplexMat z = ComplexMat::Zero(2, 2);
  try {
    solve_regularized<double>(z, ComplexMat::Identity(2, 2), 0.0);
    FAIL("singular matrix accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kSingular);
  }
  CHECK_THROWS_AS(solve_regularized<double>(ComplexMat::Identity(2, 2),
                                            ComplexMat::Identity(2, 2), -1.0),
                  Error);
}

TEST_CASE("solve_general closed forms") {
  ComplexMat m = ComplexMat::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = 4.0;
  ComplexMat rhs(2, 1);
  rhs << 2.0, 4.0;
  CHECK(solve_general<double>(m, rhs).isApprox(ComplexMat::Ones(2, 1), 1e-14));

  std::mt19937_64 rng(13);
  const ComplexMat r = random_complex(3, 2, rng);
  CHECK(solve_general<double>(ComplexMat::Identity(3, 3), r).isApprox(r, 1e-14));

  for (int trial = 0; trial < 20; ++trial) {
    ComplexMat g = random_complex(4, 4, rng);
    g.diagonal().array() += 4.0;
    const ComplexMat b = random_complex(4, 1, rng);
    const ComplexMat x = solve_general<double>(g, b);
    CHECK((g * x - b).norm() / b.norm() < 1e-9);
  }
  CHECK_THROWS_AS(solve_general<double>(ComplexMat::Zero(2, 2), rhs), Error);
}

TEST_CASE("directions and grids") {
  const Direction d = Direction::from_degrees(-90.0);
  CHECK(d.azimuth_deg() == doctest::Approx(270.0));
  CHECK(d == Direction::from_degrees(270.0));
  CHECK(circular_distance_deg(354.0, 6.0) == doctest::Approx(12.0));
  CHECK(circular_distance_deg(0.0, 180.0) == doctest::Approx(180.0));

  const auto grid = DirectionGrid::ring(60);
  CHECK(grid.size() == 60);
  CHECK(grid.spacing() == doctest::Approx(6.0 * kPi / 180.0));
  CHECK(grid.find(Direction::from_degrees(30.0)) == 5);
  CHECK(grid.find(Direction::from_degrees(31.0)) == grid.size());
  CHECK(grid.nearest(Direction::from_degrees(31.0)) == 5);
  CHECK(grid.nearest(Direction::from_degrees(358.0)) == 0);

  const FreqGrid f(48000.0, 1024);
  CHECK(f.num_bins() == 513);
  CHECK(f[512] == doctest::Approx(24000.0));
  CHECK(f.bin_of(1000.0) == 21);
}
