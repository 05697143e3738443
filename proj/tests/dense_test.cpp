#include <doctest.h>

#include <Eigen/Dense>

#include "ska/dense.hpp"
#include "ska/theory.hpp"

using ska::Matrixd;
using ska::Vectord;

TEST_CASE("cholesky of the identity is the identity") {
  Matrixd a = Matrixd::Identity(3, 3);
  auto f = ska::cholesky<double>(a, 1e-4);
  CHECK(!f.jitter_applied);
  CHECK((f.l - Matrixd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cholesky of diag(4,9) is diag(2,3)") {
  Matrixd a = Matrixd::Zero(2, 2);
  a(0, 0) = 4.0;
  a(1, 1) = 9.0;
  auto f = ska::cholesky<double>(a, 1e-4);
  CHECK(!f.jitter_applied);
  CHECK(f.l(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f.l(1, 1) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(f.l(0, 1) == 0.0);
  CHECK(f.l(1, 0) == 0.0);
}

TEST_CASE("singular PSD input succeeds via the jitter retry") {
  Matrixd a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;
  auto f = ska::cholesky<double>(a, 1e-4);
  CHECK(f.jitter_applied);
  // reconstruction oracle: dense FP64 re-multiplication
  Matrixd expected(2, 2);
  expected << 1.0001, 1.0, 1.0, 1.0001;
  Matrixd recon = f.l * f.l.transpose();
  CHECK((recon - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cholesky rejects malformed input") {
  CHECK_THROWS_AS(ska::cholesky<double>(Matrixd::Zero(2, 3), 1e-4), ska::NonSquare);
  Matrixd asym(2, 2);
  asym << 1.0, 2.0, 0.5, 1.0;
  CHECK_THROWS_AS(ska::cholesky<double>(asym, 1e-4), ska::NonSymmetric);
  Matrixd neg = -Matrixd::Identity(2, 2);
  CHECK_THROWS_AS(ska::cholesky<double>(neg, 1e-4), ska::NotPositiveDefinite);
}

TEST_CASE("cholesky factor is exactly lower triangular with reconstruction") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const int n = 5 + static_cast<int>(seed);
    Matrixd spd = ska::random_spd(n, seed, 2.0);
    spd.diagonal().array() += 1e-3;
    auto f = ska::cholesky<double>(spd, 1e-4);
    for (int i = 0; i < n; ++i) {
      CHECK(f.l(i, i) > 0.0);
      for (int j = i + 1; j < n; ++j) CHECK(f.l(i, j) == 0.0);
    }
    const double rel = (f.l * f.l.transpose() - spd).norm() / spd.norm();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("solve_lower examples") {
  Matrixd b(2, 1);
  b << 3.0, 4.0;
  Matrixd x = ska::solve_lower<double>(Matrixd::Identity(2, 2), b);
  CHECK((x - b).cwiseAbs().maxCoeff() == 0.0);

  Matrixd d = Matrixd::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  Matrixd rhs(2, 1);
  rhs << 2.0, 8.0;
  Matrixd y = ska::solve_lower<double>(d, rhs);
  CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("solve_lower residual on a random 8x8 system") {
  Matrixd l = ska::random_matrix(8, 8, 7);
  l = l.triangularView<Eigen::Lower>();
  l.diagonal().array() = l.diagonal().array().abs() + 1.0;
  Matrixd b = ska::random_matrix(8, 3, 8);
  Matrixd x = ska::solve_lower<double>(l, b);
  CHECK((l * x - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("solve_lower flags singular diagonals and shape errors") {
  Matrixd l = Matrixd::Identity(2, 2);
  l(1, 1) = 0.0;
  CHECK_THROWS_AS(ska::solve_lower<double>(l, Matrixd::Identity(2, 2)),
                  ska::SingularDiagonal);
  CHECK_THROWS_AS(ska::solve_lower<double>(Matrixd::Identity(2, 2), Matrixd::Zero(3, 1)),
                  ska::DimensionMismatch);
}

TEST_CASE("solve_upper examples and the two-solve SPD route") {
  Matrixd x = ska::solve_upper<double>(Matrixd::Identity(3, 3), Matrixd::Identity(3, 3));
  CHECK((x - Matrixd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

  Matrixd u(1, 1);
  u << 5.0;
  Matrixd b(1, 1);
  b << 10.0;
  CHECK(ska::solve_upper<double>(u, b)(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  // solve_upper(L^T, solve_lower(L, b)) equals a dense-inverse oracle
  Matrixd gt = ska::random_spd(6, 21, 1.0);
  gt.diagonal().array() += 1e-3;
  auto f = ska::cholesky<double>(gt, 1e-4);
  Matrixd rhs = ska::random_matrix(6, 2, 22);
  Matrixd via_solves =
      ska::solve_upper<double>(f.l.transpose(), ska::solve_lower<double>(f.l, rhs));
  Matrixd via_inverse = gt.inverse() * rhs;
  CHECK((via_solves - via_inverse).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("power iteration: zero matrix returns exactly zero") {
  CHECK(ska::power_iteration_sigma_max<double>(Matrixd::Zero(4, 4), 6, 1) == 0.0);
}

TEST_CASE("power iteration: dominant singular value of diag(3,1)") {
  Matrixd a = Matrixd::Zero(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0;
  CHECK(ska::power_iteration_sigma_max<double>(a, 6, 3) ==
        doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("power iteration matches the SVD oracle on a random 24x24 matrix") {
  Matrixd a = ska::random_matrix(24, 24, 5);
  const double est = ska::power_iteration_sigma_max<double>(a, 50, 5);
  const double oracle = ska::spectral_norm_oracle(a);
  CHECK(std::abs(est - oracle) / oracle < 1e-8);
}

TEST_CASE("power iteration estimates are monotone and Frobenius-bounded") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Matrixd a = ska::random_spd(10, 100 + seed, 1.0);  // symmetric PSD
    double prev = 0.0;
    for (int iters = 1; iters <= 12; ++iters) {
      const double est = ska::power_iteration_sigma_max<double>(a, iters, 9);
      CHECK(est >= prev - 1e-12);
      CHECK(est <= a.norm() * (1.0 + 1e-12));
      prev = est;
    }
  }
}

TEST_CASE("Cholesky factor norms follow the Gram spectrum") {
  // ||L||_2 = sqrt(lmax(G~)) and ||L^{-1}||_2 = 1/sqrt(lmin(G~))
  Matrixd gt = ska::random_spd(12, 77, 1.5);
  gt.diagonal().array() += 1e-3;
  auto f = ska::cholesky<double>(gt, 1e-4);
  Eigen::SelfAdjointEigenSolver<Matrixd> es(gt);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  CHECK(ska::spectral_norm_oracle(f.l) == doctest::Approx(std::sqrt(lmax)).epsilon(1e-8));
  Matrixd l_inv = ska::solve_lower<double>(f.l, Matrixd::Identity(12, 12));
  CHECK(ska::spectral_norm_oracle(l_inv) ==
        doctest::Approx(1.0 / std::sqrt(lmin)).epsilon(1e-8));
}
