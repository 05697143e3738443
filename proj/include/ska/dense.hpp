#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ska/errors.hpp"

namespace ska {

// Dense row-major storage throughout; ranks stay small (r <= 64 in every
// configuration of interest) so there is no blocking or sparsity anywhere.
template <class Scalar>
using DenseMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using DenseVector = Eigen::Vector<Scalar, Eigen::Dynamic>;

using Matrixd = DenseMatrix<double>;
using Vectord = DenseVector<double>;

template <class Scalar>
struct CholeskyFactor {
  DenseMatrix<Scalar> l;        // lower triangular, strictly positive diagonal
  bool jitter_applied = false;  // set when the factorization needed the retry
};

namespace detail {

template <class Scalar>
constexpr Scalar symmetry_tol() {
  return std::is_same_v<Scalar, float> ? Scalar(1e-5) : Scalar(1e-12);
}

// Deterministic unit vector from a seed. Uses raw mt19937_64 output mapped to
// [-1, 1) so the result does not depend on libstdc++ distribution internals.
template <class Scalar>
DenseVector<Scalar> seeded_unit_vector(Eigen::Index n, std::uint64_t seed) {
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;
  auto next = [&state]() {
    // splitmix64
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  DenseVector<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    v[i] = static_cast<Scalar>(2.0 * u - 1.0);
  }
  const Scalar nv = v.norm();
  if (nv > Scalar(0)) {
    v /= nv;
  } else {
    v.setZero();
    v[0] = Scalar(1);
  }
  return v;
}

}  // namespace detail

// Cholesky factorization A = L L^T with a single jittered retry (A + jitter*I)
// when the first attempt is not numerically positive definite.
template <class Scalar>
CholeskyFactor<Scalar> cholesky(const DenseMatrix<Scalar>& a, Scalar jitter) {
  if (a.rows() != a.cols()) {
    throw NonSquare("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()));
  }
  const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > detail::symmetry_tol<Scalar>()) {
    throw NonSymmetric("cholesky: |A - A^T| = " + std::to_string(asym));
  }

  Eigen::LLT<DenseMatrix<Scalar>> llt(a);
  if (llt.info() == Eigen::Success) {
    CholeskyFactor<Scalar> f;
    f.l = llt.matrixL();
    f.jitter_applied = false;
    return f;
  }

  DenseMatrix<Scalar> jittered = a;
  jittered.diagonal().array() += jitter;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: factorization failed after jitter retry");
  }
  CholeskyFactor<Scalar> f;
  f.l = llt.matrixL();
  f.jitter_applied = true;
  return f;
}

// Forward substitution: returns X with L X = B.
template <class Scalar>
DenseMatrix<Scalar> solve_lower(const DenseMatrix<Scalar>& l,
                                const DenseMatrix<Scalar>& b) {
  if (l.rows() != l.cols()) throw NonSquare("solve_lower: L not square");
  if (l.rows() != b.rows()) {
    throw DimensionMismatch("solve_lower: L is " + std::to_string(l.rows()) +
                            "x" + std::to_string(l.cols()) + ", B has " +
                            std::to_string(b.rows()) + " rows");
  }
  if (l.diagonal().cwiseAbs().minCoeff() < Scalar(1e-300)) {
    throw SingularDiagonal("solve_lower: diagonal entry below 1e-300");
  }
  return l.template triangularView<Eigen::Lower>().solve(b);
}

// Back substitution: returns X with U X = B.
template <class Scalar>
DenseMatrix<Scalar> solve_upper(const DenseMatrix<Scalar>& u,
                                const DenseMatrix<Scalar>& b) {
  if (u.rows() != u.cols()) throw NonSquare("solve_upper: U not square");
  if (u.rows() != b.rows()) {
    throw DimensionMismatch("solve_upper: U is " + std::to_string(u.rows()) +
                            "x" + std::to_string(u.cols()) + ", B has " +
                            std::to_string(b.rows()) + " rows");
  }
  if (u.diagonal().cwiseAbs().minCoeff() < Scalar(1e-300)) {
    throw SingularDiagonal("solve_upper: diagonal entry below 1e-300");
  }
  return u.template triangularView<Eigen::Upper>().solve(b);
}

// Largest singular value estimated by iterating v <- normalize(A^T (A v))
// from a seed-dependent start vector. An exactly zero matrix returns 0.
template <class Scalar>
Scalar power_iteration_sigma_max(const DenseMatrix<Scalar>& a, int iters,
                                 std::uint64_t seed) {
  if (a.rows() != a.cols()) throw NonSquare("power_iteration: matrix not square");
  if (iters < 1) throw InvalidParams("power_iteration: iters must be >= 1");
  if (a.isZero(Scalar(0))) return Scalar(0);

  DenseVector<Scalar> v = detail::seeded_unit_vector<Scalar>(a.rows(), seed);
  for (int k = 0; k < iters; ++k) {
    DenseVector<Scalar> w = a * v;
    DenseVector<Scalar> next = a.transpose() * w;
    const Scalar n = next.norm();
    if (!(n > Scalar(0))) {
      // start vector fell in the null space; the estimate from here is 0
      return (a * v).norm();
    }
    v = next / n;
  }
  return (a * v).norm();
}

}  // namespace ska
