#pragma once

#include <algorithm>
#include <cstdint>

#include "ska/config.hpp"
#include "ska/dense.hpp"
#include "ska/stats.hpp"

namespace ska {

namespace detail {
// Fixed start seed for the spectral-norm power iteration inside estimate();
// SkaConfig carries no seed, and estimation must be deterministic.
inline constexpr std::uint64_t kPowerIterationSeed = 0x51ca0eULL;
}  // namespace detail

// Estimated per-context retrieval operator:
//   G~ = G + eps*I = L L^T
//   A_w = L^{-1} M L^{-T}            (whitened transition; similar to M G~^{-1})
//   a_hat = gamma * A_w / max(sigma_max, 1)
//   B_v solves G~ X = C_v^T, B_v = X^T  (ridge value map)
template <class Scalar>
struct KoopmanOperator {
  CholeskyFactor<Scalar> l;
  DenseMatrix<Scalar> a_hat;  // r x r
  DenseMatrix<Scalar> b_v;    // P x r
  Scalar sigma_max_raw = Scalar(0);
  Scalar gamma = Scalar(1);
  Scalar eta = Scalar(1);
  int power_k = 0;

  int rank() const { return static_cast<int>(a_hat.rows()); }
  int head_dim() const { return static_cast<int>(b_v.rows()); }
};

template <class Scalar>
KoopmanOperator<Scalar> estimate(const SufficientStats<Scalar>& stats,
                                 const SkaConfig& cfg) {
  DenseMatrix<Scalar> gt = stats.g();
  gt.diagonal().array() += Scalar(cfg.ridge_eps);

  KoopmanOperator<Scalar> op;
  op.l = cholesky<Scalar>(gt, Scalar(cfg.jitter));
  const DenseMatrix<Scalar>& l = op.l.l;

  // A_w = L^{-1} M L^{-T} via two forward substitutions
  DenseMatrix<Scalar> y = solve_lower<Scalar>(l, stats.m());
  DenseMatrix<Scalar> a_w = solve_lower<Scalar>(l, y.transpose()).transpose();

  op.sigma_max_raw = power_iteration_sigma_max<Scalar>(a_w, cfg.power_iters,
                                                       detail::kPowerIterationSeed);
  const Scalar denom = std::max(op.sigma_max_raw, Scalar(1));
  op.a_hat = a_w * (Scalar(cfg.gamma) / denom);

  DenseMatrix<Scalar> cvt = stats.c_v().transpose();
  DenseMatrix<Scalar> x =
      solve_upper<Scalar>(l.transpose(), solve_lower<Scalar>(l, cvt));
  op.b_v = x.transpose();

  op.gamma = Scalar(cfg.gamma);
  op.eta = Scalar(cfg.eta);
  op.power_k = cfg.power_k;
  return op;
}

// Full retrieval map: whiten the query, apply the power filter as K
// matrix-vector products, un-whiten, read out through the value map.
template <class Scalar>
DenseVector<Scalar> retrieve_ska(const KoopmanOperator<Scalar>& op,
                                 const DenseVector<Scalar>& query) {
  if (query.size() != op.rank()) {
    throw DimensionMismatch("retrieve_ska: query dim != rank");
  }
  DenseVector<Scalar> w = solve_lower<Scalar>(op.l.l, query);
  for (int k = 0; k < op.power_k; ++k) {
    w = op.a_hat * w;
  }
  DenseVector<Scalar> z =
      op.l.l.template triangularView<Eigen::Lower>() * w;
  return op.eta * (op.b_v * z);
}

// One unpreconditioned gradient step from zero: y = C_v q.
template <class Scalar>
DenseVector<Scalar> retrieve_linear(const SufficientStats<Scalar>& stats,
                                    const DenseVector<Scalar>& query) {
  if (query.size() != stats.rank()) {
    throw DimensionMismatch("retrieve_linear: query dim != rank");
  }
  return stats.c_v() * query;
}

// Ridge predictor y = C_v (G + eps I)^{-1} q via Cholesky solves; equal to
// retrieve_ska with K = 0 and eta = 1 up to rounding.
template <class Scalar>
DenseVector<Scalar> retrieve_ridge(const SufficientStats<Scalar>& stats,
                                   const DenseVector<Scalar>& query,
                                   const SkaConfig& cfg) {
  if (query.size() != stats.rank()) {
    throw DimensionMismatch("retrieve_ridge: query dim != rank");
  }
  DenseMatrix<Scalar> gt = stats.g();
  gt.diagonal().array() += Scalar(cfg.ridge_eps);
  CholeskyFactor<Scalar> f = cholesky<Scalar>(gt, Scalar(cfg.jitter));
  DenseMatrix<Scalar> x = solve_upper<Scalar>(
      f.l.transpose(), solve_lower<Scalar>(f.l, DenseMatrix<Scalar>(query)));
  return stats.c_v() * x.col(0);
}

// Closed-form query Jacobian J = eta * B_v L a_hat^K L^{-1}. The retrieval
// map is linear, so J q == retrieve_ska(q) for every q.
template <class Scalar>
DenseMatrix<Scalar> ska_jacobian(const KoopmanOperator<Scalar>& op) {
  const int r = op.rank();
  DenseMatrix<Scalar> pow = DenseMatrix<Scalar>::Identity(r, r);
  for (int k = 0; k < op.power_k; ++k) {
    pow = op.a_hat * pow;
  }
  DenseMatrix<Scalar> l_inv =
      solve_lower<Scalar>(op.l.l, DenseMatrix<Scalar>::Identity(r, r));
  DenseMatrix<Scalar> chain =
      op.l.l.template triangularView<Eigen::Lower>() * (pow * l_inv);
  return op.eta * (op.b_v * chain);
}

}  // namespace ska
