#include <doctest.h>

#include <cmath>

#include "ska/operator.hpp"
#include "ska/theory.hpp"

using ska::Matrixd;
using ska::SkaConfig;
using ska::Vectord;

namespace {

SkaConfig make_cfg(int r, int p) {
  SkaConfig cfg;
  cfg.rank_r = r;
  cfg.head_dim_p = p;
  return cfg;
}

Vectord basis(int r, int i) {
  Vectord e = Vectord::Zero(r);
  e[i] = 1.0;
  return e;
}

struct RandomStats {
  ska::SufficientStats<double> stats;
  SkaConfig cfg;
};

RandomStats random_stats(int r, int p, int t, std::uint64_t seed) {
  RandomStats out;
  out.cfg = make_cfg(r, p);
  std::vector<Vectord> keys, values;
  for (int i = 0; i < t; ++i) {
    keys.push_back(ska::random_matrix(r, 1, seed + i).col(0));
    Vectord v = ska::random_matrix(p, 1, seed + 5000 + i).col(0);
    values.push_back(v / v.norm());
  }
  auto norm = ska::sequence_max_normalize<double>(keys, {});
  out.stats = ska::accumulate_prefix(norm.keys, values, out.cfg);
  return out;
}

}  // namespace

TEST_CASE("empty context estimates the trivial operator") {
  const int r = 4, p = 3;
  auto cfg = make_cfg(r, p);
  ska::SufficientStats<double> stats(r, p);
  auto op = ska::estimate(stats, cfg);
  CHECK((op.l.l - std::sqrt(cfg.ridge_eps) * Matrixd::Identity(r, r))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK(op.a_hat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.b_v.cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.sigma_max_raw == 0.0);
}

TEST_CASE("single-token value map is the hand ridge solve") {
  const int r = 3, p = 2;
  auto cfg = make_cfg(r, p);
  Vectord u(p);
  u << 2.0, -1.0;
  auto stats = ska::accumulate_prefix<double>({basis(r, 0)}, {u}, cfg);
  auto op = ska::estimate(stats, cfg);
  Matrixd expected = (u / (1.0 + cfg.ridge_eps)) * basis(r, 0).transpose();
  CHECK((op.b_v - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("whitened and unwhitened operators share their spectrum") {
  auto [stats, cfg] = random_stats(24, 8, 100, 7);
  Matrixd gt = stats.g();
  gt.diagonal().array() += cfg.ridge_eps;

  // production route: L^{-1} M L^{-T} through the triangular solves
  auto f = ska::cholesky<double>(gt, cfg.jitter);
  Matrixd y = ska::solve_lower<double>(f.l, stats.m());
  Matrixd a_w = ska::solve_lower<double>(f.l, y.transpose()).transpose();

  // oracle route: M (G + eps I)^{-1}
  Matrixd a_eps = ska::unwhitened_operator(stats.m(), gt);

  CHECK(ska::max_eigenvalue_mismatch(a_w, a_eps) < 1e-8);

  // the estimate() output rescales A_w by gamma / max(sigma, 1)
  auto op = ska::estimate(stats, cfg);
  Matrixd recovered = op.a_hat * (std::max(op.sigma_max_raw, 1.0) / cfg.gamma);
  CHECK(ska::max_eigenvalue_mismatch(recovered, a_eps) < 1e-8);
}

TEST_CASE("K = 0 retrieval is exactly the ridge predictor") {
  auto [stats, cfg] = random_stats(12, 6, 64, 17);
  cfg.power_k = 0;
  cfg.eta = 1.0;
  auto op = ska::estimate(stats, cfg);
  Vectord q = ska::random_matrix(12, 1, 18).col(0);
  Vectord via_ska = ska::retrieve_ska(op, q);
  Vectord via_ridge = ska::retrieve_ridge(stats, q, cfg);
  CHECK((via_ska - via_ridge).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("an annihilated transition map zeroes the filtered output") {
  const int r = 4, p = 2;
  auto cfg = make_cfg(r, p);
  cfg.power_k = 2;
  Vectord u(p);
  u << 1.0, 1.0;
  // single token: no lag pair exists, so M = 0 and a_hat = 0
  auto stats = ska::accumulate_prefix<double>({basis(r, 1)}, {u}, cfg);
  auto op = ska::estimate(stats, cfg);
  CHECK(op.a_hat.cwiseAbs().maxCoeff() == 0.0);
  Vectord q = ska::random_matrix(r, 1, 19).col(0);
  CHECK(ska::retrieve_ska(op, q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("K = 2 retrieval matches the dense matrix-chain oracle") {
  auto [stats, cfg] = random_stats(10, 5, 80, 23);
  cfg.power_k = 2;
  auto op = ska::estimate(stats, cfg);
  Vectord q = ska::random_matrix(10, 1, 24).col(0);

  Matrixd l_inv = op.l.l.inverse();
  Matrixd chain = cfg.eta * op.b_v * op.l.l * op.a_hat * op.a_hat * l_inv;
  CHECK((ska::retrieve_ska(op, q) - chain * q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear retrieval reads the value-key covariance") {
  const int r = 4, p = 3;
  auto cfg = make_cfg(r, p);
  Vectord u(p);
  u << 3.0, 1.0, -2.0;
  auto stats = ska::accumulate_prefix<double>({basis(r, 0)}, {u}, cfg);
  CHECK((ska::retrieve_linear(stats, basis(r, 0)) - u).cwiseAbs().maxCoeff() == 0.0);
  Vectord zero_q = Vectord::Zero(r);
  CHECK(ska::retrieve_linear(stats, zero_q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("on isotropic Grams, c * ridge equals linear retrieval") {
  // keys: each basis direction once, scaled so G + eps I = c I
  const int r = 6, p = 3;
  auto cfg = make_cfg(r, p);
  const double s = 0.8;
  std::vector<Vectord> keys, values;
  for (int i = 0; i < r; ++i) {
    keys.push_back(s * basis(r, i));
    values.push_back(ska::random_matrix(p, 1, 31 + i).col(0));
  }
  auto stats = ska::accumulate_prefix(keys, values, cfg);
  const double c = s * s + cfg.ridge_eps;
  Vectord q = ska::random_matrix(r, 1, 37).col(0);
  Vectord lin = ska::retrieve_linear(stats, q);
  Vectord ridge = ska::retrieve_ridge(stats, q, cfg);
  CHECK((lin - c * ridge).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge retrieval on orthonormal keys recovers shrunk values") {
  const int r = 8, p = 4;
  auto cfg = make_cfg(r, p);
  std::vector<Vectord> keys, values;
  for (int i = 0; i < 5; ++i) {
    keys.push_back(basis(r, i));
    values.push_back(ska::random_matrix(p, 1, 41 + i).col(0));
  }
  auto stats = ska::accumulate_prefix(keys, values, cfg);
  for (int j = 0; j < 5; ++j) {
    Vectord y = ska::retrieve_ridge(stats, keys[j], cfg);
    CHECK((y - values[j] / (1.0 + cfg.ridge_eps)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("large-eps ridge shrinks toward C_v q / eps") {
  auto [stats, cfg] = random_stats(6, 3, 40, 47);
  cfg.ridge_eps = 1e9;
  Vectord q = ska::random_matrix(6, 1, 48).col(0);
  Vectord y = ska::retrieve_ridge(stats, q, cfg);
  Vectord limit = ska::retrieve_linear(stats, q) / cfg.ridge_eps;
  // agreement up to the second-order term ||G||/eps
  CHECK((y - limit).norm() < 1e-6 * limit.norm());
}

TEST_CASE("ridge matches the dense normal-equation oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [stats, cfg] =
        random_stats(5 + seed % 12, 4, 30 + 7 * (seed % 9), 100 + seed);
    Matrixd gt = stats.g();
    gt.diagonal().array() += cfg.ridge_eps;
    Eigen::SelfAdjointEigenSolver<Matrixd> es(gt);
    Vectord q = ska::random_matrix(stats.rank(), 1, 300 + seed).col(0);
    Vectord oracle = stats.c_v() * (es.eigenvectors() *
                                    ((es.eigenvectors().transpose() * q).array() /
                                     es.eigenvalues().array())
                                        .matrix());
    CHECK((ska::retrieve_ridge(stats, q, cfg) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("normal equations hold for the estimated value map") {
  auto [stats, cfg] = random_stats(14, 6, 90, 53);
  auto op = ska::estimate(stats, cfg);
  Matrixd gt = stats.g();
  gt.diagonal().array() += cfg.ridge_eps;
  const double rel =
      (op.b_v * gt - stats.c_v()).norm() / std::max(1.0, stats.c_v().norm());
  CHECK(rel < 1e-9);
}

TEST_CASE("jacobian at K = 0 collapses to eta B_v") {
  auto [stats, cfg] = random_stats(9, 4, 50, 59);
  cfg.power_k = 0;
  auto op = ska::estimate(stats, cfg);
  CHECK((ska::ska_jacobian(op) - cfg.eta * op.b_v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian matches central finite differences") {
  auto [stats, cfg] = random_stats(8, 5, 60, 61);
  cfg.power_k = 2;
  auto op = ska::estimate(stats, cfg);
  Matrixd jac = ska::ska_jacobian(op);

  const double h = 1e-6;
  Matrixd fd(5, 8);
  Vectord q = ska::random_matrix(8, 1, 62).col(0);
  for (int j = 0; j < 8; ++j) {
    Vectord qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    fd.col(j) = (ska::retrieve_ska(op, qp) - ska::retrieve_ska(op, qm)) / (2.0 * h);
  }
  CHECK((jac - fd).norm() / jac.norm() < 1e-8);

  // linearity: J q reproduces the retrieval itself
  CHECK((jac * q - ska::retrieve_ska(op, q)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full-rank regime: jacobian rank equals r") {
  // P >= r, full-rank C_v, invertible a_hat
  auto [stats, cfg] = random_stats(6, 10, 80, 67);
  cfg.power_k = 2;
  auto op = ska::estimate(stats, cfg);
  REQUIRE(ska::sigma_min_oracle(op.a_hat) > 0.0);
  Matrixd jac = ska::ska_jacobian(op);
  Eigen::JacobiSVD<Matrixd> svd(jac);
  const double thresh = 1e-10 * svd.singularValues().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    rank += svd.singularValues()[i] > thresh ? 1 : 0;
  }
  CHECK(rank == 6);
}

TEST_CASE("power filter contractivity after spectral normalization") {
  for (double gamma : {1.0, 1.25, 1.5}) {
    auto [stats, cfg] = random_stats(10, 4, 70, 71);
    cfg.gamma = gamma;
    auto op = ska::estimate(stats, cfg);

    CHECK(ska::spectral_norm_oracle(op.a_hat) <= gamma + 1e-6);
    Matrixd normalized = op.a_hat / gamma;
    Matrixd pow = Matrixd::Identity(10, 10);
    for (int k = 1; k <= 4; ++k) {
      pow = normalized * pow;
      CHECK(ska::spectral_norm_oracle(pow) <= 1.0 + 1e-6);
    }
    Matrixd hat2 = op.a_hat * op.a_hat;
    CHECK(ska::spectral_norm_oracle(hat2) <= gamma * gamma * (1.0 + 1e-6));
    CHECK(gamma * gamma <= 2.25 + 1e-12);
  }
}
