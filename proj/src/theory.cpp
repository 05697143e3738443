#include "ska/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ska/config.hpp"
#include "ska/koopman_mlp.hpp"
#include "ska/operator.hpp"
#include "ska/stats.hpp"

namespace ska {

namespace {

// Deterministic Gaussian sampler (Box-Muller on raw mt19937_64 bits).
class TRng {
 public:
  explicit TRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform_pm1() { return 2.0 * uniform() - 1.0; }

  double gauss() {
    if (have_) {
      have_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double rr = std::sqrt(-2.0 * std::log(u1));
    cached_ = rr * std::sin(2.0 * M_PI * u2);
    have_ = true;
    return rr * std::cos(2.0 * M_PI * u2);
  }

  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_ = false;
  double cached_ = 0.0;
};

Matrixd random_matrix_rng(int rows, int cols, TRng& rng, double scale) {
  Matrixd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.gauss();
  return m;
}

Vectord random_vector_rng(int n, TRng& rng, double scale = 1.0) {
  Vectord v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.gauss();
  return v;
}

Vectord softmax(const Vectord& s) {
  // scalar std::exp so saturated logits underflow to exactly 0 and a fully
  // saturated softmax is exactly one-hot
  const double mx = s.maxCoeff();
  Vectord e = s.unaryExpr([mx](double x) { return std::exp(x - mx); });
  return e / e.sum();
}

// Random instance of the retrieval problem built through the production
// statistics path (normalized keys, unit-norm values).
struct Instance {
  SufficientStats<double> stats;
  SkaConfig cfg;
  std::vector<Vectord> keys, values;
};

Instance random_instance(TRng& rng, int r, int p, int t_len) {
  Instance inst;
  inst.cfg.rank_r = r;
  inst.cfg.head_dim_p = p;
  std::vector<Vectord> raw_keys;
  for (int t = 0; t < t_len; ++t) raw_keys.push_back(random_vector_rng(r, rng));
  auto norm = sequence_max_normalize<double>(raw_keys, {});
  inst.keys = norm.keys;
  for (int t = 0; t < t_len; ++t) {
    Vectord v = random_vector_rng(p, rng);
    inst.values.push_back(v / v.norm());
  }
  inst.stats = accumulate_prefix(inst.keys, inst.values, inst.cfg);
  inst.stats.max_norm = norm.max_norm;
  return inst;
}

}  // namespace

BoundReport make_report(const std::string& name, double lhs, double rhs,
                        long trials) {
  BoundReport r;
  r.name = name;
  r.lhs = lhs;
  r.rhs = rhs;
  r.satisfied = lhs <= rhs * (1.0 + 1e-9);
  r.margin = rhs - lhs;
  r.trials = trials;
  return r;
}

Eigen::VectorXcd eigenvalues_oracle(const Matrixd& a) {
  Eigen::EigenSolver<Matrixd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues();
}

std::vector<double> eigenvalue_moduli(const Matrixd& a) {
  Eigen::VectorXcd ev = eigenvalues_oracle(a);
  std::vector<double> out(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) out[i] = std::abs(ev[i]);
  std::sort(out.begin(), out.end());
  return out;
}

double spectral_norm_oracle(const Matrixd& a) {
  return Eigen::JacobiSVD<Matrixd>(a).singularValues().maxCoeff();
}

double sigma_min_oracle(const Matrixd& a) {
  return Eigen::JacobiSVD<Matrixd>(a).singularValues().minCoeff();
}

Matrixd random_orthogonal(int n, std::uint64_t seed) {
  TRng rng(seed);
  Matrixd a = random_matrix_rng(n, n, rng, 1.0);
  Eigen::HouseholderQR<Matrixd> qr(a);
  return qr.householderQ() * Matrixd::Identity(n, n);
}

Matrixd random_matrix(int rows, int cols, std::uint64_t seed, double scale) {
  TRng rng(seed);
  return random_matrix_rng(rows, cols, rng, scale);
}

Matrixd random_spd(int n, std::uint64_t seed, double scale) {
  TRng rng(seed);
  Matrixd b = random_matrix_rng(n, n, rng, 1.0);
  return scale * (b * b.transpose()) / double(n);
}

Matrixd unwhitened_operator(const Matrixd& m, const Matrixd& g_tilde) {
  return m * g_tilde.inverse();
}

double max_eigenvalue_mismatch(const Matrixd& a, const Matrixd& b) {
  Eigen::VectorXcd ea = eigenvalues_oracle(a);
  Eigen::VectorXcd eb = eigenvalues_oracle(b);
  auto key = [](const std::complex<double>& z) {
    return std::make_pair(std::abs(z), std::arg(z));
  };
  std::vector<std::complex<double>> va(ea.data(), ea.data() + ea.size());
  std::vector<std::complex<double>> vb(eb.data(), eb.data() + eb.size());
  auto cmp = [&key](const std::complex<double>& x, const std::complex<double>& y) {
    return key(x) < key(y);
  };
  std::sort(va.begin(), va.end(), cmp);
  std::sort(vb.begin(), vb.end(), cmp);
  double worst = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    worst = std::max(worst, std::abs(va[i] - vb[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<double, double>> check_power_table(int k) {
  if (k != 2 && k != 4) throw InvalidParams("check_power_table: k must be 2 or 4");
  const double moduli[] = {0.95, 0.90, 0.70, 0.50, 0.30};
  std::vector<std::pair<double, double>> table;
  for (double m : moduli) table.emplace_back(m, std::pow(m, k));
  return table;
}

BoundReport check_power_table_report(int k) {
  const std::vector<double> expected =
      k == 2 ? std::vector<double>{0.902, 0.810, 0.490, 0.250, 0.090}
             : std::vector<double>{0.815, 0.656, 0.240, 0.063, 0.008};
  auto table = check_power_table(k);
  // exact at 3 printed decimals: the reference is a valid 3-decimal rounding
  // of the computed attenuation (half-way ties may round either direction)
  double worst = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    worst = std::max(worst, std::abs(table[i].second - expected[i]));
  }
  return make_report("power-table-k" + std::to_string(k), worst, 0.0005, 5);
}

BoundReport check_operator_perturbation(int trials, int r, double noise_scale,
                                        std::uint64_t seed) {
  TRng rng(seed);
  const double eps = 1e-3;
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;
  for (int trial = 0; trial < trials; ++trial) {
    Matrixd g = random_matrix_rng(r, r, rng, 1.0);
    // keep lambda_min well above the noise scale so G~ + E_G stays PD for
    // every trial at the documented noise levels
    Matrixd gt = (g * g.transpose()) / double(r);
    gt.diagonal().array() += 0.25 + eps;
    Matrixd m = random_matrix_rng(r, r, rng, 1.0);

    Matrixd eg_half = random_matrix_rng(r, r, rng, noise_scale);
    Matrixd eg = 0.5 * (eg_half + eg_half.transpose());
    Matrixd em = random_matrix_rng(r, r, rng, noise_scale);

    Matrixd gt_hat = gt + eg;
    Eigen::SelfAdjointEigenSolver<Matrixd> es(gt_hat);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw PerturbationTooLarge("check_operator_perturbation: G~+E_G not PD");
    }

    Matrixd a = m * gt.inverse();
    Matrixd a_hat = (m + em) * gt_hat.inverse();

    const double lhs = spectral_norm_oracle(a_hat - a);
    const double rhs =
        spectral_norm_oracle(em) * spectral_norm_oracle(gt_hat.inverse()) +
        spectral_norm_oracle(a) * spectral_norm_oracle(gt.inverse()) *
            spectral_norm_oracle(eg) * spectral_norm_oracle(gt_hat.inverse()) *
            spectral_norm_oracle(gt);
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }
  }
  BoundReport rep = make_report("operator-perturbation", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_bauer_fike(int trials, int r, std::uint64_t seed) {
  TRng rng(seed);
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;
  for (int trial = 0; trial < trials; ++trial) {
    const bool normal_case = trial % 2 == 0;
    Matrixd v;
    if (normal_case) {
      v = random_orthogonal(r, rng.raw());
    } else {
      do {
        v = random_matrix_rng(r, r, rng, 1.0);
      } while (spectral_norm_oracle(v) / sigma_min_oracle(v) > 1e4);
    }
    Vectord lambda = random_vector_rng(r, rng);
    Matrixd a = normal_case ? Matrixd(v * lambda.asDiagonal() * v.transpose())
                            : Matrixd(v * lambda.asDiagonal() * v.inverse());
    Matrixd e = random_matrix_rng(r, r, rng, 1e-3);

    const double kappa =
        normal_case ? 1.0 : spectral_norm_oracle(v) / sigma_min_oracle(v);
    const double rhs = kappa * spectral_norm_oracle(e);

    Eigen::VectorXcd perturbed = eigenvalues_oracle(a + e);
    double lhs = 0.0;
    for (Eigen::Index i = 0; i < perturbed.size(); ++i) {
      double dist = std::numeric_limits<double>::infinity();
      for (int j = 0; j < r; ++j) {
        dist = std::min(dist, std::abs(perturbed[i] - std::complex<double>(lambda[j])));
      }
      lhs = std::max(lhs, dist);
    }
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }
  }
  BoundReport rep = make_report("bauer-fike", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_phase_conditioning(int trials, std::uint64_t seed) {
  TRng rng(seed);
  const int t_len = 10000;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    // raw-phase cancellation: sample mean of e^{i dtheta}
    std::complex<double> mean(0.0, 0.0);
    for (int t = 0; t < t_len; ++t) {
      const double dtheta = 2.0 * M_PI * rng.uniform();
      mean += std::exp(std::complex<double>(0.0, dtheta));
    }
    mean /= double(t_len);
    worst_ratio = std::max(worst_ratio, std::abs(mean) / (3.0 / std::sqrt(double(t_len))));

    // invariant lift is phase-independent exactly
    const int pairs = 4, t_small = 64;
    std::vector<Vectord> content;
    for (int t = 0; t < t_small; ++t) content.push_back(random_vector_rng(2 * pairs, rng));
    Matrixd reference;
    for (int draw = 0; draw < 10; ++draw) {
      std::vector<Vectord> lifted;
      for (int t = 0; t < t_small; ++t) {
        Vectord rotated(2 * pairs);
        for (int j = 0; j < pairs; ++j) {
          const double th = 2.0 * M_PI * rng.uniform();
          const double c = std::cos(th), s = std::sin(th);
          rotated[2 * j] = c * content[t][2 * j] - s * content[t][2 * j + 1];
          rotated[2 * j + 1] = s * content[t][2 * j] + c * content[t][2 * j + 1];
        }
        lifted.push_back(invariant_lift(rotated));
      }
      Matrixd m_lift = Matrixd::Zero(pairs, pairs);
      for (int t = 1; t < t_small; ++t) {
        m_lift += lifted[t] * lifted[t - 1].transpose();
      }
      if (draw == 0) {
        reference = m_lift;
      } else {
        const double diff = (m_lift - reference).cwiseAbs().maxCoeff();
        worst_ratio = std::max(worst_ratio, diff / 1e-12);
      }
    }
  }
  return make_report("phase-conditioning", worst_ratio, 1.0, trials);
}

BoundReport check_persistent_transient(int r, double delta, double rho, int k,
                                       std::uint64_t seed) {
  TRng rng(seed);
  const int trials = 500;
  const double eta = 1.5;
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;

  for (int trial = 0; trial < trials; ++trial) {
    // normal operator with prescribed persistent/transient spectrum
    Matrixd u = random_orthogonal(r, rng.raw());
    const int n_pers = r / 2;
    Vectord lambda(r);
    for (int i = 0; i < r; ++i) {
      lambda[i] = i < n_pers ? 1.0 - delta * rng.uniform()
                             : rho * rng.uniform_pm1();
    }
    Matrixd a_hat = u * lambda.asDiagonal() * u.transpose();

    Matrixd gt = random_spd(r, rng.raw(), 1.0);
    gt.diagonal().array() += 1e-3;
    CholeskyFactor<double> chol = cholesky<double>(gt, 1e-4);

    const int p = r;
    Matrixd q_iso = random_orthogonal(p, rng.raw());
    Matrixd c_v = q_iso * chol.l.transpose();  // so C_v L^{-T} is an isometry

    Vectord alpha_pers = Vectord::Zero(r), alpha_trans = Vectord::Zero(r);
    for (int i = 0; i < n_pers; ++i) alpha_pers[i] = 0.1 * rng.gauss();
    for (int i = n_pers; i < r; ++i) alpha_trans[i] = rng.gauss();
    Vectord q_pers = u * alpha_pers;
    Vectord q_trans = u * alpha_trans;
    Vectord q_w = q_pers + q_trans;
    Vectord query = chol.l.template triangularView<Eigen::Lower>() * q_w;

    KoopmanOperator<double> op;
    op.l = chol;
    op.a_hat = a_hat;
    op.b_v = solve_upper<double>(chol.l.transpose(),
                                 solve_lower<double>(chol.l, c_v.transpose()))
                 .transpose();
    op.sigma_max_raw = spectral_norm_oracle(a_hat);
    op.gamma = 1.0;
    op.eta = eta;
    op.power_k = k;

    Vectord y_scaled = retrieve_ska(op, query) / eta;
    Matrixd cvlmt = c_v * solve_upper<double>(chol.l.transpose(),
                                              Matrixd::Identity(r, r));
    Vectord target = cvlmt * q_pers;

    const double lhs = (y_scaled - target).norm();
    const double rhs = spectral_norm_oracle(cvlmt) *
                       ((std::pow(1.0 + delta, k) - 1.0) * q_pers.norm() +
                        std::pow(rho, k) * q_trans.norm());
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }

    // sufficient condition: when ((1+d)^K - 1)||q_p|| < (1 - rho^K)||q_t||,
    // the measured K-step error beats the measured K=0 error
    if ((std::pow(1.0 + delta, k) - 1.0) * q_pers.norm() <
        (1.0 - std::pow(rho, k)) * q_trans.norm()) {
      KoopmanOperator<double> op0 = op;
      op0.power_k = 0;
      Vectord y0 = retrieve_ska(op0, query) / eta;
      const double err_k = (y_scaled - target).norm();
      const double err_0 = (y0 - target).norm();
      all_ok = all_ok && err_k < err_0;
    }
  }
  BoundReport rep = make_report("persistent-transient", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_expressivity_gap(double beta, int grid) {
  if (grid < 3) throw InvalidParams("check_expressivity_gap: grid too small");

  auto affine_residual = [grid](auto f) {
    // least-squares fit f(q) ~ a*q + b over the grid, max abs residual
    double sqq = 0, sq = 0, sn = grid, sfq = 0, sf = 0;
    std::vector<double> qs(grid), fs(grid);
    for (int i = 0; i < grid; ++i) {
      const double q = -1.0 + 2.0 * double(i) / double(grid - 1);
      qs[i] = q;
      fs[i] = f(q);
      sqq += q * q;
      sq += q;
      sfq += fs[i] * q;
      sf += fs[i];
    }
    const double det = sqq * sn - sq * sq;
    const double a = (sfq * sn - sf * sq) / det;
    const double b = (sqq * sf - sq * sfq) / det;
    double worst = 0.0;
    for (int i = 0; i < grid; ++i) {
      worst = std::max(worst, std::abs(a * qs[i] + b - fs[i]));
    }
    return worst;
  };

  const double softmax_resid =
      affine_residual([beta](double q) { return 1.0 / (1.0 + std::exp(-2.0 * beta * q)); });

  // a fixed-statistic retrieval map is linear in the query: fit its own samples
  TRng rng(0xE59ull);
  Instance inst = random_instance(rng, 1, 1, 8);
  KoopmanOperator<double> op = estimate(inst.stats, inst.cfg);
  const double ska_resid = affine_residual([&](double q) {
    Vectord qv = Vectord::Constant(1, q);
    return retrieve_ska(op, qv)[0];
  });

  double worst_ratio = ska_resid / 1e-12;
  if (beta >= 2.0) {
    worst_ratio = std::max(worst_ratio, 1e-3 / softmax_resid);
  }
  BoundReport rep = make_report("expressivity-gap", worst_ratio, 1.0, 1);
  return rep;
}

BoundReport check_softmax_gradient(int trials, int t, int r, int p,
                                   std::uint64_t seed) {
  TRng rng(seed);
  const double sqrt_dk = std::sqrt(double(r));
  double worst_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Matrixd keys = random_matrix_rng(t, r, rng, 1.0);
    Matrixd vals = random_matrix_rng(t, p, rng, 1.0);
    Vectord q = random_vector_rng(r, rng);

    auto attn = [&](const Vectord& query) -> Vectord {
      return vals.transpose() * softmax(keys * query / sqrt_dk);
    };

    Vectord alpha = softmax(keys * q / sqrt_dk);
    Matrixd s = Matrixd(alpha.asDiagonal()) - alpha * alpha.transpose();
    Matrixd jac = vals.transpose() * s * keys / sqrt_dk;

    // central finite differences
    const double h = 1e-6;
    Matrixd jac_fd(p, r);
    for (int j = 0; j < r; ++j) {
      Vectord qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      jac_fd.col(j) = (attn(qp) - attn(qm)) / (2.0 * h);
    }
    const double fd_rel = (jac - jac_fd).norm() / std::max(1.0, jac.norm());
    worst_ratio = std::max(worst_ratio, fd_rel / 1e-6);

    // simplex factor norm bounds and row-sum kernel
    const double s_norm = spectral_norm_oracle(s);
    const double bound = std::min(0.5, 2.0 * (1.0 - alpha.maxCoeff()));
    worst_ratio = std::max(worst_ratio, s_norm / bound);
    const double ones_residual = (s * Vectord::Ones(t)).cwiseAbs().maxCoeff();
    worst_ratio = std::max(worst_ratio, ones_residual / 1e-12);

    // exactly one-hot attention kills the Jacobian
    Vectord hot_logits = Vectord::Zero(t);
    hot_logits[trial % t] = 1e4;
    Vectord hot = softmax(hot_logits);
    Matrixd s_hot = Matrixd(hot.asDiagonal()) - hot * hot.transpose();
    Matrixd j_hot = vals.transpose() * s_hot * keys / sqrt_dk;
    if (j_hot.cwiseAbs().maxCoeff() != 0.0) worst_ratio = std::max(worst_ratio, 2.0);
  }
  return make_report("softmax-gradient", worst_ratio, 1.0, trials);
}

BoundReport check_depth_bound(const std::vector<LayerSpec>& specs,
                              std::uint64_t seed) {
  TRng rng(seed);
  const int trials = 500;
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;

  for (int trial = 0; trial < trials; ++trial) {
    double bound_product = 1.0;
    std::vector<Matrixd> jacobians;
    for (const LayerSpec& spec : specs) {
      const int d = spec.dim;
      switch (spec.kind) {
        case LayerSpec::Kind::softmax: {
          const int t_len = 12;
          Matrixd keys = random_matrix_rng(t_len, d, rng, 1.0);
          Matrixd vals = random_matrix_rng(t_len, d, rng, 1.0);
          Vectord q = random_vector_rng(d, rng);
          Vectord alpha = softmax(keys * q / std::sqrt(double(d)));
          Matrixd s = Matrixd(alpha.asDiagonal()) - alpha * alpha.transpose();
          jacobians.push_back(vals.transpose() * s * keys / std::sqrt(double(d)));
          bound_product *= spectral_norm_oracle(vals) * spectral_norm_oracle(keys) /
                           (2.0 * std::sqrt(double(d)));
          break;
        }
        case LayerSpec::Kind::ska: {
          Instance inst = random_instance(rng, d, d, 4 * d);
          KoopmanOperator<double> op = estimate(inst.stats, inst.cfg);
          jacobians.push_back(ska_jacobian(op));
          const double g_norm = spectral_norm_oracle(inst.stats.g());
          bound_product *= inst.cfg.eta * spectral_norm_oracle(op.b_v) *
                           std::pow(inst.cfg.gamma, inst.cfg.power_k) *
                           std::sqrt((g_norm + inst.cfg.ridge_eps) / inst.cfg.ridge_eps);
          break;
        }
        case LayerSpec::Kind::kmlp: {
          SpectralBlockBank bank = make_bank(d, rng.raw());
          Vectord h = random_vector_rng(d, rng);
          jacobians.push_back(mlp_jacobian(bank, h));
          bound_product *= silu_prime_sup() * spectral_norm_oracle(bank.readout) *
                           spectral_norm_oracle(bank.lift);
          break;
        }
        case LayerSpec::Kind::identity:
          jacobians.push_back(Matrixd::Identity(d, d));
          bound_product *= 1.0;
          break;
      }
    }
    Vectord g_head = random_vector_rng(specs.back().dim, rng);
    Vectord g = g_head;
    for (auto it = jacobians.rbegin(); it != jacobians.rend(); ++it) {
      g = it->transpose() * g;
    }
    const double lhs = g.norm();
    const double rhs = bound_product * g_head.norm();
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }
  }
  BoundReport rep = make_report("depth-bound", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_lm_head_rank(int trials, std::uint64_t seed) {
  TRng rng(seed);
  bool all_ok = true;
  double worst_lhs = 0.0, worst_rhs = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int c = rng.uniform_int(4, 10), vocab = rng.uniform_int(6, 14),
              d = rng.uniform_int(3, 8);
    const int rank_g = rng.uniform_int(1, std::min(c, vocab));
    const int rank_w = rng.uniform_int(1, std::min(vocab, d));
    Matrixd g_l = random_matrix_rng(c, rank_g, rng, 1.0) *
                  random_matrix_rng(rank_g, vocab, rng, 1.0);
    Matrixd w = random_matrix_rng(vocab, rank_w, rng, 1.0) *
                random_matrix_rng(rank_w, d, rng, 1.0);
    Matrixd g_h = g_l * w;

    auto numeric_rank = [](const Matrixd& m) {
      Eigen::JacobiSVD<Matrixd> svd(m);
      const auto& sv = svd.singularValues();
      const double thresh = sv.maxCoeff() * 1e-10;
      int rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > thresh ? 1 : 0;
      return rank;
    };
    const double lhs = numeric_rank(g_h);
    const double rhs = std::min(numeric_rank(g_l), numeric_rank(w));
    all_ok = all_ok && lhs <= rhs;
    if (trial == 0 || rhs - lhs < worst_rhs - worst_lhs) {
      worst_lhs = lhs;
      worst_rhs = rhs;
    }
  }
  BoundReport rep = make_report("lm-head-rank", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_excess_risk(int trials, std::uint64_t seed) {
  TRng rng(seed);
  double worst_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int r = rng.uniform_int(2, 16), p = rng.uniform_int(1, 8);
    const int t_len = rng.uniform_int(r, 128);
    Instance inst = random_instance(rng, r, p, t_len);

    Matrixd gt = inst.stats.g();
    gt.diagonal().array() += inst.cfg.ridge_eps;
    KoopmanOperator<double> op = estimate(inst.stats, inst.cfg);
    const Matrixd& b_star = op.b_v;
    Matrixd b = random_matrix_rng(p, r, rng, 1.0);

    auto objective = [&](const Matrixd& bm) {
      double loss = 0.0;
      for (std::size_t t = 0; t < inst.keys.size(); ++t) {
        loss += (inst.values[t] - bm * inst.keys[t]).squaredNorm();
      }
      return loss + inst.cfg.ridge_eps * bm.squaredNorm();
    };

    Eigen::SelfAdjointEigenSolver<Matrixd> es(gt);
    Matrixd sqrt_gt = es.operatorSqrt();
    const double excess = objective(b) - objective(b_star);
    const double frob = ((b - b_star) * sqrt_gt).squaredNorm();
    const double diff = std::abs(excess - frob);
    worst_ratio = std::max(worst_ratio, diff / (1e-9 * std::max(1.0, std::abs(excess))));
  }
  return make_report("excess-risk", worst_ratio, 1.0, trials);
}

BoundReport check_linear_vs_ridge_gap(int trials, std::uint64_t seed) {
  TRng rng(seed);
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;
  for (int trial = 0; trial < trials; ++trial) {
    const int r = rng.uniform_int(2, 16), p = rng.uniform_int(1, 8);
    Instance inst = random_instance(rng, r, p, rng.uniform_int(r, 128));
    Vectord q = random_vector_rng(r, rng);

    Vectord y_lin = retrieve_linear(inst.stats, q);
    Vectord y_ridge = retrieve_ridge(inst.stats, q, inst.cfg);

    Matrixd gt = inst.stats.g();
    gt.diagonal().array() += inst.cfg.ridge_eps;
    Eigen::SelfAdjointEigenSolver<Matrixd> es(gt);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const double kappa = lmax / lmin;
    const double a_star = 2.0 * lmin * lmax / (lmin + lmax);
    const double rhs = spectral_norm_oracle(inst.stats.c_v()) *
                       ((kappa - 1.0) / (kappa + 1.0)) * q.norm();

    double best = (y_lin - a_star * y_ridge).norm();
    for (int i = 0; i <= 200; ++i) {
      const double a = 2.0 * lmax * double(i) / 200.0;
      best = std::min(best, (y_lin - a * y_ridge).norm());
    }
    const double lhs = best;
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9) &&
             (y_lin - a_star * y_ridge).norm() <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }
  }
  BoundReport rep = make_report("linear-vs-ridge", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_power_filter_bias(int trials, std::uint64_t seed) {
  TRng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int r = rng.uniform_int(2, 16), p = rng.uniform_int(1, 8);
    Instance inst = random_instance(rng, r, p, rng.uniform_int(r, 96));
    inst.cfg.power_k = 2;
    KoopmanOperator<double> op = estimate(inst.stats, inst.cfg);
    Vectord q = random_vector_rng(r, rng);

    Vectord lhs_vec = retrieve_ska(op, q) / inst.cfg.eta -
                      retrieve_ridge(inst.stats, q, inst.cfg);

    Matrixd pow_k = op.a_hat * op.a_hat;
    Matrixd l_inv = solve_lower<double>(op.l.l, Matrixd::Identity(r, r));
    Matrixd phi = op.l.l.triangularView<Eigen::Lower>() * (pow_k * l_inv);
    Vectord rhs_vec = op.b_v * ((phi - Matrixd::Identity(r, r)) * q);

    worst = std::max(worst, (lhs_vec - rhs_vec).cwiseAbs().maxCoeff());
  }
  return make_report("power-filter-bias", worst, 1e-10, trials);
}

BoundReport check_sigma_min_bound(int trials, std::uint64_t seed) {
  TRng rng(seed);
  double worst_lhs = 0.0, worst_rhs = 0.0, worst_margin = 0.0;
  bool all_ok = true, first = true;
  for (int trial = 0; trial < trials; ++trial) {
    const int r = rng.uniform_int(2, 10);
    const int p = r + rng.uniform_int(0, 6);  // full-rank regime needs P >= r
    Instance inst = random_instance(rng, r, p, rng.uniform_int(2 * r, 128));
    inst.cfg.power_k = 2;
    KoopmanOperator<double> op = estimate(inst.stats, inst.cfg);

    const double nu = sigma_min_oracle(op.a_hat);
    if (nu <= 0.0) continue;
    Matrixd jac = ska_jacobian(op);
    const double g_norm = spectral_norm_oracle(inst.stats.g());
    const double lhs = inst.cfg.eta * sigma_min_oracle(op.b_v) *
                       std::pow(nu, inst.cfg.power_k) *
                       std::sqrt(inst.cfg.ridge_eps / (g_norm + inst.cfg.ridge_eps));
    const double rhs = sigma_min_oracle(jac);
    const double margin = rhs - lhs;
    all_ok = all_ok && lhs <= rhs * (1.0 + 1e-9);
    if (first || margin < worst_margin) {
      worst_lhs = lhs;
      worst_rhs = rhs;
      worst_margin = margin;
      first = false;
    }
  }
  BoundReport rep = make_report("sigma-min-bound", worst_lhs, worst_rhs, trials);
  rep.satisfied = rep.satisfied && all_ok;
  return rep;
}

BoundReport check_ridge_shrinkage(std::uint64_t seed) {
  TRng rng(seed);
  const int r = 8;
  const double eps = 1e-3;
  Vectord sigma(r);
  for (int i = 0; i < r; ++i) sigma[i] = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
  Matrixd g = sigma.asDiagonal();
  Matrixd m = random_matrix_rng(r, r, rng, 1.0);

  Matrixd gt = g;
  gt.diagonal().array() += eps;
  Matrixd a_eps = m * gt.inverse();
  Matrixd a_bare = m * g.inverse();

  double worst = 0.0;
  for (int j = 0; j < r; ++j) {
    const double shrink = sigma[j] / (sigma[j] + eps);
    worst = std::max(worst,
                     (a_eps.col(j) - shrink * a_bare.col(j)).cwiseAbs().maxCoeff());
  }
  return make_report("ridge-shrinkage", worst, 1e-10, 1);
}

BoundReport check_linear_one_step(std::uint64_t seed) {
  TRng rng(seed);
  const int r = 6, p = 4;
  Instance inst = random_instance(rng, r, p, 32);
  Matrixd c_v = inst.stats.c_v();

  // gradient of the ridge objective at B = 0 is -2 C_v; one step of size 1/2
  Matrixd b0 = Matrixd::Zero(p, r);
  Matrixd gt = inst.stats.g();
  gt.diagonal().array() += inst.cfg.ridge_eps;
  Matrixd grad = -2.0 * c_v + 2.0 * b0 * gt;
  Matrixd b1 = b0 - 0.5 * grad;

  Vectord q = random_vector_rng(r, rng);
  const double diff_b = (b1 - c_v).cwiseAbs().maxCoeff();
  const double diff_y = (b1 * q - retrieve_linear(inst.stats, q)).cwiseAbs().maxCoeff();
  return make_report("linear-one-step", std::max(diff_b, diff_y), 0.0, 1);
}

std::vector<BoundReport> run_bound_suite(std::uint64_t seed) {
  std::vector<BoundReport> reports;
  reports.push_back(check_power_table_report(2));
  reports.push_back(check_power_table_report(4));
  reports.push_back(check_operator_perturbation(1000, 16, 1e-3, seed + 1));
  reports.push_back(check_bauer_fike(500, 12, seed + 2));
  reports.push_back(check_phase_conditioning(5, seed + 3));
  reports.push_back(check_persistent_transient(16, 0.05, 0.3, 2, seed + 4));
  reports.push_back(check_expressivity_gap(2.0, 101));
  reports.push_back(check_softmax_gradient(500, 12, 8, 6, seed + 5));
  reports.push_back(check_depth_bound(
      {{LayerSpec::Kind::softmax, 12}, {LayerSpec::Kind::ska, 12},
       {LayerSpec::Kind::kmlp, 12}},
      seed + 6));
  reports.push_back(check_lm_head_rank(500, seed + 7));
  reports.push_back(check_excess_risk(500, seed + 8));
  reports.push_back(check_linear_vs_ridge_gap(500, seed + 9));
  reports.push_back(check_power_filter_bias(500, seed + 10));
  reports.push_back(check_sigma_min_bound(500, seed + 11));
  reports.push_back(check_ridge_shrinkage(seed + 12));
  reports.push_back(check_linear_one_step(seed + 13));
  return reports;
}

}  // namespace ska
