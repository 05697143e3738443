#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ska/dense.hpp"
#include "ska/errors.hpp"

namespace ska {

// Feedforward block that lifts, gates through SiLU, evolves pairs by complex
// eigenvalues clamped to the unit disk, and reads out with a residual:
//   g = SiLU(lift h),  (z1, z2)_i = (g_i*g1 + w_i*g2, -w_i*g1 + g_i*g2),
//   out = h + readout z   (optionally gated by sigmoid(gate h) before readout)
struct SpectralBlockBank {
  std::vector<std::pair<double, double>> pairs;  // (gamma_i, omega_i), d_k/2 of them
  Matrixd lift;     // d_k x d
  Matrixd readout;  // d x d_k
  bool gated = false;
  Matrixd gate;     // d_k x d when gated

  int dim() const { return static_cast<int>(lift.cols()); }
  int lifted() const { return static_cast<int>(lift.rows()); }
};

// d_k = ceil(d * (8/3) / 64) * 64, always even.
inline int lifted_dim(int d) {
  if (d < 1) throw InvalidParams("lifted_dim: d must be >= 1");
  return static_cast<int>((static_cast<long>(d) * 8 + 191) / 192) * 64;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_prime(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Supremum of |SiLU'| located by a 1-D scan over [-10, 10] at 1e-4 steps,
// computed once (~1.0998 near x = 2.4).
inline double silu_prime_sup() {
  static const double sup = [] {
    double best = 0.0;
    for (long i = -100000; i <= 100000; ++i) {
      best = std::max(best, std::abs(silu_prime(static_cast<double>(i) * 1e-4)));
    }
    return best;
  }();
  return sup;
}

// Rescale each pair by min(1, 1/rho) so moduli are <= 1; phases unchanged.
inline std::vector<std::pair<double, double>> clamp_eigenvalues(
    std::vector<std::pair<double, double>> pairs) {
  for (auto& [g, w] : pairs) {
    const double rho = std::sqrt(g * g + w * w);
    if (rho > 1.0) {
      g /= rho;
      w /= rho;
    }
  }
  return pairs;
}

namespace detail {

inline double uniform_pm1(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

inline Matrixd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale,
                              std::uint64_t& state) {
  Matrixd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * uniform_pm1(state);
  return m;
}

}  // namespace detail

// Fixed-seed uniform init scaled by 1/sqrt(fan-in); eigenvalues sampled in
// [-1,1]^2 and clamped to the unit disk at construction.
inline SpectralBlockBank make_bank(int d, std::uint64_t seed, bool gated = false) {
  const int dk = lifted_dim(d);
  std::uint64_t state = seed;
  SpectralBlockBank bank;
  bank.lift = detail::uniform_matrix(dk, d, 1.0 / std::sqrt(double(d)), state);
  bank.readout = detail::uniform_matrix(d, dk, 1.0 / std::sqrt(double(dk)), state);
  bank.pairs.reserve(dk / 2);
  for (int i = 0; i < dk / 2; ++i) {
    bank.pairs.emplace_back(detail::uniform_pm1(state), detail::uniform_pm1(state));
  }
  bank.pairs = clamp_eigenvalues(std::move(bank.pairs));
  bank.gated = gated;
  if (gated) {
    bank.gate = detail::uniform_matrix(dk, d, 1.0 / std::sqrt(double(d)), state);
  }
  return bank;
}

inline Vectord forward(const SpectralBlockBank& bank, const Vectord& h) {
  if (h.size() != bank.dim()) throw DimensionMismatch("forward: input dim mismatch");
  Vectord a = bank.lift * h;
  Vectord g = a.unaryExpr([](double x) { return silu(x); });
  Vectord z(bank.lifted());
  for (std::size_t i = 0; i < bank.pairs.size(); ++i) {
    const auto [ga, om] = bank.pairs[i];
    const double g1 = g[2 * i], g2 = g[2 * i + 1];
    z[2 * i] = ga * g1 + om * g2;
    z[2 * i + 1] = -om * g1 + ga * g2;
  }
  if (bank.gated) {
    Vectord s = (bank.gate * h).unaryExpr(
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    z.array() *= s.array();
  }
  return h + bank.readout * z;
}

// Explicit block-diagonal rotation with blocks [[g, w], [-w, g]]. Each block
// satisfies R_i^T R_i = rho_i^2 I_2, so ||R||_2 = max_i rho_i <= 1 after clamp.
inline Matrixd rotation_matrix(const SpectralBlockBank& bank) {
  const int dk = bank.lifted();
  Matrixd r = Matrixd::Zero(dk, dk);
  for (std::size_t i = 0; i < bank.pairs.size(); ++i) {
    const auto [ga, om] = bank.pairs[i];
    r(2 * i, 2 * i) = ga;
    r(2 * i, 2 * i + 1) = om;
    r(2 * i + 1, 2 * i) = -om;
    r(2 * i + 1, 2 * i + 1) = ga;
  }
  return r;
}

// Branch Jacobian J = readout * R * Diag(SiLU'(lift h)) * lift, ungated.
// The full block Jacobian is I + J.
inline Matrixd mlp_jacobian(const SpectralBlockBank& bank, const Vectord& h) {
  if (h.size() != bank.dim()) throw DimensionMismatch("mlp_jacobian: input dim mismatch");
  Vectord a = bank.lift * h;
  Vectord d = a.unaryExpr([](double x) { return silu_prime(x); });
  Matrixd r = rotation_matrix(bank);
  return bank.readout * (r * d.asDiagonal() * bank.lift);
}

}  // namespace ska
