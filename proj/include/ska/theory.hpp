#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ska/dense.hpp"

namespace ska {

// Result of one numerical bound verification. For multi-trial checks, lhs and
// rhs report the trial with the smallest margin; satisfied requires every
// trial to pass.
struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double margin = 0.0;  // rhs - lhs at the reported trial
  long trials = 0;
};

BoundReport make_report(const std::string& name, double lhs, double rhs,
                        long trials = 1);

// Oracle-grade helpers. Complex eigendecomposition lives only in this module;
// the production retrieval path never touches it.
Eigen::VectorXcd eigenvalues_oracle(const Matrixd& a);
std::vector<double> eigenvalue_moduli(const Matrixd& a);
double spectral_norm_oracle(const Matrixd& a);
double sigma_min_oracle(const Matrixd& a);
Matrixd random_orthogonal(int n, std::uint64_t seed);
Matrixd random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0);
Matrixd random_spd(int n, std::uint64_t seed, double scale = 1.0);

// Main-text operator order M G~^{-1} (oracle-side only; the retrieval path
// always uses the whitened form, which is similar to this one).
Matrixd unwhitened_operator(const Matrixd& m, const Matrixd& g_tilde);

// Largest |lambda_a - lambda_b| after sorting both spectra by (modulus, phase).
double max_eigenvalue_mismatch(const Matrixd& a, const Matrixd& b);

// Power filter attenuation |lambda|^K over the reference moduli grid
// {0.95, 0.90, 0.70, 0.50, 0.30}; k in {2, 4}.
std::vector<std::pair<double, double>> check_power_table(int k);
// Same table validated at 3 printed decimals against the reference values.
BoundReport check_power_table_report(int k);

// ||A_hat - A|| <= ||E_M||*||Gh~^{-1}|| + ||A||*||G~^{-1}||*||E_G||*||Gh~^{-1}||*||G~||
BoundReport check_operator_perturbation(int trials, int r, double noise_scale,
                                        std::uint64_t seed);

// Every eigenvalue of A+E lies within kappa(V)*||E|| of an eigenvalue of A.
BoundReport check_bauer_fike(int trials, int r, std::uint64_t seed);

// Raw-phase lag statistics cancel (|mean of e^{i dtheta}| < 3/sqrt(T)) while
// the invariant lift is phase-independent exactly.
BoundReport check_phase_conditioning(int trials, std::uint64_t seed);

// Persistent/transient split bound for normal operators, plus the sufficient
// condition under which the K>0 filter beats K=0 on a persistent target.
BoundReport check_persistent_transient(int r, double delta, double rho, int k,
                                       std::uint64_t seed);

// Best affine fit to the saturating softmax rule has a large residual while
// any fixed-statistic linear retrieval map fits its own samples exactly.
BoundReport check_expressivity_gap(double beta, int grid);

// Exact softmax-attention Jacobian vs central differences; simplex-factor
// norm bounds; one-hot rows give an exactly zero Jacobian; S(q) 1 = 0.
BoundReport check_softmax_gradient(int trials, int t, int r, int p,
                                   std::uint64_t seed);

// Depth-wise composition: ||g_l|| bounded by the product of per-branch norm
// bounds (softmax, retrieval, feedforward branches).
struct LayerSpec {
  enum class Kind { softmax, ska, kmlp, identity } kind = Kind::identity;
  int dim = 16;
};
BoundReport check_depth_bound(const std::vector<LayerSpec>& specs,
                              std::uint64_t seed);

// rank(G_L W) <= min(rank(G_L), rank(W)).
BoundReport check_lm_head_rank(int trials, std::uint64_t seed);

// L(B) - L(B*) = ||(B - B*) G~^{1/2}||_F^2 on random data.
BoundReport check_excess_risk(int trials, std::uint64_t seed);

// min_a ||y_lin - a*y_ridge|| <= ||C_v|| (kappa-1)/(kappa+1) ||q||, with the
// closed-form minimizer a* = 2*lmin*lmax/(lmin+lmax) verified by scanning a.
BoundReport check_linear_vs_ridge_gap(int trials, std::uint64_t seed);

// (1/eta) y_ska - y_ridge = B*(Phi_K - I) q exactly.
BoundReport check_power_filter_bias(int trials, std::uint64_t seed);

// sigma_min(J_ska) >= eta sigma_min(B_v) nu^K sqrt(eps/(||G||+eps)) in the
// full-rank regime.
BoundReport check_sigma_min_bound(int trials, std::uint64_t seed);

// Ridge shrinkage: on diagonal G the operator column scales by s_j/(s_j+eps).
BoundReport check_ridge_shrinkage(std::uint64_t seed);

// One gradient step of size 1/2 from B=0 lands exactly on C_v.
BoundReport check_linear_one_step(std::uint64_t seed);

// The fixed-seed default suite; every report must come back satisfied.
std::vector<BoundReport> run_bound_suite(std::uint64_t seed);

}  // namespace ska
