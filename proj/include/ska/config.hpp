#pragma once

#include <string>

#include "ska/errors.hpp"

namespace ska {

// Retrieval hyperparameters shared by the statistics, operator, and engine
// layers. Defaults follow the reference configuration; validate() enforces
// the documented ranges before anything downstream runs.
struct SkaConfig {
  int rank_r = 32;        // key/query projection rank r
  int head_dim_p = 32;    // value head dimension P
  double ridge_eps = 1e-3;
  int power_k = 2;        // power filter order K
  double gamma = 1.0;     // spectral restoration scale, in [1.0, 1.5]
  double eta = 1.5;       // output scale
  int chunk_size_s = 64;  // chunk size for chunk-causal mode
  int power_iters = 6;    // power iteration count for sigma_max
  double jitter = 1e-4;   // Cholesky fallback jitter

  void validate() const {
    if (rank_r < 1) throw InvalidParams("rank_r must be >= 1");
    if (head_dim_p < 1) throw InvalidParams("head_dim_p must be >= 1");
    if (!(ridge_eps > 0.0)) throw InvalidParams("ridge_eps must be > 0");
    if (power_k < 0) throw InvalidParams("power_k must be >= 0");
    if (gamma < 1.0 || gamma > 1.5)
      throw InvalidParams("gamma must lie in [1.0, 1.5], got " + std::to_string(gamma));
    if (!(eta > 0.0)) throw InvalidParams("eta must be > 0");
    if (chunk_size_s < 2) throw InvalidParams("chunk_size_s must be >= 2");
    if (power_iters < 1) throw InvalidParams("power_iters must be >= 1");
    if (jitter < 0.0) throw InvalidParams("jitter must be >= 0");
  }
};

}  // namespace ska
