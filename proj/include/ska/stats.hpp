#pragma once

#include <optional>
#include <vector>

#include "ska/config.hpp"
#include "ska/dense.hpp"
#include "ska/errors.hpp"

namespace ska {

// Neumaier-compensated elementwise accumulator. The streaming statistics are
// exact sums of rank-1 terms; keeping a running compensation makes every
// accumulation route (token-sequential fold, per-chunk sums merged with
// boundary terms, split-and-continue) collapse to the correctly rounded total,
// so additivity and chunk reassembly hold entrywise to well below 1e-15.
// Compensation is accumulation workspace only and is never serialized.
template <class Scalar>
struct CompensatedMatrix {
  DenseMatrix<Scalar> sum;
  DenseMatrix<Scalar> comp;

  CompensatedMatrix() = default;
  CompensatedMatrix(Eigen::Index rows, Eigen::Index cols)
      : sum(DenseMatrix<Scalar>::Zero(rows, cols)),
        comp(DenseMatrix<Scalar>::Zero(rows, cols)) {}

  template <class Derived>
  void add(const Eigen::MatrixBase<Derived>& term) {
    DenseMatrix<Scalar> x = term;
    DenseMatrix<Scalar> t = sum + x;
    comp.array() += (sum.array().abs() >= x.array().abs())
                        .select((sum - t).array() + x.array(),
                                (x - t).array() + sum.array());
    sum.swap(t);
  }

  // rank-1 update sum += a b^T without temporaries; hot path of the
  // per-token streaming update
  void add_outer(const DenseVector<Scalar>& a, const DenseVector<Scalar>& b) {
    const Eigen::Index rows = sum.rows(), cols = sum.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Scalar ai = a[i];
      Scalar* srow = sum.data() + i * cols;
      Scalar* crow = comp.data() + i * cols;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const Scalar x = ai * b[j];
        const Scalar s = srow[j];
        const Scalar t = s + x;
        crow[j] += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        srow[j] = t;
      }
    }
  }

  void add_compensated(const CompensatedMatrix& other) {
    add(other.sum);
    add(other.comp);
  }

  DenseMatrix<Scalar> value() const { return sum + comp; }
};

// Streaming second-order statistics: key Gram G, lag-one cross-covariance M,
// value-key covariance C_v, previous key, shared max norm, token count.
// Ridge regularization is applied at operator-estimation time, never stored.
template <class Scalar>
struct SufficientStats {
  CompensatedMatrix<Scalar> g_acc;   // r x r
  CompensatedMatrix<Scalar> m_acc;   // r x r
  CompensatedMatrix<Scalar> cv_acc;  // P x r
  std::optional<DenseVector<Scalar>> prev_key;
  Scalar max_norm = Scalar(0);
  long count = 0;

  SufficientStats() = default;
  SufficientStats(int rank, int head_dim)
      : g_acc(rank, rank), m_acc(rank, rank), cv_acc(head_dim, rank) {}

  int rank() const { return static_cast<int>(g_acc.sum.rows()); }
  int head_dim() const { return static_cast<int>(cv_acc.sum.rows()); }

  DenseMatrix<Scalar> g() const { return g_acc.value(); }
  DenseMatrix<Scalar> m() const { return m_acc.value(); }
  DenseMatrix<Scalar> c_v() const { return cv_acc.value(); }
};

// One token of the O(1) recurrent update:
//   G += z z^T,  M += z z_prev^T,  C_v += v z^T,  z_prev = z.
// The per-token order (G, then M, then C_v) is shared by every accumulation
// path so that split-and-continue reproduces a single pass bit for bit.
template <class Scalar>
void accumulate_step(SufficientStats<Scalar>& s, const DenseVector<Scalar>& key,
                     const DenseVector<Scalar>& value) {
  if (key.size() != s.rank() || value.size() != s.head_dim()) {
    throw DimensionMismatch("accumulate_step: feature dims do not match stats");
  }
  s.g_acc.add_outer(key, key);
  if (s.prev_key) {
    s.m_acc.add_outer(key, *s.prev_key);
  }
  s.cv_acc.add_outer(value, key);
  s.prev_key = key;
  ++s.count;
}

template <class Scalar>
struct NormalizedFeatures {
  std::vector<DenseVector<Scalar>> keys;
  std::vector<DenseVector<Scalar>> queries;
  Scalar max_norm = Scalar(0);
};

// Divide keys and queries by the shared factor max_t ||z_t|| over the keys,
// clamped at 1e-6. Relative norm structure among keys is preserved exactly.
template <class Scalar>
NormalizedFeatures<Scalar> sequence_max_normalize(
    const std::vector<DenseVector<Scalar>>& keys,
    const std::vector<DenseVector<Scalar>>& queries) {
  if (keys.empty()) throw InvalidParams("sequence_max_normalize: no keys");
  Scalar m = Scalar(0);
  for (const auto& k : keys) m = std::max(m, Scalar(k.norm()));
  m = std::max(m, Scalar(1e-6));
  NormalizedFeatures<Scalar> out;
  out.max_norm = m;
  out.keys.reserve(keys.size());
  out.queries.reserve(queries.size());
  for (const auto& k : keys) out.keys.push_back(k / m);
  for (const auto& q : queries) out.queries.push_back(q / m);
  return out;
}

namespace detail {

template <class Scalar>
void check_token_dims(const std::vector<DenseVector<Scalar>>& keys,
                      const std::vector<DenseVector<Scalar>>& values,
                      const SkaConfig& cfg) {
  if (keys.size() != values.size() || keys.empty()) {
    throw DimensionMismatch("statistics: need equal, nonempty key/value lists");
  }
  for (const auto& k : keys) {
    if (k.size() != cfg.rank_r) throw DimensionMismatch("statistics: key dim != rank_r");
  }
  for (const auto& v : values) {
    if (v.size() != cfg.head_dim_p)
      throw DimensionMismatch("statistics: value dim != head_dim_p");
  }
}

}  // namespace detail

// Whole-prefix accumulation: a token-sequential fold of accumulate_step.
// Keys are expected to be normalized already; max_norm is assigned upstream.
template <class Scalar>
SufficientStats<Scalar> accumulate_prefix(
    const std::vector<DenseVector<Scalar>>& keys,
    const std::vector<DenseVector<Scalar>>& values, const SkaConfig& cfg) {
  detail::check_token_dims(keys, values, cfg);
  SufficientStats<Scalar> s(cfg.rank_r, cfg.head_dim_p);
  for (std::size_t t = 0; t < keys.size(); ++t) {
    accumulate_step(s, keys[t], values[t]);
  }
  return s;
}

// Masked accumulation. G and C_v sum positions with mask 1; M sums lag pairs
// whose endpoints are both masked in (adjacent in the original sequence).
template <class Scalar>
SufficientStats<Scalar> accumulate_masked(
    const std::vector<DenseVector<Scalar>>& keys,
    const std::vector<DenseVector<Scalar>>& values,
    const std::vector<std::uint8_t>& mask, const SkaConfig& cfg) {
  detail::check_token_dims(keys, values, cfg);
  if (mask.size() != keys.size()) {
    throw DimensionMismatch("accumulate_masked: mask length != token count");
  }
  bool any = false;
  for (auto b : mask) any = any || (b != 0);
  if (!any) throw EmptyMask("accumulate_masked: no position is masked in");

  SufficientStats<Scalar> s(cfg.rank_r, cfg.head_dim_p);
  for (std::size_t t = 0; t < keys.size(); ++t) {
    if (!mask[t]) continue;
    s.g_acc.add_outer(keys[t], keys[t]);
    if (t > 0 && mask[t - 1]) {
      s.m_acc.add_outer(keys[t], keys[t - 1]);
    }
    s.cv_acc.add_outer(values[t], keys[t]);
    s.prev_key = keys[t];
    ++s.count;
  }
  return s;
}

// Per-chunk partial sums. Within-chunk M excludes each chunk's first position;
// first/last normalized keys are retained (2r floats per chunk) so boundary
// lag terms can be formed without revisiting tokens.
template <class Scalar>
struct ChunkAccum {
  CompensatedMatrix<Scalar> g, m, cv;
  DenseVector<Scalar> first_key, last_key;
  long count = 0;
};

template <class Scalar>
struct ChunkStats {
  std::vector<ChunkAccum<Scalar>> per_chunk;
  int chunk_size = 0;
  int rank = 0;
  int head_dim = 0;

  std::size_t num_chunks() const { return per_chunk.size(); }
};

template <class Scalar>
ChunkStats<Scalar> chunk_statistics(const std::vector<DenseVector<Scalar>>& keys,
                                    const std::vector<DenseVector<Scalar>>& values,
                                    const SkaConfig& cfg) {
  detail::check_token_dims(keys, values, cfg);
  const std::size_t t_total = keys.size();
  const std::size_t s_chunk = static_cast<std::size_t>(cfg.chunk_size_s);

  ChunkStats<Scalar> out;
  out.chunk_size = cfg.chunk_size_s;
  out.rank = cfg.rank_r;
  out.head_dim = cfg.head_dim_p;
  const std::size_t n_chunks = (t_total + s_chunk - 1) / s_chunk;
  out.per_chunk.reserve(n_chunks);

  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t begin = c * s_chunk;
    const std::size_t end = std::min(begin + s_chunk, t_total);
    ChunkAccum<Scalar> acc;
    acc.g = CompensatedMatrix<Scalar>(cfg.rank_r, cfg.rank_r);
    acc.m = CompensatedMatrix<Scalar>(cfg.rank_r, cfg.rank_r);
    acc.cv = CompensatedMatrix<Scalar>(cfg.head_dim_p, cfg.rank_r);
    for (std::size_t t = begin; t < end; ++t) {
      acc.g.add_outer(keys[t], keys[t]);
      if (t > begin) {
        acc.m.add_outer(keys[t], keys[t - 1]);
      }
      acc.cv.add_outer(values[t], keys[t]);
    }
    acc.first_key = keys[begin];
    acc.last_key = keys[end - 1];
    acc.count = static_cast<long>(end - begin);
    out.per_chunk.push_back(std::move(acc));
  }
  return out;
}

// Exclusive prefix over chunks 0..c-1 plus cross-chunk boundary lag terms
// z_{i,0} z_{i-1,last}^T for i = 1..c-1. Chunk index 0 yields empty statistics.
// Merge order follows token order, with fixed reduction order across chunks.
template <class Scalar>
SufficientStats<Scalar> prefix_statistics(const ChunkStats<Scalar>& chunks,
                                          std::size_t chunk_index,
                                          const SkaConfig& cfg) {
  if (chunk_index >= chunks.num_chunks()) {
    throw IndexOutOfRange("prefix_statistics: chunk_index " +
                          std::to_string(chunk_index) + " of " +
                          std::to_string(chunks.num_chunks()));
  }
  if (chunks.rank != cfg.rank_r || chunks.head_dim != cfg.head_dim_p) {
    throw DimensionMismatch("prefix_statistics: chunk dims do not match cfg");
  }
  SufficientStats<Scalar> s(cfg.rank_r, cfg.head_dim_p);
  for (std::size_t i = 0; i < chunk_index; ++i) {
    const auto& c = chunks.per_chunk[i];
    if (i >= 1) {
      s.m_acc.add_outer(c.first_key, chunks.per_chunk[i - 1].last_key);
    }
    s.g_acc.add_compensated(c.g);
    s.m_acc.add_compensated(c.m);
    s.cv_acc.add_compensated(c.cv);
    s.count += c.count;
  }
  if (chunk_index >= 1) {
    s.prev_key = chunks.per_chunk[chunk_index - 1].last_key;
  }
  return s;
}

// Per-pair squared modulus of an interleaved (Re, Im) feature vector. Exactly
// cancels any per-component rotation, so Gram matrices built from the lifted
// features are content-addressed.
template <class Derived>
DenseVector<typename Derived::Scalar> invariant_lift(
    const Eigen::MatrixBase<Derived>& key_expr) {
  using Scalar = typename Derived::Scalar;
  DenseVector<Scalar> key = key_expr;
  if (key.size() % 2 != 0) {
    throw OddDimension("invariant_lift: feature dimension must be even");
  }
  const Eigen::Index half = key.size() / 2;
  DenseVector<Scalar> out(half);
  for (Eigen::Index j = 0; j < half; ++j) {
    const Scalar re = key[2 * j];
    const Scalar im = key[2 * j + 1];
    out[j] = re * re + im * im;
  }
  return out;
}

// Second-harmonic channel: per pair k -> k^2, interleaved as
// (Re^2 - Im^2, 2 Re Im). Rotating the input by theta rotates each output
// pair by 2*theta (equivariant rather than invariant).
template <class Derived>
DenseVector<typename Derived::Scalar> harmonic_lift(
    const Eigen::MatrixBase<Derived>& key_expr) {
  using Scalar = typename Derived::Scalar;
  DenseVector<Scalar> key = key_expr;
  if (key.size() % 2 != 0) {
    throw OddDimension("harmonic_lift: feature dimension must be even");
  }
  DenseVector<Scalar> out(key.size());
  for (Eigen::Index j = 0; j < key.size() / 2; ++j) {
    const Scalar re = key[2 * j];
    const Scalar im = key[2 * j + 1];
    out[2 * j] = re * re - im * im;
    out[2 * j + 1] = Scalar(2) * re * im;
  }
  return out;
}

}  // namespace ska
