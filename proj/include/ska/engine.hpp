#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ska/config.hpp"
#include "ska/embedding.hpp"
#include "ska/operator.hpp"
#include "ska/stats.hpp"
#include "ska/taskgen.hpp"

namespace ska {

enum class StatsMode { prefix, masked, chunk_causal };

inline std::string mode_name(StatsMode m) {
  switch (m) {
    case StatsMode::prefix: return "prefix";
    case StatsMode::masked: return "masked";
    case StatsMode::chunk_causal: return "chunk-causal";
  }
  throw InvalidParams("unknown mode enum");
}

inline StatsMode mode_from_name(const std::string& s) {
  if (s == "prefix") return StatsMode::prefix;
  if (s == "masked") return StatsMode::masked;
  if (s == "chunk-causal") return StatsMode::chunk_causal;
  throw InvalidParams("unknown mode: " + s);
}

template <class Scalar>
struct QueryOutcome {
  int pos = 0;
  DenseVector<Scalar> output;  // retrieved P-vector
  int decoded = -1;
  bool correct = false;
};

// O(1) decoding state: streaming statistics plus the frozen normalization
// factor and a lazily re-estimated operator.
template <class Scalar>
struct RecurrentState {
  SufficientStats<Scalar> stats;
  Scalar frozen_max_norm = Scalar(1);
  std::optional<KoopmanOperator<Scalar>> cached_operator;
  bool dirty = true;
};

// Number of persisted floats per head: G (r^2) + M (r^2) + C_v (P*r) +
// previous key (r) + max norm (1).
inline long state_float_count(int rank, int head_dim) {
  const long r = rank, p = head_dim;
  return 2 * r * r + p * r + r + 1;
}

// Serialize exactly state_float_count() values (collapsed sums; compensation
// is accumulation workspace, not persisted state).
template <class Scalar>
std::vector<Scalar> serialize_state(const RecurrentState<Scalar>& st) {
  const int r = st.stats.rank();
  const int p = st.stats.head_dim();
  std::vector<Scalar> out;
  out.reserve(state_float_count(r, p));
  DenseMatrix<Scalar> g = st.stats.g(), m = st.stats.m(), cv = st.stats.c_v();
  out.insert(out.end(), g.data(), g.data() + g.size());
  out.insert(out.end(), m.data(), m.data() + m.size());
  out.insert(out.end(), cv.data(), cv.data() + cv.size());
  if (st.stats.prev_key) {
    out.insert(out.end(), st.stats.prev_key->data(), st.stats.prev_key->data() + r);
  } else {
    out.insert(out.end(), r, Scalar(0));
  }
  out.push_back(st.frozen_max_norm);
  return out;
}

struct MemoryFootprint {
  long ska_floats = 0;
  long crossover_T = 0;  // smallest T with T*(r+P) > ska_floats
};

inline MemoryFootprint memory_crossover(const SkaConfig& cfg) {
  MemoryFootprint f;
  f.ska_floats = state_float_count(cfg.rank_r, cfg.head_dim_p);
  f.crossover_T = f.ska_floats / (cfg.rank_r + cfg.head_dim_p) + 1;
  return f;
}

namespace detail {

// Per-token features for one episode: key of the token itself, value of its
// successor (the next-token target; zero at the last position), normalized by
// the max key norm over the prefill region (positions before the first
// query), clamped at 1e-6 and frozen from there on.
template <class Scalar>
struct EpisodeFeatures {
  std::vector<DenseVector<Scalar>> keys;
  std::vector<DenseVector<Scalar>> values;
  Scalar max_norm = Scalar(1);
  int boundary = 0;  // first query position
};

template <class Scalar>
EpisodeFeatures<Scalar> embed_episode(const Episode& e,
                                      const EmbeddingScheme<Scalar>& scheme) {
  const int t_total = static_cast<int>(e.tokens.size());
  if (t_total == 0) throw InvalidParams("embed_episode: empty episode");
  EpisodeFeatures<Scalar> f;
  f.boundary = t_total;
  for (const Query& q : e.queries) f.boundary = std::min(f.boundary, q.pos);

  f.keys.reserve(t_total);
  f.values.reserve(t_total);
  for (int t = 0; t < t_total; ++t) {
    f.keys.push_back(scheme.key(e.tokens[t]));
    f.values.push_back(t + 1 < t_total
                           ? scheme.value(e.tokens[t + 1])
                           : DenseVector<Scalar>::Zero(scheme.head_dim));
  }

  Scalar m = Scalar(0);
  for (int t = 0; t < f.boundary; ++t) m = std::max(m, Scalar(f.keys[t].norm()));
  if (f.boundary == 0) m = Scalar(1);
  m = std::max(m, Scalar(1e-6));
  f.max_norm = m;
  for (auto& k : f.keys) k /= m;
  return f;
}

template <class Scalar>
bool score_query(const EmbeddingScheme<Scalar>& scheme, const Query& q,
                 QueryOutcome<Scalar>& out) {
  out.pos = q.pos;
  out.decoded = scheme.decode(out.output);
  out.correct = q.answer.size() == 1 && out.decoded == q.answer[0];
  return out.correct;
}

}  // namespace detail

// Evaluate every query of an episode with per-mode statistics assembly. A
// query at position p retrieves from the strict prefix [0, p) (chunk-causal:
// from all chunks strictly before p's chunk), with the query feature divided
// by the frozen max norm.
template <class Scalar>
std::vector<QueryOutcome<Scalar>> run_parallel(const Episode& e,
                                               const EmbeddingScheme<Scalar>& scheme,
                                               const SkaConfig& cfg, StatsMode mode) {
  cfg.validate();
  auto f = detail::embed_episode(e, scheme);
  const int t_total = static_cast<int>(e.tokens.size());

  std::vector<QueryOutcome<Scalar>> results(e.queries.size());

  // queries may arrive in any order in external datasets
  std::vector<std::size_t> by_pos(e.queries.size());
  for (std::size_t i = 0; i < by_pos.size(); ++i) by_pos[i] = i;
  std::stable_sort(by_pos.begin(), by_pos.end(), [&e](std::size_t a, std::size_t b) {
    return e.queries[a].pos < e.queries[b].pos;
  });

  if (mode == StatsMode::chunk_causal) {
    ChunkStats<Scalar> chunks = chunk_statistics(f.keys, f.values, cfg);
    std::optional<std::size_t> cached_index;
    std::optional<KoopmanOperator<Scalar>> op;
    for (std::size_t qi : by_pos) {
      const Query& q = e.queries[qi];
      const std::size_t c = static_cast<std::size_t>(q.pos) /
                            static_cast<std::size_t>(cfg.chunk_size_s);
      if (!cached_index || *cached_index != c) {
        SufficientStats<Scalar> stats = prefix_statistics(chunks, c, cfg);
        op = estimate(stats, cfg);
        cached_index = c;
      }
      DenseVector<Scalar> query = scheme.query(e.tokens[q.pos]) / f.max_norm;
      results[qi].output = retrieve_ska(*op, query);
      detail::score_query(scheme, q, results[qi]);
    }
    return results;
  }

  // prefix / masked: advance a token-sequential fold, answering queries when
  // their position is reached (statistics then cover exactly [0, pos)).
  SufficientStats<Scalar> stats(cfg.rank_r, cfg.head_dim_p);
  std::optional<KoopmanOperator<Scalar>> op;
  bool dirty = true;
  std::size_t oi = 0;
  for (int t = 0; t < t_total; ++t) {
    while (oi < by_pos.size() && e.queries[by_pos[oi]].pos == t) {
      const std::size_t qi = by_pos[oi];
      if (dirty) {
        op = estimate(stats, cfg);
        dirty = false;
      }
      DenseVector<Scalar> query = scheme.query(e.tokens[t]) / f.max_norm;
      results[qi].output = retrieve_ska(*op, query);
      detail::score_query(scheme, e.queries[qi], results[qi]);
      ++oi;
    }
    if (mode == StatsMode::masked) {
      if (e.mask[t]) {
        stats.g_acc.add_outer(f.keys[t], f.keys[t]);
        if (t > 0 && e.mask[t - 1]) {
          stats.m_acc.add_outer(f.keys[t], f.keys[t - 1]);
        }
        stats.cv_acc.add_outer(f.values[t], f.keys[t]);
        stats.prev_key = f.keys[t];
        ++stats.count;
        dirty = true;
      }
    } else {
      accumulate_step(stats, f.keys[t], f.values[t]);
      dirty = true;
    }
  }
  return results;
}

// Strictly recurrent prefix-mode evaluation: one streaming pass, token-by-
// token O(1) updates, the max norm frozen at its prefill value, and operator
// re-estimation on demand at query positions.
template <class Scalar>
std::vector<QueryOutcome<Scalar>> run_recurrent(const Episode& e,
                                                const EmbeddingScheme<Scalar>& scheme,
                                                const SkaConfig& cfg) {
  cfg.validate();
  const int t_total = static_cast<int>(e.tokens.size());
  if (t_total == 0) throw InvalidParams("run_recurrent: empty episode");

  int boundary = t_total;
  for (const Query& q : e.queries) boundary = std::min(boundary, q.pos);

  // prefill pass: only the running max norm is kept
  Scalar m = Scalar(0);
  for (int t = 0; t < boundary; ++t) {
    m = std::max(m, Scalar(scheme.key(e.tokens[t]).norm()));
  }
  if (boundary == 0) m = Scalar(1);
  m = std::max(m, Scalar(1e-6));

  RecurrentState<Scalar> st;
  st.stats = SufficientStats<Scalar>(cfg.rank_r, cfg.head_dim_p);
  st.frozen_max_norm = m;

  std::vector<QueryOutcome<Scalar>> results(e.queries.size());
  std::vector<std::size_t> by_pos(e.queries.size());
  for (std::size_t i = 0; i < by_pos.size(); ++i) by_pos[i] = i;
  std::stable_sort(by_pos.begin(), by_pos.end(), [&e](std::size_t a, std::size_t b) {
    return e.queries[a].pos < e.queries[b].pos;
  });
  std::size_t oi = 0;

  std::optional<DenseVector<Scalar>> pending_key;  // key of token t-1, value pending
  for (int t = 0; t < t_total; ++t) {
    DenseVector<Scalar> key = scheme.key(e.tokens[t]) / st.frozen_max_norm;
    if (pending_key) {
      // the arrival of token t completes position t-1's (key, value) pair
      accumulate_step(st.stats, *pending_key, scheme.value(e.tokens[t]));
      st.dirty = true;
    }
    while (oi < by_pos.size() && e.queries[by_pos[oi]].pos == t) {
      const std::size_t qi = by_pos[oi];
      if (st.dirty || !st.cached_operator) {
        st.cached_operator = estimate(st.stats, cfg);
        st.dirty = false;
      }
      DenseVector<Scalar> query = scheme.query(e.tokens[t]) / st.frozen_max_norm;
      results[qi].output = retrieve_ska(*st.cached_operator, query);
      detail::score_query(scheme, e.queries[qi], results[qi]);
      ++oi;
    }
    pending_key = std::move(key);
  }
  return results;
}

}  // namespace ska
