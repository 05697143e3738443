#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ska/dense.hpp"
#include "ska/errors.hpp"
#include "ska/taskgen.hpp"

namespace ska {

enum class SchemeKind { orthogonal_deterministic, random_gaussian };

inline std::string scheme_name(SchemeKind k) {
  return k == SchemeKind::orthogonal_deterministic ? "orthogonal" : "gaussian";
}

inline SchemeKind scheme_from_name(const std::string& s) {
  if (s == "orthogonal") return SchemeKind::orthogonal_deterministic;
  if (s == "gaussian") return SchemeKind::random_gaussian;
  throw InvalidParams("unknown scheme: " + s);
}

// Token-id -> feature maps standing in for learned projections.
//
// orthogonal-deterministic: key tokens map to seed-permuted standard basis
// vectors of R^r (mutually orthonormal; query_map == key_map); remaining
// tokens get deterministic unit vectors. Value coordinates are owned one per
// token (value range first, then digits, agents, keys, structural symbols as
// P allows); unowned tokens embed to the zero value vector, so decoding is an
// argmax over owned coordinates.
//
// random-gaussian: every token gets a seeded unit-norm dense key (query ==
// key) and value vector; decoding picks the value vector with the largest
// inner product, ties to the lowest token id.
template <class Scalar>
struct EmbeddingScheme {
  SchemeKind kind = SchemeKind::orthogonal_deterministic;
  int rank = 0;
  int head_dim = 0;
  std::uint64_t seed = 0;
  std::vector<DenseVector<Scalar>> key_vecs;
  std::vector<DenseVector<Scalar>> value_vecs;
  std::vector<char> key_available;
  std::vector<int> coord_owner;  // orthogonal decode: coordinate -> token id

  const DenseVector<Scalar>& key(int token) const {
    if (token < 0 || token >= Vocab::kSize) {
      throw InvalidParams("embedding: token id out of range");
    }
    if (!key_available[token]) {
      throw KeyCapacityExceeded("embedding: key token " + std::to_string(token) +
                                " needs rank >= its key index");
    }
    return key_vecs[token];
  }

  const DenseVector<Scalar>& query(int token) const { return key(token); }

  const DenseVector<Scalar>& value(int token) const {
    if (token < 0 || token >= Vocab::kSize) {
      throw InvalidParams("embedding: token id out of range");
    }
    return value_vecs[token];
  }

  // Argmax decode; exact ties resolve to the lowest owning token id.
  int decode(const DenseVector<Scalar>& y) const {
    if (kind == SchemeKind::orthogonal_deterministic) {
      bool found = false;
      Scalar best = Scalar(0);
      int best_token = -1;
      for (int c = 0; c < head_dim; ++c) {
        const int owner = coord_owner[c];
        if (owner < 0) continue;
        if (!found || y[c] > best) {
          best = y[c];
          best_token = owner;
          found = true;
        } else if (y[c] == best && owner < best_token) {
          best_token = owner;
        }
      }
      return best_token;
    }
    Scalar best = Scalar(0);
    int best_token = -1;
    for (int t = 0; t < Vocab::kSize; ++t) {
      const Scalar score = value_vecs[t].dot(y);
      if (best_token < 0 || score > best) {
        best = score;
        best_token = t;
      }
    }
    return best_token;
  }
};

template <class Scalar>
EmbeddingScheme<Scalar> make_scheme(SchemeKind kind, int rank, int head_dim,
                                    std::uint64_t seed) {
  if (rank < 1 || head_dim < 1) throw InvalidParams("make_scheme: bad dims");
  EmbeddingScheme<Scalar> s;
  s.kind = kind;
  s.rank = rank;
  s.head_dim = head_dim;
  s.seed = seed;
  s.key_vecs.resize(Vocab::kSize);
  s.value_vecs.resize(Vocab::kSize);
  s.key_available.assign(Vocab::kSize, 1);
  s.coord_owner.assign(head_dim, -1);

  if (kind == SchemeKind::orthogonal_deterministic) {
    // permutation of basis indices for key tokens
    std::vector<int> perm(rank);
    for (int i = 0; i < rank; ++i) perm[i] = i;
    std::uint64_t state = seed;
    auto next = [&state]() {
      std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      return z ^ (z >> 31);
    };
    for (int i = rank - 1; i > 0; --i) {
      std::swap(perm[i], perm[static_cast<int>(next() % static_cast<std::uint64_t>(i + 1))]);
    }

    for (int t = 0; t < Vocab::kSize; ++t) {
      if (Vocab::is_key(t)) {
        const int j = t - Vocab::kKeyBase;
        if (j < rank) {
          DenseVector<Scalar> e = DenseVector<Scalar>::Zero(rank);
          e[perm[j]] = Scalar(1);
          s.key_vecs[t] = e;
        } else {
          s.key_available[t] = 0;
          s.key_vecs[t] = DenseVector<Scalar>::Zero(rank);
        }
      } else {
        s.key_vecs[t] = detail::seeded_unit_vector<Scalar>(
            rank, seed ^ (0x517cc1b727220a95ull * static_cast<std::uint64_t>(t + 1)));
      }
    }

    // value coordinate ownership, in priority order
    std::vector<int> owners;
    for (int t = Vocab::kValueBase; t < Vocab::kValueBase + Vocab::kValueCount; ++t)
      owners.push_back(t);
    for (int t = Vocab::kDigitBase; t < Vocab::kDigitBase + Vocab::kDigitCount; ++t)
      owners.push_back(t);
    for (int t = Vocab::kAgentBase; t < Vocab::kAgentBase + Vocab::kAgentCount; ++t)
      owners.push_back(t);
    for (int t = Vocab::kKeyBase; t < Vocab::kKeyBase + Vocab::kKeyCount; ++t)
      owners.push_back(t);
    for (int t = 0; t < Vocab::kDigitBase; ++t) owners.push_back(t);
    for (int t = Vocab::kDistractorBase; t < Vocab::kSize; ++t) owners.push_back(t);

    for (int t = 0; t < Vocab::kSize; ++t) {
      s.value_vecs[t] = DenseVector<Scalar>::Zero(head_dim);
    }
    for (int c = 0; c < head_dim && c < static_cast<int>(owners.size()); ++c) {
      s.coord_owner[c] = owners[c];
      s.value_vecs[owners[c]][c] = Scalar(1);
    }
  } else {
    for (int t = 0; t < Vocab::kSize; ++t) {
      s.key_vecs[t] = detail::seeded_unit_vector<Scalar>(
          rank, seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(t + 1)));
      s.value_vecs[t] = detail::seeded_unit_vector<Scalar>(
          head_dim, seed ^ (0xC2B2AE3D27D4EB4Full * static_cast<std::uint64_t>(t + 1)));
    }
  }
  return s;
}

}  // namespace ska
