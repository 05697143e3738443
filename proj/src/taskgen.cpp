#include "ska/taskgen.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <utility>

namespace ska {

namespace {

// Deterministic RNG wrapper. Bounded draws use rejection on raw mt19937_64
// output so results do not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(0, i)]);
    }
  }

  int pick(const std::vector<int>& v) {
    return v[uniform_int(0, static_cast<int>(v.size()) - 1)];
  }

  int distractor() {
    return Vocab::kDistractorBase + uniform_int(0, Vocab::kDistractorCount - 1);
  }

 private:
  std::mt19937_64 gen_;
};

std::vector<int> sample_distinct_keys(Rng& rng, int n) {
  if (n > Vocab::kKeyCount) {
    throw RangeExhausted("need " + std::to_string(n) + " distinct keys, range has " +
                         std::to_string(Vocab::kKeyCount));
  }
  std::vector<int> keys(Vocab::kKeyCount);
  for (int i = 0; i < Vocab::kKeyCount; ++i) keys[i] = Vocab::kKeyBase + i;
  rng.shuffle(keys);
  keys.resize(n);
  return keys;
}

int sample_value(Rng& rng) {
  return Vocab::kValueBase + rng.uniform_int(0, Vocab::kValueCount - 1);
}

void push_clause(std::vector<int>& tokens, std::vector<std::uint8_t>& mask,
                 const std::vector<int>& clause, bool masked, bool leading_pipe) {
  if (leading_pipe) {
    tokens.push_back(Vocab::kPipe);
    mask.push_back(masked ? 1 : 0);
  }
  for (int t : clause) {
    tokens.push_back(t);
    mask.push_back(masked ? 1 : 0);
  }
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::mqar: return "mqar";
    case Family::niah: return "niah";
    case Family::multihop: return "multihop";
    case Family::tooltrace: return "tooltrace";
    case Family::economy: return "economy";
    case Family::sysprompt_cot: return "sysprompt-cot";
    case Family::sysprompt_specific: return "sysprompt-specific";
    case Family::commonword: return "commonword";
  }
  throw InvalidParams("unknown family enum");
}

Family family_from_name(const std::string& s) {
  for (Family f : all_families()) {
    if (family_name(f) == s) return f;
  }
  throw InvalidParams("unknown family: " + s);
}

std::string tier_name(Tier t) { return t == Tier::easy ? "easy" : "hard"; }

Tier tier_from_name(const std::string& s) {
  if (s == "easy") return Tier::easy;
  if (s == "hard") return Tier::hard;
  throw InvalidParams("unknown tier: " + s);
}

std::vector<Family> all_families() {
  return {Family::mqar,    Family::niah,          Family::multihop,
          Family::tooltrace, Family::economy,     Family::sysprompt_cot,
          Family::sysprompt_specific, Family::commonword};
}

// ---------------------------------------------------------------------------
// MQAR: fact section of kv (key, value) pairs, a distractor gap, then one
// query clause [?, key] per pair in random order. Mask marks the binding
// anchor (key) positions; total length is exactly 4*kv + gap.
// ---------------------------------------------------------------------------

Episode gen_mqar(int kv_pairs, int gap, std::uint64_t seed) {
  if (kv_pairs < 1) throw InvalidParams("gen_mqar: kv_pairs must be >= 1");
  if (gap < 0) throw InvalidParams("gen_mqar: gap must be >= 0");
  Rng rng(seed);

  const std::vector<int> keys = sample_distinct_keys(rng, kv_pairs);
  std::vector<int> values(kv_pairs);
  for (int& v : values) v = sample_value(rng);

  Episode e;
  e.family = Family::mqar;
  e.tier = Tier::easy;
  e.seed = seed;
  e.tokens.reserve(4 * kv_pairs + gap);
  e.mask.reserve(4 * kv_pairs + gap);

  for (int i = 0; i < kv_pairs; ++i) {
    e.tokens.push_back(keys[i]);
    e.mask.push_back(1);
    e.tokens.push_back(values[i]);
    e.mask.push_back(0);
  }
  for (int i = 0; i < gap; ++i) {
    e.tokens.push_back(rng.distractor());
    e.mask.push_back(0);
  }

  std::vector<int> order(kv_pairs);
  for (int i = 0; i < kv_pairs; ++i) order[i] = i;
  rng.shuffle(order);
  for (int idx : order) {
    e.tokens.push_back(Vocab::kQuery);
    e.mask.push_back(0);
    e.tokens.push_back(keys[idx]);
    e.mask.push_back(0);
    e.queries.push_back({static_cast<int>(e.tokens.size()) - 1, {values[idx]}});
  }
  return e;
}

// ---------------------------------------------------------------------------
// NIAH: kv needles, each an adjacent (key, value) pair, planted at random
// non-overlapping offsets in a distractor body of length seq_len; the query
// asks for one needle. Mask marks needle key positions.
// ---------------------------------------------------------------------------

Episode gen_niah(int kv, int seq_len, std::uint64_t seed) {
  if (kv < 1) throw InvalidParams("gen_niah: kv must be >= 1");
  if (seq_len < 2 * kv) throw InvalidParams("gen_niah: seq_len too short for needles");
  if (seq_len > 4096) throw InvalidParams("gen_niah: seq_len must be <= 4096");
  Rng rng(seed);

  const std::vector<int> keys = sample_distinct_keys(rng, kv);
  std::vector<int> values(kv);
  for (int& v : values) v = sample_value(rng);

  // non-overlapping two-token slots
  std::vector<int> starts;
  std::vector<char> used(seq_len, 0);
  for (int i = 0; i < kv; ++i) {
    int pos = -1;
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int cand = rng.uniform_int(0, seq_len - 2);
      if (!used[cand] && !used[cand + 1]) {
        pos = cand;
        break;
      }
    }
    if (pos < 0) {
      // fall back to the first free slot
      for (int cand = 0; cand + 1 < seq_len && pos < 0; ++cand) {
        if (!used[cand] && !used[cand + 1]) pos = cand;
      }
      if (pos < 0) throw RangeExhausted("gen_niah: no free needle slot");
    }
    used[pos] = used[pos + 1] = 1;
    starts.push_back(pos);
  }

  Episode e;
  e.family = Family::niah;
  e.tier = Tier::easy;
  e.seed = seed;
  e.tokens.assign(seq_len, 0);
  e.mask.assign(seq_len, 0);
  for (int t = 0; t < seq_len; ++t) {
    if (!used[t]) e.tokens[t] = rng.distractor();
  }
  for (int i = 0; i < kv; ++i) {
    e.tokens[starts[i]] = keys[i];
    e.tokens[starts[i] + 1] = values[i];
    e.mask[starts[i]] = 1;
  }

  const int target = rng.uniform_int(0, kv - 1);
  e.tokens.push_back(Vocab::kQuery);
  e.mask.push_back(0);
  e.tokens.push_back(keys[target]);
  e.mask.push_back(0);
  e.queries.push_back({static_cast<int>(e.tokens.size()) - 1, {values[target]}});
  return e;
}

// ---------------------------------------------------------------------------
// Multi-hop: chained bindings k1 -> k2 and k2 -> v as [x, ->, y] clauses at
// random non-overlapping offsets; query k1 answers v. Mask marks clause spans.
// ---------------------------------------------------------------------------

Episode gen_multihop(int kv, int seq_len, std::uint64_t seed) {
  if (kv < 1) throw InvalidParams("gen_multihop: kv must be >= 1");
  if (2 * kv > Vocab::kKeyCount) {
    throw RangeExhausted("gen_multihop: chains need 2*kv distinct keys");
  }
  if (seq_len < 6 * kv) throw InvalidParams("gen_multihop: seq_len too short");
  if (seq_len > 4096) throw InvalidParams("gen_multihop: seq_len must be <= 4096");
  Rng rng(seed);

  const std::vector<int> keys = sample_distinct_keys(rng, 2 * kv);
  std::vector<int> values(kv);
  for (int& v : values) v = sample_value(rng);

  struct Clause {
    int a, b;
  };
  std::vector<Clause> clauses;
  for (int i = 0; i < kv; ++i) {
    clauses.push_back({keys[2 * i], keys[2 * i + 1]});   // k1 -> k2
    clauses.push_back({keys[2 * i + 1], values[i]});     // k2 -> v
  }
  rng.shuffle(clauses);

  std::vector<char> used(seq_len, 0);
  Episode e;
  e.family = Family::multihop;
  e.tier = Tier::easy;
  e.seed = seed;
  e.tokens.assign(seq_len, 0);
  e.mask.assign(seq_len, 0);
  for (const Clause& c : clauses) {
    int pos = -1;
    for (int attempt = 0; attempt < 200 && pos < 0; ++attempt) {
      const int cand = rng.uniform_int(0, seq_len - 3);
      if (!used[cand] && !used[cand + 1] && !used[cand + 2]) pos = cand;
    }
    for (int cand = 0; cand + 2 < seq_len && pos < 0; ++cand) {
      if (!used[cand] && !used[cand + 1] && !used[cand + 2]) pos = cand;
    }
    if (pos < 0) throw RangeExhausted("gen_multihop: no free clause slot");
    used[pos] = used[pos + 1] = used[pos + 2] = 1;
    e.tokens[pos] = c.a;
    e.tokens[pos + 1] = Vocab::kArrow;
    e.tokens[pos + 2] = c.b;
    e.mask[pos] = e.mask[pos + 1] = e.mask[pos + 2] = 1;
  }
  for (int t = 0; t < seq_len; ++t) {
    if (!used[t]) e.tokens[t] = rng.distractor();
  }

  const int target = rng.uniform_int(0, kv - 1);
  e.tokens.push_back(Vocab::kQuery);
  e.mask.push_back(0);
  e.tokens.push_back(keys[2 * target]);
  e.mask.push_back(0);
  e.queries.push_back({static_cast<int>(e.tokens.size()) - 1, {values[target]}});
  return e;
}

// ---------------------------------------------------------------------------
// Common word: content tokens with one forced strict mode, then a bare query
// marker; the answer is the strictly most frequent content token.
// ---------------------------------------------------------------------------

Episode gen_commonword(int seq_len, std::uint64_t seed) {
  if (seq_len < 4) throw InvalidParams("gen_commonword: seq_len must be >= 4");
  if (seq_len > 4096) throw InvalidParams("gen_commonword: seq_len must be <= 4096");
  Rng rng(seed);

  for (int attempt = 0; attempt < 100; ++attempt) {
    const int target = rng.distractor();
    const int n_target = std::max(2, seq_len / 4 + rng.uniform_int(0, seq_len / 8));
    if (n_target >= seq_len) continue;

    std::vector<int> content;
    content.reserve(seq_len);
    for (int i = 0; i < n_target; ++i) content.push_back(target);
    for (int i = n_target; i < seq_len; ++i) {
      int tok = rng.distractor();
      while (tok == target) tok = rng.distractor();
      content.push_back(tok);
    }
    rng.shuffle(content);

    std::map<int, int> counts;
    for (int t : content) ++counts[t];
    bool unique = true;
    for (const auto& [tok, c] : counts) {
      if (tok != target && c >= counts[target]) unique = false;
    }
    if (!unique) continue;

    Episode e;
    e.family = Family::commonword;
    e.tier = Tier::easy;
    e.seed = seed;
    e.tokens = content;
    e.mask.assign(content.size(), 1);
    e.tokens.push_back(Vocab::kQuery);
    e.mask.push_back(0);
    e.queries.push_back({static_cast<int>(e.tokens.size()) - 1, {target}});
    return e;
  }
  throw TieUnresolvable("gen_commonword: could not force a unique mode in 100 attempts");
}

// ---------------------------------------------------------------------------
// Tool traces: pipe-delimited call clauses [agent, :, tool, ->, digit]; the
// query retrieves the latest result of one (agent, tool) pair. Mask marks the
// whole call log.
// ---------------------------------------------------------------------------

Episode gen_tooltrace(Tier tier, std::uint64_t seed) {
  Rng rng(seed);
  const int n_calls = tier == Tier::easy ? rng.uniform_int(10, 30)
                                         : rng.uniform_int(60, 120);
  const int n_agents = 4;
  const int n_tools = 8;

  Episode e;
  e.family = Family::tooltrace;
  e.tier = tier;
  e.seed = seed;

  std::map<std::pair<int, int>, int> last_result;
  for (int i = 0; i < n_calls; ++i) {
    const int agent = Vocab::kAgentBase + rng.uniform_int(0, n_agents - 1);
    const int tool = Vocab::kKeyBase + rng.uniform_int(0, n_tools - 1);
    const int result = Vocab::digit(rng.uniform_int(0, 9));
    push_clause(e.tokens, e.mask, {agent, Vocab::kColon, tool, Vocab::kArrow, result},
                /*masked=*/true, /*leading_pipe=*/i > 0);
    last_result[{agent, tool}] = result;
  }

  std::vector<std::pair<int, int>> pairs;
  for (const auto& [k, v] : last_result) pairs.push_back(k);
  const auto [agent, tool] = pairs[rng.uniform_int(0, static_cast<int>(pairs.size()) - 1)];

  push_clause(e.tokens, e.mask, {Vocab::kQuery, agent, Vocab::kColon, tool, Vocab::kEquals},
              /*masked=*/false, /*leading_pipe=*/true);
  e.queries.push_back(
      {static_cast<int>(e.tokens.size()) - 1, {last_result.at({agent, tool})}});
  return e;
}

// ---------------------------------------------------------------------------
// Resource economy.
// Header clause per agent: [agent, d, d, g, d, d, w] declaring 10 gold /
// 10 wood. Actions: mine [A,+,d,res], build [A,-,d,res] or [A,-,d,g,d,w],
// trade [A,>,B,d,res], rest [A]. Illegal actions are re-sampled, never
// emitted, so trades always conserve and counts stay in [0,99].
// ---------------------------------------------------------------------------

namespace {

void append_count_digits(std::vector<int>& clause, int count) {
  clause.push_back(Vocab::digit(count / 10));
  clause.push_back(Vocab::digit(count % 10));
}

}  // namespace

Episode gen_economy(Tier tier, std::uint64_t seed) {
  Rng rng(seed);
  const int n_agents = tier == Tier::easy ? 3 : 6;
  const int n_steps = tier == Tier::easy ? rng.uniform_int(5, 15)
                                         : rng.uniform_int(40, 100);
  const int gap = tier == Tier::easy ? 0 : rng.uniform_int(200, 400);

  std::vector<EconomyState> state(n_agents);

  Episode e;
  e.family = Family::economy;
  e.tier = tier;
  e.seed = seed;

  for (int a = 0; a < n_agents; ++a) {
    std::vector<int> clause = {Vocab::kAgentBase + a};
    append_count_digits(clause, state[a].gold);
    clause.push_back(Vocab::kGold);
    append_count_digits(clause, state[a].wood);
    clause.push_back(Vocab::kWood);
    push_clause(e.tokens, e.mask, clause, /*masked=*/true, /*leading_pipe=*/a > 0);
  }

  auto res_count = [&](int agent, int res) -> int& {
    return res == Vocab::kGold ? state[agent].gold : state[agent].wood;
  };

  for (int s = 0; s < n_steps; ++s) {
    std::vector<int> clause;
    for (int attempt = 0; attempt < 100 && clause.empty(); ++attempt) {
      const int agent = rng.uniform_int(0, n_agents - 1);
      const int agent_tok = Vocab::kAgentBase + agent;
      switch (rng.uniform_int(0, 3)) {
        case 0: {  // mine: increment one resource by 1-3
          const int res = rng.uniform_int(0, 1) ? Vocab::kGold : Vocab::kWood;
          const int amt = rng.uniform_int(1, 3);
          if (res_count(agent, res) + amt > 99) break;
          res_count(agent, res) += amt;
          clause = {agent_tok, Vocab::kPlus, Vocab::digit(amt), res};
          break;
        }
        case 1: {  // build: decrement one or both resources by 1-2
          if (rng.uniform_int(0, 1) == 0) {
            const int res = rng.uniform_int(0, 1) ? Vocab::kGold : Vocab::kWood;
            const int amt = rng.uniform_int(1, 2);
            if (res_count(agent, res) - amt < 0) break;
            res_count(agent, res) -= amt;
            clause = {agent_tok, Vocab::kMinus, Vocab::digit(amt), res};
          } else {
            const int ag = rng.uniform_int(1, 2);
            const int aw = rng.uniform_int(1, 2);
            if (state[agent].gold - ag < 0 || state[agent].wood - aw < 0) break;
            state[agent].gold -= ag;
            state[agent].wood -= aw;
            clause = {agent_tok, Vocab::kMinus, Vocab::digit(ag), Vocab::kGold,
                      Vocab::digit(aw), Vocab::kWood};
          }
          break;
        }
        case 2: {  // trade: transfer, conserving the per-resource total
          if (n_agents < 2) break;
          int other = rng.uniform_int(0, n_agents - 2);
          if (other >= agent) ++other;
          const int res = rng.uniform_int(0, 1) ? Vocab::kGold : Vocab::kWood;
          const int amt = rng.uniform_int(1, 9);
          if (res_count(agent, res) - amt < 0 || res_count(other, res) + amt > 99) break;
          res_count(agent, res) -= amt;
          res_count(other, res) += amt;
          clause = {agent_tok, Vocab::kGt, Vocab::kAgentBase + other,
                    Vocab::digit(amt), res};
          break;
        }
        default:  // rest
          clause = {agent_tok};
          break;
      }
    }
    if (clause.empty()) clause = {Vocab::kAgentBase + rng.uniform_int(0, n_agents - 1)};
    push_clause(e.tokens, e.mask, clause, /*masked=*/true, /*leading_pipe=*/true);
  }

  if (gap > 0) {
    e.tokens.push_back(Vocab::kPipe);  // closes the action log before the noise
    e.mask.push_back(0);
    for (int i = 0; i < gap; ++i) {
      e.tokens.push_back(rng.distractor());
      e.mask.push_back(0);
    }
  }

  const int q_agent = rng.uniform_int(0, n_agents - 1);
  const int q_res = rng.uniform_int(0, 1) ? Vocab::kGold : Vocab::kWood;
  push_clause(e.tokens, e.mask,
              {Vocab::kQuery, Vocab::kAgentBase + q_agent, q_res, Vocab::kEquals},
              /*masked=*/false, /*leading_pipe=*/true);
  const int count = q_res == Vocab::kGold ? state[q_agent].gold : state[q_agent].wood;
  e.queries.push_back({static_cast<int>(e.tokens.size()) - 1,
                       {Vocab::digit(count / 10), Vocab::digit(count % 10)}});
  return e;
}

// ---------------------------------------------------------------------------
// System prompt recall. Bindings are marker-prefixed triples [=, var, val];
// the gap holds scratchpad chatter (cot) or distractor bindings with the
// wrong marker [:, var, junk] (specific). The query echoes one variable.
// ---------------------------------------------------------------------------

Episode gen_sysprompt(SyspromptSubtask subtask, Tier tier, std::uint64_t seed) {
  Rng rng(seed);
  const int n_vars = subtask == SyspromptSubtask::cot ? 4 : 6;
  int gap = 0;
  if (subtask == SyspromptSubtask::cot) {
    gap = tier == Tier::easy ? rng.uniform_int(10, 30) : rng.uniform_int(150, 300);
  } else {
    gap = tier == Tier::easy ? rng.uniform_int(10, 30) : rng.uniform_int(80, 200);
  }

  const std::vector<int> vars = sample_distinct_keys(rng, n_vars);
  std::vector<int> vals(n_vars);
  for (int& v : vals) v = sample_value(rng);

  Episode e;
  e.family = subtask == SyspromptSubtask::cot ? Family::sysprompt_cot
                                              : Family::sysprompt_specific;
  e.tier = tier;
  e.seed = seed;

  for (int i = 0; i < n_vars; ++i) {
    e.tokens.push_back(Vocab::kEquals);
    e.mask.push_back(0);
    e.tokens.push_back(vars[i]);  // binding anchor
    e.mask.push_back(1);
    e.tokens.push_back(vals[i]);
    e.mask.push_back(0);
  }

  int emitted = 0;
  while (emitted < gap) {
    if (subtask == SyspromptSubtask::specific && gap - emitted >= 3 &&
        rng.uniform_int(0, 3) == 0) {
      // distractor reusing a variable name under the wrong marker
      int junk = sample_value(rng);
      e.tokens.push_back(Vocab::kColon);
      e.tokens.push_back(vars[rng.uniform_int(0, n_vars - 1)]);
      e.tokens.push_back(junk);
      e.mask.insert(e.mask.end(), {0, 0, 0});
      emitted += 3;
    } else {
      e.tokens.push_back(rng.distractor());
      e.mask.push_back(0);
      ++emitted;
    }
  }

  const int target = rng.uniform_int(0, n_vars - 1);
  e.tokens.push_back(Vocab::kQuery);
  e.mask.push_back(0);
  e.tokens.push_back(vars[target]);
  e.mask.push_back(0);
  e.queries.push_back({static_cast<int>(e.tokens.size()) - 1, {vals[target]}});
  return e;
}

// ---------------------------------------------------------------------------
// Replay oracles: parse tokens only.
// ---------------------------------------------------------------------------

namespace {

std::size_t first_query_marker(const std::vector<int>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == Vocab::kQuery) return i;
  }
  return tokens.size();
}

std::vector<std::vector<int>> replay_adjacent_bindings(const std::vector<int>& tokens) {
  const std::size_t q0 = first_query_marker(tokens);
  std::map<int, int> bind;
  for (std::size_t t = 0; t + 1 < q0; ++t) {
    if (Vocab::is_key(tokens[t]) && Vocab::is_value(tokens[t + 1])) {
      bind[tokens[t]] = tokens[t + 1];
    }
  }
  std::vector<std::vector<int>> out;
  for (std::size_t t = q0; t + 1 < tokens.size(); ++t) {
    if (tokens[t] == Vocab::kQuery) {
      out.push_back({bind.at(tokens[t + 1])});
    }
  }
  return out;
}

std::vector<std::vector<int>> replay_multihop(const std::vector<int>& tokens) {
  const std::size_t q0 = first_query_marker(tokens);
  std::map<int, int> link;
  for (std::size_t t = 0; t + 2 < q0; ++t) {
    if (tokens[t + 1] == Vocab::kArrow) {
      link[tokens[t]] = tokens[t + 2];
    }
  }
  std::vector<std::vector<int>> out;
  for (std::size_t t = q0; t + 1 < tokens.size(); ++t) {
    if (tokens[t] == Vocab::kQuery) {
      out.push_back({link.at(link.at(tokens[t + 1]))});
    }
  }
  return out;
}

std::vector<std::vector<int>> replay_tooltrace(const std::vector<int>& tokens) {
  std::map<std::pair<int, int>, int> last;
  std::vector<std::vector<int>> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (tokens[i] == Vocab::kQuery && i + 4 < tokens.size() &&
        tokens[i + 2] == Vocab::kColon && tokens[i + 4] == Vocab::kEquals) {
      out.push_back({last.at({tokens[i + 1], tokens[i + 3]})});
      i += 5;
    } else if (Vocab::is_agent(tokens[i]) && i + 4 < tokens.size() &&
               tokens[i + 1] == Vocab::kColon && tokens[i + 3] == Vocab::kArrow) {
      last[{tokens[i], tokens[i + 2]}] = tokens[i + 4];
      i += 5;
    } else {
      ++i;
    }
  }
  return out;
}

struct EconomyReplay {
  std::map<int, EconomyState> state;  // by agent token
  std::vector<std::vector<int>> answers;
  EconomyAudit audit;
};

int clamp99(int x) { return std::min(99, std::max(0, x)); }

EconomyReplay replay_economy_full(const std::vector<int>& tokens) {
  EconomyReplay r;

  // split into pipe-delimited clauses; stop clause parsing once a clause
  // fails to parse (the noise gap), then scan for the query clause
  std::vector<std::vector<int>> clauses;
  std::vector<int> cur;
  for (std::size_t i = 0; i <= tokens.size(); ++i) {
    if (i == tokens.size() || tokens[i] == Vocab::kPipe) {
      if (!cur.empty()) clauses.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(tokens[i]);
    }
  }

  auto res_of = [&r](int agent, int res) -> int& {
    return res == Vocab::kGold ? r.state[agent].gold : r.state[agent].wood;
  };
  auto totals = [&r]() {
    std::pair<int, int> t{0, 0};
    for (const auto& [a, s] : r.state) {
      t.first += s.gold;
      t.second += s.wood;
    }
    return t;
  };

  bool in_log = true;
  for (const auto& c : clauses) {
    if (!in_log || c.empty()) {
      // look for the query clause among the trailing clauses
      if (c.size() == 4 && c[0] == Vocab::kQuery && Vocab::is_agent(c[1]) &&
          c[3] == Vocab::kEquals) {
        const int count = res_of(c[1], c[2]);
        r.answers.push_back({Vocab::digit(count / 10), Vocab::digit(count % 10)});
      }
      continue;
    }
    if (c.size() == 7 && Vocab::is_agent(c[0]) && Vocab::is_digit(c[1])) {
      // header: initial endowment declaration
      const int agent = c[0];
      r.state[agent].gold = (c[1] - Vocab::kDigitBase) * 10 + (c[2] - Vocab::kDigitBase);
      r.state[agent].wood = (c[4] - Vocab::kDigitBase) * 10 + (c[5] - Vocab::kDigitBase);
    } else if (c.size() == 4 && Vocab::is_agent(c[0]) && c[1] == Vocab::kPlus) {
      int& v = res_of(c[0], c[3]);
      v = clamp99(v + (c[2] - Vocab::kDigitBase));
      ++r.audit.steps;
    } else if (c.size() == 4 && Vocab::is_agent(c[0]) && c[1] == Vocab::kMinus) {
      int& v = res_of(c[0], c[3]);
      v = clamp99(v - (c[2] - Vocab::kDigitBase));
      ++r.audit.steps;
    } else if (c.size() == 6 && Vocab::is_agent(c[0]) && c[1] == Vocab::kMinus) {
      int& g = res_of(c[0], Vocab::kGold);
      int& w = res_of(c[0], Vocab::kWood);
      g = clamp99(g - (c[2] - Vocab::kDigitBase));
      w = clamp99(w - (c[4] - Vocab::kDigitBase));
      ++r.audit.steps;
    } else if (c.size() == 5 && Vocab::is_agent(c[0]) && c[1] == Vocab::kGt) {
      const auto before = totals();
      const int amt = c[3] - Vocab::kDigitBase;
      int& give = res_of(c[0], c[4]);
      int& recv = res_of(c[2], c[4]);
      give = clamp99(give - amt);
      recv = clamp99(recv + amt);
      const auto after = totals();
      if (before != after) r.audit.trades_conserve = false;
      ++r.audit.steps;
      ++r.audit.trades;
    } else if (c.size() == 1 && Vocab::is_agent(c[0])) {
      ++r.audit.steps;  // rest
    } else if (c.size() == 4 && c[0] == Vocab::kQuery) {
      const int count = res_of(c[1], c[2]);
      r.answers.push_back({Vocab::digit(count / 10), Vocab::digit(count % 10)});
      continue;
    } else {
      in_log = false;  // noise gap begins
      continue;
    }
    for (const auto& [a, s] : r.state) {
      if (s.gold < 0 || s.gold > 99 || s.wood < 0 || s.wood > 99) {
        r.audit.counts_in_range = false;
      }
    }
  }
  return r;
}

std::vector<std::vector<int>> replay_sysprompt(const std::vector<int>& tokens) {
  const std::size_t q0 = first_query_marker(tokens);
  std::map<int, int> bind;
  for (std::size_t t = 0; t + 2 < q0; ++t) {
    if (tokens[t] == Vocab::kEquals && Vocab::is_key(tokens[t + 1])) {
      bind[tokens[t + 1]] = tokens[t + 2];
    }
  }
  std::vector<std::vector<int>> out;
  for (std::size_t t = q0; t + 1 < tokens.size(); ++t) {
    if (tokens[t] == Vocab::kQuery) {
      out.push_back({bind.at(tokens[t + 1])});
    }
  }
  return out;
}

std::vector<std::vector<int>> replay_commonword(const std::vector<int>& tokens) {
  const std::size_t q0 = first_query_marker(tokens);
  std::map<int, int> counts;
  for (std::size_t t = 0; t < q0; ++t) {
    if (Vocab::is_distractor(tokens[t])) ++counts[tokens[t]];
  }
  int best = -1, best_count = -1;
  for (const auto& [tok, c] : counts) {
    if (c > best_count) {
      best = tok;
      best_count = c;
    }
  }
  std::vector<std::vector<int>> out;
  for (std::size_t t = q0; t < tokens.size(); ++t) {
    if (tokens[t] == Vocab::kQuery) out.push_back({best});
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> replay_answers(Family family,
                                             const std::vector<int>& tokens) {
  switch (family) {
    case Family::mqar:
    case Family::niah:
      return replay_adjacent_bindings(tokens);
    case Family::multihop:
      return replay_multihop(tokens);
    case Family::tooltrace:
      return replay_tooltrace(tokens);
    case Family::economy:
      return replay_economy_full(tokens).answers;
    case Family::sysprompt_cot:
    case Family::sysprompt_specific:
      return replay_sysprompt(tokens);
    case Family::commonword:
      return replay_commonword(tokens);
  }
  throw InvalidParams("replay_answers: unknown family");
}

EconomyAudit economy_audit(const std::vector<int>& tokens) {
  return replay_economy_full(tokens).audit;
}

}  // namespace ska
