#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ska/errors.hpp"

namespace ska {

// Fixed 128-token vocabulary with disjoint role ranges. Structural symbols are
// single reserved ids; numbers 0..99 encode as two digit tokens.
struct Vocab {
  static constexpr int kSize = 128;

  // structural tokens
  static constexpr int kPipe = 0;    // clause separator '|'
  static constexpr int kArrow = 1;   // binding arrow
  static constexpr int kQuery = 2;   // query marker '?'
  static constexpr int kEquals = 3;  // binding/answer marker '='
  static constexpr int kColon = 4;   // agent:tool separator ':'
  static constexpr int kPlus = 5;    // mine '+'
  static constexpr int kMinus = 6;   // build '-'
  static constexpr int kGt = 7;      // trade '>'
  static constexpr int kGold = 8;    // resource 'g'
  static constexpr int kWood = 9;    // resource 'w'

  static constexpr int kDigitBase = 10, kDigitCount = 10;
  static constexpr int kAgentBase = 20, kAgentCount = 8;
  static constexpr int kKeyBase = 28, kKeyCount = 32;
  static constexpr int kValueBase = 60, kValueCount = 32;
  static constexpr int kDistractorBase = 92, kDistractorCount = 36;

  static bool is_digit(int t) { return t >= kDigitBase && t < kDigitBase + kDigitCount; }
  static bool is_agent(int t) { return t >= kAgentBase && t < kAgentBase + kAgentCount; }
  static bool is_key(int t) { return t >= kKeyBase && t < kKeyBase + kKeyCount; }
  static bool is_value(int t) { return t >= kValueBase && t < kValueBase + kValueCount; }
  static bool is_distractor(int t) {
    return t >= kDistractorBase && t < kDistractorBase + kDistractorCount;
  }
  static int digit(int d) { return kDigitBase + d; }
};

enum class Family {
  mqar,
  niah,
  multihop,
  tooltrace,
  economy,
  sysprompt_cot,
  sysprompt_specific,
  commonword,
};

enum class Tier { easy, hard };
enum class SyspromptSubtask { cot, specific };

std::string family_name(Family f);
Family family_from_name(const std::string& s);
std::string tier_name(Tier t);
Tier tier_from_name(const std::string& s);
std::vector<Family> all_families();

struct Query {
  int pos = 0;                // token position the retrieval is issued at
  std::vector<int> answer;    // expected answer tokens
};

// One generated task instance. Answers are reproducible from `tokens` alone
// via replay_answers; the mask marks fact/action spans only.
struct Episode {
  Family family = Family::mqar;
  Tier tier = Tier::easy;
  std::uint64_t seed = 0;
  std::vector<int> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<Query> queries;
};

// Per-agent resource counts, clamped to [0, 99].
struct EconomyState {
  int gold = 10;
  int wood = 10;
};

// Generators. Identical (family, params, seed) yield identical episodes.
Episode gen_mqar(int kv_pairs, int gap, std::uint64_t seed);
Episode gen_niah(int kv, int seq_len, std::uint64_t seed);
Episode gen_multihop(int kv, int seq_len, std::uint64_t seed);
Episode gen_commonword(int seq_len, std::uint64_t seed);
Episode gen_tooltrace(Tier tier, std::uint64_t seed);
Episode gen_economy(Tier tier, std::uint64_t seed);
Episode gen_sysprompt(SyspromptSubtask subtask, Tier tier, std::uint64_t seed);

// Independent replay oracle: recomputes every query's answer by re-parsing
// the token stream, one answer list per query marker in position order.
std::vector<std::vector<int>> replay_answers(Family family,
                                             const std::vector<int>& tokens);

inline std::vector<std::vector<int>> replay_answers(const Episode& e) {
  return replay_answers(e.family, e.tokens);
}

// Step-by-step audit of an economy episode's token log.
struct EconomyAudit {
  bool counts_in_range = true;   // all counts within [0,99] after every step
  bool trades_conserve = true;   // per-resource totals equal across each trade
  int steps = 0;
  int trades = 0;
};
EconomyAudit economy_audit(const std::vector<int>& tokens);

}  // namespace ska
