#include <doctest.h>

#include "ska/taskgen.hpp"

using ska::Episode;
using ska::Family;
using ska::Tier;
using ska::Vocab;

namespace {

bool answers_match(const Episode& e) {
  auto replayed = ska::replay_answers(e);
  if (replayed.size() != e.queries.size()) return false;
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    if (replayed[i] != e.queries[i].answer) return false;
  }
  return true;
}

bool identical(const Episode& a, const Episode& b) {
  if (a.tokens != b.tokens || a.mask != b.mask) return false;
  if (a.queries.size() != b.queries.size()) return false;
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    if (a.queries[i].pos != b.queries[i].pos) return false;
    if (a.queries[i].answer != b.queries[i].answer) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("vocab role ranges are disjoint and inside the vocabulary") {
  CHECK(Vocab::kDigitBase + Vocab::kDigitCount <= Vocab::kAgentBase);
  CHECK(Vocab::kAgentBase + Vocab::kAgentCount <= Vocab::kKeyBase);
  CHECK(Vocab::kKeyBase + Vocab::kKeyCount <= Vocab::kValueBase);
  CHECK(Vocab::kValueBase + Vocab::kValueCount <= Vocab::kDistractorBase);
  CHECK(Vocab::kDistractorBase + Vocab::kDistractorCount <= Vocab::kSize);
}

TEST_CASE("mqar kv=1 gap=0 is the four-token episode") {
  Episode e = ska::gen_mqar(1, 0, 5);
  REQUIRE(e.tokens.size() == 4);
  CHECK(Vocab::is_key(e.tokens[0]));
  CHECK(Vocab::is_value(e.tokens[1]));
  CHECK(e.tokens[2] == Vocab::kQuery);
  CHECK(e.tokens[3] == e.tokens[0]);
  REQUIRE(e.queries.size() == 1);
  CHECK(e.queries[0].pos == 3);
  CHECK(e.queries[0].answer == std::vector<int>{e.tokens[1]});
  CHECK(answers_match(e));
}

TEST_CASE("mqar episode length is exactly 4*kv + gap") {
  Episode e = ska::gen_mqar(32, 4096, 2);
  CHECK(e.tokens.size() == 4 * 32 + 4096);
  CHECK(e.queries.size() == 32);
  CHECK(answers_match(e));
}

TEST_CASE("mqar replay oracle agrees on random seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(answers_match(ska::gen_mqar(4, 64, 7 + seed)));
  }
}

TEST_CASE("mqar rejects more pairs than the key range holds") {
  CHECK_THROWS_AS(ska::gen_mqar(33, 0, 1), ska::RangeExhausted);
}

TEST_CASE("generators are deterministic for fixed parameters") {
  CHECK(identical(ska::gen_mqar(8, 128, 9), ska::gen_mqar(8, 128, 9)));
  CHECK(identical(ska::gen_economy(Tier::hard, 3), ska::gen_economy(Tier::hard, 3)));
  CHECK(identical(ska::gen_tooltrace(Tier::easy, 4), ska::gen_tooltrace(Tier::easy, 4)));
  CHECK(identical(ska::gen_niah(4, 128, 5), ska::gen_niah(4, 128, 5)));
  CHECK(!identical(ska::gen_mqar(8, 128, 9), ska::gen_mqar(8, 128, 10)));
}

TEST_CASE("mqar mask marks exactly the binding anchors") {
  Episode e = ska::gen_mqar(6, 32, 11);
  long marked = 0;
  for (std::size_t t = 0; t < e.tokens.size(); ++t) {
    if (e.mask[t]) {
      ++marked;
      CHECK(Vocab::is_key(e.tokens[t]));
      CHECK(Vocab::is_value(e.tokens[t + 1]));
    }
  }
  CHECK(marked == 6);
}

TEST_CASE("economy hand log: A mines 2 gold from the declared 10") {
  // header "A 10g 10w" then "A+2g" then query A's gold
  std::vector<int> tokens = {
      Vocab::kAgentBase, Vocab::digit(1), Vocab::digit(0), Vocab::kGold,
      Vocab::digit(1),  Vocab::digit(0), Vocab::kWood,
      Vocab::kPipe,
      Vocab::kAgentBase, Vocab::kPlus, Vocab::digit(2), Vocab::kGold,
      Vocab::kPipe,
      Vocab::kQuery, Vocab::kAgentBase, Vocab::kGold, Vocab::kEquals};
  auto answers = ska::replay_answers(Family::economy, tokens);
  REQUIRE(answers.size() == 1);
  CHECK(answers[0] == std::vector<int>{Vocab::digit(1), Vocab::digit(2)});
}

TEST_CASE("economy episodes conserve trades and stay in range") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Episode e = ska::gen_economy(seed % 2 ? Tier::easy : Tier::hard, 100 + seed);
    CHECK(answers_match(e));
    auto audit = ska::economy_audit(e.tokens);
    CHECK(audit.counts_in_range);
    CHECK(audit.trades_conserve);
    CHECK(audit.steps > 0);
  }
}

TEST_CASE("economy hard tier replay reproduces the embedded answer") {
  Episode e = ska::gen_economy(Tier::hard, 3);
  CHECK(answers_match(e));
  REQUIRE(e.queries.size() == 1);
  CHECK(e.queries[0].answer.size() == 2);
}

TEST_CASE("economy mask covers the log and excludes the noise gap") {
  Episode e = ska::gen_economy(Tier::hard, 8);
  // find the query marker; the 200-400 tokens before it are the noise gap
  std::size_t q_pos = 0;
  for (std::size_t t = 0; t < e.tokens.size(); ++t) {
    if (e.tokens[t] == Vocab::kQuery) q_pos = t;
  }
  long gap_marked = 0;
  for (std::size_t t = q_pos - 100; t < q_pos - 2; ++t) {
    gap_marked += e.mask[t];
  }
  CHECK(gap_marked == 0);
  CHECK(e.mask[0] == 1);  // header is part of the fact region
}

TEST_CASE("tool trace: single call and last-write-wins") {
  std::vector<int> one_call = {
      Vocab::kAgentBase, Vocab::kColon, Vocab::kKeyBase, Vocab::kArrow, Vocab::digit(5),
      Vocab::kPipe,
      Vocab::kQuery, Vocab::kAgentBase, Vocab::kColon, Vocab::kKeyBase, Vocab::kEquals};
  auto answers = ska::replay_answers(Family::tooltrace, one_call);
  REQUIRE(answers.size() == 1);
  CHECK(answers[0] == std::vector<int>{Vocab::digit(5)});

  std::vector<int> two_calls = {
      Vocab::kAgentBase, Vocab::kColon, Vocab::kKeyBase, Vocab::kArrow, Vocab::digit(5),
      Vocab::kPipe,
      Vocab::kAgentBase, Vocab::kColon, Vocab::kKeyBase, Vocab::kArrow, Vocab::digit(9),
      Vocab::kPipe,
      Vocab::kQuery, Vocab::kAgentBase, Vocab::kColon, Vocab::kKeyBase, Vocab::kEquals};
  answers = ska::replay_answers(Family::tooltrace, two_calls);
  CHECK(answers[0] == std::vector<int>{Vocab::digit(9)});
}

TEST_CASE("tool trace generated tiers satisfy their length budgets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Episode easy = ska::gen_tooltrace(Tier::easy, seed);
    CHECK(easy.tokens.size() <= 400);
    CHECK(answers_match(easy));
    Episode hard = ska::gen_tooltrace(Tier::hard, seed);
    CHECK(hard.tokens.size() <= 1500);
    CHECK(answers_match(hard));
  }
}

TEST_CASE("sysprompt bindings resolve by marker in both subtasks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Episode cot = ska::gen_sysprompt(ska::SyspromptSubtask::cot,
                                     seed % 2 ? Tier::easy : Tier::hard, seed);
    CHECK(answers_match(cot));
    Episode spec = ska::gen_sysprompt(ska::SyspromptSubtask::specific,
                                      seed % 2 ? Tier::easy : Tier::hard, seed);
    CHECK(answers_match(spec));
  }
}

TEST_CASE("specific-mode distractors reuse variable names with wrong markers") {
  Episode e = ska::gen_sysprompt(ska::SyspromptSubtask::specific, Tier::hard, 12);
  bool found_fake = false;
  for (std::size_t t = 18; t + 2 < e.tokens.size(); ++t) {
    if (e.tokens[t] == Vocab::kColon && Vocab::is_key(e.tokens[t + 1])) {
      found_fake = true;
    }
  }
  CHECK(found_fake);
  CHECK(answers_match(e));
}

TEST_CASE("niah answers come from the planted needle") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Episode e = ska::gen_niah(8, 2048, 11 + seed);
    CHECK(e.tokens.size() == 2048 + 2);
    CHECK(answers_match(e));
  }
  Episode small = ska::gen_niah(1, 64, 2);
  CHECK(answers_match(small));
}

TEST_CASE("multihop chains resolve through two links") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Episode e = ska::gen_multihop(4, 256, seed);
    CHECK(answers_match(e));
    REQUIRE(e.queries.size() == 1);
    CHECK(Vocab::is_value(e.queries[0].answer[0]));
  }
}

TEST_CASE("commonword forced mode wins") {
  std::vector<int> tokens;
  for (int i = 0; i < 5; ++i) tokens.push_back(Vocab::kDistractorBase);
  for (int i = 0; i < 3; ++i) tokens.push_back(Vocab::kDistractorBase + 1);
  for (int i = 0; i < 2; ++i) tokens.push_back(Vocab::kDistractorBase + 2);
  tokens.push_back(Vocab::kQuery);
  auto answers = ska::replay_answers(Family::commonword, tokens);
  REQUIRE(answers.size() == 1);
  CHECK(answers[0] == std::vector<int>{Vocab::kDistractorBase});
}

TEST_CASE("commonword generation keeps a strict mode") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Episode e = ska::gen_commonword(256, seed);
    CHECK(answers_match(e));
  }
}

TEST_CASE("oracle closure across families, small sample") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(answers_match(ska::gen_mqar(8, 256, seed)));
    CHECK(answers_match(ska::gen_niah(4, 512, seed)));
    CHECK(answers_match(ska::gen_multihop(4, 200, seed)));
    CHECK(answers_match(ska::gen_tooltrace(Tier::hard, seed)));
    CHECK(answers_match(ska::gen_economy(Tier::hard, seed)));
    CHECK(answers_match(ska::gen_sysprompt(ska::SyspromptSubtask::cot, Tier::hard, seed)));
    CHECK(answers_match(
        ska::gen_sysprompt(ska::SyspromptSubtask::specific, Tier::hard, seed)));
    CHECK(answers_match(ska::gen_commonword(300, seed)));
  }
}

TEST_CASE("a single binding with no gap echoes directly through the oracle") {
  std::vector<int> tokens = {Vocab::kEquals, Vocab::kKeyBase + 3, Vocab::kValueBase + 9,
                             Vocab::kQuery, Vocab::kKeyBase + 3};
  auto answers = ska::replay_answers(Family::sysprompt_cot, tokens);
  REQUIRE(answers.size() == 1);
  CHECK(answers[0] == std::vector<int>{Vocab::kValueBase + 9});
}
