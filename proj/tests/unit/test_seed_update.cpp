#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <aspectseed/classifier.hpp>
#include <aspectseed/error.hpp>
#include <aspectseed/rng.hpp>
#include <aspectseed/seed_update.hpp>

#include "support.hpp"

using namespace aspectseed;

namespace {

// Adds `n` segments of class `cls`, each holding the given tokens.
void add_segments(AspectFrequencyTable& t, std::size_t cls, std::size_t n, std::vector<TokenId> tokens = {}) {
  for (std::size_t i = 0; i < n; ++i) t.add_segment(cls, tokens);
}

Vocabulary numbered_vocab(std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 1; i <= n; ++i) v.add("w" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  return v;
}

CandidatePool pool_of(std::vector<TokenId> ids) {
  std::sort(ids.begin(), ids.end());
  return {ids, std::vector<double>(ids.size(), 1.0)};
}

ScoredCandidate cand(TokenId t, double aggregate, std::size_t count = 1) { return {t, 0.0, 0.0, aggregate, count}; }

}  // namespace

TEST_CASE("frequencies count segments, not occurrences") {
  const auto v = numbered_vocab(3);
  std::vector<std::vector<TokenId>> segs;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 10; ++i) {
    segs.push_back(i < 3 ? std::vector<TokenId>{1, 2} : std::vector<TokenId>{2});
    labels.push_back(0);
  }
  segs.push_back({3, 3});
  labels.push_back(1);
  segs.push_back({});
  labels.push_back(1);
  const auto c = testing::corpus_of(segs, v);
  const auto t = aspect_frequencies(labels, c, 3);
  CHECK(t.aspect_count(0) == 10);
  CHECK(t.word_count(0, 1) == 3);
  CHECK(t.word_count(1, 1) == 0);
  CHECK(t.word_count(1, 3) == 1);
  CHECK(t.aspect_count(1) == 1);
  CHECK_THROWS_AS(aspect_frequencies(std::vector<std::size_t>{0}, c, 3), ValidationError);
}

TEST_CASE("indicative is the in-aspect segment share") {
  AspectFrequencyTable t(3, 4);
  add_segments(t, 0, 30, {1, 2});
  add_segments(t, 0, 70, {2});
  CHECK(indicative(t, 0, 1) == doctest::Approx(0.3));
  CHECK(indicative(t, 0, 2) == 1.0);
  CHECK(indicative(t, 0, 3) == 0.0);
  CHECK(indicative(t, 1, 1) == 0.0);
}

TEST_CASE("distinctive divides by the strongest competitor, floored at one") {
  AspectFrequencyTable t(4, 3);  // three aspects + misc
  add_segments(t, 0, 30, {1});
  add_segments(t, 1, 5, {1});
  add_segments(t, 2, 10, {1});
  add_segments(t, 0, 7, {2});
  CHECK(distinctive(t, 0, 1) == 3.0);
  CHECK(distinctive(t, 0, 2) == 7.0);
  CHECK(distinctive(t, 1, 2) == 0.0);

  add_segments(t, 3, 40, {1});
  CHECK(distinctive(t, 0, 1) == doctest::Approx(0.75));
  CHECK(distinctive(t, 0, 1, {false}) == 3.0);
  // Misc is scored against the pre-defined aspects only.
  CHECK(distinctive(t, 3, 1) == doctest::Approx(40.0 / 30.0));
}

TEST_CASE("aggregate is the geometric mean of the two scores") {
  AspectFrequencyTable t(3, 3);
  add_segments(t, 0, 30, {1});
  add_segments(t, 0, 70);
  add_segments(t, 1, 10, {1});
  const auto v = numbered_vocab(2);
  const auto r = rank_candidates(t, pool_of({1}), 0, 10, v);
  REQUIRE(r.size() == 1);
  CHECK(r[0].indicative == doctest::Approx(0.3));
  CHECK(r[0].distinctive == 3.0);
  CHECK(r[0].aggregate == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));
  CHECK(r[0].aggregate == doctest::Approx(0.9487).epsilon(1e-4));
}

TEST_CASE("ranking breaks ties by count, then by token text") {
  AspectFrequencyTable t(3, 6);
  add_segments(t, 0, 4, {1});  // w01: ind 4/16, dist 4 -> 1
  add_segments(t, 2, 1, {1});
  add_segments(t, 0, 8, {2});  // w02: ind 8/16, dist 2 -> 1
  add_segments(t, 2, 4, {2});
  add_segments(t, 0, 4);
  add_segments(t, 1, 3, {3, 4});  // w03 and w04 tie completely in aspect 1
  const auto v = numbered_vocab(5);
  const auto r0 = rank_candidates(t, pool_of({1, 2, 5}), 0, 0, v);
  REQUIRE(r0.size() == 2);
  CHECK(r0[0].aggregate == r0[1].aggregate);
  CHECK(r0[0].token == 2);
  CHECK(r0[1].token == 1);

  const auto r1 = rank_candidates(t, pool_of({4, 3}), 1, 0, v);
  REQUIRE(r1.size() == 2);
  CHECK(r1[0].token == 3);
  CHECK(rank_candidates(t, pool_of({1, 2}), 0, 1, v).size() == 1);
}

TEST_CASE("noisy pool ranks misc-heavy tokens first") {
  AspectFrequencyTable t(3, 5);
  add_segments(t, 2, 50, {1});     // frequent in misc, rare elsewhere
  add_segments(t, 0, 2, {1});
  add_segments(t, 2, 10, {2, 3});  // common everywhere
  add_segments(t, 0, 30, {2});
  add_segments(t, 0, 5, {4});      // never in misc
  const auto v = numbered_vocab(4);
  const auto noisy = noisy_pool(t, pool_of({1, 2, 3, 4}), 50, v);
  REQUIRE_FALSE(noisy.empty());
  CHECK(noisy.front() == 1);
  CHECK(std::find(noisy.begin(), noisy.end(), 4) == noisy.end());
  CHECK(noisy_pool(t, pool_of({1, 2, 3, 4}), 0, v).empty());
  CHECK(noisy_pool(t, pool_of({1, 2, 3, 4}), 1, v) == std::vector<TokenId>{1});
}

TEST_CASE("update drops noisy tokens and resolves contested ones") {
  const auto v = numbered_vocab(8);
  const SeedSets prev{{"a", "b"}, {{7}, {8}}, 0};
  const std::vector<std::vector<ScoredCandidate>> ranked{
      {cand(1, 0.9), cand(2, 0.8), cand(3, 0.5)},
      {cand(2, 0.95), cand(4, 0.6), cand(1, 0.2)},
  };
  const std::vector<TokenId> noisy{3};
  const auto u = update_seeds(prev, ranked, noisy, 10, v);
  CHECK(u.seeds.seeds[0] == std::vector<TokenId>{1});
  CHECK(u.seeds.seeds[1] == std::vector<TokenId>{2, 4});
  CHECK(u.seeds.iteration == 1);
  CHECK(u.noisy == noisy);
  CHECK(u.warnings.empty());

  // Equal aggregates go to the lower aspect index.
  const std::vector<std::vector<ScoredCandidate>> tie{{cand(5, 0.5), cand(1, 0.1)}, {cand(5, 0.5), cand(2, 0.1)}};
  const auto t = update_seeds(prev, tie, {}, 10, v);
  CHECK(t.seeds.seeds[0] == std::vector<TokenId>{5, 1});
  CHECK(t.seeds.seeds[1] == std::vector<TokenId>{2});
}

TEST_CASE("empty noisy pool gives the plain ranked replacement") {
  const auto v = numbered_vocab(12);
  const SeedSets prev{{"a", "b"}, {{11}, {12}}, 3};
  std::vector<std::vector<ScoredCandidate>> ranked(2);
  for (TokenId w = 1; w <= 6; ++w) ranked[0].push_back(cand(w, 1.0 / w));
  for (TokenId w = 7; w <= 10; ++w) ranked[1].push_back(cand(w, 1.0 / w));
  const auto u = update_seeds(prev, ranked, {}, 4, v);
  CHECK(u.seeds.seeds[0] == std::vector<TokenId>{1, 2, 3, 4});
  CHECK(u.seeds.seeds[1] == std::vector<TokenId>{7, 8, 9, 10});
  CHECK(u.seeds.iteration == 4);
}

TEST_CASE("an aspect left empty keeps its previous seeds") {
  const auto v = numbered_vocab(6);
  const SeedSets prev{{"a", "b", "c"}, {{1}, {2}, {3}}, 0};
  const std::vector<std::vector<ScoredCandidate>> ranked{
      {cand(4, 0.9)},
      {cand(5, 0.8), cand(4, 0.3)},  // loses 4 to aspect a, 5 is noisy
      {cand(2, 0.7)},                // its only candidate is noisy
  };
  const std::vector<TokenId> noisy{5, 2, 6};
  const auto u = update_seeds(prev, ranked, noisy, 10, v);
  CHECK(u.seeds.seeds[0] == std::vector<TokenId>{4});
  CHECK(u.seeds.seeds[1] == std::vector<TokenId>{2});
  CHECK(u.seeds.seeds[2] == std::vector<TokenId>{3});
  CHECK(u.warnings.size() == 2);
  // Carried-over seeds leave the noisy pool.
  CHECK(u.noisy == std::vector<TokenId>{5, 6});
}

TEST_CASE("update rejects malformed arguments") {
  const auto v = numbered_vocab(3);
  const SeedSets prev{{"a", "b"}, {{1}, {2}}, 0};
  CHECK_THROWS_AS(update_seeds(prev, std::vector<std::vector<ScoredCandidate>>(1), {}, 10, v), ValidationError);
  CHECK_THROWS_AS(update_seeds(prev, std::vector<std::vector<ScoredCandidate>>(2), {}, 0, v), ValidationError);
}

TEST_CASE("convergence compares sets, ignoring order") {
  const SeedSets a{{"x", "y"}, {{1, 2, 3}, {4}}, 0};
  const SeedSets b{{"x", "y"}, {{3, 1, 2}, {4}}, 1};
  const SeedSets c{{"x", "y"}, {{1, 2, 5}, {4}}, 1};
  CHECK(converged(a, b));
  CHECK_FALSE(converged(a, c));
  CHECK_FALSE(converged(a, SeedSets{{"x", "y"}, {{1, 2}, {4}}, 1}));
}

TEST_CASE("randomized updates keep seeds disjoint, sourced and scored correctly") {
  Rng rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t nv = 8 + rng.below(30);
    const auto v = numbered_vocab(nv);
    AspectFrequencyTable t(k + 1, v.size());
    for (int s = 0; s < 60; ++s) {
      std::vector<TokenId> seg;
      for (std::uint64_t n = 1 + rng.below(6); n > 0; --n) seg.push_back(static_cast<TokenId>(1 + rng.below(nv)));
      t.add_segment(rng.below(k + 1), seg);
    }
    std::vector<TokenId> ids;
    for (TokenId w = 1; w <= nv; ++w)
      if (rng.below(3) != 0) ids.push_back(w);
    const auto pool = pool_of(ids);

    SeedSets prev;
    for (std::size_t j = 0; j < k; ++j) {
      prev.aspects.push_back("a" + std::to_string(j));
      prev.seeds.push_back({static_cast<TokenId>(j + 1)});
    }
    std::vector<std::vector<ScoredCandidate>> ranked;
    for (std::size_t j = 0; j < k; ++j) {
      ranked.push_back(rank_candidates(t, pool, j, 0, v));
      for (const auto& c : ranked.back()) {
        CHECK(c.indicative >= 0.0);
        CHECK(c.indicative <= 1.0);
        CHECK(c.aggregate == std::sqrt(c.indicative * c.distinctive));
        CHECK(c.count <= t.aspect_count(j));
      }
    }
    const auto noisy = noisy_pool(t, pool, rng.below(6), v);
    const std::size_t max_seeds = 1 + rng.below(5);
    const auto u = update_seeds(prev, ranked, noisy, max_seeds, v);

    std::set<TokenId> seen;
    const std::set<TokenId> noisy_set(u.noisy.begin(), u.noisy.end());
    for (std::size_t j = 0; j < k; ++j) {
      const bool carried = u.seeds.seeds[j] == prev.seeds[j];
      CHECK(!u.seeds.seeds[j].empty());
      CHECK(u.seeds.seeds[j].size() <= std::max<std::size_t>(max_seeds, prev.seeds[j].size()));
      for (TokenId w : u.seeds.seeds[j]) {
        CHECK(seen.insert(w).second);
        CHECK_FALSE(noisy_set.contains(w));
        CHECK((pool.contains(w) || carried));
      }
    }
    // Same inputs, same answer.
    CHECK(update_seeds(prev, ranked, noisy, max_seeds, v).seeds == u.seeds);
  }
}

TEST_CASE("candidate pool keeps tokens whose removal shifts the prediction") {
  // d = 1; the window-2 kernel fires on "key" in the first column and the
  // output layer turns that into (0.9, 0.1). Blanking "key" gives (0.5, 0.5).
  ClassifierModel m(1, 1, 2);
  m.kernel(0, 0)[0] = 1.0;
  m.parameters()[m.output_weight_offset(0, 0)] = std::log(9.0);
  const auto v = testing::vocab_of({"key", "filler"});
  const auto table = testing::table_of({{1.0}, {0.0}});
  const auto c = testing::corpus_of({{1, 2, 2, 2}, {2, 2}}, v);

  const auto p = forward(m, build_matrix(c.segment(0).tokens, table));
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-12));
  const double expect = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  CHECK(expect == doctest::Approx(0.368).epsilon(1e-3));

  const auto pool = candidate_pool_serial(m, c, table);
  REQUIRE(pool.tokens == std::vector<TokenId>{1});
  CHECK(pool.max_shift[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK_FALSE(pool.contains(2));

  CHECK(candidate_pool_serial(m, c, table, {0.5, 0}).tokens.empty());
  CHECK(all_tokens_pool(c).tokens == std::vector<TokenId>{1, 2});
  // Probing only the second segment never sees "key".
  CHECK(candidate_pool_serial(m, testing::corpus_of({{2, 2}, {1, 2}}, v), table, {0.05, 1}).tokens.empty());
}
