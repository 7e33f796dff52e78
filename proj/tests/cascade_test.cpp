#include <gtest/gtest.h>

#include <random>
#include <set>

#include "chunkvote/cascade.hpp"
#include "chunkvote/metrics.hpp"
#include "oracles.hpp"

using namespace chunkvote;

namespace {

Sentence words(std::vector<std::pair<std::string, std::string>> tokens) {
  Sentence s;
  for (auto& [w, p] : tokens) s.tokens.push_back({w, p, std::nullopt});
  return s;
}

const Sentence kOunce = words({{"$", "$"}, {"366.50", "CD"}, {"an", "DT"}, {"ounce", "NN"}});

TEST(Collapse, NoSpansIsIdentity) {
  auto c = collapse(kOunce, {});
  EXPECT_EQ(c.sentence, kOunce);
  EXPECT_EQ(c.map.intervals, CollapseMap::identity(4).intervals);
}

TEST(Collapse, HeadIsLastToken) {
  auto c = collapse(kOunce, {{0, 2, "NP"}});
  ASSERT_EQ(c.sentence.size(), 3u);
  EXPECT_EQ(c.sentence.tokens[0].word, "366.50");
  EXPECT_EQ(c.sentence.tokens[0].pos, "CD");
  EXPECT_EQ(c.map.intervals[0], (std::pair<std::size_t, std::size_t>{0, 2}));
  EXPECT_EQ(c.map.intervals[1], (std::pair<std::size_t, std::size_t>{2, 3}));
  auto first = collapse(kOunce, {{0, 2, "NP"}}, HeadRule::First);
  EXPECT_EQ(first.sentence.tokens[0].word, "$");
}

TEST(Collapse, FullSentenceAndErrors) {
  auto c = collapse(kOunce, {{0, 4, "NP"}});
  EXPECT_EQ(c.sentence.size(), 1u);
  EXPECT_EQ(c.sentence.tokens[0].word, "ounce");
  EXPECT_THROW(collapse(kOunce, {{0, 3, "NP"}, {2, 4, "NP"}}), ContractError);
  EXPECT_THROW(collapse(kOunce, {{2, 6, "NP"}}), ContractError);
}

TEST(CollapseMap, CompositionStaysAPartition) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    Sentence s;
    for (std::size_t i = 0; i < n; ++i) s.tokens.push_back({"w" + std::to_string(i), "P", std::nullopt});
    auto map = CollapseMap::identity(n);
    Sentence cur = s;
    for (int level = 0; level < 3 && cur.size() > 1; ++level) {
      auto spans = extract_chunks(oracle::random_tags(rng, cur.size(), {"NP"}, TagScheme::IOB2));
      auto next = collapse(cur, spans);
      for (const auto& sp : spans) {
        auto orig = map.expand(sp);
        EXPECT_EQ(orig.begin, map.intervals[sp.begin].first);
        EXPECT_EQ(orig.end, map.intervals[sp.end - 1].second);
      }
      map = map.then(next.map);
      cur = next.sentence;
      ASSERT_EQ(map.size(), cur.size());
      std::size_t expect = 0;
      for (const auto& [b, e] : map.intervals) {
        EXPECT_EQ(b, expect);
        EXPECT_LT(b, e);
        expect = e;
      }
      EXPECT_EQ(expect, n);
      // Each reduced token is the last word of its interval.
      for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_EQ(cur.tokens[i].word, s.tokens[map.intervals[i].second - 1].word);
    }
  }
}

TEST(CascadeBracket, SilentChunkerStopsAfterOneLevel) {
  int calls = 0;
  LevelChunker none = [&](const Sentence& s, const CollapseMap&) {
    ++calls;
    return Tags(s.size(), "O");
  };
  EXPECT_TRUE(cascade_bracket(kOunce, none).empty());
  EXPECT_EQ(calls, 1);
  CascadeOptions bad;
  bad.max_depth = 0;
  EXPECT_THROW(cascade_bracket(kOunce, none, bad), ConfigError);
}

TEST(CascadeBracket, PaperSentence) {
  std::vector<ChunkSpan> gold{{0, 4, "NP"}, {0, 2, "NP"}, {2, 4, "NP"}};
  auto got = cascade_bracket(kOunce, gold_replay_chunker(gold));
  std::multiset<ChunkSpan> a(got.begin(), got.end()), b(gold.begin(), gold.end());
  EXPECT_EQ(a, b);
}

TEST(CascadeBracket, ReplayRecoversSyntheticCorpus) {
  std::mt19937 rng(5);
  std::vector<NestedSentence> gold, pred;
  for (int i = 0; i < 200; ++i) {
    auto ns = oracle::random_nested(rng);
    Sentence s{ns.tokens};
    auto got = cascade_bracket(s, gold_replay_chunker(ns.spans));
    EXPECT_EQ(oracle::crossing_pairs(got), 0u);
    gold.push_back(ns);
    pred.push_back({ns.tokens, got});
  }
  auto r = score_nested(gold, pred);
  EXPECT_EQ(r.overall.correct, r.overall.gold);
  EXPECT_EQ(r.overall.found, r.overall.gold);
}

TEST(CascadeBracket, UnaryDuplicatesKeptOncePerLevel) {
  // A chunker that always brackets the whole (reduced) sentence.
  LevelChunker whole = [](const Sentence& s, const CollapseMap&) {
    return spans_to_tags({{0, s.size(), "NP"}}, s.size(), TagScheme::IOB2);
  };
  auto got = cascade_bracket(kOunce, whole);
  EXPECT_EQ(got, (std::vector<ChunkSpan>{{0, 4, "NP"}}));
  // Single-token sentence: one level, then stop.
  auto single = cascade_bracket(words({{"it", "PRP"}}), whole);
  EXPECT_EQ(single.size(), 1u);
}

TEST(CascadeBracket, TerminatesWithinMaxDepth) {
  std::mt19937 rng(6);
  for (std::size_t depth : {1u, 2u, 5u}) {
    for (int trial = 0; trial < 50; ++trial) {
      int calls = 0;
      LevelChunker noisy = [&](const Sentence& s, const CollapseMap&) {
        ++calls;
        return oracle::random_raw_tags(rng, s.size(), {"NP", "VP"});
      };
      std::size_t n = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
      Sentence s;
      for (std::size_t i = 0; i < n; ++i) s.tokens.push_back({"w", "P", std::nullopt});
      CascadeOptions opt;
      opt.max_depth = depth;
      auto got = cascade_bracket(s, noisy, opt);
      EXPECT_LE(static_cast<std::size_t>(calls), depth);
      EXPECT_EQ(oracle::crossing_pairs(got), 0u);
      for (const auto& sp : got) EXPECT_EQ(sp.label, "NP");
    }
  }
}

TEST(CascadeBracket, TrainedIGTreeNestsProperly) {
  std::mt19937 rng(7);
  std::vector<NestedSentence> train_set, test_set;
  for (int i = 0; i < 300; ++i) train_set.push_back(oracle::random_nested(rng));
  for (int i = 0; i < 100; ++i) test_set.push_back(oracle::random_nested(rng));
  auto levels = cascade_training_corpus(train_set);
  EXPECT_GT(levels.sentences.size(), train_set.size());
  auto model = train(levels, LearnerSpec::of(LearnerKind::IGTree));
  std::vector<NestedSentence> pred;
  for (const auto& ns : test_set) {
    auto got = cascade_bracket(Sentence{ns.tokens}, model_chunker(model));
    EXPECT_EQ(oracle::crossing_pairs(got), 0u);
    EXPECT_TRUE(properly_nested(got));
    pred.push_back({ns.tokens, got});
  }
  // The grammar is regular enough for the learned cascade to get most of it.
  EXPECT_GT(score_nested(test_set, pred).f_rate(), 0.8);
}

}  // namespace
