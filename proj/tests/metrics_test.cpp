#include <gtest/gtest.h>

#include <random>

#include "chunkvote/metrics.hpp"
#include "oracles.hpp"

using namespace chunkvote;

namespace {

TEST(FBeta, TableRows) {
  EXPECT_NEAR(f_beta(0.9404, 0.9100), 0.9250, 1e-4);
  EXPECT_NEAR(f_beta(0.9368, 0.9298), 0.9333, 1e-4);
}

TEST(FBeta, EqualInputsAndZero) {
  for (double p : {0.0, 0.1, 0.5, 0.77, 1.0}) EXPECT_NEAR(f_beta(p, p), p, 1e-12);
  EXPECT_EQ(f_beta(0.0, 0.0, 2.0), 0.0);
}

TEST(FBeta, GeneralBetaWeighsRecall) {
  // beta = 2: 5PR / (4P + R)
  EXPECT_NEAR(f_beta(0.5, 1.0, 2.0), 5 * 0.5 / (4 * 0.5 + 1.0), 1e-12);
}

TEST(FBeta, MonotoneAndPeaksAtBalance) {
  for (double p = 0.05; p < 1.0; p += 0.1) {
    for (double r = 0.05; r < 0.95; r += 0.1) EXPECT_LT(f_beta(p, r), f_beta(p, r + 0.05));
  }
  const double sum = 1.2;
  double best = f_beta(0.6, 0.6);
  for (double p = 0.2; p <= 1.0; p += 0.01) EXPECT_LE(f_beta(p, sum - p), best + 1e-12);
}

TEST(ScoreChunks, HalfRecall) {
  SpanSets gold{{{0, 2, "NP"}, {3, 4, "VP"}}};
  SpanSets pred{{{0, 2, "NP"}}};
  auto r = score_chunks(gold, pred);
  EXPECT_DOUBLE_EQ(r.precision(), 1.0);
  EXPECT_DOUBLE_EQ(r.recall(), 0.5);
  EXPECT_NEAR(r.f_rate(), 2.0 / 3.0, 1e-4);
  EXPECT_EQ(r.per_label["VP"].gold, 1);
  EXPECT_EQ(r.per_label["VP"].found, 0);
}

TEST(ScoreChunks, IdentityIsPerfect) {
  SpanSets gold{{{0, 2, "NP"}, {3, 4, "VP"}}, {{1, 2, "PP"}}};
  auto r = score_chunks(gold, gold);
  EXPECT_DOUBLE_EQ(r.f_rate(), 1.0);
}

TEST(ScoreChunks, SentenceCountMismatch) {
  EXPECT_THROW(score_chunks(SpanSets(2), SpanSets(3)), AlignmentError);
}

TEST(ScoreChunks, DuplicatePredictionsMatchAtMostGoldMultiplicity) {
  SpanSets gold{{{0, 2, "NP"}}};
  SpanSets pred{{{0, 2, "NP"}, {0, 2, "NP"}}};
  auto r = score_chunks(gold, pred);
  EXPECT_EQ(r.overall.found, 2);
  EXPECT_EQ(r.overall.correct, 1);
}

TEST(ScoreChunks, RandomSentencesMatchBruteForce) {
  std::mt19937 rng(42);
  SpanSets gold, pred;
  for (int s = 0; s < 20; ++s) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 15)(rng);
    gold.push_back(extract_chunks(oracle::random_tags(rng, n, {"NP", "VP", "PP"}, TagScheme::IOB2)));
    pred.push_back(extract_chunks(oracle::random_tags(rng, n, {"NP", "VP", "PP"}, TagScheme::IOB2)));
  }
  auto r = score_chunks(gold, pred);
  auto o = oracle::match_spans(gold, pred);
  EXPECT_EQ(r.overall.found, o.found);
  EXPECT_EQ(r.overall.gold, o.gold);
  EXPECT_EQ(r.overall.correct, o.correct);

  ChunkCounts sum;
  for (const auto& [_, c] : r.per_label) {
    EXPECT_LE(c.correct, std::min(c.found, c.gold));
    sum += c;
  }
  EXPECT_EQ(sum, r.overall);

  auto swapped = score_chunks(pred, gold);
  EXPECT_DOUBLE_EQ(swapped.precision(), r.recall());
  EXPECT_DOUBLE_EQ(swapped.recall(), r.precision());
  EXPECT_NEAR(swapped.f_rate(), r.f_rate(), 1e-12);
}

Corpus tagged(std::vector<Tags> sentences) {
  Corpus c;
  for (const auto& tags : sentences) {
    Sentence s;
    for (std::size_t i = 0; i < tags.size(); ++i) s.tokens.push_back({"w" + std::to_string(i), "P", tags[i]});
    c.sentences.push_back(s);
  }
  return c;
}

TEST(ScoreTagged, Examples) {
  auto g = tagged({{"B-NP", "I-NP"}});
  EXPECT_DOUBLE_EQ(score_tagged(g, g).f_rate(), 1.0);
  auto r = score_tagged(g, tagged({{"B-NP", "B-NP"}}));
  EXPECT_EQ(r.overall.found, 2);
  EXPECT_EQ(r.overall.gold, 1);
  EXPECT_EQ(r.overall.correct, 0);
  EXPECT_EQ(r.f_rate(), 0.0);
}

TEST(ScoreTagged, EqualsScoreChunksOverExtractedSpans) {
  auto g = tagged({{"B-NP", "I-NP", "O", "B-VP"}, {"B-PP", "B-NP", "I-NP"}});
  auto p = tagged({{"B-NP", "I-NP", "B-VP", "I-VP"}, {"O", "B-NP", "I-NP"}});
  auto a = score_tagged(g, p);
  auto b = score_chunks(corpus_spans(g), corpus_spans(p));
  EXPECT_EQ(a.overall, b.overall);
}

TEST(ScoreTagged, TokenMismatch) {
  auto g = tagged({{"B-NP", "I-NP"}});
  auto p = tagged({{"B-NP"}});
  EXPECT_THROW(score_tagged(g, p), AlignmentError);
  auto q = g;
  q.sentences[0].tokens[0].word = "other";
  EXPECT_THROW(score_tagged(g, q), AlignmentError);
}

NestedSentence nested(std::size_t n, std::vector<ChunkSpan> spans) {
  NestedSentence s;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back({"w", "P", std::nullopt});
  s.spans = std::move(spans);
  return s;
}

TEST(ScoreNested, MissingOuterPhrase) {
  auto gold = nested(4, {{0, 4, "NP"}, {0, 2, "NP"}, {2, 4, "NP"}});
  auto pred = nested(4, {{0, 2, "NP"}, {2, 4, "NP"}});
  auto r = score_nested({gold}, {pred});
  EXPECT_DOUBLE_EQ(r.precision(), 1.0);
  EXPECT_NEAR(r.recall(), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(score_nested({gold}, {gold}).f_rate(), 1.0);
}

TEST(ScoreNested, RandomMatchesBruteForce) {
  std::mt19937 rng(9);
  std::vector<NestedSentence> gold, pred;
  auto random_spans = [&](std::size_t n) {
    std::vector<ChunkSpan> out;
    int count = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < count; ++i) {
      std::size_t b = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      std::size_t e = std::uniform_int_distribution<std::size_t>(b + 1, n)(rng);
      out.push_back({b, e, "NP"});
    }
    return out;
  };
  for (int s = 0; s < 30; ++s) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    gold.push_back(nested(n, random_spans(n)));
    pred.push_back(nested(n, random_spans(n)));
  }
  auto r = score_nested(gold, pred);
  SpanSets g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back(gold[i].spans);
    p.push_back(pred[i].spans);
  }
  auto o = oracle::match_spans(g, p);
  EXPECT_EQ(r.overall.correct, o.correct);
  EXPECT_EQ(r.overall.found, o.found);
  EXPECT_EQ(r.overall.gold, o.gold);
}

TEST(Report, TextAndKeyValue) {
  SpanSets gold{{{0, 2, "NP"}, {3, 4, "VP"}}};
  SpanSets pred{{{0, 2, "NP"}}};
  auto r = score_chunks(gold, pred);
  EXPECT_EQ(format_report(r),
            "NP: precision 100.00% recall 100.00% F 100.00\n"
            "VP: precision 0.00% recall 0.00% F 0.00\n"
            "overall: precision 100.00% recall 50.00% F 66.67\n");
  auto kv = format_report_kv(r);
  EXPECT_NE(kv.find("overall.found=1\n"), std::string::npos);
  EXPECT_NE(kv.find("overall.gold=2\n"), std::string::npos);
  EXPECT_NE(kv.find("VP.gold=1\n"), std::string::npos);
}

}  // namespace
