#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "chunkvote/model.hpp"
#include "oracles.hpp"

using namespace chunkvote;

namespace {

Dataset rows(std::vector<std::pair<std::vector<std::string>, std::string>> items) {
  Dataset ds;
  for (auto& [f, c] : items) ds.add(FeatureVector{f}, c);
  return ds;
}

Corpus pos_corpus(std::vector<std::pair<std::string, std::string>> tokens) {
  Corpus c;
  Sentence s;
  for (auto& [p, t] : tokens) s.tokens.push_back({"w", p, t});
  c.sentences.push_back(s);
  return c;
}

// ---------------------------------------------------------------- baseline

TEST(Baseline, ModalTagPerPos) {
  std::vector<std::pair<std::string, std::string>> t;
  for (int i = 0; i < 5; ++i) t.push_back({"DT", "B-NP"});
  for (int i = 0; i < 2; ++i) t.push_back({"DT", "I-NP"});
  for (int i = 0; i < 3; ++i) t.push_back({"NN", "I-NP"});
  auto m = train_baseline(pos_corpus(t));
  EXPECT_EQ(m.predict("DT"), "B-NP");
  EXPECT_EQ(m.predict("NN"), "I-NP");
  EXPECT_EQ(m.predict("XYZ"), "B-NP");  // fallback: 5 B-NP vs 5 I-NP, lexicographic
  EXPECT_THROW(train_baseline(Corpus{}), TrainingError);
}

TEST(Baseline, TaggingIsTableLookup) {
  std::mt19937 rng(2);
  auto c = oracle::random_corpus(rng, 30);
  auto model = train(c, LearnerSpec::of(LearnerKind::Baseline));
  const auto& table = std::get<BaselineModel>(model.params);
  for (const auto& s : c.sentences) {
    auto tags = tag_sentence(model, s);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(tags[i], table.predict(s.tokens[i].pos));
  }
}

// ---------------------------------------------------------------- k-NN

TEST(Knn, ExactMatch) {
  auto ds = rows({{{"1", "0"}, "A"}, {{"0", "1"}, "B"}});
  auto m = train_knn(ds, 1);
  EXPECT_EQ(m.memory.size(), ds.size());
  EXPECT_EQ(predict_knn(m, FeatureVector{{"1", "0"}}), "A");
  EXPECT_EQ(predict_knn(m, FeatureVector{{"0", "1"}}), "B");
  EXPECT_THROW(train_knn(ds, 0), ConfigError);
}

TEST(Knn, LargeKIsWholeMemoryMajority) {
  auto ds = rows({{{"a", "x"}, "A"}, {{"b", "x"}, "B"}, {{"b", "y"}, "B"}, {{"c", "z"}, "B"}});
  auto m = train_knn(ds, 100);
  EXPECT_EQ(predict_knn(m, FeatureVector{{"a", "x"}}), "B");
  auto hood = knn_neighbourhood(m, FeatureVector{{"a", "x"}});
  EXPECT_EQ(hood.at("A") + hood.at("B"), 4);
}

TEST(Knn, ZeroWeightSlotNeverMatters) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto ds = oracle::random_dataset(rng, 30, 3, 3, 3);
    for (auto& ex : ds.items) ex.features.values[1] = "const";
    auto m = train_knn(ds, 2);
    ASSERT_EQ(m.weights[1], 0.0);
    auto q = oracle::random_dataset(rng, 1, 3, 3, 3).items[0].features;
    auto q2 = q;
    q2.values[1] = "something else";
    for (const auto& ex : ds.items) EXPECT_DOUBLE_EQ(m.distance(q, ex.features), m.distance(q2, ex.features));
    EXPECT_EQ(knn_neighbourhood(m, q), knn_neighbourhood(m, q2));
  }
}

TEST(Knn, MatchesBruteForceOracle) {
  std::mt19937 rng(8);
  for (int k : {1, 2, 3, 5}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto ds = oracle::random_dataset(rng, 30, 4, 3, 3);
      auto m = train_knn(ds, k);
      auto queries = oracle::random_dataset(rng, 50, 4, 4, 1);
      for (const auto& q : queries.items) {
        EXPECT_EQ(predict_knn(m, q.features), oracle::knn(ds, m.weights, k, q.features, oracle::label_counts(ds)));
      }
    }
  }
}

TEST(Knn, DuplicateWithUniqueClassWinsAtK1) {
  auto ds = rows({{{"a", "b"}, "X"}, {{"a", "c"}, "Y"}, {{"d", "b"}, "Y"}, {{"a", "b"}, "X"}});
  auto m = train_knn(ds, 1);
  EXPECT_EQ(predict_knn(m, FeatureVector{{"a", "b"}}), "X");
}

// ---------------------------------------------------------------- IGTree

TEST(IGTree, SingleClassIsOneNode) {
  auto m = train_igtree(rows({{{"a", "b"}, "X"}, {{"c", "d"}, "X"}}));
  EXPECT_EQ(m.nodes.size(), 1u);
  EXPECT_EQ(predict_igtree(m, FeatureVector{{"q", "r"}}), "X");
}

TEST(IGTree, DeterminingSlotGivesDepthOne) {
  auto ds = rows({{{"a", "1"}, "A"}, {{"a", "2"}, "A"}, {{"b", "1"}, "B"}, {{"b", "3"}, "B"}, {{"c", "2"}, "C"}});
  auto m = train_igtree(ds);
  EXPECT_EQ(m.order[0], 0u);
  EXPECT_EQ(m.depth(), 1u);
  for (const auto& ex : ds.items) EXPECT_EQ(predict_igtree(m, ex.features), ex.label);
  // Unseen first value: root default.
  EXPECT_EQ(predict_igtree(m, FeatureVector{{"zz", "1"}}), m.nodes[0].default_class);
}

TEST(IGTree, MatchesPathFilterOracle) {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    auto ds = oracle::random_dataset(rng, 25, 4, 3, 3);
    auto m = train_igtree(ds);
    EXPECT_LE(m.depth(), ds.arity());
    EXPECT_EQ(m.order, order_by_weight(slot_weights(ds, Weighting::GainRatio)));
    auto prior = oracle::label_counts(ds);
    for (const auto& ex : ds.items) EXPECT_EQ(predict_igtree(m, ex.features), oracle::igtree_path(ds, m.order, ex.features, prior));
    auto queries = oracle::random_dataset(rng, 20, 4, 4, 1);
    for (const auto& q : queries.items) {
      EXPECT_EQ(predict_igtree(m, q.features), oracle::igtree_path(ds, m.order, q.features, prior));
    }
  }
}

TEST(IGTree, AgreesWithKnnWhenOneSlotDominates) {
  std::mt19937 rng(13);
  Dataset ds;
  const std::vector<std::string> key{"a", "b", "c"}, cls{"A", "B", "C"};
  std::uniform_int_distribution<int> pick(0, 2), noise(0, 7);
  for (int i = 0; i < 90; ++i) {
    int v = i % 3;
    ds.add(FeatureVector{{key[v], "n" + std::to_string(noise(rng)), "m" + std::to_string(noise(rng))}}, cls[v]);
  }
  auto knn = train_knn(ds, 1);
  ASSERT_GT(knn.weights[0], knn.weights[1] + knn.weights[2]);
  auto tree = train_igtree(ds);
  for (int q = 0; q < 50; ++q) {
    FeatureVector x{{key[pick(rng)], "n" + std::to_string(noise(rng) + 3), "m" + std::to_string(noise(rng))}};
    EXPECT_EQ(predict_igtree(tree, x), predict_knn(knn, x));
  }
}

// ---------------------------------------------------------------- MaxEnt

TEST(MaxEnt, MatchesClassFrequency) {
  Dataset ds;
  for (int i = 0; i < 6; ++i) ds.add(FeatureVector{{"x"}}, "A");
  for (int i = 0; i < 2; ++i) ds.add(FeatureVector{{"x"}}, "B");
  auto m = train_maxent(ds);
  auto p = m.distribution(FeatureVector{{"x"}});
  EXPECT_NEAR(p[0], 0.75, 1e-3);
  EXPECT_EQ(predict_maxent(m, FeatureVector{{"x"}}), "A");
}

TEST(MaxEnt, UniformWithoutInformation) {
  Dataset ds;
  for (int i = 0; i < 4; ++i) {
    ds.add(FeatureVector{{"x"}}, "A");
    ds.add(FeatureVector{{"x"}}, "B");
    ds.add(FeatureVector{{"x"}}, "C");
  }
  auto m = train_maxent(ds);
  for (double v : m.distribution(FeatureVector{{"x"}})) EXPECT_NEAR(v, 1.0 / 3, 1e-9);
  for (double v : m.distribution(FeatureVector{{"unseen"}})) EXPECT_NEAR(v, 1.0 / 3, 1e-9);
}

TEST(MaxEnt, UntrainedPredictsPriorModal) {
  auto ds = rows({{{"x"}, "B"}, {{"x"}, "B"}, {{"x"}, "B"}, {{"y"}, "A"}, {{"y"}, "A"}});
  MaxEntParams p;
  p.iterations = 0;
  auto m = train_maxent(ds, p);
  EXPECT_EQ(predict_maxent(m, FeatureVector{{"y"}}), "B");
}

TEST(MaxEnt, DominantFeature) {
  auto ds = rows({{{"z", "1"}, "B"}, {{"z", "2"}, "B"}, {{"z", "1"}, "B"}, {{"q", "1"}, "A"}, {{"q", "2"}, "A"}});
  auto m = train_maxent(ds);
  EXPECT_EQ(predict_maxent(m, FeatureVector{{"z", "1"}}), "B");
  EXPECT_EQ(predict_maxent(m, FeatureVector{{"q", "1"}}), "A");
}

TEST(MaxEnt, CutoffDropsRareFeatures) {
  auto ds = rows({{{"x"}, "A"}, {{"x"}, "A"}, {{"x"}, "B"}});
  auto m = train_maxent(ds);
  EXPECT_EQ(m.feature_count(), 1u);
}

TEST(MaxEnt, ConvergesMonotonicallyOnNoisyData) {
  std::mt19937 rng(21);
  auto ds = oracle::random_dataset(rng, 200, 3, 3, 3);
  MaxEntParams p;
  p.iterations = 5000;
  auto m = train_maxent(ds, p);
  EXPECT_LT(m.max_constraint_gap, 1e-3 * ds.size());
  for (std::size_t i = 1; i < m.log_likelihood.size(); ++i) EXPECT_GE(m.log_likelihood[i], m.log_likelihood[i - 1] - 1e-9);
  for (const auto& q : oracle::random_dataset(rng, 50, 3, 4, 1).items) {
    auto dist = m.distribution(q.features);
    EXPECT_NEAR(std::accumulate(dist.begin(), dist.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(MaxEnt, SmoothingShrinksWeights) {
  std::mt19937 rng(22);
  auto ds = oracle::random_dataset(rng, 100, 2, 3, 2);
  MaxEntParams plain, smooth;
  plain.iterations = smooth.iterations = 200;
  smooth.sigma = 0.5;
  auto a = train_maxent(ds, plain), b = train_maxent(ds, smooth);
  auto norm = [](const MaxEntModel& m) {
    double s = 0;
    for (const auto& slot : m.weights)
      for (const auto& [_, fs] : slot)
        for (const auto& [c, w] : fs) s += w * w;
    return s;
  };
  EXPECT_LT(norm(b), norm(a));
}

// ---------------------------------------------------------------- rules

// Accuracy of the best single premise refinement of `covered`, by exhaustive search.
double best_refinement(const Dataset& ds, const std::vector<std::size_t>& covered, const std::set<std::size_t>& used,
                       long min_support) {
  double best = -1;
  for (std::size_t s = 0; s < ds.arity(); ++s) {
    if (used.count(s)) continue;
    std::set<std::string> values;
    for (auto i : covered) values.insert(ds.items[i].features[s]);
    for (const auto& v : values) {
      std::map<std::string, long> c;
      long n = 0;
      for (auto i : covered) {
        if (ds.items[i].features[s] == v) {
          ++c[ds.items[i].label];
          ++n;
        }
      }
      if (n < min_support) continue;
      long top = 0;
      for (const auto& [_, k] : c) top = std::max(top, k);
      best = std::max(best, double(top) / n);
    }
  }
  return best;
}

TEST(Rules, AccurateFocusNeedsNoRefinement) {
  auto ds = rows({{{"x", "DT"}, "B-NP"}, {{"y", "DT"}, "B-NP"}, {{"x", "NN"}, "I-NP"}, {{"z", "NN"}, "I-NP"}});
  auto m = train_rules(ds, 1);
  ASSERT_EQ(m.rules.size(), 2u);
  for (const auto& r : m.rules) {
    EXPECT_EQ(r.premises.size(), 1u);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  }
}

TEST(Rules, LeftPosDisambiguates) {
  // slots: p-1, p0, w0.  VBN after DT is inside an NP, elsewhere inside a VP.
  auto ds = rows({{{"DT", "VBN", "a"}, "I-NP"},
                  {{"DT", "VBN", "b"}, "I-NP"},
                  {{"VBZ", "VBN", "a"}, "I-VP"},
                  {{"VBZ", "VBN", "b"}, "I-VP"},
                  {{"VBD", "VBN", "c"}, "I-VP"},
                  {{"VBD", "VBN", "d"}, "I-VP"}});
  auto m = train_rules(ds, 1, {}, {SlotKind::Pos, SlotKind::Pos, SlotKind::Word});
  ASSERT_FALSE(m.rules.empty());
  const auto& top = m.rules.front();
  ASSERT_EQ(top.premises.size(), 2u);
  EXPECT_EQ(top.premises[1].slot, 0u);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_DOUBLE_EQ(top.accuracy, best_refinement(ds, all, {1}, 2));
  EXPECT_EQ(m.predict(FeatureVector{{"DT", "VBN", "z"}}), "I-NP");
  EXPECT_EQ(m.predict(FeatureVector{{"VBZ", "VBN", "z"}}), "I-VP");
}

TEST(Rules, RefinementsAreBestAvailableAndAccuraciesReproduce) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    auto ds = oracle::random_dataset(rng, 40, 4, 3, 3);
    RuleParams params;
    params.threshold = 1.0;
    auto m = train_rules(ds, 0, params);
    for (const auto& r : m.rules) {
      std::vector<std::size_t> covered;
      std::map<std::string, long> c;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (r.matches(ds.items[i].features)) {
          covered.push_back(i);
          ++c[ds.items[i].label];
        }
      }
      EXPECT_EQ(r.support, static_cast<long>(covered.size()));
      EXPECT_NEAR(r.accuracy, double(c[r.conclusion]) / covered.size(), 1e-12);
      // Each refinement picked the best available premise.
      if (r.premises.size() >= 2) {
        std::vector<std::size_t> parent;
        std::set<std::size_t> used;
        for (std::size_t p = 0; p + 1 < r.premises.size(); ++p) used.insert(r.premises[p].slot);
        for (std::size_t i = 0; i < ds.size(); ++i) {
          bool ok = true;
          for (std::size_t p = 0; p + 1 < r.premises.size(); ++p) ok = ok && ds.items[i].features[r.premises[p].slot] == r.premises[p].value;
          if (ok) parent.push_back(i);
        }
        EXPECT_DOUBLE_EQ(r.accuracy, best_refinement(ds, parent, used, params.min_support));
      }
    }
    for (std::size_t i = 1; i < m.rules.size(); ++i) EXPECT_GE(m.rules[i - 1].premises.size(), m.rules[i].premises.size());
  }
}

TEST(Rules, NoisyDataTerminates) {
  auto ds = rows({{{"a", "x"}, "A"}, {{"a", "x"}, "B"}, {{"a", "x"}, "A"}, {{"a", "x"}, "B"}});
  RuleParams p;
  p.threshold = 1.0;
  auto m = train_rules(ds, 0, p);
  ASSERT_EQ(m.rules.size(), 1u);
  EXPECT_DOUBLE_EQ(m.rules[0].accuracy, 0.5);
  EXPECT_THROW(train_rules(ds, 0, RuleParams{0.0, 2}), ConfigError);
}

// ---------------------------------------------------------------- tagging and models

std::vector<LearnerSpec> all_specs() {
  std::vector<LearnerSpec> out;
  for (auto k : {LearnerKind::Baseline, LearnerKind::Knn, LearnerKind::IGTree, LearnerKind::MaxEnt, LearnerKind::Rules}) {
    auto s = LearnerSpec::of(k);
    s.maxent.iterations = 30;
    out.push_back(s);
  }
  return out;
}

TEST(TagSentence, UniquePathsReproduceTraining) {
  Corpus c;
  Sentence s;
  const std::vector<std::tuple<std::string, std::string, std::string>> t{
      {"He", "PRP", "B-NP"}, {"reckons", "VBZ", "B-VP"}, {"the", "DT", "B-NP"}, {"current", "JJ", "I-NP"},
      {"account", "NN", "I-NP"}, {"deficit", "NN", "I-NP"}, {"will", "MD", "B-VP"}, {"narrow", "VB", "I-VP"}};
  for (const auto& [w, p, g] : t) s.tokens.push_back({w, p, g});
  c.sentences.push_back(s);
  auto model = train(c, LearnerSpec::of(LearnerKind::IGTree));
  EXPECT_EQ(tag_sentence(model, s), s.tags());
}

TEST(TagSentence, AllLearnersDeterministicAndThreadSafe) {
  std::mt19937 rng(41);
  auto train_c = oracle::random_corpus(rng, 60);
  auto test_c = oracle::random_corpus(rng, 40);
  for (const auto& spec : all_specs()) {
    auto model = train(train_c, spec);
    auto seq = tag_corpus(model, test_c, 1);
    auto par = tag_corpus(model, test_c, 4);
    EXPECT_EQ(seq, par) << spec.display_name();
    EXPECT_EQ(seq, tag_corpus(model, test_c, 1));
    for (std::size_t i = 0; i < seq.sentences.size(); ++i) {
      auto tags = seq.sentences[i].tags();
      EXPECT_EQ(tags.size(), test_c.sentences[i].size());
      EXPECT_TRUE(valid_under(repair_tags(tags), TagScheme::IOB2));
    }
    // Trained learners should beat chance on this easy task.
    EXPECT_GT(score_tagged(test_c, seq).f_rate(), 0.5) << spec.display_name();
  }
}

TEST(TagSentence, InsideOutsideOption) {
  std::mt19937 rng(43);
  auto c = oracle::random_corpus(rng, 40);
  for (auto kind : {LearnerKind::Baseline, LearnerKind::Rules}) {
    auto spec = LearnerSpec::of(kind);
    spec.io = true;
    auto model = train(c, spec);
    for (const auto& s : c.sentences) EXPECT_TRUE(valid_under(tag_sentence(model, s), TagScheme::IOB2));
  }
  auto bad = LearnerSpec::of(LearnerKind::Knn);
  bad.io = true;
  EXPECT_THROW(train(c, bad), ConfigError);
}

TEST(Model, SaveLoadRoundTrip) {
  std::mt19937 rng(47);
  auto train_c = oracle::random_corpus(rng, 40);
  auto test_c = oracle::random_corpus(rng, 20);
  auto specs = all_specs();
  auto io = LearnerSpec::of(LearnerKind::Rules);
  io.io = true;
  specs.push_back(io);
  auto smooth = LearnerSpec::of(LearnerKind::MaxEnt);
  smooth.maxent.sigma = 2.0;
  smooth.maxent.iterations = 20;
  specs.push_back(smooth);
  for (const auto& spec : specs) {
    auto model = train(train_c, spec);
    auto text = save_model(model);
    auto back = load_model(text);
    EXPECT_EQ(save_model(back), text) << spec.display_name();
    EXPECT_EQ(tag_corpus(back, test_c), tag_corpus(model, test_c)) << spec.display_name();
  }
  EXPECT_THROW(load_model("not a model\n"), ParseError);
}

TEST(LearnerSpec, Parse) {
  auto s = parse_learner_spec("knn:k=5,weighting=ig,name=mbl,left_words=3");
  EXPECT_EQ(s.kind, LearnerKind::Knn);
  EXPECT_EQ(s.k, 5);
  EXPECT_EQ(s.weighting, Weighting::InformationGain);
  EXPECT_EQ(s.display_name(), "mbl");
  EXPECT_EQ(s.window.left_words, 3);
  EXPECT_EQ(parse_learner_spec("maxent").window, WindowConfig::maxent());
  EXPECT_EQ(parse_learner_spec("rules:threshold=0.9").rules.threshold, 0.9);
  EXPECT_THROW(parse_learner_spec("svm"), ConfigError);
  EXPECT_THROW(parse_learner_spec("knn:colour=red"), ConfigError);
  EXPECT_THROW(parse_learner_spec("knn:k"), ConfigError);
}

}  // namespace
