#pragma once

// System combination: prediction tables, tuning data from cross-validation,
// weight estimation, the voting and stacking combiners, best-N subset search,
// and chunk combination through separate start and end bracket streams.

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/igtree.hpp"
#include "chunkvote/knn.hpp"
#include "chunkvote/metrics.hpp"
#include "chunkvote/model.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

struct PredictionRow {
  std::optional<std::string> gold;
  std::string pos;
  std::vector<std::string> preds;  // one per system

  bool operator==(const PredictionRow&) const = default;
};

struct PredictionTable {
  std::vector<std::string> systems;
  std::vector<std::vector<PredictionRow>> sentences;

  bool operator==(const PredictionTable&) const = default;

  bool has_gold() const {
    for (const auto& s : sentences) {
      for (const auto& r : s) {
        if (!r.gold) return false;
      }
    }
    return !sentences.empty();
  }

  std::size_t row_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  Tags gold_tags(std::size_t sentence) const {
    Tags out;
    for (const auto& r : sentences[sentence]) out.push_back(r.gold.value_or("O"));
    return out;
  }

  Tags system_tags(std::size_t sentence, std::size_t system) const {
    Tags out;
    for (const auto& r : sentences[sentence]) out.push_back(r.preds[system]);
    return out;
  }

  void check() const {
    if (systems.empty()) throw ValidationError("prediction table has no systems");
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      for (const auto& r : sentences[s]) {
        if (r.preds.size() != systems.size()) {
          throw ValidationError("sentence " + std::to_string(s) + ": row has " + std::to_string(r.preds.size()) +
                                " predictions for " + std::to_string(systems.size()) + " systems");
        }
      }
    }
  }
};

/// Column file: a `# [gold] pos sys1 ... sysK` header, then one row per token
/// and a blank line after each sentence.
inline std::string write_table(const PredictionTable& t) {
  t.check();
  const bool gold = t.has_gold();
  std::string out = gold ? "# gold pos" : "# pos";
  for (const auto& s : t.systems) out += " " + s;
  out += "\n";
  for (const auto& sentence : t.sentences) {
    for (const auto& r : sentence) {
      if (gold) out += *r.gold + " ";
      out += r.pos;
      for (const auto& p : r.preds) out += " " + p;
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

inline PredictionTable parse_table(std::string_view text) {
  PredictionTable t;
  bool header_seen = false;
  bool gold = false;
  std::vector<PredictionRow> current;
  auto flush = [&] {
    if (!current.empty()) t.sentences.push_back(std::move(current));
    current.clear();
  };
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto fields = detail::split_fields(line);
    if (fields.empty()) {
      flush();
      return;
    }
    if (!header_seen) {
      if (fields[0] != "#") throw ParseError("line " + std::to_string(line_no) + ": missing '# ... pos ...' header");
      std::size_t i = 1;
      if (i < fields.size() && fields[i] == "gold") {
        gold = true;
        ++i;
      }
      if (i >= fields.size() || fields[i] != "pos") throw ParseError("line " + std::to_string(line_no) + ": header needs a pos column");
      for (++i; i < fields.size(); ++i) t.systems.emplace_back(fields[i]);
      if (t.systems.empty()) throw ParseError("line " + std::to_string(line_no) + ": header names no systems");
      header_seen = true;
      return;
    }
    std::size_t expected = t.systems.size() + 1 + (gold ? 1 : 0);
    if (fields.size() != expected) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                       " columns, found " + std::to_string(fields.size()));
    }
    PredictionRow row;
    std::size_t i = 0;
    if (gold) row.gold = std::string(fields[i++]);
    row.pos = std::string(fields[i++]);
    for (; i < fields.size(); ++i) row.preds.emplace_back(fields[i]);
    for (const auto& tag : row.preds) {
      if (!split_tag(tag)) throw ParseError("line " + std::to_string(line_no) + ": malformed tag '" + tag + "'");
    }
    if (row.gold && !split_tag(*row.gold)) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed tag '" + *row.gold + "'");
    }
    current.push_back(std::move(row));
  });
  flush();
  if (!header_seen) throw ParseError("prediction table is empty");
  return t;
}

/// Joins system outputs over the same sentences into one table. Gold tags
/// come from `reference` when it is labeled.
inline PredictionTable make_table(const Corpus& reference,
                                  const std::vector<std::pair<std::string, Corpus>>& outputs) {
  PredictionTable t;
  for (const auto& [name, c] : outputs) {
    t.systems.push_back(name);
    if (c.sentences.size() != reference.sentences.size()) {
      throw AlignmentError("system '" + name + "' covers " + std::to_string(c.sentences.size()) +
                           " sentences, reference has " + std::to_string(reference.sentences.size()));
    }
  }
  for (std::size_t s = 0; s < reference.sentences.size(); ++s) {
    const auto& ref = reference.sentences[s];
    std::vector<PredictionRow> rows(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      rows[i].gold = ref.tokens[i].chunk_tag;
      rows[i].pos = ref.tokens[i].pos;
    }
    for (const auto& [name, c] : outputs) {
      const auto& sys = c.sentences[s];
      if (sys.size() != ref.size()) {
        throw AlignmentError("system '" + name + "', sentence " + std::to_string(s) + ": length mismatch");
      }
      for (std::size_t i = 0; i < ref.size(); ++i) rows[i].preds.push_back(sys.tokens[i].chunk_tag.value_or("O"));
    }
    t.sentences.push_back(std::move(rows));
  }
  return t;
}

/// Out-of-fold predictions: sentence i goes to fold i % folds; each system is
/// trained on the other folds and tags the held-out one.
inline PredictionTable cv_tuning_table(const Corpus& corpus, const std::vector<LearnerSpec>& specs, int folds,
                                       unsigned threads = 1) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (corpus.sentences.size() < static_cast<std::size_t>(folds)) {
    throw ConfigError("corpus has " + std::to_string(corpus.sentences.size()) + " sentences, fewer than " +
                      std::to_string(folds) + " folds");
  }
  if (specs.empty()) throw ConfigError("no learners given");
  const auto nf = static_cast<std::size_t>(folds);

  std::vector<Corpus> train_parts(nf), held_out(nf);
  std::vector<std::vector<std::size_t>> held_index(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    train_parts[f].scheme = held_out[f].scheme = corpus.scheme;
  }
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    std::size_t f = i % nf;
    held_out[f].sentences.push_back(corpus.sentences[i]);
    held_index[f].push_back(i);
    for (std::size_t g = 0; g < nf; ++g) {
      if (g != f) train_parts[g].sentences.push_back(corpus.sentences[i]);
    }
  }

  // outputs[system][fold]
  std::vector<std::vector<Corpus>> outputs(specs.size(), std::vector<Corpus>(nf));
  auto job = [&](std::size_t sys, std::size_t f) {
    auto model = train(train_parts[f], specs[sys]);
    outputs[sys][f] = tag_corpus(model, held_out[f]);
  };
  if (threads <= 1) {
    for (std::size_t sys = 0; sys < specs.size(); ++sys) {
      for (std::size_t f = 0; f < nf; ++f) job(sys, f);
    }
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t sys = 0; sys < specs.size(); ++sys) {
      for (std::size_t f = 0; f < nf; ++f) work.emplace_back(sys, f);
    }
    for (std::size_t from = 0; from < work.size(); from += threads) {
      std::vector<std::future<void>> batch;
      for (std::size_t w = from; w < std::min(work.size(), from + threads); ++w) {
        batch.push_back(std::async(std::launch::async, job, work[w].first, work[w].second));
      }
      for (auto& b : batch) b.get();
    }
  }

  std::vector<std::pair<std::string, Corpus>> merged;
  for (std::size_t sys = 0; sys < specs.size(); ++sys) {
    Corpus c;
    c.scheme = corpus.scheme;
    c.sentences.resize(corpus.sentences.size());
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t j = 0; j < held_index[f].size(); ++j) {
        c.sentences[held_index[f][j]] = outputs[sys][f].sentences[j];
      }
    }
    merged.emplace_back(specs[sys].display_name(), std::move(c));
  }
  return make_table(corpus, merged);
}

// ---------------------------------------------------------------------------
// Weights

struct CombinerWeights {
  std::vector<std::string> systems;
  std::vector<double> accuracy;
  std::vector<std::map<std::string, double>> tag_precision;  // per system
  std::vector<std::map<std::string, double>> tag_recall;     // per system
  /// (s1, s2, t1, t2) with s1 < s2 -> distribution of gold tags.
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::string>, std::map<std::string, double>> pair_prob;
  /// Gold tag frequencies in the tuning data; drives the tie rule.
  ClassPrior prior;

  double precision_of(std::size_t s, const std::string& t) const {
    auto it = tag_precision[s].find(t);
    return it == tag_precision[s].end() ? 0.0 : it->second;
  }
  double recall_of(std::size_t s, const std::string& t) const {
    auto it = tag_recall[s].find(t);
    return it == tag_recall[s].end() ? 0.0 : it->second;
  }
};

inline CombinerWeights estimate_weights(const PredictionTable& tuning) {
  tuning.check();
  if (!tuning.has_gold()) throw ConfigError("tuning table has no gold tags");
  const std::size_t ns = tuning.systems.size();
  CombinerWeights w;
  w.systems = tuning.systems;

  std::vector<long> correct(ns, 0);
  std::vector<std::map<std::string, long>> predicted(ns), predicted_right(ns);
  std::map<std::string, long> gold_count;
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::string>, std::map<std::string, long>> pairs;
  long rows = 0;
  for (const auto& sentence : tuning.sentences) {
    for (const auto& r : sentence) {
      ++rows;
      const auto& g = *r.gold;
      ++gold_count[g];
      for (std::size_t s = 0; s < ns; ++s) {
        ++predicted[s][r.preds[s]];
        if (r.preds[s] == g) {
          ++correct[s];
          ++predicted_right[s][g];
        }
        for (std::size_t s2 = s + 1; s2 < ns; ++s2) ++pairs[{s, s2, r.preds[s], r.preds[s2]}][g];
      }
    }
  }
  for (const auto& [t, n] : gold_count) w.prior.add(t, n);
  w.tag_precision.resize(ns);
  w.tag_recall.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    w.accuracy.push_back(rows == 0 ? 0.0 : static_cast<double>(correct[s]) / rows);
    for (const auto& [t, n] : predicted[s]) {
      w.tag_precision[s][t] = static_cast<double>(predicted_right[s][t]) / n;
    }
    for (const auto& [t, n] : gold_count) {
      auto it = predicted_right[s].find(t);
      w.tag_recall[s][t] = it == predicted_right[s].end() ? 0.0 : static_cast<double>(it->second) / n;
    }
  }
  for (const auto& [key, dist] : pairs) {
    long total = 0;
    for (const auto& [_, n] : dist) total += n;
    auto& out = w.pair_prob[key];
    for (const auto& [g, n] : dist) out[g] = static_cast<double>(n) / total;
  }
  return w;
}

inline std::string write_weights(const CombinerWeights& w) {
  std::ostringstream os;
  auto num = [](double v) { return detail::num(v); };
  os << "chunkvote-weights 1\nsystems " << w.systems.size();
  for (const auto& s : w.systems) os << ' ' << s;
  os << "\n";
  detail::write_prior(os, w.prior);
  for (std::size_t s = 0; s < w.systems.size(); ++s) os << "accuracy " << s << ' ' << num(w.accuracy[s]) << "\n";
  for (std::size_t s = 0; s < w.systems.size(); ++s) {
    for (const auto& [t, v] : w.tag_precision[s]) os << "precision " << s << ' ' << t << ' ' << num(v) << "\n";
    for (const auto& [t, v] : w.tag_recall[s]) os << "recall " << s << ' ' << t << ' ' << num(v) << "\n";
  }
  for (const auto& [key, dist] : w.pair_prob) {
    const auto& [s1, s2, t1, t2] = key;
    for (const auto& [g, p] : dist) {
      os << "pair " << s1 << ' ' << s2 << ' ' << t1 << ' ' << t2 << ' ' << g << ' ' << num(p) << "\n";
    }
  }
  os << "end\n";
  return os.str();
}

inline CombinerWeights parse_weights(std::string_view text) {
  detail::Reader in(text);
  in.expect("chunkvote-weights");
  if (in.integer() != 1) throw ParseError("unsupported weights format version");
  CombinerWeights w;
  in.expect("systems");
  for (std::size_t i = 0, n = in.count(); i < n; ++i) w.systems.push_back(in.word());
  const std::size_t ns = w.systems.size();
  w.prior = in.prior();
  w.accuracy.assign(ns, 0.0);
  w.tag_precision.resize(ns);
  w.tag_recall.resize(ns);
  auto system = [&] {
    auto s = in.count();
    if (s >= ns) throw ParseError("weights file: system index out of range");
    return s;
  };
  for (;;) {
    auto key = in.word();
    if (key == "end") break;
    if (key == "accuracy") {
      auto s = system();
      w.accuracy[s] = in.real();
    } else if (key == "precision" || key == "recall") {
      auto s = system();
      auto t = in.word();
      (key == "precision" ? w.tag_precision : w.tag_recall)[s][t] = in.real();
    } else if (key == "pair") {
      auto s1 = system();
      auto s2 = system();
      auto t1 = in.word();
      auto t2 = in.word();
      auto g = in.word();
      w.pair_prob[{s1, s2, t1, t2}][g] = in.real();
    } else {
      throw ParseError("weights file: unknown record '" + key + "'");
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Voting

enum class VoteMethod { Majority, TotPrecision, TagPrecision, PrecisionRecall, TagPair };

/// Per-tag scores for one row. Candidate tags are the voted ones, plus (for
/// TagPair) every gold tag seen with the row's prediction pairs in tuning.
inline std::map<std::string, double> vote_scores(const std::vector<std::string>& preds, VoteMethod method,
                                                 const CombinerWeights* w) {
  const std::size_t ns = preds.size();
  if (method != VoteMethod::Majority) {
    if (!w) throw ConfigError("weighted voting needs weights estimated from tuning data");
    if (w->systems.size() != ns) throw ConfigError("weights cover a different number of systems");
  }
  std::map<std::string, double> score;
  for (const auto& p : preds) score[p] = 0.0;

  switch (method) {
    case VoteMethod::Majority:
      for (const auto& p : preds) score[p] += 1.0;
      break;
    case VoteMethod::TotPrecision:
      for (std::size_t s = 0; s < ns; ++s) score[preds[s]] += w->accuracy[s];
      break;
    case VoteMethod::TagPrecision:
      for (std::size_t s = 0; s < ns; ++s) score[preds[s]] += w->precision_of(s, preds[s]);
      break;
    case VoteMethod::PrecisionRecall:
      // A system backs its own tag with its precision on it, and every other
      // candidate with 1 - its recall on that candidate.
      for (auto& [t, sc] : score) {
        for (std::size_t s = 0; s < ns; ++s) {
          sc += preds[s] == t ? w->precision_of(s, t) : 1.0 - w->recall_of(s, t);
        }
        sc /= static_cast<double>(ns);
      }
      break;
    case VoteMethod::TagPair:
      for (std::size_t s1 = 0; s1 < ns; ++s1) {
        for (std::size_t s2 = s1 + 1; s2 < ns; ++s2) {
          auto it = w->pair_prob.find({s1, s2, preds[s1], preds[s2]});
          if (it != w->pair_prob.end()) {
            for (const auto& [g, p] : it->second) score[g] += p;
          } else {
            score[preds[s1]] += w->precision_of(s1, preds[s1]) / 2.0;
            score[preds[s2]] += w->precision_of(s2, preds[s2]) / 2.0;
          }
        }
      }
      break;
  }
  return score;
}

/// Combined tag for one row. A unanimous row is returned unchanged.
inline std::string vote(const std::vector<std::string>& preds, VoteMethod method, const CombinerWeights* w,
                        const ClassPrior& prior) {
  if (preds.empty()) throw ContractError("vote over zero systems");
  if (std::all_of(preds.begin(), preds.end(), [&](const std::string& p) { return p == preds.front(); })) {
    if (method != VoteMethod::Majority && !w) throw ConfigError("weighted voting needs weights");
    return preds.front();
  }
  return *argmax_label(vote_scores(preds, method, w), prior);
}

inline std::string vote(const std::vector<std::string>& preds, VoteMethod method, const CombinerWeights* w = nullptr) {
  static const ClassPrior none;
  return vote(preds, method, w, w ? w->prior : none);
}

// ---------------------------------------------------------------------------
// Stacking

inline FeatureVector stacked_features(const PredictionRow& row, bool add_pos) {
  FeatureVector fv{row.preds};
  if (add_pos) fv.values.push_back(row.pos);
  return fv;
}

inline Dataset stacked_dataset(const PredictionTable& tuning, bool add_pos) {
  if (!tuning.has_gold()) throw ConfigError("stacking needs a tuning table with gold tags");
  Dataset ds;
  for (const auto& s : tuning.sentences) {
    for (const auto& r : s) ds.add(stacked_features(r, add_pos), *r.gold);
  }
  return ds;
}

/// Second-level learner over the systems' predictions (and optionally the POS tag).
inline TrainedModel stacked_train(const PredictionTable& tuning, LearnerKind learner, bool add_pos, int k = 3) {
  tuning.check();
  TrainedModel m;
  m.kind = learner;
  m.window = WindowConfig{0, 0, 0, 0, 0, false, false, false};
  Dataset ds = stacked_dataset(tuning, add_pos);
  if (learner == LearnerKind::Knn) m.params = train_knn(ds, k);
  else if (learner == LearnerKind::IGTree) m.params = train_igtree(ds);
  else throw ConfigError("stacked learner must be knn or igtree");
  return m;
}

// ---------------------------------------------------------------------------
// Bracket streams

inline const std::string kNoBracket = "O";

/// Per token: the type of the chunk starting here (start stream) and of the
/// chunk ending here (end stream), or `O`.
inline std::pair<Tags, Tags> bracket_votes(const std::vector<ChunkSpan>& spans, std::size_t length) {
  Tags starts(length, kNoBracket), ends(length, kNoBracket);
  for (const auto& s : spans) {
    starts[s.begin] = "B-" + s.label;
    ends[s.end - 1] = "B-" + s.label;
  }
  return {starts, ends};
}

/// Rebuilds chunks: each start of type T pairs with the nearest end of type T
/// at or after it, provided no other start of T comes first. Unmatched and
/// crossing brackets are dropped.
inline std::vector<ChunkSpan> restore_chunks(const Tags& starts, const Tags& ends) {
  std::vector<ChunkSpan> out;
  std::size_t last_end = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] == kNoBracket) continue;
    for (std::size_t j = i; j < starts.size(); ++j) {
      if (j > i && starts[j] == starts[i]) break;
      if (ends[j] == starts[i]) {
        if (i >= last_end) {
          out.push_back({i, j + 1, std::string(tag_parts(starts[i]).type)});
          last_end = j + 1;
        }
        break;
      }
    }
  }
  return out;
}

/// Tables whose tags are the start (first) and end (second) bracket votes.
inline std::pair<PredictionTable, PredictionTable> bracket_tables(const PredictionTable& t) {
  PredictionTable st, en;
  st.systems = en.systems = t.systems;
  for (std::size_t s = 0; s < t.sentences.size(); ++s) {
    const auto& rows = t.sentences[s];
    std::vector<PredictionRow> srows(rows.size()), erows(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) srows[i].pos = erows[i].pos = rows[i].pos;
    if (t.has_gold()) {
      auto [gs, ge] = bracket_votes(extract_chunks(t.gold_tags(s)), rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        srows[i].gold = gs[i];
        erows[i].gold = ge[i];
      }
    }
    for (std::size_t sys = 0; sys < t.systems.size(); ++sys) {
      auto [ps, pe] = bracket_votes(extract_chunks(t.system_tags(s, sys)), rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        srows[i].preds.push_back(ps[i]);
        erows[i].preds.push_back(pe[i]);
      }
    }
    st.sentences.push_back(std::move(srows));
    en.sentences.push_back(std::move(erows));
  }
  return {st, en};
}

// ---------------------------------------------------------------------------
// Combiners

enum class Method {
  Majority,
  TotPrecision,
  TagPrecision,
  PrecisionRecall,
  TagPair,
  StackedKnn,
  StackedKnnPos,
  StackedIGTree,
  StackedIGTreePos,
  BestN,
};

inline constexpr Method kAllMethods[] = {Method::Majority,      Method::TotPrecision,    Method::TagPrecision,
                                         Method::PrecisionRecall, Method::TagPair,       Method::StackedKnn,
                                         Method::StackedKnnPos, Method::StackedIGTree,   Method::StackedIGTreePos,
                                         Method::BestN};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Majority: return "majority";
    case Method::TotPrecision: return "totprecision";
    case Method::TagPrecision: return "tagprecision";
    case Method::PrecisionRecall: return "precision-recall";
    case Method::TagPair: return "tagpair";
    case Method::StackedKnn: return "stacked-knn";
    case Method::StackedKnnPos: return "stacked-knn-pos";
    case Method::StackedIGTree: return "stacked-igtree";
    case Method::StackedIGTreePos: return "stacked-igtree-pos";
    case Method::BestN: return "best-n";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (auto m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown combination method '" + std::string(name) + "'");
}

inline bool needs_tuning(Method m) { return m != Method::Majority; }

inline std::optional<VoteMethod> as_vote_method(Method m) {
  switch (m) {
    case Method::Majority: return VoteMethod::Majority;
    case Method::TotPrecision: return VoteMethod::TotPrecision;
    case Method::TagPrecision: return VoteMethod::TagPrecision;
    case Method::PrecisionRecall: return VoteMethod::PrecisionRecall;
    case Method::TagPair: return VoteMethod::TagPair;
    default: return std::nullopt;
  }
}

struct CombinerOptions {
  int k = 3;                  // stacked k-NN regions
  std::size_t best_n = 3;     // subset size for best-N
  bool bracket_level = false;
};

/// Row-level combiner fitted on a tuning table.
class TokenCombiner {
 public:
  static TokenCombiner fit(Method method, const PredictionTable* tuning, const CombinerOptions& opt,
                           std::size_t system_count) {
    TokenCombiner c;
    c.method_ = method;
    c.systems_ = system_count;
    if (needs_tuning(method) && !tuning) {
      throw ConfigError("method '" + std::string(to_string(method)) + "' needs tuning data");
    }
    if (tuning) {
      if (tuning->systems.size() != system_count) throw ConfigError("tuning table has a different system count");
      c.weights_ = estimate_weights(*tuning);
      c.prior_ = c.weights_->prior;
    }
    switch (method) {
      case Method::StackedKnn:
      case Method::StackedKnnPos:
        c.stacked_ = stacked_train(*tuning, LearnerKind::Knn, method == Method::StackedKnnPos, opt.k);
        break;
      case Method::StackedIGTree:
      case Method::StackedIGTreePos:
        c.stacked_ = stacked_train(*tuning, LearnerKind::IGTree, method == Method::StackedIGTreePos);
        break;
      default:
        break;
    }
    c.add_pos_ = method == Method::StackedKnnPos || method == Method::StackedIGTreePos;
    for (std::size_t s = 0; s < system_count; ++s) c.subset_.push_back(s);
    return c;
  }

  /// Voting combiner from previously estimated weights.
  static TokenCombiner from_weights(Method method, CombinerWeights w) {
    if (!as_vote_method(method)) {
      throw ConfigError("method '" + std::string(to_string(method)) + "' cannot run from a weights file");
    }
    TokenCombiner c;
    c.method_ = method;
    c.systems_ = w.systems.size();
    c.prior_ = w.prior;
    c.weights_ = std::move(w);
    for (std::size_t s = 0; s < c.systems_; ++s) c.subset_.push_back(s);
    return c;
  }

  void restrict_to(std::vector<std::size_t> subset) { subset_ = std::move(subset); }
  const std::vector<std::size_t>& subset() const { return subset_; }

  std::string combine(const PredictionRow& row) const {
    if (row.preds.size() != systems_) throw ValidationError("row has the wrong number of predictions");
    if (std::all_of(row.preds.begin(), row.preds.end(), [&](const auto& p) { return p == row.preds.front(); })) {
      return row.preds.front();
    }
    if (stacked_) return stacked_->predict(stacked_features(row, add_pos_));
    if (method_ == Method::BestN) {
      std::vector<std::string> picked;
      for (auto s : subset_) picked.push_back(row.preds[s]);
      return vote(picked, VoteMethod::Majority, nullptr, prior_);
    }
    return vote(row.preds, *as_vote_method(method_), weights_ ? &*weights_ : nullptr, prior_);
  }

 private:
  Method method_ = Method::Majority;
  std::size_t systems_ = 0;
  std::optional<CombinerWeights> weights_;
  std::optional<TrainedModel> stacked_;
  bool add_pos_ = false;
  std::vector<std::size_t> subset_;
  ClassPrior prior_;
};

/// Chunk output of combining the start/end streams of every system.
/// `spans[system][sentence]`, `lengths[sentence]`.
inline std::vector<std::vector<ChunkSpan>> combine_brackets(const std::vector<SpanSets>& spans,
                                                            const std::vector<std::size_t>& lengths,
                                                            const TokenCombiner& start_combiner,
                                                            const TokenCombiner& end_combiner,
                                                            const std::vector<std::string>* pos = nullptr) {
  std::vector<std::vector<ChunkSpan>> out;
  for (const auto& sys : spans) {
    if (sys.size() != lengths.size()) throw AlignmentError("systems cover different sentence counts");
  }
  std::size_t offset = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    const std::size_t n = lengths[s];
    std::vector<PredictionRow> srows(n), erows(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (pos) srows[i].pos = erows[i].pos = (*pos)[offset + i];
    }
    for (const auto& sys : spans) {
      auto [st, en] = bracket_votes(sys[s], n);
      for (std::size_t i = 0; i < n; ++i) {
        srows[i].preds.push_back(st[i]);
        erows[i].preds.push_back(en[i]);
      }
    }
    Tags starts, ends;
    for (std::size_t i = 0; i < n; ++i) {
      starts.push_back(start_combiner.combine(srows[i]));
      ends.push_back(end_combiner.combine(erows[i]));
    }
    out.push_back(restore_chunks(starts, ends));
    offset += n;
  }
  return out;
}

/// Majority-vote form of combine_brackets.
inline std::vector<std::vector<ChunkSpan>> combine_brackets(const std::vector<SpanSets>& spans,
                                                            const std::vector<std::size_t>& lengths) {
  auto majority = TokenCombiner::fit(Method::Majority, nullptr, {}, spans.size());
  return combine_brackets(spans, lengths, majority, majority);
}

/// Fitted combination method at token or bracket level.
class Combiner {
 public:
  static Combiner fit(Method method, const PredictionTable* tuning, const CombinerOptions& opt,
                      std::size_t system_count);

  /// Token-level voting from a weights file.
  static Combiner from_weights(Method method, CombinerWeights w) {
    Combiner c;
    c.method_ = method;
    c.tokens_ = TokenCombiner::from_weights(method, std::move(w));
    return c;
  }

  Method method() const { return method_; }
  bool bracket_level() const { return bracket_level_; }
  const std::vector<std::size_t>& subset() const { return tokens_.subset(); }

  /// Combined tags (IOB2) per sentence of `test`.
  std::vector<Tags> apply(const PredictionTable& test) const {
    test.check();
    std::vector<Tags> out;
    if (!bracket_level_) {
      for (const auto& sentence : test.sentences) {
        Tags tags;
        for (const auto& r : sentence) tags.push_back(tokens_.combine(r));
        out.push_back(spans_to_tags(extract_chunks(tags), tags.size(), TagScheme::IOB2));
      }
      return out;
    }
    auto [st, en] = bracket_tables(test);
    for (std::size_t s = 0; s < test.sentences.size(); ++s) {
      Tags starts, ends;
      for (const auto& r : st.sentences[s]) starts.push_back(starts_.combine(r));
      for (const auto& r : en.sentences[s]) ends.push_back(ends_.combine(r));
      out.push_back(spans_to_tags(restore_chunks(starts, ends), starts.size(), TagScheme::IOB2));
    }
    return out;
  }

 private:
  Method method_ = Method::Majority;
  bool bracket_level_ = false;
  TokenCombiner tokens_, starts_, ends_;
};

struct SubsetScore {
  std::vector<std::size_t> systems;
  double f = 0.0;
};

/// Exhaustive search over all size-n system subsets for the one whose
/// majority vote scores the highest chunk F on the tuning table. Ties keep the
/// lexicographically first subset.
inline SubsetScore best_n_select(const PredictionTable& tuning, std::size_t n, bool bracket_level = false) {
  tuning.check();
  const std::size_t ns = tuning.systems.size();
  if (n < 1 || n > ns) throw ConfigError("best-N subset size must be between 1 and the system count");
  if (!tuning.has_gold()) throw ConfigError("best-N selection needs gold tags");

  SpanSets gold;
  for (std::size_t s = 0; s < tuning.sentences.size(); ++s) gold.push_back(extract_chunks(tuning.gold_tags(s)));
  ClassPrior prior = estimate_weights(tuning).prior;

  std::pair<PredictionTable, PredictionTable> streams;
  ClassPrior start_prior, end_prior;
  if (bracket_level) {
    streams = bracket_tables(tuning);
    start_prior = estimate_weights(streams.first).prior;
    end_prior = estimate_weights(streams.second).prior;
  }

  std::optional<SubsetScore> best;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (;;) {
    SpanSets pred;
    std::vector<std::string> picked(n);
    for (std::size_t s = 0; s < tuning.sentences.size(); ++s) {
      if (!bracket_level) {
        Tags tags;
        for (const auto& r : tuning.sentences[s]) {
          for (std::size_t j = 0; j < n; ++j) picked[j] = r.preds[idx[j]];
          tags.push_back(vote(picked, VoteMethod::Majority, nullptr, prior));
        }
        pred.push_back(extract_chunks(tags));
      } else {
        Tags starts, ends;
        for (const auto& r : streams.first.sentences[s]) {
          for (std::size_t j = 0; j < n; ++j) picked[j] = r.preds[idx[j]];
          starts.push_back(vote(picked, VoteMethod::Majority, nullptr, start_prior));
        }
        for (const auto& r : streams.second.sentences[s]) {
          for (std::size_t j = 0; j < n; ++j) picked[j] = r.preds[idx[j]];
          ends.push_back(vote(picked, VoteMethod::Majority, nullptr, end_prior));
        }
        pred.push_back(restore_chunks(starts, ends));
      }
    }
    double f = score_chunks(gold, pred).f_rate();
    if (!best || (f > best->f && !scores_tied(f, best->f))) best = SubsetScore{idx, f};

    // Next combination in lexicographic order.
    std::size_t i = n;
    while (i > 0 && idx[i - 1] == ns - n + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return *best;
}

inline Combiner Combiner::fit(Method method, const PredictionTable* tuning, const CombinerOptions& opt,
                              std::size_t system_count) {
  Combiner c;
  c.method_ = method;
  c.bracket_level_ = opt.bracket_level;
  if (!opt.bracket_level) {
    c.tokens_ = TokenCombiner::fit(method, tuning, opt, system_count);
  } else if (tuning) {
    auto [st, en] = bracket_tables(*tuning);
    c.starts_ = TokenCombiner::fit(method, &st, opt, system_count);
    c.ends_ = TokenCombiner::fit(method, &en, opt, system_count);
  } else {
    c.starts_ = c.ends_ = TokenCombiner::fit(method, nullptr, opt, system_count);
  }
  if (method == Method::BestN) {
    auto best = best_n_select(*tuning, opt.best_n, opt.bracket_level);
    c.tokens_.restrict_to(best.systems);
    c.starts_.restrict_to(best.systems);
    c.ends_.restrict_to(best.systems);
  }
  return c;
}

/// Combined output as an IOB2 corpus. Words come from `text` when given
/// (same sentence shapes as the table), otherwise `_`.
inline Corpus combine_corpus(const PredictionTable& test, const Combiner& combiner, const Corpus* text = nullptr) {
  auto tags = combiner.apply(test);
  Corpus out;
  out.scheme = TagScheme::IOB2;
  if (text && text->sentences.size() != test.sentences.size()) {
    throw AlignmentError("text corpus and prediction table differ in sentence count");
  }
  for (std::size_t s = 0; s < test.sentences.size(); ++s) {
    Sentence sentence;
    for (std::size_t i = 0; i < test.sentences[s].size(); ++i) {
      std::string word = "_";
      if (text) {
        if (text->sentences[s].size() != test.sentences[s].size()) {
          throw AlignmentError("sentence " + std::to_string(s) + ": text and table lengths differ");
        }
        word = text->sentences[s].tokens[i].word;
      }
      sentence.tokens.push_back({word, test.sentences[s][i].pos, tags[s][i]});
    }
    out.sentences.push_back(std::move(sentence));
  }
  return out;
}

}  // namespace chunkvote
