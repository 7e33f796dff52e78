#pragma once

// One contract over all base chunkers: train on a labeled corpus, then tag
// sentences greedily left to right, feeding each prediction into the
// chunk-tag context of the following tokens.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chunkvote/baseline.hpp"
#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/igtree.hpp"
#include "chunkvote/knn.hpp"
#include "chunkvote/maxent.hpp"
#include "chunkvote/rules.hpp"

namespace chunkvote {

enum class LearnerKind { Baseline, Knn, IGTree, MaxEnt, Rules };

inline std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::Baseline: return "baseline";
    case LearnerKind::Knn: return "knn";
    case LearnerKind::IGTree: return "igtree";
    case LearnerKind::MaxEnt: return "maxent";
    case LearnerKind::Rules: return "rules";
  }
  return "?";
}

inline LearnerKind parse_learner_kind(std::string_view name) {
  for (auto k : {LearnerKind::Baseline, LearnerKind::Knn, LearnerKind::IGTree, LearnerKind::MaxEnt,
                 LearnerKind::Rules}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown learner '" + std::string(name) + "'");
}

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Baseline;
  std::string name;  // system name in prediction tables; defaults to the kind
  WindowConfig window;
  int k = 3;
  Weighting weighting = Weighting::GainRatio;
  MaxEntParams maxent;
  RuleParams rules;
  /// Train and predict inside/outside tags only (baseline and rules).
  bool io = false;

  std::string display_name() const { return name.empty() ? std::string(to_string(kind)) : name; }

  static LearnerSpec of(LearnerKind kind) {
    LearnerSpec s;
    s.kind = kind;
    if (kind == LearnerKind::MaxEnt) s.window = WindowConfig::maxent();
    return s;
  }
};

namespace detail {

inline double parse_double(std::string_view key, std::string_view v) {
  std::string s(v);
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("bad number for " + std::string(key) + ": '" + s + "'");
  }
  return d;
}

inline int parse_int(std::string_view key, std::string_view v) {
  double d = parse_double(key, v);
  if (d != std::floor(d) || std::fabs(d) > 1e9) throw ConfigError("bad integer for " + std::string(key));
  return static_cast<int>(d);
}

}  // namespace detail

/// `kind[:key=value,...]`, e.g. `knn:k=3,weighting=ig,name=mbl` or `rules:threshold=0.9,io=1`.
inline LearnerSpec parse_learner_spec(std::string_view text) {
  auto colon = text.find(':');
  LearnerSpec spec = LearnerSpec::of(parse_learner_kind(text.substr(0, colon)));
  if (colon == std::string_view::npos) return spec;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value in learner spec, got '" + std::string(item) + "'");
    auto key = item.substr(0, eq);
    auto value = item.substr(eq + 1);
    if (spec.window.set(key, value)) continue;
    if (key == "name") spec.name = std::string(value);
    else if (key == "k") spec.k = detail::parse_int(key, value);
    else if (key == "weighting") {
      if (value == "gr" || value == "gain_ratio") spec.weighting = Weighting::GainRatio;
      else if (value == "ig" || value == "info_gain") spec.weighting = Weighting::InformationGain;
      else throw ConfigError("unknown weighting '" + std::string(value) + "'");
    } else if (key == "iterations") spec.maxent.iterations = detail::parse_int(key, value);
    else if (key == "sigma") spec.maxent.sigma = detail::parse_double(key, value);
    else if (key == "cutoff") spec.maxent.cutoff = detail::parse_int(key, value);
    else if (key == "tolerance") spec.maxent.tolerance = detail::parse_double(key, value);
    else if (key == "threshold") spec.rules.threshold = detail::parse_double(key, value);
    else if (key == "min_support") spec.rules.min_support = detail::parse_int(key, value);
    else if (key == "io") spec.io = value == "1" || value == "true";
    else throw ConfigError("unknown learner option '" + std::string(key) + "'");
  }
  return spec;
}

/// Inside/outside encoding: every chunk tag becomes I-X.
inline Tags to_io(const Tags& tags) {
  Tags out = tags;
  for (auto& t : out) {
    if (t.size() > 2 && t[0] == 'B') t[0] = 'I';
  }
  return out;
}

struct TrainedModel {
  LearnerKind kind = LearnerKind::Baseline;
  WindowConfig window;
  TagScheme scheme = TagScheme::IOB2;
  bool io = false;
  std::variant<BaselineModel, KnnModel, IGTreeModel, MaxEntModel, RuleModel> params;

  std::string predict(const FeatureVector& x) const {
    return std::visit(
        [&](const auto& m) -> std::string {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, BaselineModel>) {
            throw ContractError("baseline model predicts from POS tags, not feature vectors");
          } else if constexpr (std::is_same_v<M, KnnModel>) {
            return predict_knn(m, x);
          } else if constexpr (std::is_same_v<M, IGTreeModel>) {
            return predict_igtree(m, x);
          } else if constexpr (std::is_same_v<M, MaxEntModel>) {
            return predict_maxent(m, x);
          } else {
            return m.predict(x);
          }
        },
        params);
  }
};

inline TrainedModel train(const Corpus& corpus, const LearnerSpec& spec) {
  spec.window.check();
  if (corpus.sentences.empty()) throw TrainingError("training corpus is empty");
  TrainedModel model;
  model.kind = spec.kind;
  model.window = spec.window;
  model.scheme = corpus.scheme;
  model.io = spec.io;
  if (spec.io && spec.kind != LearnerKind::Baseline && spec.kind != LearnerKind::Rules) {
    throw ConfigError("inside/outside encoding is only available for baseline and rules learners");
  }

  const Corpus* source = &corpus;
  Corpus io_corpus;
  if (spec.io) {
    io_corpus = corpus;
    for (auto& s : io_corpus.sentences) s.set_tags(to_io(s.tags()));
    source = &io_corpus;
  }

  switch (spec.kind) {
    case LearnerKind::Baseline:
      model.params = train_baseline(*source);
      break;
    case LearnerKind::Knn:
      model.params = train_knn(build_dataset(*source, spec.window), spec.k, spec.weighting);
      break;
    case LearnerKind::IGTree:
      model.params = train_igtree(build_dataset(*source, spec.window));
      break;
    case LearnerKind::MaxEnt:
      model.params = train_maxent(build_dataset(*source, spec.window), spec.maxent);
      break;
    case LearnerKind::Rules:
      model.params = train_rules(build_dataset(*source, spec.window), spec.window.focus_slot(), spec.rules,
                                 spec.window.slot_kinds());
      break;
  }
  return model;
}

inline Tags tag_sentence(const TrainedModel& model, const Sentence& sentence) {
  Tags tags;
  tags.reserve(sentence.size());
  if (const auto* base = std::get_if<BaselineModel>(&model.params)) {
    for (const auto& t : sentence.tokens) tags.push_back(base->predict(t.pos));
  } else {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      tags.push_back(model.predict(make_features(sentence, i, model.window, tags)));
    }
  }
  if (model.io) tags = spans_to_tags(extract_chunks(tags), tags.size(), model.scheme);
  return tags;
}

/// Tags every sentence; `threads` > 1 splits the corpus into contiguous blocks.
inline Corpus tag_corpus(const TrainedModel& model, const Corpus& corpus, unsigned threads = 1) {
  Corpus out = corpus;
  out.scheme = model.scheme;
  const std::size_t n = out.sentences.size();
  auto run = [&](std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) out.sentences[i].set_tags(tag_sentence(model, out.sentences[i]));
  };
  if (threads <= 1 || n < 2) {
    run(0, n);
    return out;
  }
  std::vector<std::future<void>> jobs;
  std::size_t block = (n + threads - 1) / threads;
  for (std::size_t from = 0; from < n; from += block) {
    jobs.push_back(std::async(std::launch::async, run, from, std::min(n, from + block)));
  }
  for (auto& j : jobs) j.get();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: a line-oriented text format, `chunkvote-model 1` header,
// common fields, then a kind-specific body. Doubles use %.17g.

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_prior(std::ostringstream& os, const ClassPrior& p) {
  os << "prior " << p.counts.size() << "\n";
  for (const auto& [label, n] : p.counts) os << label << ' ' << n << "\n";
}

class Reader {
 public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ParseError("model file truncated");
    return w;
  }
  void expect(std::string_view w) {
    auto got = word();
    if (got != w) throw ParseError("model file: expected '" + std::string(w) + "', found '" + got + "'");
  }
  long integer() {
    auto w = word();
    char* end = nullptr;
    long v = std::strtol(w.c_str(), &end, 10);
    if (end != w.c_str() + w.size()) throw ParseError("model file: bad integer '" + w + "'");
    return v;
  }
  std::size_t count() {
    long v = integer();
    if (v < 0) throw ParseError("model file: negative count");
    return static_cast<std::size_t>(v);
  }
  double real() {
    auto w = word();
    char* end = nullptr;
    double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw ParseError("model file: bad number '" + w + "'");
    return v;
  }
  ClassPrior prior() {
    expect("prior");
    ClassPrior p;
    for (std::size_t i = 0, n = count(); i < n; ++i) {
      auto label = word();
      p.counts[label] = integer();
    }
    return p;
  }

 private:
  std::istringstream in_;
};

}  // namespace detail

inline std::string save_model(const TrainedModel& model) {
  std::ostringstream os;
  os << "chunkvote-model 1\n";
  os << "kind " << to_string(model.kind) << "\n";
  os << "scheme " << to_string(model.scheme) << "\n";
  os << "io " << model.io << "\n";
  os << "window";
  {
    std::istringstream w(model.window.serialize());
    for (std::string line; std::getline(w, line);) os << ' ' << line;
  }
  os << "\n";
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BaselineModel>) {
          os << "fallback " << m.fallback << "\n";
          os << "table " << m.table.size() << "\n";
          for (const auto& [pos, tag] : m.table) os << pos << ' ' << tag << "\n";
        } else if constexpr (std::is_same_v<M, KnnModel>) {
          detail::write_prior(os, m.prior);
          os << "k " << m.k << "\n";
          os << "weights " << m.weights.size();
          for (double w : m.weights) os << ' ' << detail::num(w);
          os << "\nmemory " << m.memory.size() << "\n";
          for (const auto& ex : m.memory.items) {
            os << ex.label;
            for (const auto& v : ex.features.values) os << ' ' << v;
            os << "\n";
          }
        } else if constexpr (std::is_same_v<M, IGTreeModel>) {
          detail::write_prior(os, m.prior);
          os << "order " << m.order.size();
          for (auto s : m.order) os << ' ' << s;
          os << "\nnodes " << m.nodes.size() << "\n";
          for (const auto& node : m.nodes) {
            os << node.default_class << ' ' << node.children.size();
            for (const auto& [v, c] : node.children) os << ' ' << v << ' ' << c;
            os << "\n";
          }
        } else if constexpr (std::is_same_v<M, MaxEntModel>) {
          detail::write_prior(os, m.prior);
          os << "classes " << m.classes.size();
          for (const auto& c : m.classes) os << ' ' << c;
          os << "\nslack " << m.slack << "\ncorrection " << m.has_correction << ' '
             << detail::num(m.correction_weight) << "\n";
          os << "slots " << m.weights.size() << "\n";
          for (std::size_t s = 0; s < m.weights.size(); ++s) {
            // Sorted for byte-identical output across runs.
            std::map<std::string, const std::vector<std::pair<std::uint32_t, double>>*> sorted;
            for (const auto& [v, fs] : m.weights[s]) sorted[v] = &fs;
            os << "slot " << s << ' ' << sorted.size() << "\n";
            for (const auto& [v, fs] : sorted) {
              os << v << ' ' << fs->size();
              for (const auto& [c, w] : *fs) os << ' ' << c << ' ' << detail::num(w);
              os << "\n";
            }
          }
        } else {
          os << "focus " << m.focus_slot << "\ndefault " << m.default_class << "\n";
          os << "rules " << m.rules.size() << "\n";
          for (const auto& r : m.rules) {
            os << r.conclusion << ' ' << detail::num(r.accuracy) << ' ' << r.support << ' ' << r.premises.size();
            for (const auto& p : r.premises) os << ' ' << p.slot << ' ' << p.value;
            os << "\n";
          }
        }
      },
      model.params);
  os << "end\n";
  return os.str();
}

inline TrainedModel load_model(std::string_view text) {
  detail::Reader in(text);
  in.expect("chunkvote-model");
  if (in.integer() != 1) throw ParseError("unsupported model format version");
  TrainedModel model;
  in.expect("kind");
  model.kind = parse_learner_kind(in.word());
  in.expect("scheme");
  model.scheme = parse_scheme(in.word());
  in.expect("io");
  model.io = in.integer() != 0;
  in.expect("window");
  for (int i = 0; i < 8; ++i) {
    auto kv = in.word();
    auto eq = kv.find('=');
    if (eq == std::string::npos || !model.window.set(kv.substr(0, eq), kv.substr(eq + 1))) {
      throw ParseError("model file: bad window setting '" + kv + "'");
    }
  }
  const std::size_t arity = model.window.arity();
  switch (model.kind) {
    case LearnerKind::Baseline: {
      BaselineModel m;
      in.expect("fallback");
      m.fallback = in.word();
      in.expect("table");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) {
        auto pos = in.word();
        m.table[pos] = in.word();
      }
      model.params = std::move(m);
      break;
    }
    case LearnerKind::Knn: {
      KnnModel m;
      m.prior = in.prior();
      in.expect("k");
      m.k = static_cast<int>(in.integer());
      in.expect("weights");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) m.weights.push_back(in.real());
      in.expect("memory");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) {
        auto label = in.word();
        FeatureVector fv;
        for (std::size_t s = 0; s < arity; ++s) fv.values.push_back(in.word());
        m.memory.add(std::move(fv), std::move(label));
      }
      m.index();
      model.params = std::move(m);
      break;
    }
    case LearnerKind::IGTree: {
      IGTreeModel m;
      m.prior = in.prior();
      in.expect("order");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) m.order.push_back(in.count());
      in.expect("nodes");
      std::size_t nodes = in.count();
      for (std::size_t i = 0; i < nodes; ++i) {
        IGTreeModel::Node node;
        node.default_class = in.word();
        for (std::size_t c = 0, n = in.count(); c < n; ++c) {
          auto v = in.word();
          auto child = in.count();
          if (child >= nodes) throw ParseError("model file: child index out of range");
          node.children.emplace(v, child);
        }
        m.nodes.push_back(std::move(node));
      }
      model.params = std::move(m);
      break;
    }
    case LearnerKind::MaxEnt: {
      MaxEntModel m;
      m.prior = in.prior();
      in.expect("classes");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) m.classes.push_back(in.word());
      in.expect("slack");
      m.slack = static_cast<int>(in.integer());
      in.expect("correction");
      m.has_correction = in.integer() != 0;
      m.correction_weight = in.real();
      in.expect("slots");
      m.weights.resize(in.count());
      for (std::size_t s = 0; s < m.weights.size(); ++s) {
        in.expect("slot");
        if (in.count() != s) throw ParseError("model file: slots out of order");
        for (std::size_t v = 0, n = in.count(); v < n; ++v) {
          auto value = in.word();
          auto& fs = m.weights[s][value];
          for (std::size_t f = 0, nf = in.count(); f < nf; ++f) {
            auto c = static_cast<std::uint32_t>(in.count());
            if (c >= m.classes.size()) throw ParseError("model file: class index out of range");
            fs.emplace_back(c, in.real());
          }
        }
      }
      model.params = std::move(m);
      break;
    }
    case LearnerKind::Rules: {
      RuleModel m;
      in.expect("focus");
      m.focus_slot = in.count();
      in.expect("default");
      m.default_class = in.word();
      in.expect("rules");
      for (std::size_t i = 0, n = in.count(); i < n; ++i) {
        Rule r;
        r.conclusion = in.word();
        r.accuracy = in.real();
        r.support = in.integer();
        for (std::size_t p = 0, np = in.count(); p < np; ++p) {
          Premise pr;
          pr.slot = in.count();
          pr.value = in.word();
          r.premises.push_back(std::move(pr));
        }
        m.rules.push_back(std::move(r));
      }
      model.params = std::move(m);
      break;
    }
  }
  in.expect("end");
  return model;
}

}  // namespace chunkvote
