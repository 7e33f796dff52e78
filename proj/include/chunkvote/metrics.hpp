#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"

namespace chunkvote {

/// F rate for precision/recall in [0,1]; 0 when both are 0.
inline double f_beta(double precision, double recall, double beta = 1.0) {
  double b2 = beta * beta;
  double denom = b2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return ((b2 + 1.0) * precision * recall) / denom;
}

struct ChunkCounts {
  long found = 0;
  long gold = 0;
  long correct = 0;

  double precision() const { return found == 0 ? 0.0 : static_cast<double>(correct) / found; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(correct) / gold; }
  double f(double beta = 1.0) const { return f_beta(precision(), recall(), beta); }

  ChunkCounts& operator+=(const ChunkCounts& o) {
    found += o.found;
    gold += o.gold;
    correct += o.correct;
    return *this;
  }
  bool operator==(const ChunkCounts&) const = default;
};

struct EvalReport {
  std::map<std::string, ChunkCounts> per_label;
  ChunkCounts overall;
  double beta = 1.0;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f_rate() const { return overall.f(beta); }
};

using SpanSets = std::vector<std::vector<ChunkSpan>>;

/// Multiset matching of (begin, end, label) per sentence.
inline EvalReport score_chunks(const SpanSets& gold, const SpanSets& pred, double beta = 1.0) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                         std::to_string(pred.size()));
  }
  EvalReport report;
  report.beta = beta;
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::map<Key, long> remaining;
    for (const auto& g : gold[s]) {
      ++remaining[{g.begin, g.end, g.label}];
      ++report.per_label[g.label].gold;
    }
    for (const auto& p : pred[s]) {
      auto& counts = report.per_label[p.label];
      ++counts.found;
      auto it = remaining.find({p.begin, p.end, p.label});
      if (it != remaining.end() && it->second > 0) {
        --it->second;
        ++counts.correct;
      }
    }
  }
  for (const auto& [label, c] : report.per_label) report.overall += c;
  return report;
}

inline SpanSets corpus_spans(const Corpus& c) {
  SpanSets out;
  out.reserve(c.sentences.size());
  for (const auto& s : c.sentences) out.push_back(extract_chunks(s.tags(), c.scheme));
  return out;
}

/// Chunk-level scoring of two tagged corpora over identical tokenization.
inline EvalReport score_tagged(const Corpus& gold, const Corpus& pred, double beta = 1.0) {
  if (gold.sentences.size() != pred.sentences.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.sentences.size()) + " sentences, prediction has " +
                         std::to_string(pred.sentences.size()));
  }
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    const auto& g = gold.sentences[i].tokens;
    const auto& p = pred.sentences[i].tokens;
    if (g.size() != p.size()) {
      throw AlignmentError("sentence " + std::to_string(i) + ": token count " + std::to_string(g.size()) +
                           " vs " + std::to_string(p.size()));
    }
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].word != p[j].word) {
        throw AlignmentError("sentence " + std::to_string(i) + ", token " + std::to_string(j) + ": '" +
                             g[j].word + "' vs '" + p[j].word + "'");
      }
    }
  }
  return score_chunks(corpus_spans(gold), corpus_spans(pred), beta);
}

inline EvalReport score_nested(const std::vector<NestedSentence>& gold, const std::vector<NestedSentence>& pred,
                               double beta = 1.0) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                         std::to_string(pred.size()));
  }
  SpanSets g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.size() != pred[i].tokens.size()) {
      throw AlignmentError("sentence " + std::to_string(i) + " differs in length");
    }
    g.push_back(gold[i].spans);
    p.push_back(pred[i].spans);
  }
  return score_chunks(g, p, beta);
}

namespace detail {
inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
}  // namespace detail

/// `LABEL: precision 94.04% recall 91.00% F 92.50` per label, then `overall: ...`.
inline std::string format_report(const EvalReport& r) {
  std::string out;
  auto line = [&](const std::string& name, const ChunkCounts& c) {
    out += name + ": precision " + detail::fixed2(100 * c.precision()) + "% recall " +
           detail::fixed2(100 * c.recall()) + "% F " + detail::fixed2(100 * c.f(r.beta)) + "\n";
  };
  for (const auto& [label, c] : r.per_label) line(label, c);
  line("overall", r.overall);
  return out;
}

/// Machine-readable dump, one `key=value` per line, exact counts and full-precision rates.
inline std::string format_report_kv(const EvalReport& r) {
  std::string out;
  char buf[64];
  auto emit = [&](const std::string& prefix, const ChunkCounts& c) {
    out += prefix + "found=" + std::to_string(c.found) + "\n";
    out += prefix + "gold=" + std::to_string(c.gold) + "\n";
    out += prefix + "correct=" + std::to_string(c.correct) + "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.precision());
    out += prefix + "precision=" + buf + "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.recall());
    out += prefix + "recall=" + buf + "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.f(r.beta));
    out += prefix + "f=" + buf + "\n";
  };
  std::snprintf(buf, sizeof buf, "%.17g", r.beta);
  out += std::string("beta=") + buf + "\n";
  emit("overall.", r.overall);
  for (const auto& [label, c] : r.per_label) emit(label + ".", c);
  return out;
}

/// Token accuracy, diagnostic only.
inline double token_accuracy(const Corpus& gold, const Corpus& pred) {
  long total = 0, right = 0;
  for (std::size_t i = 0; i < std::min(gold.sentences.size(), pred.sentences.size()); ++i) {
    auto g = gold.sentences[i].tags();
    auto p = pred.sentences[i].tags();
    for (std::size_t j = 0; j < std::min(g.size(), p.size()); ++j) {
      ++total;
      right += g[j] == p[j];
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(right) / total;
}

}  // namespace chunkvote
