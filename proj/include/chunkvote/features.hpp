#pragma once

// Window features for left-to-right chunk tagging, and the entropy-based
// relevance weights (information gain, gain ratio) used by the memory-based
// learners.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"

namespace chunkvote {

/// Value of any slot that falls outside the sentence.
inline const std::string kPadding = "<pad>";

enum class SlotKind { Chunk, Pos, Word, Complex };

struct WindowConfig {
  int left_words = 2;
  int right_words = 1;
  int left_pos = 2;
  int right_pos = 1;
  int left_chunk_tags = 2;
  bool use_focus_word = true;
  bool use_focus_pos = true;
  bool complex_pairs = false;

  bool operator==(const WindowConfig&) const = default;

  static WindowConfig chunking() { return {}; }

  static WindowConfig maxent() { return {3, 2, 3, 2, 3, true, true, true}; }

  std::size_t arity() const { return slot_names().size(); }

  std::vector<std::string> slot_names() const {
    std::vector<std::string> names;
    auto off = [](int i) { return i > 0 ? "+" + std::to_string(i) : std::to_string(i); };
    for (int i = -left_words; i < 0; ++i) names.push_back("w" + off(i));
    if (use_focus_word) names.push_back("w0");
    for (int i = 1; i <= right_words; ++i) names.push_back("w" + off(i));
    for (int i = -left_pos; i < 0; ++i) names.push_back("p" + off(i));
    if (use_focus_pos) names.push_back("p0");
    for (int i = 1; i <= right_pos; ++i) names.push_back("p" + off(i));
    for (int i = -left_chunk_tags; i < 0; ++i) names.push_back("t" + off(i));
    if (complex_pairs) {
      for (int i = -left_pos; i < right_pos; ++i) names.push_back("p" + off(i) + "|p" + off(i + 1));
      if (left_chunk_tags > 0) names.push_back("t-1|p0");
    }
    return names;
  }

  std::vector<SlotKind> slot_kinds() const {
    std::vector<SlotKind> kinds;
    for (const auto& n : slot_names()) {
      if (n.find('|') != std::string::npos) kinds.push_back(SlotKind::Complex);
      else if (n[0] == 'w') kinds.push_back(SlotKind::Word);
      else if (n[0] == 'p') kinds.push_back(SlotKind::Pos);
      else kinds.push_back(SlotKind::Chunk);
    }
    return kinds;
  }

  /// Slot index of the focus POS tag, or the focus word when POS is not used.
  std::size_t focus_slot() const {
    auto names = slot_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == "p0") return i;
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == "w0") return i;
    }
    throw ConfigError("window has neither focus POS nor focus word");
  }

  void check() const {
    if (left_words < 0 || right_words < 0 || left_pos < 0 || right_pos < 0 || left_chunk_tags < 0) {
      throw ConfigError("window sizes must be non-negative");
    }
  }

  /// `key=value` lines, in a fixed order.
  std::string serialize() const {
    std::ostringstream os;
    os << "left_words=" << left_words << "\nright_words=" << right_words << "\nleft_pos=" << left_pos
       << "\nright_pos=" << right_pos << "\nleft_chunk_tags=" << left_chunk_tags
       << "\nuse_focus_word=" << use_focus_word << "\nuse_focus_pos=" << use_focus_pos
       << "\ncomplex_pairs=" << complex_pairs << "\n";
    return os.str();
  }

  /// Applies one `key=value` setting; returns false for keys that are not window keys.
  bool set(std::string_view key, std::string_view value) {
    auto as_int = [&](int& dst) {
      try {
        std::size_t used = 0;
        int v = std::stoi(std::string(value), &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        dst = v;
      } catch (const std::exception&) {
        throw ConfigError("bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
      }
    };
    auto as_bool = [&](bool& dst) {
      if (value == "1" || value == "true") dst = true;
      else if (value == "0" || value == "false") dst = false;
      else throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(value) + "'");
    };
    if (key == "left_words") as_int(left_words);
    else if (key == "right_words") as_int(right_words);
    else if (key == "left_pos") as_int(left_pos);
    else if (key == "right_pos") as_int(right_pos);
    else if (key == "left_chunk_tags") as_int(left_chunk_tags);
    else if (key == "use_focus_word") as_bool(use_focus_word);
    else if (key == "use_focus_pos") as_bool(use_focus_pos);
    else if (key == "complex_pairs") as_bool(complex_pairs);
    else return false;
    return true;
  }
};

struct FeatureVector {
  std::vector<std::string> values;

  std::size_t size() const { return values.size(); }
  const std::string& operator[](std::size_t i) const { return values[i]; }
  bool operator==(const FeatureVector&) const = default;
};

/// Features for token `index`. `predicted_tags` holds the tags already
/// assigned to positions before `index`; entries at or after it are ignored.
inline FeatureVector make_features(const Sentence& sentence, std::size_t index, const WindowConfig& config,
                                   const Tags& predicted_tags) {
  const auto n = static_cast<long>(sentence.size());
  const auto at = static_cast<long>(index);
  auto word = [&](long i) -> const std::string& {
    return i < 0 || i >= n ? kPadding : sentence.tokens[static_cast<std::size_t>(i)].word;
  };
  auto pos = [&](long i) -> const std::string& {
    return i < 0 || i >= n ? kPadding : sentence.tokens[static_cast<std::size_t>(i)].pos;
  };
  auto tag = [&](long i) -> const std::string& {
    return i < 0 || i >= at || static_cast<std::size_t>(i) >= predicted_tags.size()
               ? kPadding
               : predicted_tags[static_cast<std::size_t>(i)];
  };

  FeatureVector fv;
  auto& v = fv.values;
  for (int i = -config.left_words; i < 0; ++i) v.push_back(word(at + i));
  if (config.use_focus_word) v.push_back(word(at));
  for (int i = 1; i <= config.right_words; ++i) v.push_back(word(at + i));
  for (int i = -config.left_pos; i < 0; ++i) v.push_back(pos(at + i));
  if (config.use_focus_pos) v.push_back(pos(at));
  for (int i = 1; i <= config.right_pos; ++i) v.push_back(pos(at + i));
  for (int i = -config.left_chunk_tags; i < 0; ++i) v.push_back(tag(at + i));
  if (config.complex_pairs) {
    for (int i = -config.left_pos; i < config.right_pos; ++i) v.push_back(pos(at + i) + "|" + pos(at + i + 1));
    if (config.left_chunk_tags > 0) v.push_back(tag(at - 1) + "|" + pos(at));
  }
  return fv;
}

struct Example {
  FeatureVector features;
  std::string label;
};

struct Dataset {
  std::vector<Example> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
  std::size_t arity() const { return items.empty() ? 0 : items.front().features.size(); }

  void add(FeatureVector fv, std::string label) {
    if (!items.empty() && fv.size() != arity()) throw ContractError("feature vector arity mismatch");
    items.push_back({std::move(fv), std::move(label)});
  }
};

/// Training instances from a labeled corpus; the chunk-tag context slots see gold tags.
inline Dataset build_dataset(const Corpus& corpus, const WindowConfig& config) {
  Dataset ds;
  for (const auto& s : corpus.sentences) {
    Tags tags = s.tags();
    for (std::size_t i = 0; i < s.size(); ++i) ds.add(make_features(s, i, config, tags), tags[i]);
  }
  return ds;
}

namespace detail {

inline double entropy_bits(const std::unordered_map<std::string, long>& counts, long total) {
  if (total <= 0) return 0.0;
  double h = 0.0;
  for (const auto& [_, n] : counts) {
    if (n == 0) continue;
    double p = static_cast<double>(n) / total;
    h -= p * std::log2(p);
  }
  return h;
}

struct SlotStatistics {
  double class_entropy = 0.0;
  double conditional_entropy = 0.0;
  double split_info = 0.0;
};

inline SlotStatistics slot_statistics(const Dataset& ds, std::size_t slot) {
  std::unordered_map<std::string, long> classes;
  std::unordered_map<std::string, std::unordered_map<std::string, long>> by_value;
  std::unordered_map<std::string, long> value_totals;
  for (const auto& ex : ds.items) {
    ++classes[ex.label];
    ++by_value[ex.features[slot]][ex.label];
    ++value_totals[ex.features[slot]];
  }
  const long total = static_cast<long>(ds.size());
  SlotStatistics st;
  st.class_entropy = entropy_bits(classes, total);
  for (const auto& [value, dist] : by_value) {
    long nv = value_totals[value];
    double pv = static_cast<double>(nv) / total;
    st.conditional_entropy += pv * entropy_bits(dist, nv);
  }
  st.split_info = entropy_bits(value_totals, total);
  return st;
}

}  // namespace detail

/// H(C) - sum_v P(v) H(C|v), in bits.
inline double information_gain(const Dataset& ds, std::size_t slot) {
  if (ds.empty()) throw TrainingError("information gain of an empty dataset");
  auto st = detail::slot_statistics(ds, slot);
  return std::max(0.0, st.class_entropy - st.conditional_entropy);
}

/// Information gain normalized by the slot's split information; 0 for constant slots.
inline double gain_ratio(const Dataset& ds, std::size_t slot) {
  if (ds.empty()) throw TrainingError("gain ratio of an empty dataset");
  auto st = detail::slot_statistics(ds, slot);
  if (st.split_info <= 0.0) return 0.0;
  double ig = std::max(0.0, st.class_entropy - st.conditional_entropy);
  return std::min(1.0, ig / st.split_info);
}

enum class Weighting { GainRatio, InformationGain };

inline std::vector<double> slot_weights(const Dataset& ds, Weighting w) {
  std::vector<double> out;
  for (std::size_t s = 0; s < ds.arity(); ++s) {
    out.push_back(w == Weighting::GainRatio ? gain_ratio(ds, s) : information_gain(ds, s));
  }
  return out;
}

}  // namespace chunkvote
