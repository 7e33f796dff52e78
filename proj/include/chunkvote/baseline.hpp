#pragma once

#include <map>
#include <string>

#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

/// Most frequent chunk tag per part-of-speech tag.
struct BaselineModel {
  std::map<std::string, std::string> table;
  std::string fallback;

  const std::string& predict(const std::string& pos) const {
    auto it = table.find(pos);
    return it == table.end() ? fallback : it->second;
  }
};

inline BaselineModel train_baseline(const Corpus& corpus) {
  std::map<std::string, std::map<std::string, long>> by_pos;
  ClassPrior prior;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      if (!t.chunk_tag) throw TrainingError("baseline training needs chunk tags");
      ++by_pos[t.pos][*t.chunk_tag];
      prior.add(*t.chunk_tag);
    }
  }
  if (prior.counts.empty()) throw TrainingError("baseline training on an empty corpus");
  BaselineModel m;
  for (const auto& [pos, counts] : by_pos) m.table[pos] = *argmax_label(counts, prior);
  m.fallback = *prior.modal();
  return m;
}

}  // namespace chunkvote
