#pragma once

// Nested NP bracketing by repeated chunk-and-collapse: each pass chunks the
// current (reduced) sentence, maps the found phrases back to original token
// offsets, and replaces every phrase with a single head token.

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chunkvote/corpus.hpp"
#include "chunkvote/error.hpp"
#include "chunkvote/model.hpp"

namespace chunkvote {

/// Original [begin, end) interval for each reduced token.
struct CollapseMap {
  std::vector<std::pair<std::size_t, std::size_t>> intervals;

  static CollapseMap identity(std::size_t n) {
    CollapseMap m;
    for (std::size_t i = 0; i < n; ++i) m.intervals.emplace_back(i, i + 1);
    return m;
  }

  std::size_t size() const { return intervals.size(); }

  /// Original-offset span for a span over reduced tokens.
  ChunkSpan expand(const ChunkSpan& reduced) const {
    return {intervals[reduced.begin].first, intervals[reduced.end - 1].second, reduced.label};
  }

  /// This map followed by `next` (which indexes this map's reduced tokens).
  CollapseMap then(const CollapseMap& next) const {
    CollapseMap out;
    for (const auto& [b, e] : next.intervals) out.intervals.emplace_back(intervals[b].first, intervals[e - 1].second);
    return out;
  }
};

enum class HeadRule { Last, First };

struct Collapsed {
  Sentence sentence;
  CollapseMap map;  // reduced token -> interval of the input sentence
};

/// Replaces each span by its head token; other tokens pass through.
inline Collapsed collapse(const Sentence& sentence, const std::vector<ChunkSpan>& spans,
                          HeadRule head = HeadRule::Last) {
  std::vector<ChunkSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  std::size_t prev_end = 0;
  for (const auto& s : sorted) {
    if (s.begin >= s.end || s.end > sentence.size()) throw ContractError("span out of range");
    if (s.begin < prev_end) throw ContractError("collapse needs non-overlapping spans");
    prev_end = s.end;
  }
  Collapsed out;
  std::size_t i = 0;
  auto next = sorted.begin();
  while (i < sentence.size()) {
    if (next != sorted.end() && next->begin == i) {
      const auto& h = sentence.tokens[head == HeadRule::Last ? next->end - 1 : next->begin];
      out.sentence.tokens.push_back({h.word, h.pos, std::nullopt});
      out.map.intervals.emplace_back(next->begin, next->end);
      i = next->end;
      ++next;
    } else {
      const auto& t = sentence.tokens[i];
      out.sentence.tokens.push_back({t.word, t.pos, std::nullopt});
      out.map.intervals.emplace_back(i, i + 1);
      ++i;
    }
  }
  return out;
}

/// A chunker for one cascade level: IOB tags for the reduced sentence. The
/// map gives each reduced token's original interval.
using LevelChunker = std::function<Tags(const Sentence& reduced, const CollapseMap& map)>;

struct CascadeOptions {
  std::size_t max_depth = 5;
  HeadRule head = HeadRule::Last;
  std::string label = "NP";
};

/// All phrases found bottom-up, in original offsets. Stops when a level finds
/// nothing, the sentence has collapsed to one token, or max_depth is reached.
inline std::vector<ChunkSpan> cascade_bracket(const Sentence& sentence, const LevelChunker& chunker,
                                              const CascadeOptions& opt = {}) {
  if (opt.max_depth < 1) throw ConfigError("cascade depth must be at least 1");
  std::vector<ChunkSpan> found;
  Sentence current;
  for (const auto& t : sentence.tokens) current.tokens.push_back({t.word, t.pos, std::nullopt});
  CollapseMap to_original = CollapseMap::identity(sentence.size());

  for (std::size_t depth = 1; depth <= opt.max_depth && !current.tokens.empty(); ++depth) {
    Tags tags = chunker(current, to_original);
    if (tags.size() != current.size()) throw ContractError("chunker returned the wrong number of tags");
    std::vector<ChunkSpan> level;
    for (auto& span : extract_chunks(tags)) {
      if (span.label == opt.label) level.push_back(std::move(span));
    }
    if (level.empty()) break;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& span : level) {
      auto orig = to_original.expand(span);
      if (seen.emplace(orig.begin, orig.end).second) found.push_back(std::move(orig));
    }
    auto next = collapse(current, level, opt.head);
    to_original = to_original.then(next.map);
    current = std::move(next.sentence);
    if (current.size() <= 1) break;
  }
  sort_nested(found);
  return found;
}

/// Level chunker backed by a trained base model.
inline LevelChunker model_chunker(const TrainedModel& model) {
  return [&model](const Sentence& reduced, const CollapseMap&) { return tag_sentence(model, reduced); };
}

namespace detail {

// Gold spans that can be found at this level: aligned with reduced-token
// boundaries and containing no other still-missing gold span.
inline std::vector<ChunkSpan> ready_spans(const std::multiset<ChunkSpan>& remaining, const CollapseMap& map) {
  std::vector<ChunkSpan> ready;
  for (auto it = remaining.begin(); it != remaining.end(); it = remaining.upper_bound(*it)) {
    const auto& g = *it;
    std::size_t b = map.size(), e = map.size();
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map.intervals[i].first == g.begin) b = i;
      if (map.intervals[i].second == g.end) e = i + 1;
    }
    if (b >= map.size() || e > map.size() || b >= e) continue;
    bool minimal = std::none_of(remaining.begin(), remaining.end(), [&](const ChunkSpan& o) {
      bool inside = g.begin <= o.begin && o.end <= g.end;
      return inside && !(o.begin == g.begin && o.end == g.end && o.label == g.label);
    });
    if (minimal) ready.push_back({b, e, g.label});
  }
  return ready;
}

}  // namespace detail

/// Chunker that replays gold spans level by level; the reference cascade.
/// It keeps track of which spans it has already emitted.
inline LevelChunker gold_replay_chunker(const std::vector<ChunkSpan>& gold) {
  auto remaining = std::make_shared<std::multiset<ChunkSpan>>(gold.begin(), gold.end());
  return [remaining](const Sentence& reduced, const CollapseMap& map) {
    auto ready = detail::ready_spans(*remaining, map);
    for (const auto& r : ready) remaining->erase(remaining->find(map.expand(r)));
    return spans_to_tags(ready, reduced.size(), TagScheme::IOB2);
  };
}

/// Training material for a level chunker: every reduced sentence the gold
/// replay visits, tagged (IOB2) with the spans found at that level.
inline Corpus cascade_training_corpus(const std::vector<NestedSentence>& gold, const CascadeOptions& opt = {}) {
  Corpus out;
  out.scheme = TagScheme::IOB2;
  for (const auto& ns : gold) {
    Sentence s{ns.tokens};
    auto replay = gold_replay_chunker(ns.spans);
    LevelChunker recorder = [&](const Sentence& reduced, const CollapseMap& map) {
      Tags tags = replay(reduced, map);
      Sentence level = reduced;
      level.set_tags(tags);
      out.sentences.push_back(std::move(level));
      return tags;
    };
    cascade_bracket(s, recorder, opt);
  }
  return out;
}

}  // namespace chunkvote
