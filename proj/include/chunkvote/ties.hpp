#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace chunkvote {

/// Training-data class frequencies, used to break ties deterministically:
/// the more frequent class wins, then the lexicographically smaller one.
struct ClassPrior {
  std::map<std::string, long> counts;

  void add(const std::string& label, long n = 1) { counts[label] += n; }

  long count(const std::string& label) const {
    auto it = counts.find(label);
    return it == counts.end() ? 0 : it->second;
  }

  /// True when `a` beats `b` on the tie rule alone.
  bool prefers(const std::string& a, const std::string& b) const {
    long ca = count(a), cb = count(b);
    if (ca != cb) return ca > cb;
    return a < b;
  }

  std::optional<std::string> modal() const {
    std::optional<std::string> best;
    for (const auto& [label, n] : counts) {
      if (!best || prefers(label, *best)) best = label;
    }
    return best;
  }
};

/// Scores closer than this (relative) are treated as tied.
inline constexpr double kScoreTieEpsilon = 1e-9;

inline bool scores_tied(double a, double b) {
  return std::fabs(a - b) <= kScoreTieEpsilon * std::max({1.0, std::fabs(a), std::fabs(b)});
}

/// Highest-scoring label; ties resolved by `prior`. Empty map yields nullopt.
inline std::optional<std::string> argmax_label(const std::map<std::string, double>& scores, const ClassPrior& prior) {
  std::optional<std::string> best;
  double best_score = 0.0;
  for (const auto& [label, score] : scores) {
    if (!best || (score > best_score && !scores_tied(score, best_score))) {
      best = label;
      best_score = score;
    } else if (scores_tied(score, best_score) && prior.prefers(label, *best)) {
      best = label;
    }
  }
  return best;
}

inline std::optional<std::string> argmax_label(const std::map<std::string, long>& counts, const ClassPrior& prior) {
  std::optional<std::string> best;
  long best_count = 0;
  for (const auto& [label, n] : counts) {
    if (!best || n > best_count || (n == best_count && prior.prefers(label, *best))) {
      best = label;
      best_count = n;
    }
  }
  return best;
}

}  // namespace chunkvote
