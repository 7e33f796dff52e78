#pragma once

// General-to-specific rule refinement. Every focus value starts with a default
// rule (its modal class); while that rule is less accurate than the threshold,
// the contextual premise that raises accuracy the most is added.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

struct Premise {
  std::size_t slot = 0;
  std::string value;

  bool operator==(const Premise&) const = default;
};

struct Rule {
  std::vector<Premise> premises;
  std::string conclusion;
  double accuracy = 0.0;
  long support = 0;

  bool matches(const FeatureVector& x) const {
    return std::all_of(premises.begin(), premises.end(), [&](const Premise& p) { return x[p.slot] == p.value; });
  }
};

struct RuleParams {
  double threshold = 0.95;
  /// Refinements covering fewer training items are not considered.
  long min_support = 2;
};

struct RuleModel {
  std::vector<Rule> rules;  // most specific first
  std::string default_class;
  std::size_t focus_slot = 0;

  const std::string& predict(const FeatureVector& x) const {
    for (const auto& r : rules) {
      if (r.matches(x)) return r.conclusion;
    }
    return default_class;
  }
};

namespace detail {

struct RuleFit {
  std::string conclusion;
  long correct = 0;
  long support = 0;
  double accuracy() const { return support == 0 ? 0.0 : static_cast<double>(correct) / support; }
};

inline RuleFit fit_rule(const Dataset& ds, const std::vector<std::size_t>& items, const ClassPrior& prior) {
  std::map<std::string, long> counts;
  for (auto i : items) ++counts[ds.items[i].label];
  RuleFit fit;
  fit.conclusion = *argmax_label(counts, prior);
  fit.correct = counts[fit.conclusion];
  fit.support = static_cast<long>(items.size());
  return fit;
}

// Chunk-level context is tried before POS and word context.
inline int kind_rank(SlotKind k) {
  switch (k) {
    case SlotKind::Chunk: return 0;
    case SlotKind::Pos: return 1;
    case SlotKind::Word: return 2;
    case SlotKind::Complex: return 3;
  }
  return 4;
}

}  // namespace detail

/// `kinds` gives each slot's level for the refinement order; empty means all equal.
inline RuleModel train_rules(const Dataset& ds, std::size_t focus_slot, const RuleParams& params = {},
                             const std::vector<SlotKind>& kinds = {}) {
  if (!(params.threshold > 0.0 && params.threshold <= 1.0)) throw ConfigError("rule threshold must be in (0, 1]");
  if (ds.empty()) throw TrainingError("rule training on an empty dataset");
  if (focus_slot >= ds.arity()) throw ConfigError("focus slot out of range");

  RuleModel m;
  m.focus_slot = focus_slot;
  ClassPrior prior;
  for (const auto& ex : ds.items) prior.add(ex.label);
  m.default_class = *prior.modal();
  auto rank = [&](std::size_t slot) { return slot < kinds.size() ? detail::kind_rank(kinds[slot]) : 0; };

  std::map<std::string, std::vector<std::size_t>> by_focus;
  for (std::size_t i = 0; i < ds.size(); ++i) by_focus[ds.items[i].features[focus_slot]].push_back(i);

  std::vector<std::vector<Rule>> chains;
  for (const auto& [focus_value, items] : by_focus) {
    std::vector<Rule> chain;
    std::vector<std::size_t> covered = items;
    Rule rule;
    rule.premises.push_back({focus_slot, focus_value});
    auto fit = detail::fit_rule(ds, covered, prior);
    rule.conclusion = fit.conclusion;
    rule.accuracy = fit.accuracy();
    rule.support = fit.support;
    chain.push_back(rule);

    std::vector<bool> used(ds.arity(), false);
    used[focus_slot] = true;
    while (rule.accuracy < params.threshold) {
      struct Candidate {
        Premise premise;
        detail::RuleFit fit;
        std::vector<std::size_t> items;
      };
      std::optional<Candidate> best;
      for (std::size_t slot = 0; slot < ds.arity(); ++slot) {
        if (used[slot]) continue;
        std::map<std::string, std::vector<std::size_t>> parts;
        for (auto i : covered) parts[ds.items[i].features[slot]].push_back(i);
        for (auto& [value, subset] : parts) {
          if (static_cast<long>(subset.size()) < params.min_support) continue;
          auto f = detail::fit_rule(ds, subset, prior);
          bool better = false;
          if (!best) {
            better = true;
          } else {
            double a = f.accuracy(), b = best->fit.accuracy();
            if (a != b) better = a > b;
            else if (rank(slot) != rank(best->premise.slot)) better = rank(slot) < rank(best->premise.slot);
            else if (f.support != best->fit.support) better = f.support > best->fit.support;
            // Remaining ties keep the earlier (slot, value), which is visited first.
          }
          if (better) best = Candidate{{slot, value}, f, subset};
        }
      }
      if (!best || best->fit.accuracy() <= rule.accuracy) break;
      used[best->premise.slot] = true;
      rule.premises.push_back(best->premise);
      rule.conclusion = best->fit.conclusion;
      rule.accuracy = best->fit.accuracy();
      rule.support = best->fit.support;
      covered = std::move(best->items);
      chain.push_back(rule);
    }
    chains.push_back(std::move(chain));
  }

  for (auto& chain : chains) {
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) m.rules.push_back(std::move(*it));
  }
  std::stable_sort(m.rules.begin(), m.rules.end(),
                   [](const Rule& a, const Rule& b) { return a.premises.size() > b.premises.size(); });
  return m;
}

}  // namespace chunkvote
