#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

/// Decision tree that tests slots in one fixed order (gain ratio, descending).
/// Each node keeps the modal class of its training subset as the answer when
/// the next slot value has no branch.
struct IGTreeModel {
  struct Node {
    std::string default_class;
    std::map<std::string, std::size_t> children;  // value -> node index
  };

  std::vector<std::size_t> order;
  std::vector<Node> nodes;  // nodes[0] is the root
  ClassPrior prior;

  std::size_t depth() const { return depth_from(0); }

 private:
  std::size_t depth_from(std::size_t n) const {
    std::size_t d = 0;
    for (const auto& [_, c] : nodes[n].children) d = std::max(d, 1 + depth_from(c));
    return d;
  }
};

/// Slot indices sorted by weight descending; equal weights keep slot order.
inline std::vector<std::size_t> order_by_weight(const std::vector<double>& weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  return order;
}

namespace detail {

inline std::size_t grow_igtree(IGTreeModel& m, const Dataset& ds, const std::vector<std::size_t>& items,
                               std::size_t level) {
  std::map<std::string, long> counts;
  for (auto i : items) ++counts[ds.items[i].label];
  std::size_t id = m.nodes.size();
  m.nodes.push_back({*argmax_label(counts, m.prior), {}});
  if (counts.size() == 1 || level == m.order.size()) return id;

  const std::size_t slot = m.order[level];
  std::map<std::string, std::vector<std::size_t>> parts;
  for (auto i : items) parts[ds.items[i].features[slot]].push_back(i);
  for (const auto& [value, subset] : parts) {
    std::size_t child = grow_igtree(m, ds, subset, level + 1);
    m.nodes[id].children.emplace(value, child);
  }
  return id;
}

}  // namespace detail

inline IGTreeModel train_igtree(const Dataset& ds) {
  if (ds.empty()) throw TrainingError("IGTree training on an empty dataset");
  IGTreeModel m;
  m.order = order_by_weight(slot_weights(ds, Weighting::GainRatio));
  for (const auto& ex : ds.items) m.prior.add(ex.label);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  detail::grow_igtree(m, ds, all, 0);
  return m;
}

inline const std::string& predict_igtree(const IGTreeModel& m, const FeatureVector& x) {
  std::size_t node = 0;
  for (auto slot : m.order) {
    if (slot >= x.size()) throw ContractError("query arity does not match model");
    const auto& children = m.nodes[node].children;
    auto it = children.find(x[slot]);
    if (it == children.end()) break;
    node = it->second;
  }
  return m.nodes[node].default_class;
}

}  // namespace chunkvote
