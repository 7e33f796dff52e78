#pragma once

// Weighted-overlap nearest neighbour classification. `k` counts distinct
// distance values ("regions"), not items: every memory item whose distance
// falls in one of the k closest regions takes part in the vote.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

/// Distances closer than this are in the same region.
inline constexpr double kDistanceEpsilon = 1e-9;

struct KnnModel {
  Dataset memory;
  std::vector<double> weights;
  int k = 1;
  ClassPrior prior;

  // Dense codes for fast distance computation; rebuilt from `memory`.
  std::vector<std::unordered_map<std::string, std::int32_t>> codebook;
  std::vector<std::int32_t> codes;  // row-major, memory.size() x arity
  std::vector<std::int32_t> label_index;
  std::vector<std::string> labels;

  void index() {
    const std::size_t arity = memory.arity();
    codebook.assign(arity, {});
    codes.clear();
    codes.reserve(memory.size() * arity);
    labels.clear();
    label_index.clear();
    std::unordered_map<std::string, std::int32_t> label_codes;
    for (const auto& ex : memory.items) {
      for (std::size_t s = 0; s < arity; ++s) {
        auto [it, _] = codebook[s].try_emplace(ex.features[s], static_cast<std::int32_t>(codebook[s].size()));
        codes.push_back(it->second);
      }
      auto [it, inserted] = label_codes.try_emplace(ex.label, static_cast<std::int32_t>(labels.size()));
      if (inserted) labels.push_back(ex.label);
      label_index.push_back(it->second);
    }
  }

  double distance(const FeatureVector& a, const FeatureVector& b) const {
    double d = 0.0;
    for (std::size_t s = 0; s < weights.size(); ++s) {
      if (a[s] != b[s]) d += weights[s];
    }
    return d;
  }
};

inline KnnModel train_knn(const Dataset& ds, int k, Weighting weighting = Weighting::GainRatio) {
  if (ds.empty()) throw TrainingError("k-NN training on an empty dataset");
  if (k < 1) throw ConfigError("k must be at least 1");
  KnnModel m;
  m.memory = ds;
  m.weights = slot_weights(ds, weighting);
  m.k = k;
  for (const auto& ex : ds.items) m.prior.add(ex.label);
  m.index();
  return m;
}

/// Class counts over the items in the k nearest distance regions.
inline std::map<std::string, long> knn_neighbourhood(const KnnModel& m, const FeatureVector& x) {
  const std::size_t arity = m.weights.size();
  if (x.size() != arity) throw ContractError("query arity does not match model");

  std::vector<std::int32_t> query(arity, -1);
  for (std::size_t s = 0; s < arity; ++s) {
    auto it = m.codebook[s].find(x[s]);
    if (it != m.codebook[s].end()) query[s] = it->second;
  }

  const std::size_t n = m.memory.size();
  std::vector<double> dist(n);
  std::vector<double> regions;  // k smallest distinct distances, ascending
  const auto k = static_cast<std::size_t>(m.k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t* row = &m.codes[i * arity];
    double d = 0.0;
    for (std::size_t s = 0; s < arity; ++s) {
      if (row[s] != query[s]) d += m.weights[s];
    }
    dist[i] = d;
    if (regions.size() == k && d > regions.back() + kDistanceEpsilon) continue;
    auto pos = std::lower_bound(regions.begin(), regions.end(), d - kDistanceEpsilon);
    if (pos != regions.end() && *pos <= d + kDistanceEpsilon) continue;
    regions.insert(pos, d);
    if (regions.size() > k) regions.pop_back();
  }

  const double limit = regions.back() + kDistanceEpsilon;
  std::vector<long> tally(m.labels.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] <= limit) ++tally[static_cast<std::size_t>(m.label_index[i])];
  }
  std::map<std::string, long> out;
  for (std::size_t c = 0; c < tally.size(); ++c) {
    if (tally[c] > 0) out[m.labels[c]] = tally[c];
  }
  return out;
}

inline std::string predict_knn(const KnnModel& m, const FeatureVector& x) {
  return *argmax_label(knn_neighbourhood(m, x), m.prior);
}

}  // namespace chunkvote
