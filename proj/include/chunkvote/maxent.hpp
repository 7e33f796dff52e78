#pragma once

// Conditional maximum entropy classifier trained with Generalized Iterative
// Scaling. A feature is a (slot = value, class) pair; it is active for an item
// when the item's slot carries that value and the candidate class matches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "chunkvote/error.hpp"
#include "chunkvote/features.hpp"
#include "chunkvote/ties.hpp"

namespace chunkvote {

struct MaxEntParams {
  int iterations = 100;
  /// Gaussian prior width on the weights; infinity disables smoothing.
  double sigma = std::numeric_limits<double>::infinity();
  /// Minimum (predicate, class) occurrences for a feature to be kept.
  int cutoff = 2;
  /// Early stop once every |empirical - expected| < tolerance * item count.
  double tolerance = 1e-4;
};

struct MaxEntModel {
  std::vector<std::string> classes;
  /// Per slot: value -> (class index, weight) for every trained feature.
  std::vector<std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, double>>>> weights;
  /// The correction feature tops up every (item, class) to `slack` active features.
  int slack = 0;
  bool has_correction = false;
  double correction_weight = 0.0;
  ClassPrior prior;

  /// Training log-likelihood before each GIS update, plus the final value.
  std::vector<double> log_likelihood;
  /// Largest |empirical - expected| feature count at the end of training.
  double max_constraint_gap = 0.0;

  std::size_t feature_count() const {
    std::size_t n = 0;
    for (const auto& slot : weights) {
      for (const auto& [_, fs] : slot) n += fs.size();
    }
    return n;
  }

  std::vector<double> distribution(const FeatureVector& x) const {
    if (x.size() != weights.size()) throw ContractError("query arity does not match model");
    std::vector<double> score(classes.size(), 0.0);
    std::vector<int> active(classes.size(), 0);
    for (std::size_t s = 0; s < weights.size(); ++s) {
      auto it = weights[s].find(x[s]);
      if (it == weights[s].end()) continue;
      for (const auto& [c, w] : it->second) {
        score[c] += w;
        ++active[c];
      }
    }
    if (has_correction) {
      for (std::size_t c = 0; c < classes.size(); ++c) score[c] += correction_weight * (slack - active[c]);
    }
    double top = *std::max_element(score.begin(), score.end());
    double z = 0.0;
    for (auto& v : score) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : score) v /= z;
    return score;
  }
};

inline std::string predict_maxent(const MaxEntModel& m, const FeatureVector& x) {
  auto p = m.distribution(x);
  std::map<std::string, double> scores;
  for (std::size_t c = 0; c < p.size(); ++c) scores[m.classes[c]] = p[c];
  return *argmax_label(scores, m.prior);
}

namespace detail {

// Solves emp - exp * e^(slack*d) - (lambda + d) / sigma^2 = 0 for the step d.
inline double smoothed_gis_step(double empirical, double expected, double lambda, double slack, double sigma) {
  const double s2 = sigma * sigma;
  double d = 0.0;
  for (int it = 0; it < 50; ++it) {
    double e = expected * std::exp(slack * d);
    double f = empirical - e - (lambda + d) / s2;
    double df = -slack * e - 1.0 / s2;
    double next = d - f / df;
    if (std::fabs(next - d) < 1e-12) return next;
    d = next;
  }
  return d;
}

}  // namespace detail

inline MaxEntModel train_maxent(const Dataset& ds, const MaxEntParams& params = {}) {
  if (ds.empty()) throw TrainingError("maximum entropy training on an empty dataset");
  const std::size_t arity = ds.arity();
  const std::size_t n = ds.size();

  MaxEntModel m;
  for (const auto& ex : ds.items) m.prior.add(ex.label);
  for (const auto& [label, _] : m.prior.counts) m.classes.push_back(label);
  std::unordered_map<std::string, std::uint32_t> class_index;
  for (std::uint32_t c = 0; c < m.classes.size(); ++c) class_index[m.classes[c]] = c;
  const std::size_t nc = m.classes.size();

  // Predicates (slot, value) interned per slot.
  std::vector<std::unordered_map<std::string, std::uint32_t>> pred_ids(arity);
  std::vector<std::string> pred_value;
  std::vector<std::uint32_t> pred_slot;
  std::vector<std::uint32_t> item_preds(n * arity);
  std::vector<std::uint32_t> gold(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = ds.items[i];
    for (std::size_t s = 0; s < arity; ++s) {
      auto [it, inserted] = pred_ids[s].try_emplace(ex.features[s], static_cast<std::uint32_t>(pred_value.size()));
      if (inserted) {
        pred_value.push_back(ex.features[s]);
        pred_slot.push_back(static_cast<std::uint32_t>(s));
      }
      item_preds[i * arity + s] = it->second;
    }
    gold[i] = class_index[ex.label];
  }

  // Empirical counts of (predicate, class); keep those reaching the cutoff.
  std::vector<std::map<std::uint32_t, double>> cooc(pred_value.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < arity; ++s) cooc[item_preds[i * arity + s]][gold[i]] += 1.0;
  }
  struct Feature {
    std::uint32_t cls;
    double empirical;
    double lambda;
  };
  std::vector<std::vector<Feature>> features(pred_value.size());
  for (std::size_t p = 0; p < cooc.size(); ++p) {
    for (const auto& [c, count] : cooc[p]) {
      if (count >= params.cutoff) features[p].push_back({c, count, 0.0});
    }
  }

  // Slack constant: the most active features any (item, class) pair has.
  std::vector<int> active(n * nc, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < arity; ++s) {
      for (const auto& f : features[item_preds[i * arity + s]]) ++active[i * nc + f.cls];
    }
  }
  int slack = *std::max_element(active.begin(), active.end());
  double correction_empirical = 0.0;
  for (std::size_t i = 0; i < n; ++i) correction_empirical += slack - active[i * nc + gold[i]];
  m.slack = slack;
  m.has_correction = correction_empirical > 0.0 && slack > 0;
  double correction_lambda = 0.0;

  std::vector<double> prob(nc);
  auto expectations = [&](std::vector<std::vector<double>>& expected, double& corr_expected) {
    double ll = 0.0;
    corr_expected = 0.0;
    for (auto& e : expected) std::fill(e.begin(), e.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(prob.begin(), prob.end(), 0.0);
      for (std::size_t s = 0; s < arity; ++s) {
        for (const auto& f : features[item_preds[i * arity + s]]) prob[f.cls] += f.lambda;
      }
      if (m.has_correction) {
        for (std::size_t c = 0; c < nc; ++c) prob[c] += correction_lambda * (slack - active[i * nc + c]);
      }
      double top = *std::max_element(prob.begin(), prob.end());
      double z = 0.0;
      for (auto& v : prob) {
        v = std::exp(v - top);
        z += v;
      }
      for (auto& v : prob) v /= z;
      ll += std::log(std::max(prob[gold[i]], std::numeric_limits<double>::min()));
      for (std::size_t s = 0; s < arity; ++s) {
        auto p = item_preds[i * arity + s];
        auto& e = expected[p];
        for (std::size_t f = 0; f < features[p].size(); ++f) e[f] += prob[features[p][f].cls];
      }
      if (m.has_correction) {
        for (std::size_t c = 0; c < nc; ++c) corr_expected += prob[c] * (slack - active[i * nc + c]);
      }
    }
    return ll;
  };

  std::vector<std::vector<double>> expected(features.size());
  for (std::size_t p = 0; p < features.size(); ++p) expected[p].assign(features[p].size(), 0.0);
  double corr_expected = 0.0;
  auto gap = [&] {
    double g = 0.0;
    for (std::size_t p = 0; p < features.size(); ++p) {
      for (std::size_t f = 0; f < features[p].size(); ++f) {
        g = std::max(g, std::fabs(features[p][f].empirical - expected[p][f]));
      }
    }
    return g;
  };

  const bool smoothed = std::isfinite(params.sigma);
  for (int iter = 0; iter < params.iterations && slack > 0; ++iter) {
    m.log_likelihood.push_back(expectations(expected, corr_expected));
    if (!smoothed && gap() < params.tolerance * static_cast<double>(n)) break;
    const double inv = 1.0 / slack;
    for (std::size_t p = 0; p < features.size(); ++p) {
      for (std::size_t f = 0; f < features[p].size(); ++f) {
        auto& feat = features[p][f];
        double e = expected[p][f];
        if (e <= 0.0) continue;
        feat.lambda += smoothed ? detail::smoothed_gis_step(feat.empirical, e, feat.lambda, slack, params.sigma)
                                : inv * std::log(feat.empirical / e);
      }
    }
    if (m.has_correction && corr_expected > 0.0) {
      correction_lambda += smoothed ? detail::smoothed_gis_step(correction_empirical, corr_expected,
                                                                correction_lambda, slack, params.sigma)
                                    : inv * std::log(correction_empirical / corr_expected);
    }
  }
  m.log_likelihood.push_back(expectations(expected, corr_expected));
  m.max_constraint_gap = gap();
  m.correction_weight = correction_lambda;

  m.weights.assign(arity, {});
  for (std::size_t p = 0; p < features.size(); ++p) {
    if (features[p].empty()) continue;
    auto& slot = m.weights[pred_slot[p]][pred_value[p]];
    for (const auto& f : features[p]) slot.emplace_back(f.cls, f.lambda);
  }
  return m;
}

}  // namespace chunkvote
