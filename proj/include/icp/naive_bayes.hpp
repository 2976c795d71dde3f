#pragma once

// Multinomial Naive Bayes with additive smoothing over sparse counts.
// Per-class feature distributions are stored sparsely: features never seen
// in a class fall back to the smoothed default probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"

namespace icp {

struct NbModel {
  double log_prior_active = 0.0;
  double log_prior_inactive = 0.0;
  // (feature, log p(feature|class)) sorted by feature, seen features only
  std::vector<std::pair<std::uint32_t, double>> log_prob_active;
  std::vector<std::pair<std::uint32_t, double>> log_prob_inactive;
  double default_log_prob_active = 0.0;
  double default_log_prob_inactive = 0.0;
  double smoothing = 1.0;
  std::uint32_t num_features = 0;

  double log_prob(Label c, std::uint32_t feature) const {
    const auto& table =
        c == Label::Active ? log_prob_active : log_prob_inactive;
    auto it = std::lower_bound(
        table.begin(), table.end(), feature,
        [](const auto& p, std::uint32_t f) { return p.first < f; });
    if (it != table.end() && it->first == feature) return it->second;
    return c == Label::Active ? default_log_prob_active
                              : default_log_prob_inactive;
  }
};

inline NbModel train_nb(const Dataset& train, double smoothing) {
  if (!(smoothing > 0.0)) throw ConfigError("smoothing must be > 0");
  const auto [n_act, n_inact] = class_counts(train);
  if (n_act == 0 || n_inact == 0) {
    throw DataError("Naive Bayes training needs both classes");
  }
  if (train.num_features == 0) {
    throw DataError("Naive Bayes needs a positive feature count");
  }

  NbModel m;
  m.smoothing = smoothing;
  m.num_features = train.num_features;
  const double n = static_cast<double>(train.size());
  m.log_prior_active = std::log(static_cast<double>(n_act) / n);
  m.log_prior_inactive = std::log(static_cast<double>(n_inact) / n);

  // accumulate per-class feature counts
  std::vector<std::pair<std::uint32_t, double>> counts_act, counts_inact;
  double total_act = 0.0, total_inact = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto& counts =
        train.labels[i] == Label::Active ? counts_act : counts_inact;
    auto& total = train.labels[i] == Label::Active ? total_act : total_inact;
    for (const auto& e : train.objects[i].entries()) {
      counts.emplace_back(e.index, e.value);
      total += e.value;
    }
  }
  const double f = static_cast<double>(train.num_features);
  auto build = [&](std::vector<std::pair<std::uint32_t, double>>& counts,
                   double total, std::vector<std::pair<std::uint32_t, double>>& out,
                   double& default_logp) {
    std::sort(counts.begin(), counts.end());
    const double denom = std::log(total + smoothing * f);
    default_logp = std::log(smoothing) - denom;
    out.clear();
    for (std::size_t i = 0; i < counts.size();) {
      std::size_t j = i;
      double c = 0.0;
      while (j < counts.size() && counts[j].first == counts[i].first) {
        c += counts[j].second;
        ++j;
      }
      out.emplace_back(counts[i].first, std::log(c + smoothing) - denom);
      i = j;
    }
  };
  build(counts_act, total_act, m.log_prob_active, m.default_log_prob_active);
  build(counts_inact, total_inact, m.log_prob_inactive,
        m.default_log_prob_inactive);
  return m;
}

inline double nb_joint_log_likelihood(const NbModel& m, const SparseVector& x,
                                      Label c) {
  double s = c == Label::Active ? m.log_prior_active : m.log_prior_inactive;
  for (const auto& e : x.entries()) {
    s += e.value * m.log_prob(c, e.index);
  }
  return s;
}

// log p(c|x), normalized over the two classes in log space.
inline double nb_log_posterior(const NbModel& m, const SparseVector& x,
                               Label c) {
  const double ja = nb_joint_log_likelihood(m, x, Label::Active);
  const double ji = nb_joint_log_likelihood(m, x, Label::Inactive);
  const double hi = std::max(ja, ji);
  const double lse = hi + std::log(std::exp(ja - hi) + std::exp(ji - hi));
  return (c == Label::Active ? ja : ji) - lse;
}

inline double nb_posterior(const NbModel& m, const SparseVector& x, Label c) {
  return std::exp(nb_log_posterior(m, x, c));
}

// Stratified k-fold CV over a smoothing grid, scored by pooled balanced
// accuracy of the forced NB prediction; ties pick the smallest value.
inline double cross_validate_nb_smoothing(const Dataset& train,
                                          const std::vector<double>& grid_in,
                                          std::size_t folds = 5,
                                          std::uint64_t seed = 0) {
  if (grid_in.empty()) throw ConfigError("empty smoothing grid");
  std::vector<double> grid = grid_in;
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();

  const auto [n_act, n_inact] = class_counts(train);
  if (n_act < 2 || n_inact < 2) {
    throw DataError("cross-validation needs >= 2 examples of each class");
  }
  folds = std::max<std::size_t>(2, std::min(folds, std::min(n_act, n_inact)));

  // stratified fold assignment, round-robin after a seeded shuffle
  std::vector<std::size_t> act, inact;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train.labels[i] == Label::Active ? act : inact).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(act.begin(), act.end(), rng);
  std::shuffle(inact.begin(), inact.end(), rng);
  std::vector<std::vector<std::size_t>> fold_idx(folds);
  std::size_t pos = 0;
  for (std::size_t i : act) fold_idx[pos++ % folds].push_back(i);
  pos = 0;
  for (std::size_t i : inact) fold_idx[pos++ % folds].push_back(i);

  double best_score = -1.0, best = grid.front();
  for (double s : grid) {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr;
      for (std::size_t g = 0; g < folds; ++g) {
        if (g != f) tr.insert(tr.end(), fold_idx[g].begin(), fold_idx[g].end());
      }
      std::sort(tr.begin(), tr.end());
      const NbModel m = train_nb(subset(train, tr), s);
      for (std::size_t v : fold_idx[f]) {
        const bool pred_active =
            nb_joint_log_likelihood(m, train.objects[v], Label::Active) >=
            nb_joint_log_likelihood(m, train.objects[v], Label::Inactive);
        const bool is_active = train.labels[v] == Label::Active;
        if (is_active) {
          (pred_active ? tp : fn) += 1;
        } else {
          (pred_active ? fp : tn) += 1;
        }
      }
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
    const double score = 0.5 * (tpr + tnr);
    if (score > best_score) {
      best_score = score;
      best = s;
    }
  }
  return best;
}

}  // namespace icp
