#pragma once

// Linear cascade SVM training: the data is split into blocks, each stage
// trains on (support vectors so far) + (next block), and full passes repeat
// with the final SV set seeding the first stage until the SV set is stable.
//
// Working sets are kept sorted by original index so a single-block cascade
// is bit-identical to monolithic training.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/svm.hpp"

namespace icp {

struct CascadeConfig {
  std::size_t block_size = 1024;
  std::size_t max_outer_iterations = 5;
  enum class Convergence { SvSetEquality, DecisionAgreement };
  Convergence convergence = Convergence::SvSetEquality;
  double agreement_threshold = 0.99;  // for DecisionAgreement
  std::size_t probe_size = 256;       // probe sample for DecisionAgreement
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (block_size < 2) throw ConfigError("block_size must be >= 2");
    if (max_outer_iterations < 1) {
      throw ConfigError("max_outer_iterations must be >= 1");
    }
    if (!(agreement_threshold > 0.0) || agreement_threshold > 1.0) {
      throw ConfigError("agreement_threshold must lie in (0, 1]");
    }
  }
};

struct CascadeStats {
  std::size_t outer_iterations = 0;
  std::size_t stages_trained = 0;
  std::size_t final_sv_count = 0;
  bool reached_fixed_point = false;
};

namespace detail {

// Stratified blocks: indices of each class are shuffled, concatenated, and
// dealt round-robin so every block gets its share of the minority class.
inline std::vector<std::vector<std::size_t>> make_blocks(
    const Dataset& train, std::size_t block_size, std::uint64_t seed) {
  std::vector<std::size_t> act, inact;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train.labels[i] == Label::Active ? act : inact).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(act.begin(), act.end(), rng);
  std::shuffle(inact.begin(), inact.end(), rng);

  const std::size_t n = train.size();
  const std::size_t n_blocks = (n + block_size - 1) / block_size;
  std::vector<std::vector<std::size_t>> blocks(n_blocks);
  std::size_t pos = 0;
  for (std::size_t i : act) blocks[pos++ % n_blocks].push_back(i);
  for (std::size_t i : inact) blocks[pos++ % n_blocks].push_back(i);
  return blocks;
}

inline bool has_both_classes(const Dataset& ds,
                             const std::vector<std::size_t>& idx) {
  bool act = false, inact = false;
  for (std::size_t i : idx) {
    (ds.labels[i] == Label::Active ? act : inact) = true;
  }
  return act && inact;
}

}  // namespace detail

inline SvmModel train_cascade(const Dataset& train, const SvmConfig& cfg,
                              const CascadeConfig& cascade,
                              CascadeStats* stats = nullptr) {
  cfg.validate();
  cascade.validate();
  if (train.size() == 0) throw DataError("empty training set");
  const auto [n_act, n_inact] = class_counts(train);
  if (n_act == 0 || n_inact == 0) {
    throw DataError("training set must contain both classes");
  }

  const auto blocks =
      detail::make_blocks(train, cascade.block_size, cascade.shuffle_seed);

  // probe for the decision-agreement convergence test
  std::vector<std::size_t> probe_idx;
  if (cascade.convergence == CascadeConfig::Convergence::DecisionAgreement) {
    probe_idx.resize(train.size());
    std::iota(probe_idx.begin(), probe_idx.end(), std::size_t{0});
    std::mt19937_64 rng(cascade.shuffle_seed + 1);
    std::shuffle(probe_idx.begin(), probe_idx.end(), rng);
    probe_idx.resize(std::min(cascade.probe_size, probe_idx.size()));
    std::sort(probe_idx.begin(), probe_idx.end());
  }

  CascadeStats local_stats;
  CascadeStats& st = stats != nullptr ? *stats : local_stats;
  st = CascadeStats{};

  std::vector<std::size_t> sv_idx;           // SVs carried between stages
  std::vector<std::size_t> prev_pass_svs;    // SV set at end of previous pass
  std::vector<double> prev_probe_decisions;
  SvmModel model;
  bool have_model = false;

  for (std::size_t pass = 0; pass < cascade.max_outer_iterations; ++pass) {
    st.outer_iterations = pass + 1;
    std::vector<std::size_t> carry;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      std::vector<std::size_t> working = sv_idx;
      working.insert(working.end(), carry.begin(), carry.end());
      working.insert(working.end(), blocks[b].begin(), blocks[b].end());
      std::sort(working.begin(), working.end());
      working.erase(std::unique(working.begin(), working.end()),
                    working.end());

      if (!detail::has_both_classes(train, working)) {
        // single-class stage: fold this block into the next one
        carry.insert(carry.end(), blocks[b].begin(), blocks[b].end());
        continue;
      }
      carry.clear();

      const Dataset stage_set = subset(train, working);
      model = train_svm(stage_set, cfg);
      have_model = true;
      ++st.stages_trained;

      // map stage-local SVs back to original indices
      sv_idx.clear();
      for (std::size_t local : model.sv_train_indices) {
        sv_idx.push_back(working[local]);
      }
    }
    if (!have_model) {
      throw DataError("cascade never saw a two-class working set");
    }

    bool fixed = false;
    if (cascade.convergence == CascadeConfig::Convergence::SvSetEquality) {
      fixed = pass > 0 && sv_idx == prev_pass_svs;
      prev_pass_svs = sv_idx;
    } else {
      std::vector<double> probe_decisions(probe_idx.size());
      for (std::size_t i = 0; i < probe_idx.size(); ++i) {
        probe_decisions[i] =
            decision_function(model, train.objects[probe_idx[i]]);
      }
      if (pass > 0 && !probe_decisions.empty()) {
        std::size_t agree = 0;
        for (std::size_t i = 0; i < probe_decisions.size(); ++i) {
          if ((probe_decisions[i] >= 0.0) ==
              (prev_probe_decisions[i] >= 0.0)) {
            ++agree;
          }
        }
        fixed = static_cast<double>(agree) /
                    static_cast<double>(probe_decisions.size()) >=
                cascade.agreement_threshold;
      }
      prev_probe_decisions = std::move(probe_decisions);
    }
    if (fixed) {
      st.reached_fixed_point = true;
      break;
    }
  }

  st.final_sv_count = sv_idx.size();
  if (!st.reached_fixed_point) model.converged = false;
  return model;
}

// ---------------------------------------------------------------------------
// Stratified k-fold cross-validation over a C grid. The kernel matrix is
// computed once and sliced per fold. The score pools validation predictions
// across folds; ties pick the smallest C.

struct CvConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  enum class Score { BalancedAccuracy, Accuracy };
  Score score = Score::BalancedAccuracy;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> stratified_folds(
    const Dataset& ds, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> act, inact;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (ds.labels[i] == Label::Active ? act : inact).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(act.begin(), act.end(), rng);
  std::shuffle(inact.begin(), inact.end(), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t pos = 0;
  for (std::size_t i : act) out[pos++ % folds].push_back(i);
  pos = 0;
  for (std::size_t i : inact) out[pos++ % folds].push_back(i);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

}  // namespace detail

inline double cross_validate_c(const Dataset& train, const SvmConfig& base_cfg,
                               const std::vector<double>& c_grid,
                               const CvConfig& cv = {}) {
  if (c_grid.empty()) throw ConfigError("empty C grid");
  std::vector<double> grid = c_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();
  if (cv.folds < 2) throw ConfigError("folds must be >= 2");

  const auto [n_act, n_inact] = class_counts(train);
  if (n_act < 2 || n_inact < 2) {
    throw DataError("cross-validation needs >= 2 examples of each class");
  }
  std::size_t folds = std::min(cv.folds, std::min(n_act, n_inact));
  if (folds < 2) folds = 2;

  const auto fold_idx = detail::stratified_folds(train, folds, cv.seed);
  const GramMatrix full = gram_matrix(base_cfg.kernel, train);

  double best_score = -1.0;
  double best_c = grid.front();
  for (double c : grid) {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr;
      for (std::size_t g = 0; g < folds; ++g) {
        if (g != f) tr.insert(tr.end(), fold_idx[g].begin(), fold_idx[g].end());
      }
      std::sort(tr.begin(), tr.end());
      const Dataset tr_set = subset(train, tr);
      SvmConfig cfg = base_cfg;
      cfg.C = c;
      const GramMatrix tr_gram = gram_subset(full, tr, tr);
      const SvmModel m = train_svm(tr_set, cfg, &tr_gram);

      // score validation fold with the sliced kernel rows
      std::vector<std::size_t> sv_orig;
      sv_orig.reserve(m.sv_count());
      for (std::size_t local : m.sv_train_indices) {
        sv_orig.push_back(tr[local]);
      }
      for (std::size_t v : fold_idx[f]) {
        double d = m.bias;
        for (std::size_t s = 0; s < sv_orig.size(); ++s) {
          d += m.dual_coefs[s] * full.at(sv_orig[s], v);
        }
        const bool pred_active = d >= 0.0;
        const bool is_active = train.labels[v] == Label::Active;
        if (is_active) {
          (pred_active ? tp : fn) += 1;
        } else {
          (pred_active ? fp : tn) += 1;
        }
      }
    }
    double score;
    if (cv.score == CvConfig::Score::BalancedAccuracy) {
      const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
      const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
      score = 0.5 * (tpr + tnr);
    } else {
      score = static_cast<double>(tp + tn) /
              static_cast<double>(tp + tn + fp + fn);
    }
    if (score > best_score) {
      best_score = score;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace icp
