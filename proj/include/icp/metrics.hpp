#pragma once

// Evaluation of prediction records against true labels: six-way region
// tables, per-class error rates, precision/recall, and the threshold sweeps
// used for precision-recall trade-off curves.
//
// A per-class prediction error is "the true label is absent from the
// prediction set", so Empty predictions count as errors for their true
// class. The region table carries a breakdown of Empty by true label to
// make that computable after aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icp/conformal.hpp"
#include "icp/dataset.hpp"
#include "icp/error.hpp"

namespace icp {

struct RegionTable {
  double active_pred_active = 0.0;      // AA
  double inactive_pred_active = 0.0;    // IA
  double inactive_pred_inactive = 0.0;  // II
  double active_pred_inactive = 0.0;    // AI
  double empty = 0.0;
  double uncertain = 0.0;
  // breakdown of `empty` by true label; sums to `empty`
  double empty_true_active = 0.0;
  double empty_true_inactive = 0.0;

  double total() const {
    return active_pred_active + inactive_pred_active +
           inactive_pred_inactive + active_pred_inactive + empty + uncertain;
  }
};

namespace detail {

inline void tally(RegionTable& t, Region region, Label truth) {
  switch (region) {
    case Region::Active:
      (truth == Label::Active ? t.active_pred_active
                              : t.inactive_pred_active) += 1.0;
      break;
    case Region::Inactive:
      (truth == Label::Active ? t.active_pred_inactive
                              : t.inactive_pred_inactive) += 1.0;
      break;
    case Region::Empty:
      t.empty += 1.0;
      (truth == Label::Active ? t.empty_true_active
                              : t.empty_true_inactive) += 1.0;
      break;
    case Region::Uncertain:
      t.uncertain += 1.0;
      break;
  }
}

}  // namespace detail

inline RegionTable region_table(std::span<const PredictionRecord> records,
                                std::span<const Label> truth) {
  if (records.size() != truth.size()) {
    throw DataError("records/truth length mismatch");
  }
  RegionTable t;
  for (std::size_t i = 0; i < records.size(); ++i) {
    detail::tally(t, records[i].region, truth[i]);
  }
  return t;
}

// Region table at a significance pair other than the one the records were
// made with; p-values are threshold-free so no recalibration happens.
inline RegionTable region_table_at(std::span<const PredictionRecord> records,
                                   std::span<const Label> truth,
                                   const Epsilons& eps) {
  if (records.size() != truth.size()) {
    throw DataError("records/truth length mismatch");
  }
  RegionTable t;
  for (std::size_t i = 0; i < records.size(); ++i) {
    detail::tally(t, region_for(records[i].p_active, records[i].p_inactive, eps),
                  truth[i]);
  }
  return t;
}

inline RegionTable average_tables(std::span<const RegionTable> tables) {
  RegionTable avg;
  if (tables.empty()) return avg;
  const double n = static_cast<double>(tables.size());
  for (const auto& t : tables) {
    avg.active_pred_active += t.active_pred_active;
    avg.inactive_pred_active += t.inactive_pred_active;
    avg.inactive_pred_inactive += t.inactive_pred_inactive;
    avg.active_pred_inactive += t.active_pred_inactive;
    avg.empty += t.empty;
    avg.uncertain += t.uncertain;
    avg.empty_true_active += t.empty_true_active;
    avg.empty_true_inactive += t.empty_true_inactive;
  }
  avg.active_pred_active /= n;
  avg.inactive_pred_active /= n;
  avg.inactive_pred_inactive /= n;
  avg.active_pred_inactive /= n;
  avg.empty /= n;
  avg.uncertain /= n;
  avg.empty_true_active /= n;
  avg.empty_true_inactive /= n;
  return avg;
}

struct RatesRecord {
  double active_error_rate = 0.0;
  double inactive_error_rate = 0.0;
  std::optional<double> precision;  // empty when nothing was predicted Active
  double recall = 0.0;
};

inline RatesRecord rates(const RegionTable& t, std::size_t n_active_truth,
                         std::size_t n_inactive_truth) {
  if (n_active_truth == 0 || n_inactive_truth == 0) {
    throw DataError("rates need a positive count of each true label");
  }
  RatesRecord r;
  r.active_error_rate = (t.active_pred_inactive + t.empty_true_active) /
                        static_cast<double>(n_active_truth);
  r.inactive_error_rate = (t.inactive_pred_active + t.empty_true_inactive) /
                          static_cast<double>(n_inactive_truth);
  const double predicted_active =
      t.active_pred_active + t.inactive_pred_active;
  if (predicted_active > 0.0) {
    r.precision = t.active_pred_active / predicted_active;
  }
  r.recall = t.active_pred_active / static_cast<double>(n_active_truth);
  return r;
}

// ---------------------------------------------------------------------------
// Significance sweeps. All sweeps reuse one set of p-values; thresholds are
// post-hoc filters.

struct SweepRow {
  Epsilons eps;
  RegionTable table;
  RatesRecord rate;
};

inline std::vector<SweepRow> eps_sweep(
    std::span<const PredictionRecord> records, std::span<const Label> truth,
    std::span<const double> eps_grid) {
  if (eps_grid.empty()) throw ConfigError("empty significance grid");
  std::size_t n_act = 0;
  for (Label l : truth) n_act += l == Label::Active ? 1 : 0;
  const std::size_t n_inact = truth.size() - n_act;
  std::vector<SweepRow> rows;
  rows.reserve(eps_grid.size());
  for (double e : eps_grid) {
    SweepRow row;
    row.eps = Epsilons{e, e};
    row.eps.validate();
    row.table = region_table_at(records, truth, row.eps);
    row.rate = rates(row.table, n_act, n_inact);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<SweepRow> asymmetric_sweep(
    std::span<const PredictionRecord> records, std::span<const Label> truth,
    double eps_active, std::span<const double> eps_inactive_grid) {
  if (eps_inactive_grid.empty()) throw ConfigError("empty significance grid");
  std::size_t n_act = 0;
  for (Label l : truth) n_act += l == Label::Active ? 1 : 0;
  const std::size_t n_inact = truth.size() - n_act;
  std::vector<SweepRow> rows;
  rows.reserve(eps_inactive_grid.size());
  for (double e : eps_inactive_grid) {
    SweepRow row;
    row.eps = Epsilons{eps_active, e};
    row.eps.validate();
    row.table = region_table_at(records, truth, row.eps);
    row.rate = rates(row.table, n_act, n_inact);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Wrappers in terms of the conformal pipeline itself.
inline std::vector<SweepRow> eps_sweep(const NcmSpec& spec,
                                       const CalibrationScores& cal,
                                       const Dataset& test,
                                       std::span<const double> eps_grid) {
  const auto records = predict_batch(spec, cal, test, Epsilons{});
  return eps_sweep(records, test.labels, eps_grid);
}

inline std::vector<SweepRow> asymmetric_sweep(
    const NcmSpec& spec, const CalibrationScores& cal, const Dataset& test,
    double eps_active, std::span<const double> eps_inactive_grid) {
  const auto records = predict_batch(spec, cal, test, Epsilons{});
  return asymmetric_sweep(records, test.labels, eps_active,
                          eps_inactive_grid);
}

// ---------------------------------------------------------------------------
// Precision/recall threshold sweeps.

struct PrPoint {
  double threshold = 0.0;
  std::size_t selected = 0;
  std::optional<double> precision;
  double recall = 0.0;
};

namespace detail {

template <typename Pred>
inline PrPoint pr_point(std::span<const Label> truth, double threshold,
                        std::size_t n_active_truth, Pred&& selected) {
  PrPoint pt;
  pt.threshold = threshold;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (selected(i)) {
      ++pt.selected;
      if (truth[i] == Label::Active) ++hits;
    }
  }
  if (pt.selected > 0) {
    pt.precision = static_cast<double>(hits) /
                   static_cast<double>(pt.selected);
  }
  pt.recall = n_active_truth > 0 ? static_cast<double>(hits) /
                                       static_cast<double>(n_active_truth)
                                 : 0.0;
  return pt;
}

inline std::size_t count_active(std::span<const Label> truth) {
  std::size_t n = 0;
  for (Label l : truth) n += l == Label::Active ? 1 : 0;
  return n;
}

}  // namespace detail

enum class FixedThreshold : std::uint8_t { Credibility, Confidence };

// Selection: forced-Active records above both a credibility and a
// confidence threshold; one threshold is fixed, the grid varies the other.
inline std::vector<PrPoint> credibility_confidence_sweep(
    std::span<const PredictionRecord> records, std::span<const Label> truth,
    FixedThreshold fixed, double fixed_value, std::span<const double> grid) {
  if (records.size() != truth.size()) {
    throw DataError("records/truth length mismatch");
  }
  const std::size_t n_act = detail::count_active(truth);
  std::vector<PrPoint> out;
  out.reserve(grid.size());
  for (double g : grid) {
    const double cred_thr =
        fixed == FixedThreshold::Credibility ? fixed_value : g;
    const double conf_thr =
        fixed == FixedThreshold::Confidence ? fixed_value : g;
    out.push_back(detail::pr_point(truth, g, n_act, [&](std::size_t i) {
      return records[i].forced_label == Label::Active &&
             records[i].credibility > cred_thr &&
             records[i].confidence > conf_thr;
    }));
  }
  return out;
}

struct ThreeMethodGrids {
  std::vector<double> decision_thresholds;
  double eps_active = 0.01;
  std::vector<double> eps_inactive;
  std::vector<double> credibility;
};

struct MethodCurve {
  std::string method;
  std::vector<PrPoint> points;
};

// Three routes to a precision/recall trade-off over the same predictions:
// thresholding the underlying decision function, varying the Inactive-class
// significance, and thresholding credibility of forced-Active records.
inline std::vector<MethodCurve> three_method_pr(
    std::span<const PredictionRecord> records,
    std::span<const double> svm_decision_values, std::span<const Label> truth,
    const ThreeMethodGrids& grids) {
  if (records.size() != truth.size()) {
    throw DataError("records/truth length mismatch");
  }
  const std::size_t n_act = detail::count_active(truth);
  std::vector<MethodCurve> curves;

  if (!grids.decision_thresholds.empty()) {
    if (svm_decision_values.size() != records.size()) {
      throw DataError("decision values required for the decision-threshold method");
    }
    MethodCurve c;
    c.method = "decision";
    for (double t : grids.decision_thresholds) {
      c.points.push_back(detail::pr_point(truth, t, n_act, [&](std::size_t i) {
        return svm_decision_values[i] > t;
      }));
    }
    curves.push_back(std::move(c));
  }

  {
    MethodCurve c;
    c.method = "eps-inactive";
    for (double e : grids.eps_inactive) {
      c.points.push_back(detail::pr_point(truth, e, n_act, [&](std::size_t i) {
        return records[i].p_active > grids.eps_active &&
               records[i].p_inactive <= e;
      }));
    }
    curves.push_back(std::move(c));
  }

  {
    MethodCurve c;
    c.method = "credibility";
    for (double t : grids.credibility) {
      c.points.push_back(detail::pr_point(truth, t, n_act, [&](std::size_t i) {
        return records[i].forced_label == Label::Active &&
               records[i].credibility > t;
      }));
    }
    curves.push_back(std::move(c));
  }

  return curves;
}

}  // namespace icp
