#pragma once

// Mondrian inductive conformal prediction: class-conditional calibration,
// p-values, region and forced predictions.
//
// The p-value for hypothesis y compares the test score against the
// calibration scores of label y only, counting the test example itself in
// both numerator and denominator:
//
//   p(y) = ( |{i : y_i = y, alpha_i >= alpha_test}| + 1 ) / (n_y + 1)
//
// Ties count toward the numerator. The smoothed variant splits ties
// uniformly and is exactly valid rather than conservative.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/ncm.hpp"

namespace icp {

struct CalibrationScores {
  std::vector<double> active;    // sorted ascending
  std::vector<double> inactive;  // sorted ascending

  const std::vector<double>& for_label(Label y) const {
    return y == Label::Active ? active : inactive;
  }
  std::size_t n(Label y) const { return for_label(y).size(); }
  std::size_t total() const { return active.size() + inactive.size(); }
};

// Scores every calibration example under its true label. When the NCM is
// kNN and the reference set is this same calibration set, each example is
// excluded from its own neighbor search.
inline CalibrationScores calibrate(const NcmSpec& spec,
                                   const Dataset& calibration) {
  const auto [n_act, n_inact] = class_counts(calibration);
  if (n_act == 0 || n_inact == 0) {
    throw DataError("calibration set must contain both classes");
  }
  bool self_reference = false;
  if (const auto* knn = std::get_if<KnnNcm>(&spec)) {
    self_reference = knn->reference.size() == calibration.size() &&
                     dataset_fingerprint(knn->reference) ==
                         dataset_fingerprint(calibration);
  }
  CalibrationScores cal;
  cal.active.reserve(n_act);
  cal.inactive.reserve(n_inact);
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    const auto exclude =
        self_reference ? static_cast<std::ptrdiff_t>(i) : std::ptrdiff_t{-1};
    const double a =
        ncm_score(spec, calibration.objects[i], calibration.labels[i], exclude);
    (calibration.labels[i] == Label::Active ? cal.active : cal.inactive)
        .push_back(a);
  }
  std::sort(cal.active.begin(), cal.active.end());
  std::sort(cal.inactive.begin(), cal.inactive.end());
  return cal;
}

inline double p_value(const CalibrationScores& cal, double alpha_test,
                      Label y) {
  const auto& scores = cal.for_label(y);
  if (scores.empty()) throw DataError("no calibration scores for label");
  if (std::isnan(alpha_test)) throw NumericError("NaN nonconformity score");
  const auto ge = scores.end() -
                  std::lower_bound(scores.begin(), scores.end(), alpha_test);
  return static_cast<double>(ge + 1) /
         static_cast<double>(scores.size() + 1);
}

// tie_u must lie in [0, 1).
inline double p_value_smoothed(const CalibrationScores& cal, double alpha_test,
                               Label y, double tie_u) {
  const auto& scores = cal.for_label(y);
  if (scores.empty()) throw DataError("no calibration scores for label");
  if (std::isnan(alpha_test)) throw NumericError("NaN nonconformity score");
  const auto gt = scores.end() -
                  std::upper_bound(scores.begin(), scores.end(), alpha_test);
  const auto eq = std::upper_bound(scores.begin(), scores.end(), alpha_test) -
                  std::lower_bound(scores.begin(), scores.end(), alpha_test);
  return (static_cast<double>(gt) +
          tie_u * static_cast<double>(eq + 1)) /
         static_cast<double>(scores.size() + 1);
}

// ---------------------------------------------------------------------------

struct Epsilons {
  double active = 0.01;
  double inactive = 0.01;

  void validate() const {
    if (active < 0.0 || active > 1.0 || inactive < 0.0 || inactive > 1.0) {
      throw ConfigError("significance levels must lie in [0, 1]");
    }
  }
};

enum class Region : std::uint8_t { Active, Inactive, Empty, Uncertain };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Active: return "Active";
    case Region::Inactive: return "Inactive";
    case Region::Empty: return "Empty";
    case Region::Uncertain: return "Uncertain";
  }
  return "?";
}

// Quadrant rule: a label is in the prediction set iff its p-value exceeds
// its significance level.
inline Region region_for(double p_active, double p_inactive,
                         const Epsilons& eps) {
  const bool act = p_active > eps.active;
  const bool inact = p_inactive > eps.inactive;
  if (act && inact) return Region::Uncertain;
  if (act) return Region::Active;
  if (inact) return Region::Inactive;
  return Region::Empty;
}

struct PredictionRecord {
  double p_active = 0.0;
  double p_inactive = 0.0;
  Region region = Region::Uncertain;
  Label forced_label = Label::Inactive;
  bool forced_tie = false;  // p_active == p_inactive, resolved to Inactive
  double credibility = 0.0;
  double confidence = 0.0;
};

inline PredictionRecord record_from_pvalues(double p_active, double p_inactive,
                                            const Epsilons& eps) {
  PredictionRecord r;
  r.p_active = p_active;
  r.p_inactive = p_inactive;
  r.region = region_for(p_active, p_inactive, eps);
  // forced prediction: largest p-value; ties go to the majority class
  r.forced_tie = p_active == p_inactive;
  r.forced_label = p_active > p_inactive ? Label::Active : Label::Inactive;
  r.credibility = std::max(p_active, p_inactive);
  r.confidence = 1.0 - std::min(p_active, p_inactive);
  return r;
}

inline PredictionRecord predict(const NcmSpec& spec,
                                const CalibrationScores& cal,
                                const SparseVector& x, const Epsilons& eps) {
  eps.validate();
  // score under each hypothesized label; no NCM-specific shortcut
  const double a_act = ncm_score(spec, x, Label::Active);
  const double a_inact = ncm_score(spec, x, Label::Inactive);
  return record_from_pvalues(p_value(cal, a_act, Label::Active),
                             p_value(cal, a_inact, Label::Inactive), eps);
}

inline std::vector<PredictionRecord> predict_batch(const NcmSpec& spec,
                                                   const CalibrationScores& cal,
                                                   const Dataset& test,
                                                   const Epsilons& eps) {
  std::vector<PredictionRecord> out;
  out.reserve(test.size());
  for (const auto& x : test.objects) out.push_back(predict(spec, cal, x, eps));
  return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Smoothed batch prediction; the tie-splitting uniforms are derived from
// (seed, object position) so results do not depend on evaluation order.
inline std::vector<PredictionRecord> predict_batch_smoothed(
    const NcmSpec& spec, const CalibrationScores& cal, const Dataset& test,
    const Epsilons& eps, std::uint64_t seed) {
  eps.validate();
  std::vector<PredictionRecord> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double a_act = ncm_score(spec, test.objects[i], Label::Active);
    const double a_inact = ncm_score(spec, test.objects[i], Label::Inactive);
    const double u_act =
        detail::unit_uniform(detail::splitmix64(seed ^ (2 * i + 1)));
    const double u_inact =
        detail::unit_uniform(detail::splitmix64(seed ^ (2 * i + 2)));
    out.push_back(record_from_pvalues(
        p_value_smoothed(cal, a_act, Label::Active, u_act),
        p_value_smoothed(cal, a_inact, Label::Inactive, u_inact), eps));
  }
  return out;
}

// Indices ordered by descending p_active (ties: descending confidence, then
// input order), keeping only records with p_active > p_threshold.
inline std::vector<std::size_t> rank_by_p_active(
    const std::vector<PredictionRecord>& records, double p_threshold = 0.0) {
  std::vector<std::size_t> idx;
  idx.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].p_active > p_threshold) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].p_active != records[b].p_active) {
      return records[a].p_active > records[b].p_active;
    }
    return records[a].confidence > records[b].confidence;
  });
  return idx;
}

// ---------------------------------------------------------------------------
// Calibration score file, same checksum scheme as the model file.

inline void save_calibration(const CalibrationScores& cal,
                             const std::string& path) {
  std::ostringstream body;
  body << "icp-calibration 1\n";
  body << "n_active " << cal.active.size() << "\n";
  body << "n_inactive " << cal.inactive.size() << "\n";
  body << "active";
  for (double v : cal.active) body << " " << detail::g17(v);
  body << "\ninactive";
  for (double v : cal.inactive) body << " " << detail::g17(v);
  body << "\n";
  const std::string content = body.str();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write calibration file: " + path);
  char sum[32];
  std::snprintf(sum, sizeof sum, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(content)));
  out << content << "checksum " << sum << "\n";
}

inline CalibrationScores load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration file: " + path);
  std::string content, line, checksum_seen;
  while (std::getline(in, line)) {
    if (line.rfind("checksum ", 0) == 0) {
      checksum_seen = line.substr(9);
      break;
    }
    content += line;
    content += "\n";
  }
  char sum[32];
  std::snprintf(sum, sizeof sum, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(content)));
  if (checksum_seen != sum) {
    throw DataError("calibration file checksum mismatch (corrupt file): " +
                    path);
  }
  std::istringstream is(content);
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "icp-calibration" || version != 1) {
    throw DataError("not an icp calibration file: " + path);
  }
  CalibrationScores cal;
  std::size_t n_act = 0, n_inact = 0;
  std::string key;
  // token + strtod instead of stream extraction so the "inf" sentinel
  // round-trips
  auto read_double = [&is, &path]() {
    std::string tok;
    if (!(is >> tok)) throw DataError("truncated calibration file: " + path);
    const char* p = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) throw DataError("bad score in calibration file: " + path);
    return v;
  };
  while (is >> key) {
    if (key == "n_active") {
      is >> n_act;
    } else if (key == "n_inactive") {
      is >> n_inact;
    } else if (key == "active") {
      cal.active.resize(n_act);
      for (auto& v : cal.active) v = read_double();
    } else if (key == "inactive") {
      cal.inactive.resize(n_inact);
      for (auto& v : cal.inactive) v = read_double();
    } else {
      throw DataError("unknown key in calibration file: " + key);
    }
  }
  if (!std::is_sorted(cal.active.begin(), cal.active.end()) ||
      !std::is_sorted(cal.inactive.begin(), cal.inactive.end())) {
    throw DataError("calibration scores are not sorted: " + path);
  }
  return cal;
}

}  // namespace icp
