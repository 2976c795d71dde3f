#pragma once

// Nonconformity measures for (object, hypothesized label) pairs.
//
//   SVM:         alpha = -y * d(x)         (signed margin distance)
//   kNN:         alpha = sum of k smallest same-label distances
//                      / sum of k smallest different-label distances
//   Naive Bayes: alpha = -log p(y|x)
//
// Larger alpha means the pair looks stranger.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/kernel.hpp"
#include "icp/naive_bayes.hpp"
#include "icp/svm.hpp"

namespace icp {

enum class KnnMetric : std::uint8_t { Tanimoto, Euclidean };

inline const char* knn_metric_name(KnnMetric m) {
  return m == KnnMetric::Tanimoto ? "tanimoto" : "euclidean";
}

inline KnnMetric knn_metric_from_name(const std::string& s) {
  if (s == "tanimoto") return KnnMetric::Tanimoto;
  if (s == "euclidean") return KnnMetric::Euclidean;
  throw ConfigError("unknown kNN metric: " + s);
}

inline double knn_distance(KnnMetric metric, const SparseVector& a,
                           const SparseVector& b) {
  switch (metric) {
    case KnnMetric::Tanimoto: return 1.0 - tanimoto(a, b);
    case KnnMetric::Euclidean: return std::sqrt(squared_distance(a, b));
  }
  return 0.0;
}

inline double svm_ncm(const SvmModel& model, const SparseVector& x, Label y) {
  return -label_sign(y) * decision_function(model, x);
}

// exclude_index skips one reference example (leave-one-out scoring when x
// itself is reference[exclude_index]). A zero different-label denominator
// yields +inf, which sorts above every finite score.
inline double knn_ncm(const Dataset& ref, std::size_t k, KnnMetric metric,
                      const SparseVector& x, Label y,
                      std::ptrdiff_t exclude_index = -1) {
  if (k == 0) throw ConfigError("k must be >= 1");
  std::vector<double> same, diff;
  same.reserve(ref.size());
  diff.reserve(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) == exclude_index) continue;
    const double d = knn_distance(metric, ref.objects[i], x);
    (ref.labels[i] == y ? same : diff).push_back(d);
  }
  if (same.size() < k || diff.size() < k) {
    throw DataError("kNN reference set has fewer than k examples of a label");
  }
  auto k_smallest_sum = [k](std::vector<double>& v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     v.end());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += v[i];
    return s;
  };
  const double num = k_smallest_sum(same);
  const double den = k_smallest_sum(diff);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

inline double nb_ncm(const NbModel& model, const SparseVector& x, Label y) {
  return -nb_log_posterior(model, x, y);
}

// ---------------------------------------------------------------------------

struct SvmNcm {
  SvmModel model;
};

struct KnnNcm {
  Dataset reference;
  std::size_t k = 3;
  KnnMetric metric = KnnMetric::Tanimoto;
};

struct NbNcm {
  NbModel model;
};

using NcmSpec = std::variant<SvmNcm, KnnNcm, NbNcm>;

inline double ncm_score(const NcmSpec& spec, const SparseVector& x, Label y,
                        std::ptrdiff_t knn_exclude_index = -1) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SvmNcm>) {
          return svm_ncm(s.model, x, y);
        } else if constexpr (std::is_same_v<T, KnnNcm>) {
          return knn_ncm(s.reference, s.k, s.metric, x, y, knn_exclude_index);
        } else {
          return nb_ncm(s.model, x, y);
        }
      },
      spec);
}

inline std::vector<double> score_batch(const NcmSpec& spec,
                                       std::span<const SparseVector> objects,
                                       Label y) {
  std::vector<double> out(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    out[i] = ncm_score(spec, objects[i], y);
  }
  return out;
}

}  // namespace icp
