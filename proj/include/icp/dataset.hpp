#pragma once

// Dataset container plus the sparse attribute-value text format.
//
// File format, one example per line:
//
//   <label> <index>:<value> <index>:<value> ...  [# id]
//
// label is +1 (Active) or -1 (Inactive); any other label is a parse error.
// Indices are 1-based on disk and strictly increasing within a line; values
// are non-negative counts (zeros are dropped on read, negatives rejected).
// An optional header line `#features: N` pins the feature-space dimension;
// otherwise it is 1 + the largest index seen. Lines starting with `#` are
// comments. A trailing `# id` on an example line attaches an external
// identifier (e.g. a compound ID).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icp/error.hpp"
#include "icp/sparse_vector.hpp"

namespace icp {

enum class Label : std::uint8_t { Active, Inactive };

// Active is the positive (+1) minority class by convention.
inline constexpr int label_sign(Label l) {
  return l == Label::Active ? +1 : -1;
}

inline constexpr const char* label_name(Label l) {
  return l == Label::Active ? "Active" : "Inactive";
}

inline constexpr Label other_label(Label l) {
  return l == Label::Active ? Label::Inactive : Label::Active;
}

struct Dataset {
  std::vector<SparseVector> objects;
  std::vector<Label> labels;
  std::vector<std::string> ids;  // empty, or one id per example
  std::uint32_t num_features = 0;

  std::size_t size() const { return objects.size(); }
  bool has_ids() const { return !ids.empty(); }

  // id for CSV output: external id when present, else the example's index.
  std::string id_of(std::size_t i) const {
    return has_ids() ? ids[i] : std::to_string(i);
  }

  void validate() const {
    if (labels.size() != objects.size()) {
      throw DataError("dataset labels/objects length mismatch");
    }
    if (!ids.empty() && ids.size() != objects.size()) {
      throw DataError("dataset ids length mismatch");
    }
    for (const auto& x : objects) {
      if (!x.empty() && x.max_index() >= num_features) {
        throw DataError("feature index out of range for dataset");
      }
    }
  }
};

inline std::pair<std::size_t, std::size_t> class_counts(const Dataset& ds) {
  std::size_t n_active = 0;
  for (Label l : ds.labels) {
    if (l == Label::Active) ++n_active;
  }
  return {n_active, ds.size() - n_active};
}

namespace detail {

inline bool parse_double(const char*& p, double& out) {
  char* end = nullptr;
  out = std::strtod(p, &end);
  if (end == p) return false;
  p = end;
  return true;
}

inline void skip_spaces(const char*& p) {
  while (*p == ' ' || *p == '\t') ++p;
}

}  // namespace detail

// force_num_features > 0 overrides the inferred feature count so that
// several files can share one feature space; it must not be smaller than
// any index actually present.
inline Dataset parse_sparse_stream(std::istream& in,
                                   std::uint32_t force_num_features = 0) {
  Dataset ds;
  std::uint32_t max_index_seen = 0;  // 1-based
  std::uint32_t header_features = 0;
  bool any_ids = false;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char* p = line.c_str();
    detail::skip_spaces(p);
    if (*p == '\0') continue;
    if (*p == '#') {
      // header or comment
      std::string rest(p + 1);
      const std::string key = "features:";
      auto pos = rest.find_first_not_of(" \t");
      if (pos != std::string::npos && rest.compare(pos, key.size(), key) == 0) {
        const char* q = rest.c_str() + pos + key.size();
        char* end = nullptr;
        long long n = std::strtoll(q, &end, 10);
        if (end == q || n <= 0) {
          throw ParseError("bad #features header", line_no);
        }
        header_features = static_cast<std::uint32_t>(n);
      }
      continue;
    }

    // label token
    char* end = nullptr;
    long lab = std::strtol(p, &end, 10);
    if (end == p || (lab != 1 && lab != -1)) {
      throw ParseError("label must be +1 or -1", line_no);
    }
    p = end;

    std::vector<SparseEntry> entries;
    std::string id;
    while (true) {
      detail::skip_spaces(p);
      if (*p == '\0') break;
      if (*p == '#') {
        ++p;
        detail::skip_spaces(p);
        id = p;
        while (!id.empty() && (id.back() == ' ' || id.back() == '\t')) {
          id.pop_back();
        }
        break;
      }
      long long idx = std::strtoll(p, &end, 10);
      if (end == p || *end != ':') {
        throw ParseError("malformed index:value pair", line_no);
      }
      if (idx < 1) {
        throw ParseError("feature indices are 1-based and positive", line_no);
      }
      p = end + 1;
      double val;
      if (!detail::parse_double(p, val)) {
        throw ParseError("malformed feature value", line_no);
      }
      if (val < 0.0) {
        throw ParseError("negative feature value", line_no);
      }
      const auto idx0 = static_cast<std::uint32_t>(idx - 1);  // to 0-based
      if (!entries.empty() && idx0 <= entries.back().index) {
        throw ParseError("feature indices must be strictly increasing",
                         line_no);
      }
      if (val > 0.0) entries.push_back({idx0, val});
      if (static_cast<std::uint32_t>(idx) > max_index_seen) {
        max_index_seen = static_cast<std::uint32_t>(idx);
      }
    }

    ds.objects.emplace_back(std::move(entries));
    ds.labels.push_back(lab == 1 ? Label::Active : Label::Inactive);
    ds.ids.push_back(std::move(id));
    if (!ds.ids.back().empty()) any_ids = true;
  }

  if (!any_ids) ds.ids.clear();

  ds.num_features = max_index_seen;
  if (header_features > 0) ds.num_features = header_features;
  if (force_num_features > 0) ds.num_features = force_num_features;
  if (ds.num_features < max_index_seen) {
    throw DataError("declared feature count " +
                    std::to_string(ds.num_features) +
                    " smaller than max index " +
                    std::to_string(max_index_seen) + " seen in data");
  }
  ds.validate();
  return ds;
}

inline Dataset parse_sparse_file(const std::string& path,
                                 std::uint32_t force_num_features = 0) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return parse_sparse_stream(in, force_num_features);
}

inline void write_sparse_stream(const Dataset& ds, std::ostream& out) {
  out << "#features: " << ds.num_features << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (ds.labels[i] == Label::Active ? "+1" : "-1");
    for (const auto& e : ds.objects[i].entries()) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", e.index + 1, e.value);
      out << buf;
    }
    if (ds.has_ids() && !ds.ids[i].empty()) out << " # " << ds.ids[i];
    out << "\n";
  }
}

inline void write_sparse_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  write_sparse_stream(ds, out);
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset out;
  out.num_features = ds.num_features;
  out.objects.reserve(idx.size());
  out.labels.reserve(idx.size());
  if (ds.has_ids()) out.ids.reserve(idx.size());
  for (std::size_t i : idx) {
    out.objects.push_back(ds.objects[i]);
    out.labels.push_back(ds.labels[i]);
    if (ds.has_ids()) out.ids.push_back(ds.ids[i]);
  }
  return out;
}

// Train/calibration/test split. calibration_size == 0 means "remainder
// after the test and proper-train extractions" (the usual protocol).
struct SplitSpec {
  std::size_t proper_train_size = 0;
  std::size_t calibration_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset proper_train, calibration, test;
  std::vector<std::size_t> proper_idx, calibration_idx, test_idx;
};

inline Split split_dataset(const Dataset& ds, const SplitSpec& spec) {
  const std::size_t n = ds.size();
  std::size_t cal = spec.calibration_size;
  if (spec.proper_train_size + spec.test_size > n) {
    throw DataError("split sizes exceed dataset size");
  }
  if (cal == 0) cal = n - spec.proper_train_size - spec.test_size;
  if (spec.proper_train_size + spec.test_size + cal > n) {
    throw DataError("split sizes exceed dataset size");
  }
  if (spec.proper_train_size == 0 || cal == 0) {
    throw DataError("proper-train and calibration splits must be nonempty");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Split s;
  auto it = idx.begin();
  s.test_idx.assign(it, it + spec.test_size);
  it += spec.test_size;
  s.proper_idx.assign(it, it + spec.proper_train_size);
  it += spec.proper_train_size;
  s.calibration_idx.assign(it, it + cal);

  s.test = subset(ds, s.test_idx);
  s.proper_train = subset(ds, s.proper_idx);
  s.calibration = subset(ds, s.calibration_idx);
  return s;
}

// FNV-1a over the dataset's contents; keys Gram caches and detects when a
// kNN reference set is the same data being calibrated.
inline std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&ds.num_features, sizeof ds.num_features);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto sign = label_sign(ds.labels[i]);
    mix(&sign, sizeof sign);
    for (const auto& e : ds.objects[i].entries()) {
      mix(&e.index, sizeof e.index);
      mix(&e.value, sizeof e.value);
    }
  }
  return h;
}

}  // namespace icp
