#pragma once

// Sparse count vectors: sorted (feature index, value) pairs with value > 0.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "icp/error.hpp"

namespace icp {

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry& a, const SparseEntry& b) {
    return a.index == b.index && a.value == b.value;
  }
};

class SparseVector {
 public:
  SparseVector() = default;

  // Takes entries already sorted by index; validates strict ordering and
  // positive values.
  explicit SparseVector(std::vector<SparseEntry> entries)
      : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!(entries_[i].value > 0.0)) {
        throw DataError("sparse vector values must be > 0");
      }
      if (i > 0 && entries_[i].index <= entries_[i - 1].index) {
        throw DataError("sparse vector indices must be strictly increasing");
      }
    }
  }

  static SparseVector from_pairs(
      std::initializer_list<std::pair<std::uint32_t, double>> pairs) {
    std::vector<SparseEntry> entries;
    entries.reserve(pairs.size());
    for (const auto& [idx, val] : pairs) entries.push_back({idx, val});
    return SparseVector(std::move(entries));
  }

  const std::vector<SparseEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t nnz() const { return entries_.size(); }

  // Largest feature index present; only meaningful when nonempty.
  std::uint32_t max_index() const {
    return entries_.empty() ? 0 : entries_.back().index;
  }

  double sum() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value;
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * e.value;
    return s;
  }

  friend bool operator==(const SparseVector& a, const SparseVector& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<SparseEntry> entries_;
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries().begin(), ea = a.entries().end();
  auto ib = b.entries().begin(), eb = b.entries().end();
  while (ia != ea && ib != eb) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      s += ia->value * ib->value;
      ++ia;
      ++ib;
    }
  }
  return s;
}

// Sum over shared indices of min(a_i, b_i); absent entries count as zero.
inline double min_sum(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries().begin(), ea = a.entries().end();
  auto ib = b.entries().begin(), eb = b.entries().end();
  while (ia != ea && ib != eb) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      s += ia->value < ib->value ? ia->value : ib->value;
      ++ia;
      ++ib;
    }
  }
  return s;
}

inline double squared_distance(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries().begin(), ea = a.entries().end();
  auto ib = b.entries().begin(), eb = b.entries().end();
  while (ia != ea && ib != eb) {
    if (ia->index < ib->index) {
      s += ia->value * ia->value;
      ++ia;
    } else if (ib->index < ia->index) {
      s += ib->value * ib->value;
      ++ib;
    } else {
      const double d = ia->value - ib->value;
      s += d * d;
      ++ia;
      ++ib;
    }
  }
  for (; ia != ea; ++ia) s += ia->value * ia->value;
  for (; ib != eb; ++ib) s += ib->value * ib->value;
  return s;
}

}  // namespace icp
