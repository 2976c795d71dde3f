#pragma once

// Kernels over sparse count vectors and blocked Gram-matrix evaluation.
//
// Tanimoto:      T(A,B) = sum_i min(a_i,b_i) / (sum_i (a_i+b_i) - sum_i min(a_i,b_i))
// Tanimoto-RBF:  TG(A,B) = exp(-|T(A,A) + T(B,B) - 2 T(A,B)| / gamma)
// Plain RBF:     k(A,B) = exp(-gamma * ||A - B||^2)
//
// The 0/0 Tanimoto case (both vectors empty) is defined as 0: empty
// descriptors share no structure.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/sparse_vector.hpp"

namespace icp {

enum class KernelKind : std::uint8_t { Linear, Rbf, Tanimoto, TanimotoRbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Tanimoto;
  double gamma = 1.0;  // used by Rbf and TanimotoRbf only

  void validate() const {
    if ((kind == KernelKind::Rbf || kind == KernelKind::TanimotoRbf) &&
        !(gamma > 0.0)) {
      throw ConfigError("gamma must be > 0 for RBF kernels");
    }
  }

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    return a.kind == b.kind && a.gamma == b.gamma;
  }
};

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Tanimoto: return "tanimoto";
    case KernelKind::TanimotoRbf: return "tanimoto-rbf";
  }
  return "?";
}

inline KernelKind kernel_kind_from_name(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "rbf") return KernelKind::Rbf;
  if (s == "tanimoto") return KernelKind::Tanimoto;
  if (s == "tanimoto-rbf") return KernelKind::TanimotoRbf;
  throw ConfigError("unknown kernel: " + s);
}

inline double tanimoto(const SparseVector& a, const SparseVector& b) {
  const double m = min_sum(a, b);
  const double denom = a.sum() + b.sum() - m;
  if (denom <= 0.0) return 0.0;  // both empty
  return m / denom;
}

inline double kernel_eval(const KernelSpec& spec, const SparseVector& a,
                          const SparseVector& b) {
  switch (spec.kind) {
    case KernelKind::Linear:
      return dot(a, b);
    case KernelKind::Rbf:
      return std::exp(-spec.gamma * squared_distance(a, b));
    case KernelKind::Tanimoto:
      return tanimoto(a, b);
    case KernelKind::TanimotoRbf: {
      const double taa = tanimoto(a, a);
      const double tbb = tanimoto(b, b);
      const double tab = tanimoto(a, b);
      return std::exp(-std::abs(taa + tbb - 2.0 * tab) / spec.gamma);
    }
  }
  return 0.0;
}

struct GramMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

inline constexpr std::size_t kDefaultGramByteLimit =
    std::size_t{4} * 1024 * 1024 * 1024;

namespace detail {

inline void check_gram_size(std::size_t rows, std::size_t cols,
                            std::size_t max_bytes) {
  const std::size_t need = rows * cols * sizeof(double);
  if (rows != 0 && need / rows / sizeof(double) != cols) {
    throw NumericError("Gram matrix size overflows");
  }
  if (need > max_bytes) {
    throw NumericError("Gram matrix would need " + std::to_string(need) +
                       " bytes, limit is " + std::to_string(max_bytes));
  }
}

template <typename Fn>
inline void for_each_row_chunk(std::size_t rows, std::size_t chunk,
                               unsigned threads, Fn&& fn) {
  if (chunk == 0) chunk = 256;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
    ranges.emplace_back(r0, std::min(rows, r0 + chunk));
  }
  if (threads <= 1 || ranges.size() <= 1) {
    for (const auto& [r0, r1] : ranges) fn(r0, r1);
    return;
  }
  // Chunks write disjoint row ranges, so the assembled result is identical
  // to sequential evaluation.
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mu;
  const unsigned nthreads = std::min<std::size_t>(threads, ranges.size());
  for (unsigned t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= ranges.size()) return;
          mine = next++;
        }
        fn(ranges[mine].first, ranges[mine].second);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Rectangular Gram: values[i][j] = k(rows[i], cols[j]).
inline GramMatrix gram_matrix(const KernelSpec& spec, const Dataset& rows,
                              const Dataset& cols, std::size_t chunk = 256,
                              unsigned threads = 1,
                              std::size_t max_bytes = kDefaultGramByteLimit) {
  spec.validate();
  detail::check_gram_size(rows.size(), cols.size(), max_bytes);
  GramMatrix g;
  g.rows = rows.size();
  g.cols = cols.size();
  g.values.assign(g.rows * g.cols, 0.0);
  detail::for_each_row_chunk(
      g.rows, chunk, threads, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
          for (std::size_t j = 0; j < g.cols; ++j) {
            g.at(i, j) = kernel_eval(spec, rows.objects[i], cols.objects[j]);
          }
        }
      });
  return g;
}

// Square symmetric Gram over one dataset; mirrors the upper triangle so the
// result is exactly symmetric.
inline GramMatrix gram_matrix(const KernelSpec& spec, const Dataset& ds,
                              std::size_t chunk = 256, unsigned threads = 1,
                              std::size_t max_bytes = kDefaultGramByteLimit) {
  spec.validate();
  detail::check_gram_size(ds.size(), ds.size(), max_bytes);
  GramMatrix g;
  g.rows = g.cols = ds.size();
  g.values.assign(g.rows * g.cols, 0.0);
  detail::for_each_row_chunk(
      g.rows, chunk, threads, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
          for (std::size_t j = i; j < g.cols; ++j) {
            g.at(i, j) = kernel_eval(spec, ds.objects[i], ds.objects[j]);
          }
        }
      });
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < i; ++j) g.at(i, j) = g.at(j, i);
  }
  return g;
}

// Sub-Gram by index lists into a precomputed square Gram.
inline GramMatrix gram_subset(const GramMatrix& g,
                              std::span<const std::size_t> rows,
                              std::span<const std::size_t> cols) {
  GramMatrix out;
  out.rows = rows.size();
  out.cols = cols.size();
  out.values.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      out.at(i, j) = g.at(rows[i], cols[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary Gram cache, keyed by (row fingerprint, col fingerprint, kernel spec).

namespace detail {
inline constexpr char kGramCacheMagic[8] = {'I', 'C', 'P', 'G',
                                            'R', 'A', 'M', '1'};
}

inline void save_gram_cache(const std::string& path, const KernelSpec& spec,
                            std::uint64_t fp_rows, std::uint64_t fp_cols,
                            const GramMatrix& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write Gram cache: " + path);
  out.write(detail::kGramCacheMagic, sizeof detail::kGramCacheMagic);
  const auto kind = static_cast<std::uint32_t>(spec.kind);
  const std::uint64_t rows = g.rows, cols = g.cols;
  out.write(reinterpret_cast<const char*>(&kind), sizeof kind);
  out.write(reinterpret_cast<const char*>(&spec.gamma), sizeof spec.gamma);
  out.write(reinterpret_cast<const char*>(&fp_rows), sizeof fp_rows);
  out.write(reinterpret_cast<const char*>(&fp_cols), sizeof fp_cols);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
}

// Returns false when the file is absent or keyed for different inputs.
inline bool load_gram_cache(const std::string& path, const KernelSpec& spec,
                            std::uint64_t fp_rows, std::uint64_t fp_cols,
                            GramMatrix& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  if (!in.read(magic, sizeof magic) ||
      std::memcmp(magic, detail::kGramCacheMagic, sizeof magic) != 0) {
    return false;
  }
  std::uint32_t kind;
  double gamma;
  std::uint64_t frows, fcols, rows, cols;
  in.read(reinterpret_cast<char*>(&kind), sizeof kind);
  in.read(reinterpret_cast<char*>(&gamma), sizeof gamma);
  in.read(reinterpret_cast<char*>(&frows), sizeof frows);
  in.read(reinterpret_cast<char*>(&fcols), sizeof fcols);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) return false;
  if (kind != static_cast<std::uint32_t>(spec.kind) || gamma != spec.gamma ||
      frows != fp_rows || fcols != fp_cols) {
    return false;
  }
  g.rows = rows;
  g.cols = cols;
  g.values.resize(rows * cols);
  in.read(reinterpret_cast<char*>(g.values.data()),
          static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  return static_cast<bool>(in);
}

}  // namespace icp
