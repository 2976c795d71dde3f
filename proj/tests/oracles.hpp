#pragma once

// Test-only oracles, independent of the library's solver path:
//  - active-set enumeration for the weighted SVM dual (exact, small n)
//  - accelerated projected gradient for the same dual (any n)
//  - cyclic Jacobi eigenvalues for symmetric matrices
// plus random-instance generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/kernel.hpp"
#include "icp/sparse_vector.hpp"

namespace oracle {

// Weighted SVM dual: min 1/2 a'Qa - e'a, y'a = 0, 0 <= a_i <= box_i,
// with Q_ij = y_i y_j K_ij.
struct DualProblem {
  std::vector<double> K;  // n x n row-major kernel matrix
  std::vector<int> y;     // +-1
  std::vector<double> box;

  std::size_t n() const { return y.size(); }
  double q(std::size_t i, std::size_t j) const {
    return y[i] * y[j] * K[i * n() + j];
  }
  double objective(const std::vector<double>& a) const {
    double obj = 0.0;
    for (std::size_t i = 0; i < n(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n(); ++j) row += q(i, j) * a[j];
      obj += 0.5 * a[i] * row - a[i];
    }
    return obj;
  }
  std::vector<double> gradient(const std::vector<double>& a) const {
    std::vector<double> g(n(), -1.0);
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = 0; j < n(); ++j) g[i] += q(i, j) * a[j];
    }
    return g;
  }
};

// Gaussian elimination with partial pivoting; false on (near-)singular.
inline bool solve_linear(std::vector<double> m, std::vector<double> rhs,
                         std::vector<double>& out) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
    }
    if (std::abs(m[piv * n + col]) < 1e-12) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m[piv * n + c], m[col * n + c]);
      std::swap(rhs[piv], rhs[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r * n + col] / m[col * n + col];
      for (std::size_t c = col; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= m[r * n + c] * out[c];
    out[r] = s / m[r * n + r];
  }
  return true;
}

struct OracleSolution {
  std::vector<double> alpha;
  double objective = std::numeric_limits<double>::quiet_NaN();
  bool found = false;
};

// Enumerates every lower/upper/free assignment, solves the stationarity
// system on the free set, and keeps the first candidate satisfying all
// KKT conditions (sufficient by convexity). Exponential: use for n <= 9.
inline OracleSolution qp_enum_oracle(const DualProblem& p,
                                     double tol = 1e-9) {
  const std::size_t n = p.n();
  OracleSolution best;
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;

  std::vector<int> state(n);  // 0 lower, 1 upper, 2 free
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(c % 3);
      c /= 3;
    }
    std::vector<std::size_t> free_idx;
    std::vector<double> a(n, 0.0);
    double bound_y_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 1) {
        a[i] = p.box[i];
        bound_y_sum += p.y[i] * a[i];
      } else if (state[i] == 2) {
        free_idx.push_back(i);
      }
    }

    double b = 0.0;
    if (!free_idx.empty()) {
      const std::size_t f = free_idx.size();
      std::vector<double> sys((f + 1) * (f + 1), 0.0), rhs(f + 1, 0.0), sol;
      for (std::size_t r = 0; r < f; ++r) {
        for (std::size_t cc = 0; cc < f; ++cc) {
          sys[r * (f + 1) + cc] = p.q(free_idx[r], free_idx[cc]);
        }
        sys[r * (f + 1) + f] = p.y[free_idx[r]];
        sys[f * (f + 1) + r] = p.y[free_idx[r]];
        double dotb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (state[i] == 1) dotb += p.q(free_idx[r], i) * a[i];
        }
        rhs[r] = 1.0 - dotb;
      }
      rhs[f] = -bound_y_sum;
      if (!solve_linear(sys, rhs, sol)) continue;
      bool feasible = true;
      for (std::size_t r = 0; r < f; ++r) {
        a[free_idx[r]] = sol[r];
        if (sol[r] < -tol || sol[r] > p.box[free_idx[r]] + tol) {
          feasible = false;
          break;
        }
      }
      if (!feasible) continue;
      b = sol[f];
      // clamp tiny infeasibilities introduced by the linear solve
      for (std::size_t r = 0; r < f; ++r) {
        a[free_idx[r]] = std::clamp(a[free_idx[r]], 0.0, p.box[free_idx[r]]);
      }
    } else {
      if (std::abs(bound_y_sum) > tol) continue;
      // b only has to make every bound condition hold; find its interval
      const auto g = p.gradient(a);
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        // lower bound: g_i + b*y_i >= 0 ; upper bound: g_i + b*y_i <= 0
        if (state[i] == 0) {
          if (p.y[i] > 0) lo = std::max(lo, -g[i]);
          else hi = std::min(hi, g[i]);
        } else {
          if (p.y[i] > 0) hi = std::min(hi, -g[i]);
          else lo = std::max(lo, g[i]);
        }
      }
      if (lo > hi + tol) continue;
      b = 0.5 * (std::max(lo, std::min(hi, 0.0)) +
                 std::min(hi, std::max(lo, 0.0)));
    }

    // full KKT verification on the candidate
    const auto g = p.gradient(a);
    bool ok = true;
    double y_sum = 0.0;
    for (std::size_t i = 0; i < n && ok; ++i) {
      y_sum += p.y[i] * a[i];
      const double r = g[i] + b * p.y[i];
      if (state[i] == 2 || (a[i] > tol && a[i] < p.box[i] - tol)) {
        ok = std::abs(r) <= 1e-7;
      } else if (a[i] <= tol) {
        ok = r >= -1e-7;
      } else {
        ok = r <= 1e-7;
      }
    }
    if (!ok || std::abs(y_sum) > 1e-7) continue;

    const double obj = p.objective(a);
    if (!best.found || obj < best.objective) {
      best.alpha = a;
      best.objective = obj;
      best.found = true;
    }
  }
  return best;
}

// Projection onto {0 <= a <= box} ∩ {y'a = 0} by bisection on the shift s
// in clip(v + s*y, 0, box); the constraint value is nondecreasing in s.
inline std::vector<double> project_feasible(const std::vector<double>& v,
                                            const std::vector<int>& y,
                                            const std::vector<double>& box) {
  const std::size_t n = v.size();
  auto value = [&](double s) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      t += y[i] * std::clamp(v[i] + s * y[i], 0.0, box[i]);
    }
    return t;
  };
  double span = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    span = std::max(span, std::abs(v[i]) + box[i]);
  }
  double lo = -2.0 * span, hi = 2.0 * span;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (value(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  const double s = 0.5 * (lo + hi);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(v[i] + s * y[i], 0.0, box[i]);
  }
  return out;
}

// FISTA with adaptive restart; runs to a tight gradient-mapping residual so
// the objective is accurate well past 1e-6.
inline OracleSolution qp_apg_oracle(const DualProblem& p,
                                    std::uint64_t max_iter = 400'000,
                                    double tol = 1e-12) {
  const std::size_t n = p.n();
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(p.q(i, j));
    lip = std::max(lip, row);
  }
  lip += 1e-9;

  std::vector<double> x(n, 0.0), z(n, 0.0), x_prev(n, 0.0), step(n);
  double t = 1.0;
  OracleSolution res;
  for (std::uint64_t it = 0; it < max_iter; ++it) {
    const auto g = p.gradient(z);
    for (std::size_t i = 0; i < n; ++i) step[i] = z[i] - g[i] / lip;
    x_prev = x;
    x = project_feasible(step, p.y, p.box);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double restart_dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      restart_dot += (z[i] - x[i]) * (x[i] - x_prev[i]);
    }
    if (restart_dot > 0.0) {
      t = 1.0;
      z = x;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = x[i] + ((t - 1.0) / t_next) * (x[i] - x_prev[i]);
      }
      t = t_next;
    }
    if (it % 64 == 0) {
      const auto gx = p.gradient(x);
      for (std::size_t i = 0; i < n; ++i) step[i] = x[i] - gx[i] / lip;
      const auto px = project_feasible(step, p.y, p.box);
      double resid = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        resid = std::max(resid, std::abs(px[i] - x[i]));
      }
      if (resid < tol) break;
    }
  }
  res.alpha = x;
  res.objective = p.objective(x);
  res.found = true;
  return res;
}

// ---------------------------------------------------------------------------

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> m,
                                              std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += m[i * n + j] * m[i * n + j];
    }
    if (off < 1e-24) break;
    for (std::size_t pq = 0; pq < n; ++pq) {
      for (std::size_t q = pq + 1; q < n; ++q) {
        const std::size_t pi = pq;
        const double apq = m[pi * n + q];
        if (std::abs(apq) < 1e-18) continue;
        const double app = m[pi * n + pi], aqq = m[q * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double sign = theta >= 0.0 ? 1.0 : -1.0;
        const double tv =
            sign / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + tv * tv);
        const double s = tv * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = m[k * n + pi], akq = m[k * n + q];
          m[k * n + pi] = c * akp - s * akq;
          m[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = m[pi * n + k], aqk = m[q * n + k];
          m[pi * n + k] = c * apk - s * aqk;
          m[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = m[i * n + i];
  return eig;
}

// ---------------------------------------------------------------------------
// Random-instance generators.

inline icp::SparseVector random_sparse_vector(std::mt19937_64& rng,
                                              std::uint32_t dim,
                                              double nnz_fraction = 0.3,
                                              int max_count = 5) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, max_count);
  std::vector<icp::SparseEntry> entries;
  for (std::uint32_t f = 0; f < dim; ++f) {
    if (unit(rng) < nnz_fraction) {
      entries.push_back({f, static_cast<double>(count(rng))});
    }
  }
  return icp::SparseVector(std::move(entries));
}

inline icp::Dataset random_dataset(std::mt19937_64& rng, std::size_t n,
                                   std::uint32_t dim,
                                   double active_fraction = 0.5,
                                   double nnz_fraction = 0.3) {
  icp::Dataset ds;
  ds.num_features = dim;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    ds.objects.push_back(random_sparse_vector(rng, dim, nnz_fraction));
    ds.labels.push_back(unit(rng) < active_fraction ? icp::Label::Active
                                                    : icp::Label::Inactive);
  }
  // guarantee both classes
  if (n >= 2) {
    ds.labels[0] = icp::Label::Active;
    ds.labels[1] = icp::Label::Inactive;
  }
  return ds;
}

inline DualProblem random_dual_problem(std::mt19937_64& rng, std::size_t n,
                                       const icp::KernelSpec& kernel) {
  std::uniform_real_distribution<double> c_dist(0.5, 16.0);
  std::uniform_real_distribution<double> w_dist(1.0, 5.0);
  const icp::Dataset ds = random_dataset(rng, n, 12, 0.5, 0.4);
  const icp::GramMatrix gram = icp::gram_matrix(kernel, ds);
  DualProblem p;
  p.K = gram.values;
  const double c = c_dist(rng);
  const double w_act = w_dist(rng), w_inact = w_dist(rng);
  for (std::size_t i = 0; i < n; ++i) {
    p.y.push_back(icp::label_sign(ds.labels[i]));
    p.box.push_back(c * (ds.labels[i] == icp::Label::Active ? w_act
                                                            : w_inact));
  }
  return p;
}

}  // namespace oracle
