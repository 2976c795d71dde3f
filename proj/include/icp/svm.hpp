#pragma once

// Class-weighted soft-margin SVM trained in the dual by sequential pairwise
// optimization over a precomputed kernel matrix.
//
// The dual solved here is
//
//   min_a  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C * w(y_i)
//
// with Q_ij = y_i y_j k(x_i, x_j). The working pair is always the maximal
// KKT violator (ties broken by lowest index) so repeated runs on the same
// inputs produce identical models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/kernel.hpp"

namespace icp {

struct SvmConfig {
  double C = 1.0;
  double weight_active = 1.0;
  double weight_inactive = 1.0;
  KernelSpec kernel;
  double tolerance = 1e-6;        // KKT violation threshold
  std::uint64_t max_passes = 1'000'000;  // cap on pair-optimization steps

  double penalty(Label l) const {
    return C * (l == Label::Active ? weight_active : weight_inactive);
  }

  void validate() const {
    if (!(C > 0.0)) throw ConfigError("C must be > 0");
    if (!(weight_active > 0.0) || !(weight_inactive > 0.0)) {
      throw ConfigError("class weights must be > 0");
    }
    if (!(tolerance > 0.0) || tolerance > 1e-2) {
      throw ConfigError("tolerance must lie in (0, 1e-2]");
    }
    if (max_passes == 0) throw ConfigError("max_passes must be >= 1");
    kernel.validate();
  }
};

// Per-class weights inversely proportional to class representation,
// normalized so the majority class has weight 1.
inline std::pair<double, double> auto_class_weights(const Dataset& ds) {
  const auto [n_act, n_inact] = class_counts(ds);
  if (n_act == 0 || n_inact == 0) {
    throw DataError("auto class weights need both classes present");
  }
  if (n_act <= n_inact) {
    return {static_cast<double>(n_inact) / static_cast<double>(n_act), 1.0};
  }
  return {1.0, static_cast<double>(n_act) / static_cast<double>(n_inact)};
}

struct SvmModel {
  std::vector<SparseVector> support_vectors;
  std::vector<Label> sv_labels;
  std::vector<double> dual_coefs;  // alpha_i * y_i, all nonzero
  double bias = 0.0;
  KernelSpec kernel;
  std::uint32_t num_features = 0;
  bool converged = true;
  // training metadata, carried for inspection/serialization
  double trained_c = 0.0;
  double trained_weight_active = 0.0;
  double trained_weight_inactive = 0.0;
  // positions of the SVs in the training set this model came from;
  // in-memory only, not serialized
  std::vector<std::size_t> sv_train_indices;

  std::size_t sv_count() const { return support_vectors.size(); }
};

inline double decision_function(const SvmModel& m, const SparseVector& x) {
  if (m.support_vectors.empty()) {
    throw NumericError("decision_function on a model with no support vectors");
  }
  double d = m.bias;
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
    d += m.dual_coefs[i] * kernel_eval(m.kernel, m.support_vectors[i], x);
  }
  return d;
}

inline std::vector<double> decision_batch(const SvmModel& m,
                                          const std::vector<SparseVector>& xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = decision_function(m, xs[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SMO core

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;
  std::uint64_t iterations = 0;
  bool converged = false;
};

// gram holds plain kernel values k(x_i, x_j); y holds +-1; box holds the
// per-example upper bound C*w(y_i).
inline SmoResult smo_solve(const GramMatrix& gram, const std::vector<int>& y,
                           const std::vector<double>& box, double tolerance,
                           std::uint64_t max_iterations) {
  const std::size_t n = y.size();
  if (gram.rows != n || gram.cols != n) {
    throw NumericError("smo_solve: Gram dimensions do not match labels");
  }

  SmoResult res;
  res.alpha.assign(n, 0.0);
  auto& alpha = res.alpha;
  // gradient of the dual objective: G_i = (Q alpha)_i - 1
  std::vector<double> grad(n, -1.0);

  const double* K = gram.values.data();
  auto Q = [&](std::size_t i, std::size_t j) {
    return y[i] * y[j] * K[i * n + j];
  };

  std::uint64_t iter = 0;
  for (; iter < max_iterations; ++iter) {
    // Maximal violating pair:
    //   i maximizes -y_t G_t over I_up, j minimizes it over I_low.
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      const bool in_up =
          (y[t] > 0 && alpha[t] < box[t]) || (y[t] < 0 && alpha[t] > 0.0);
      const bool in_low =
          (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < box[t]);
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0 || j < 0 || m_up - m_low <= tolerance) {
      res.converged = true;
      break;
    }

    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    const double c_i = box[ii], c_j = box[jj];
    const double old_ai = alpha[ii], old_aj = alpha[jj];

    if (y[ii] != y[jj]) {
      double quad = K[ii * n + ii] + K[jj * n + jj] + 2.0 * Q(ii, jj);
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (-grad[ii] - grad[jj]) / quad;
      const double diff = alpha[ii] - alpha[jj];
      alpha[ii] += delta;
      alpha[jj] += delta;
      if (diff > 0.0) {
        if (alpha[jj] < 0.0) {
          alpha[jj] = 0.0;
          alpha[ii] = diff;
        }
      } else {
        if (alpha[ii] < 0.0) {
          alpha[ii] = 0.0;
          alpha[jj] = -diff;
        }
      }
      if (diff > c_i - c_j) {
        if (alpha[ii] > c_i) {
          alpha[ii] = c_i;
          alpha[jj] = c_i - diff;
        }
      } else {
        if (alpha[jj] > c_j) {
          alpha[jj] = c_j;
          alpha[ii] = c_j + diff;
        }
      }
    } else {
      double quad = K[ii * n + ii] + K[jj * n + jj] - 2.0 * Q(ii, jj);
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (grad[ii] - grad[jj]) / quad;
      const double sum = alpha[ii] + alpha[jj];
      alpha[ii] -= delta;
      alpha[jj] += delta;
      if (sum > c_i) {
        if (alpha[ii] > c_i) {
          alpha[ii] = c_i;
          alpha[jj] = sum - c_i;
        }
      } else {
        if (alpha[jj] < 0.0) {
          alpha[jj] = 0.0;
          alpha[ii] = sum;
        }
      }
      if (sum > c_j) {
        if (alpha[jj] > c_j) {
          alpha[jj] = c_j;
          alpha[ii] = sum - c_j;
        }
      } else {
        if (alpha[ii] < 0.0) {
          alpha[ii] = 0.0;
          alpha[jj] = sum;
        }
      }
    }

    const double dai = alpha[ii] - old_ai;
    const double daj = alpha[jj] - old_aj;
    const double* Ki = K + ii * n;
    const double* Kj = K + jj * n;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[ii] * Ki[t] * dai + y[jj] * Kj[t] * daj);
    }
  }
  res.iterations = iter;

  // bias from free support vectors; midpoint of the feasible interval
  // when every coefficient sits on a bound
  double bias_sum = 0.0;
  std::size_t n_free = 0;
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double v = -y[t] * grad[t];
    const bool in_up =
        (y[t] > 0 && alpha[t] < box[t]) || (y[t] < 0 && alpha[t] > 0.0);
    const bool in_low =
        (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < box[t]);
    if (in_up && v > m_up) m_up = v;
    if (in_low && v < m_low) m_low = v;
    if (alpha[t] > 0.0 && alpha[t] < box[t]) {
      bias_sum += v;
      ++n_free;
    }
  }
  res.bias = n_free > 0 ? bias_sum / static_cast<double>(n_free)
                        : 0.5 * (m_up + m_low);

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  res.objective = 0.5 * obj;
  return res;
}

// ---------------------------------------------------------------------------

inline SvmModel train_svm(const Dataset& train, const SvmConfig& cfg,
                          const GramMatrix* precomputed = nullptr) {
  cfg.validate();
  if (train.size() == 0) throw DataError("empty training set");
  const auto [n_act, n_inact] = class_counts(train);
  if (n_act == 0 || n_inact == 0) {
    throw DataError("training set must contain both classes");
  }

  const std::size_t n = train.size();
  std::vector<int> y(n);
  std::vector<double> box(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = label_sign(train.labels[i]);
    box[i] = cfg.penalty(train.labels[i]);
  }

  GramMatrix local;
  const GramMatrix* gram = precomputed;
  if (gram == nullptr) {
    local = gram_matrix(cfg.kernel, train);
    gram = &local;
  }

  SmoResult sol = smo_solve(*gram, y, box, cfg.tolerance, cfg.max_passes);

  SvmModel m;
  m.kernel = cfg.kernel;
  m.num_features = train.num_features;
  m.bias = sol.bias;
  m.converged = sol.converged;
  m.trained_c = cfg.C;
  m.trained_weight_active = cfg.weight_active;
  m.trained_weight_inactive = cfg.weight_inactive;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.alpha[i] != 0.0) {
      m.support_vectors.push_back(train.objects[i]);
      m.sv_labels.push_back(train.labels[i]);
      m.dual_coefs.push_back(sol.alpha[i] * y[i]);
      m.sv_train_indices.push_back(i);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model file: line-oriented text with a trailing FNV-1a checksum.

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_svm_model(const SvmModel& m, const std::string& path) {
  std::ostringstream body;
  body << "icp-model 1\n";
  body << "kernel " << kernel_kind_name(m.kernel.kind) << "\n";
  body << "gamma " << detail::g17(m.kernel.gamma) << "\n";
  body << "num_features " << m.num_features << "\n";
  body << "c " << detail::g17(m.trained_c) << "\n";
  body << "weight_active " << detail::g17(m.trained_weight_active) << "\n";
  body << "weight_inactive " << detail::g17(m.trained_weight_inactive) << "\n";
  body << "converged " << (m.converged ? 1 : 0) << "\n";
  body << "bias " << detail::g17(m.bias) << "\n";
  body << "num_sv " << m.sv_count() << "\n";
  for (std::size_t i = 0; i < m.sv_count(); ++i) {
    body << "sv " << detail::g17(m.dual_coefs[i]) << " "
         << label_sign(m.sv_labels[i]);
    for (const auto& e : m.support_vectors[i].entries()) {
      body << " " << (e.index + 1) << ":" << detail::g17(e.value);
    }
    body << "\n";
  }
  const std::string content = body.str();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  char sum[32];
  std::snprintf(sum, sizeof sum, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(content)));
  out << content << "checksum " << sum << "\n";
}

inline SvmModel load_svm_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  std::string content, line;
  std::string checksum_seen;
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
    throw DataError("model file checksum mismatch (corrupt file): " + path);
  }

  std::istringstream is(content);
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "icp-model" || version != 1) {
    throw DataError("not an icp model file: " + path);
  }

  SvmModel m;
  std::size_t num_sv = 0;
  std::string key;
  while (is >> key) {
    if (key == "kernel") {
      std::string name;
      is >> name;
      m.kernel.kind = kernel_kind_from_name(name);
    } else if (key == "gamma") {
      is >> m.kernel.gamma;
    } else if (key == "num_features") {
      is >> m.num_features;
    } else if (key == "c") {
      is >> m.trained_c;
    } else if (key == "weight_active") {
      is >> m.trained_weight_active;
    } else if (key == "weight_inactive") {
      is >> m.trained_weight_inactive;
    } else if (key == "converged") {
      int c;
      is >> c;
      m.converged = c != 0;
    } else if (key == "bias") {
      is >> m.bias;
    } else if (key == "num_sv") {
      is >> num_sv;
    } else if (key == "sv") {
      double coef;
      int sign;
      is >> coef >> sign;
      std::string rest;
      std::getline(is, rest);
      std::vector<SparseEntry> entries;
      const char* p = rest.c_str();
      while (*p) {
        detail::skip_spaces(p);
        if (*p == '\0') break;
        char* end = nullptr;
        long long idx = std::strtoll(p, &end, 10);
        if (end == p || *end != ':' || idx < 1) {
          throw DataError("malformed support vector in model file");
        }
        p = end + 1;
        double val;
        if (!detail::parse_double(p, val)) {
          throw DataError("malformed support vector in model file");
        }
        entries.push_back({static_cast<std::uint32_t>(idx - 1), val});
      }
      m.support_vectors.emplace_back(std::move(entries));
      m.sv_labels.push_back(sign > 0 ? Label::Active : Label::Inactive);
      m.dual_coefs.push_back(coef);
    } else {
      throw DataError("unknown key in model file: " + key);
    }
  }
  if (m.sv_count() != num_sv) {
    throw DataError("model file support vector count mismatch");
  }
  return m;
}

}  // namespace icp
