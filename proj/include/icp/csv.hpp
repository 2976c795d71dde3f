#pragma once

// CSV emitters for prediction runs. Formatting is fixed (C locale, shortest
// round-trip form for raw values, two decimals for report-style averaged
// tables) so repeated runs produce byte-identical files.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icp/conformal.hpp"
#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/metrics.hpp"

namespace icp {

// shortest digit string that parses back to exactly v
inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_f2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string("NA");
}

namespace detail {
inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // fixed \n line endings
  if (!out) throw DataError("cannot write: " + path);
  return out;
}
}  // namespace detail

inline void write_predictions_csv(const std::string& path,
                                  const Dataset& test,
                                  std::span<const PredictionRecord> records) {
  auto out = detail::open_csv(path);
  out << "id,p_active,p_inactive,region,forced,credibility,confidence\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << test.id_of(i) << "," << fmt_double(r.p_active) << ","
        << fmt_double(r.p_inactive) << "," << region_name(r.region) << ","
        << label_name(r.forced_label) << "," << fmt_double(r.credibility) << ","
        << fmt_double(r.confidence) << "\n";
  }
}

inline void write_decision_values_csv(const std::string& path,
                                      const Dataset& test,
                                      std::span<const double> values) {
  auto out = detail::open_csv(path);
  out << "id,decision_value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << test.id_of(i) << "," << fmt_double(values[i]) << "\n";
  }
}

inline void write_ranked_csv(const std::string& path, const Dataset& test,
                             std::span<const PredictionRecord> records,
                             std::span<const std::size_t> order) {
  auto out = detail::open_csv(path);
  out << "rank,id,p_active,p_inactive,confidence\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    out << (r + 1) << "," << test.id_of(i) << ","
        << fmt_double(records[i].p_active) << "," << fmt_double(records[i].p_inactive)
        << "," << fmt_double(records[i].confidence) << "\n";
  }
}

inline const char* kRegionTableHeader =
    "active_pred_active,inactive_pred_active,inactive_pred_inactive,"
    "active_pred_inactive,empty,uncertain";

inline std::string region_table_row(const RegionTable& t, bool two_decimals) {
  auto f = two_decimals ? fmt_f2 : fmt_double;
  return f(t.active_pred_active) + "," + f(t.inactive_pred_active) + "," +
         f(t.inactive_pred_inactive) + "," + f(t.active_pred_inactive) + "," +
         f(t.empty) + "," + f(t.uncertain);
}

inline void write_region_table_csv(const std::string& path,
                                   const RegionTable& t,
                                   bool two_decimals = false) {
  auto out = detail::open_csv(path);
  out << kRegionTableHeader << "\n" << region_table_row(t, two_decimals)
      << "\n";
}

inline void write_rates_csv(const std::string& path, const Epsilons& eps,
                            const RatesRecord& r) {
  auto out = detail::open_csv(path);
  out << "eps_active,eps_inactive,active_error_rate,inactive_error_rate,"
         "precision,recall\n";
  out << fmt_double(eps.active) << "," << fmt_double(eps.inactive) << ","
      << fmt_double(r.active_error_rate) << "," << fmt_double(r.inactive_error_rate)
      << "," << fmt_opt(r.precision) << "," << fmt_double(r.recall) << "\n";
}

inline void write_sweep_csv(const std::string& path,
                            std::span<const SweepRow> rows,
                            bool two_decimals = false) {
  auto out = detail::open_csv(path);
  out << "eps_active,eps_inactive," << kRegionTableHeader
      << ",active_error_rate,inactive_error_rate,precision,recall\n";
  for (const auto& row : rows) {
    out << fmt_double(row.eps.active) << "," << fmt_double(row.eps.inactive) << ","
        << region_table_row(row.table, two_decimals) << ","
        << fmt_double(row.rate.active_error_rate) << ","
        << fmt_double(row.rate.inactive_error_rate) << ","
        << fmt_opt(row.rate.precision) << "," << fmt_double(row.rate.recall)
        << "\n";
  }
}

inline void write_pr_curves_csv(const std::string& path,
                                std::span<const MethodCurve> curves) {
  auto out = detail::open_csv(path);
  out << "method,threshold,selected,precision,recall\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out << c.method << "," << fmt_double(p.threshold) << "," << p.selected
          << "," << fmt_opt(p.precision) << "," << fmt_double(p.recall) << "\n";
    }
  }
}

inline void write_cred_conf_csv(const std::string& path,
                                std::span<const PrPoint> vary_confidence,
                                double fixed_credibility,
                                std::span<const PrPoint> vary_credibility,
                                double fixed_confidence) {
  auto out = detail::open_csv(path);
  out << "varied,threshold,fixed_value,selected,precision,recall\n";
  for (const auto& p : vary_confidence) {
    out << "confidence," << fmt_double(p.threshold) << ","
        << fmt_double(fixed_credibility) << "," << p.selected << ","
        << fmt_opt(p.precision) << "," << fmt_double(p.recall) << "\n";
  }
  for (const auto& p : vary_credibility) {
    out << "credibility," << fmt_double(p.threshold) << ","
        << fmt_double(fixed_confidence) << "," << p.selected << ","
        << fmt_opt(p.precision) << "," << fmt_double(p.recall) << "\n";
  }
}

inline void write_log10_pvalues_csv(const std::string& path,
                                    std::span<const PredictionRecord> records,
                                    std::span<const Label> truth) {
  auto out = detail::open_csv(path);
  out << "log10_p_active,log10_p_inactive,true_label\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << fmt_double(std::log10(records[i].p_active)) << ","
        << fmt_double(std::log10(records[i].p_inactive)) << ","
        << label_name(truth[i]) << "\n";
  }
}

}  // namespace icp
