#pragma once

// Synthetic two-class sparse count data. Counts are Poisson draws; each
// class boosts the rate of its own small block of features, every other
// feature keeps a low shared base rate, so the classes overlap.

#include <cstdint>
#include <random>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/error.hpp"

namespace icp {

struct SyntheticSpec {
  std::size_t n = 2000;
  double positive_fraction = 0.05;
  std::uint32_t num_features = 64;
  std::uint32_t signal_features = 8;  // features boosted per class
  double base_rate = 0.05;
  double signal_rate = 1.5;
  // multiplies the signal rate at generation time; values != 1 simulate
  // distribution drift for validity experiments
  double drift_factor = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n == 0) throw ConfigError("synthetic size must be >= 1");
    if (positive_fraction <= 0.0 || positive_fraction >= 1.0) {
      throw ConfigError("positive fraction must lie in (0, 1)");
    }
    if (num_features < 2 * signal_features || signal_features == 0) {
      throw ConfigError("need num_features >= 2 * signal_features > 0");
    }
    if (base_rate < 0.0 || signal_rate < 0.0 || drift_factor < 0.0) {
      throw ConfigError("rates must be non-negative");
    }
  }
};

inline Dataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset ds;
  ds.num_features = spec.num_features;
  ds.objects.reserve(spec.n);
  ds.labels.reserve(spec.n);

  for (std::size_t i = 0; i < spec.n; ++i) {
    const Label y =
        unit(rng) < spec.positive_fraction ? Label::Active : Label::Inactive;
    // features [0, s) boost Active, [s, 2s) boost Inactive
    const std::uint32_t block =
        y == Label::Active ? 0 : spec.signal_features;
    std::vector<SparseEntry> entries;
    for (std::uint32_t f = 0; f < spec.num_features; ++f) {
      double rate = spec.base_rate;
      if (f >= block && f < block + spec.signal_features) {
        rate += spec.signal_rate * spec.drift_factor;
      }
      if (rate <= 0.0) continue;
      std::poisson_distribution<int> pois(rate);
      const int c = pois(rng);
      if (c > 0) entries.push_back({f, static_cast<double>(c)});
    }
    ds.objects.emplace_back(std::move(entries));
    ds.labels.push_back(y);
  }
  return ds;
}

}  // namespace icp
