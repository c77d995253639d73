// Copyright 2026 The pfcollapse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PFCOLLAPSE_STATISTICS_HPP
#define PFCOLLAPSE_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <pfcollapse/errors.hpp>

namespace pfcollapse {

[[nodiscard]] inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

[[nodiscard]] inline double normal_pdf(double x) { return 0.39894228040143267794 * std::exp(-0.5 * x * x); }

/// Replicate sample mean with standard error sd / sqrt(R).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Two-pass mean and standard error, accumulated in index order.
[[nodiscard]] inline MeanSe mean_se(std::span<const double> xs) {
  detail::require(!xs.empty(), "mean_se needs at least one value");
  double sum = 0.0;
  for (const double x : xs) {
    sum += x;
  }
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    return {mean, 0.0};
  }
  double ss = 0.0;
  for (const double x : xs) {
    ss += (x - mean) * (x - mean);
  }
  const double var = ss / static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

[[nodiscard]] inline double sample_variance(std::span<const double> xs) {
  const auto ms = mean_se(xs);
  return ms.se * ms.se * static_cast<double>(xs.size());
}

/// Linear-interpolation quantile (type 7) for p in [0, 1].
[[nodiscard]] inline double quantile(std::vector<double> xs, double p) {
  detail::require(!xs.empty(), "quantile needs at least one value");
  detail::require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

[[nodiscard]] inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Mean after dropping floor(fraction * size) values from each end.
[[nodiscard]] inline double trimmed_mean(std::vector<double> xs, double fraction) {
  detail::require(!xs.empty(), "trimmed_mean needs at least one value");
  detail::require(fraction >= 0.0 && fraction < 0.5, "trim fraction must lie in [0, 0.5)");
  std::sort(xs.begin(), xs.end());
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(xs.size())));
  double sum = 0.0;
  for (std::size_t i = cut; i < xs.size() - cut; ++i) {
    sum += xs[i];
  }
  return sum / static_cast<double>(xs.size() - 2 * cut);
}

/// Kolmogorov-Smirnov distance sup |F_n - F| between the sample and a continuous cdf.
template <class Cdf>
[[nodiscard]] double ks_distance(std::vector<double> xs, Cdf&& cdf) {
  detail::require(!xs.empty(), "ks_distance needs at least one value");
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n));
  }
  return d;
}

[[nodiscard]] inline double ks_distance_normal(std::vector<double> xs) {
  return ks_distance(std::move(xs), [](double x) { return normal_cdf(x); });
}

/// Asymptotic one-sample KS critical value at level 0.01.
[[nodiscard]] inline double ks_critical_01(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

[[nodiscard]] inline double correlation(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size() && a.size() >= 2, "correlation needs two equal-length samples");
  const auto ma = mean_se(a).mean;
  const auto mb = mean_se(b).mean;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace pfcollapse

#endif
