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

#ifndef PFCOLLAPSE_HARNESS_HPP
#define PFCOLLAPSE_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/parallel.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/sampling.hpp>
#include <pfcollapse/spectrum.hpp>
#include <pfcollapse/statistics.hpp>
#include <pfcollapse/weights.hpp>

/**
 * \file
 * \brief Replicated Monte Carlo experiments over (spectrum, d', n) grids.
 *
 * Every random draw comes from a stream addressed by
 * (experiment name, cell index, replicate index, role), and replicate results
 * are reduced in replicate order, so the output is a pure function of the
 * configuration and the master seed whatever the worker count.
 */

namespace pfcollapse {

enum class ObservationMode { fixed_per_cell, redraw_per_replicate };

/// Bounded test functions g for the self-normalized estimator.
enum class TestFunction { tanh, clipped_identity, positive_indicator };

[[nodiscard]] inline double apply(TestFunction g, double x) {
  switch (g) {
    case TestFunction::tanh:
      return std::tanh(x);
    case TestFunction::clipped_identity:
      return std::clamp(x, -2.0, 2.0);
    case TestFunction::positive_indicator:
      return x > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

[[nodiscard]] inline std::string to_string(TestFunction g) {
  switch (g) {
    case TestFunction::tanh:
      return "tanh";
    case TestFunction::clipped_identity:
      return "clip";
    case TestFunction::positive_indicator:
      return "indicator";
  }
  return "unknown";
}

/// Where the spectrum of each cell comes from: a family evaluated at d', or a fixed list.
class SpectrumSource {
 public:
  static SpectrumSource from_family(SpectrumFamily family) {
    family.validate();
    SpectrumSource out;
    out.label_ = family.label();
    out.family_ = std::move(family);
    return out;
  }

  static SpectrumSource from_values(Spectrum values, std::string label = "explicit") {
    SpectrumSource out;
    out.label_ = std::move(label);
    out.values_ = std::move(values);
    return out;
  }

  /// Family prefix trimmed so that sum lambda^2 equals \p target.
  static SpectrumSource truncated(const SpectrumFamily& family, double target) {
    std::ostringstream label;
    label << family.label() << ";sum=" << target;
    auto out = from_values(truncate_to_effective_dimension(family, target), label.str());
    out.family_ = family;
    return out;
  }

  [[nodiscard]] Spectrum at(std::size_t d_prime) const {
    if (values_) {
      return values_->prefix(d_prime);
    }
    return generate_spectrum(*family_, d_prime);
  }

  [[nodiscard]] std::optional<std::size_t> fixed_dimension() const {
    return values_ ? std::optional<std::size_t>(values_->d_prime()) : std::nullopt;
  }

  [[nodiscard]] const std::optional<SpectrumFamily>& family() const noexcept { return family_; }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }

 private:
  SpectrumSource() = default;

  std::optional<SpectrumFamily> family_;
  std::optional<Spectrum> values_;
  std::string label_;
};

/// One experiment: a spectrum source, grids, replication, and seeding.
struct ExperimentConfig {
  std::string name = "experiment";
  SpectrumSource spectrum = SpectrumSource::from_family(SpectrumFamily::constant(1.0));
  std::vector<std::size_t> d_prime_grid;
  std::vector<std::size_t> n_grid;
  std::size_t replicates = 100;
  std::uint64_t master_seed = 0;
  ObservationMode observation_mode = ObservationMode::redraw_per_replicate;
  /// Likelihood exponent alpha in (0, 1]; multiplies every lambda_j^2 in the weights.
  double tempering_alpha = 1.0;
  /// Largest n * d' (scalar draws) accepted per cell.
  std::uint64_t budget = 1'000'000'000;
  unsigned workers = 1;
  /// Draws of S per cell for the normality check.
  std::size_t samples = 10'000;
  std::vector<int> lyapunov_orders{3};
  /// Observation draws per cell for the Lyapunov check.
  std::size_t observation_draws = 50;
  TestFunction g = TestFunction::tanh;

  /// The d' grid, defaulting to the full length of a fixed spectrum.
  [[nodiscard]] std::vector<std::size_t> resolved_d_primes() const {
    if (d_prime_grid.empty()) {
      if (const auto fixed = spectrum.fixed_dimension()) {
        return {*fixed};
      }
    }
    return d_prime_grid;
  }

  void validate_common() const {
    detail::require(!name.empty(), "experiment name must be non-empty");
    const auto grid = resolved_d_primes();
    detail::require(!grid.empty(), "d_prime_grid must be non-empty");
    for (const auto d : grid) {
      detail::require(d >= 1, "every d' must be at least 1");
      if (const auto fixed = spectrum.fixed_dimension()) {
        detail::require(d <= *fixed, "d' exceeds the length of the explicit spectrum");
      }
    }
    detail::require(tempering_alpha > 0.0 && tempering_alpha <= 1.0, "tempering_alpha must lie in (0, 1]");
    detail::require(budget >= 1, "budget must be positive");
  }

  /// Checks shared by the replicated (confidence-interval bearing) experiments.
  void validate_replicated() const {
    validate_common();
    detail::require(!n_grid.empty(), "n_grid must be non-empty");
    for (const auto n : n_grid) {
      detail::require(n >= 2, "every n must satisfy n >= 2 (T needs at least two particles)");
    }
    detail::require(replicates >= 30, "replicates must be at least 30 for confidence-interval cells");
  }
};

/// Aggregated replicate statistics for one (d', n) cell.
struct CellResult {
  std::size_t d_prime = 0;
  std::size_t n = 0;
  std::size_t replicates = 0;
  double effective_dimension = 0.0;
  MeanSe max_weight;
  MeanSe ess;
  MeanSe t;
  double median_t = 0.0;
  double trimmed_mean_t = 0.0;
  /// (rate_A2 / sqrt(2 log n)) * T with rate_A2 = tau_{d'} sqrt(d') / 2.
  MeanSe ratio_a2;
  /// (rate / sqrt(2 log n)) * T with rate = sqrt(tau^2_unnorm) / 2.
  MeanSe ratio_unnorm;
  /// (log n log d') / d' for constant spectra, otherwise (log n log d') / tau^2_unnorm.
  double regime_ratio = 0.0;
  double regime_ratio_dimension = 0.0;
  double regime_ratio_tau = 0.0;
  bool regime_warning = false;
  double seconds = 0.0;
};

namespace detail {

struct Cell {
  std::size_t index;
  std::size_t d_prime;
  std::size_t n;
};

inline std::vector<Cell> replicated_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (const auto d : cfg.resolved_d_primes()) {
    for (const auto n : cfg.n_grid) {
      cells.push_back({cells.size(), d, n});
    }
  }
  return cells;
}

inline void check_budget(std::size_t rows, std::size_t d_prime, std::uint64_t budget) {
  const auto draws = static_cast<long double>(rows) * static_cast<long double>(d_prime);
  if (draws > static_cast<long double>(budget)) {
    std::ostringstream msg;
    msg << "cell with " << rows << " x " << d_prime << " scalar draws exceeds the budget of " << budget;
    throw BudgetError(msg.str());
  }
}

inline RngStream cell_stream(const ExperimentConfig& cfg, std::size_t cell, std::size_t replicate, StreamRole role) {
  return derive_stream(cfg.master_seed, {PathLabel(cfg.name), PathLabel(cell), PathLabel(replicate),
                                         PathLabel(to_string(role))});
}

inline RngStream fixed_observation_stream(const ExperimentConfig& cfg, std::size_t cell) {
  return derive_stream(cfg.master_seed, {PathLabel(cfg.name), PathLabel(cell), PathLabel("fixed"),
                                         PathLabel(to_string(StreamRole::observation))});
}

inline Spectrum weight_spectrum(const ExperimentConfig& cfg, const Spectrum& s) {
  return cfg.tempering_alpha == 1.0 ? s : s.scaled(std::sqrt(cfg.tempering_alpha));
}

/// Observations per cell when fixed, empty otherwise.
inline std::vector<std::optional<CanonicalObservation>> fixed_observations(const ExperimentConfig& cfg,
                                                                            const std::vector<Cell>& cells) {
  std::vector<std::optional<CanonicalObservation>> out(cells.size());
  if (cfg.observation_mode == ObservationMode::fixed_per_cell) {
    for (const auto& c : cells) {
      auto rng = fixed_observation_stream(cfg, c.index);
      out[c.index] = draw_observation(cfg.spectrum.at(c.d_prime), rng);
    }
  }
  return out;
}

inline CanonicalObservation replicate_observation(const ExperimentConfig& cfg, const Cell& c, std::size_t r,
                                                  const std::optional<CanonicalObservation>& fixed,
                                                  const Spectrum& s) {
  if (fixed) {
    return *fixed;
  }
  auto rng = cell_stream(cfg, c.index, r, StreamRole::observation);
  return draw_observation(s, rng);
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct ReplicateRecord {
  double max_weight = 0.0;
  double ess = 0.0;
  double t = 0.0;
  double seconds = 0.0;
};

inline std::vector<CellResult> run_replicated_cells(const ExperimentConfig& cfg) {
  cfg.validate_replicated();
  const auto cells = replicated_cells(cfg);
  for (const auto& c : cells) {
    check_budget(c.n, c.d_prime, cfg.budget);
  }
  const auto fixed = fixed_observations(cfg, cells);
  const std::size_t r_count = cfg.replicates;

  std::vector<ReplicateRecord> records(cells.size() * r_count);
  parallel_for(records.size(), cfg.workers, [&](std::size_t item) {
    const auto start = std::chrono::steady_clock::now();
    const Cell& c = cells[item / r_count];
    const std::size_t r = item % r_count;
    const Spectrum s = cfg.spectrum.at(c.d_prime);
    const Spectrum sw = weight_spectrum(cfg, s);
    const auto obs = replicate_observation(cfg, c, r, fixed[c.index], s);
    auto rng = cell_stream(cfg, c.index, r, StreamRole::ensemble);
    const auto ensemble = draw_ensemble(obs, c.n, rng);
    const auto summary = summarize(sw, obs, ensemble);
    records[item] = {summary.max_weight, summary.ess, summary.t_stat, elapsed_seconds(start)};
  });

  std::vector<CellResult> results;
  results.reserve(cells.size());
  for (const auto& c : cells) {
    const Spectrum sw = weight_spectrum(cfg, cfg.spectrum.at(c.d_prime));
    const auto tau = tau_squared(sw);
    const double log_n = std::log(static_cast<double>(c.n));
    const double log_d = std::log(static_cast<double>(c.d_prime));
    const double rate_a2 = 0.5 * std::sqrt(tau.normalized) * std::sqrt(static_cast<double>(c.d_prime));
    const double rate_unnorm = 0.5 * std::sqrt(tau.unnormalized);
    const double root = std::sqrt(2.0 * log_n);

    std::vector<double> mw(r_count), ess(r_count), t(r_count), ra(r_count), ru(r_count);
    double seconds = 0.0;
    for (std::size_t r = 0; r < r_count; ++r) {
      const auto& rec = records[c.index * r_count + r];
      mw[r] = rec.max_weight;
      ess[r] = rec.ess;
      t[r] = rec.t;
      ra[r] = rate_a2 * rec.t / root;
      ru[r] = rate_unnorm * rec.t / root;
      seconds += rec.seconds;
    }

    CellResult out;
    out.d_prime = c.d_prime;
    out.n = c.n;
    out.replicates = r_count;
    out.effective_dimension = effective_dimension(sw);
    out.max_weight = mean_se(mw);
    out.ess = mean_se(ess);
    out.t = mean_se(t);
    out.median_t = median(t);
    out.trimmed_mean_t = trimmed_mean(t, 0.05);
    out.ratio_a2 = mean_se(ra);
    out.ratio_unnorm = mean_se(ru);
    out.regime_ratio_dimension = log_n * log_d / static_cast<double>(c.d_prime);
    out.regime_ratio_tau = log_n * log_d / tau.unnormalized;
    out.regime_ratio = sw.is_constant() ? out.regime_ratio_dimension : out.regime_ratio_tau;
    out.regime_warning = out.regime_ratio > 0.5;
    out.seconds = seconds;
    results.push_back(out);
  }
  return results;
}

}  // namespace detail

/**
 * Replicated single-step Bayes updates over the (d', n) grid, aggregating the
 * maximum weight, the effective sample size, and T.
 */
[[nodiscard]] inline std::vector<CellResult> run_collapse_sweep(const ExperimentConfig& cfg) {
  return detail::run_replicated_cells(cfg);
}

/**
 * Same replicates as the sweep, reported as the scaled mean of T against its
 * asymptotic limit of 1. Cells whose regime ratio exceeds 0.5 carry a warning
 * flag rather than failing.
 */
[[nodiscard]] inline std::vector<CellResult> run_scaling_check(const ExperimentConfig& cfg) {
  return detail::run_replicated_cells(cfg);
}

/// Self-normalized estimator error against the exact posterior, per (d', n) cell.
struct NoCollapseResult {
  std::size_t d_prime = 0;
  std::size_t n = 0;
  std::size_t replicates = 0;
  TestFunction g = TestFunction::tanh;
  MeanSe abs_err;
  double mean_max_weight = 0.0;
  /// Mean of sqrt(2/pi) * sd_post(g) / sqrt(ess): the sampling error the ESS predicts.
  MeanSe predicted_err;
  double seconds = 0.0;
};

/**
 * Estimates E[g(V_1) | Y] by sum_i w_i g(mu_1 - W_i1) and compares it with
 * Gauss-Hermite quadrature against the exact posterior of the (possibly
 * tempered) target. Only summable families are accepted.
 */
[[nodiscard]] inline std::vector<NoCollapseResult> run_no_collapse_check(const ExperimentConfig& cfg) {
  cfg.validate_replicated();
  const auto& family = cfg.spectrum.family();
  detail::require(family.has_value() && family->summability() == SummabilityCase::summable,
                  "no-collapse check requires a summable spectrum family (geometric, or power_decay with p > 1)");
  const auto cells = detail::replicated_cells(cfg);
  for (const auto& c : cells) {
    detail::check_budget(c.n, c.d_prime, cfg.budget);
  }
  const auto fixed = detail::fixed_observations(cfg, cells);
  const std::size_t r_count = cfg.replicates;

  struct Record {
    double abs_err = 0.0;
    double max_weight = 0.0;
    double predicted = 0.0;
    double seconds = 0.0;
  };
  std::vector<Record> records(cells.size() * r_count);
  const TestFunction g = cfg.g;
  const auto gf = [g](double x) { return apply(g, x); };

  parallel_for(records.size(), cfg.workers, [&](std::size_t item) {
    const auto start = std::chrono::steady_clock::now();
    const detail::Cell& c = cells[item / r_count];
    const std::size_t r = item % r_count;
    const Spectrum s = cfg.spectrum.at(c.d_prime);
    const Spectrum sw = detail::weight_spectrum(cfg, s);
    const auto obs = detail::replicate_observation(cfg, c, r, fixed[c.index], s);
    auto rng = detail::cell_stream(cfg, c.index, r, StreamRole::ensemble);
    const auto ensemble = draw_ensemble(obs, c.n, rng);
    const auto nw = normalize(log_unnormalized_weights(sw, ensemble));

    double estimate = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) {
      estimate += nw.weights[i] * gf(obs.mu[0] - ensemble.w(static_cast<Eigen::Index>(i), 0));
    }
    const auto post = exact_posterior(sw, obs);
    const double oracle = posterior_expectation(post, 0, gf);
    const double second = posterior_expectation(post, 0, [&gf](double x) { return gf(x) * gf(x); });
    const double sd = std::sqrt(std::max(second - oracle * oracle, 0.0));
    records[item] = {std::abs(estimate - oracle), nw.max_weight, std::sqrt(2.0 / std::numbers::pi) * sd / std::sqrt(nw.ess),
                     detail::elapsed_seconds(start)};
  });

  std::vector<NoCollapseResult> results;
  for (const auto& c : cells) {
    std::vector<double> err(r_count), mw(r_count), pred(r_count);
    double seconds = 0.0;
    for (std::size_t r = 0; r < r_count; ++r) {
      const auto& rec = records[c.index * r_count + r];
      err[r] = rec.abs_err;
      mw[r] = rec.max_weight;
      pred[r] = rec.predicted;
      seconds += rec.seconds;
    }
    NoCollapseResult out;
    out.d_prime = c.d_prime;
    out.n = c.n;
    out.replicates = r_count;
    out.g = g;
    out.abs_err = mean_se(err);
    out.mean_max_weight = mean_se(mw).mean;
    out.predicted_err = mean_se(pred);
    out.seconds = seconds;
    results.push_back(out);
  }
  return results;
}

/// Distance of the conditional law of S from the standard normal, per d'.
struct NormalityResult {
  std::size_t d_prime = 0;
  std::size_t samples = 0;
  double ks_distance = 0.0;
  /// Empirical P(S > x) / (1 - Phi(x)).
  double tail_ratio_2 = 0.0;
  double tail_ratio_3 = 0.0;
  double seconds = 0.0;
};

/// Draws `samples` values of S_i under one fixed observation per d' and compares them with Phi.
[[nodiscard]] inline std::vector<NormalityResult> run_normality_check(const ExperimentConfig& cfg) {
  cfg.validate_common();
  detail::require(cfg.samples >= 2, "samples must be at least 2");
  const auto grid = cfg.resolved_d_primes();
  for (const auto d : grid) {
    detail::check_budget(cfg.samples, d, cfg.budget);
  }
  constexpr std::size_t kChunk = 2048;

  std::vector<NormalityResult> results(grid.size());
  parallel_for(grid.size(), cfg.workers, [&](std::size_t c) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = grid[c];
    const Spectrum s = cfg.spectrum.at(d);
    const Spectrum sw = detail::weight_spectrum(cfg, s);
    auto obs_rng = detail::fixed_observation_stream(cfg, c);
    const auto obs = draw_observation(s, obs_rng);
    auto rng = detail::cell_stream(cfg, c, 0, StreamRole::ensemble);

    std::vector<double> s_values;
    s_values.reserve(cfg.samples);
    while (s_values.size() < cfg.samples) {
      const std::size_t rows = std::min(kChunk, cfg.samples - s_values.size());
      // Chunks draw rows in the same stream order as one full ensemble would.
      Ensemble chunk{EnsembleMatrix(static_cast<Eigen::Index>(std::max<std::size_t>(rows, 2)),
                                    static_cast<Eigen::Index>(d))};
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows); ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
          chunk.w(i, j) = obs.mu[static_cast<std::size_t>(j)] + rng.normal();
        }
      }
      if (rows < 2) {
        chunk.w.row(1) = chunk.w.row(0);
      }
      const auto stats = s_statistics(sw, obs, chunk);
      s_values.insert(s_values.end(), stats.s.begin(), stats.s.begin() + static_cast<std::ptrdiff_t>(rows));
    }

    std::size_t above2 = 0;
    std::size_t above3 = 0;
    for (const double v : s_values) {
      above2 += v > 2.0 ? 1 : 0;
      above3 += v > 3.0 ? 1 : 0;
    }
    const auto m = static_cast<double>(s_values.size());
    NormalityResult out;
    out.d_prime = d;
    out.samples = s_values.size();
    out.tail_ratio_2 = (static_cast<double>(above2) / m) / (1.0 - normal_cdf(2.0));
    out.tail_ratio_3 = (static_cast<double>(above3) / m) / (1.0 - normal_cdf(3.0));
    out.ks_distance = ks_distance_normal(std::move(s_values));
    out.seconds = detail::elapsed_seconds(start);
    results[c] = out;
  });
  return results;
}

/// Median and 90th percentile of L_k over independent observation draws.
struct LyapunovResult {
  std::size_t d_prime = 0;
  int k = 3;
  double median = 0.0;
  double p90 = 0.0;
  std::vector<double> values;
  double seconds = 0.0;
};

/// Ratio median L_k(d) / median L_k(4d) for constant spectra; expected near 2.
struct LyapunovDecay {
  std::size_t d_small = 0;
  std::size_t d_large = 0;
  int k = 3;
  double factor = 0.0;
  bool within_band = false;
};

struct LyapunovReport {
  std::vector<LyapunovResult> rows;
  std::vector<LyapunovDecay> decays;
};

inline constexpr double kLyapunovDecayLow = 1.8;
inline constexpr double kLyapunovDecayHigh = 2.2;

[[nodiscard]] inline LyapunovReport run_lyapunov_check(const ExperimentConfig& cfg) {
  cfg.validate_common();
  detail::require(cfg.observation_draws >= 1, "observation_draws must be at least 1");
  detail::require(!cfg.lyapunov_orders.empty(), "at least one Lyapunov order is required");
  for (const int k : cfg.lyapunov_orders) {
    detail::require(k == 3 || k == 4, "Lyapunov check supports k in {3, 4}");
  }
  const auto grid = cfg.resolved_d_primes();
  const std::size_t draws = cfg.observation_draws;
  const std::size_t orders = cfg.lyapunov_orders.size();

  std::vector<double> values(grid.size() * draws * orders);
  std::vector<double> seconds(grid.size() * draws);
  parallel_for(grid.size() * draws, cfg.workers, [&](std::size_t item) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t c = item / draws;
    const std::size_t r = item % draws;
    const Spectrum s = cfg.spectrum.at(grid[c]);
    const Spectrum sw = detail::weight_spectrum(cfg, s);
    auto rng = detail::cell_stream(cfg, c, r, StreamRole::observation);
    const auto obs = draw_observation(s, rng);
    for (std::size_t o = 0; o < orders; ++o) {
      values[item * orders + o] = lyapunov_quotient(sw, obs, cfg.lyapunov_orders[o]);
    }
    seconds[item] = detail::elapsed_seconds(start);
  });

  LyapunovReport report;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double cell_seconds = 0.0;
    for (std::size_t r = 0; r < draws; ++r) {
      cell_seconds += seconds[c * draws + r];
    }
    for (std::size_t o = 0; o < orders; ++o) {
      LyapunovResult row;
      row.d_prime = grid[c];
      row.k = cfg.lyapunov_orders[o];
      for (std::size_t r = 0; r < draws; ++r) {
        row.values.push_back(values[(c * draws + r) * orders + o]);
      }
      row.median = median(row.values);
      row.p90 = quantile(row.values, 0.9);
      row.seconds = cell_seconds;
      report.rows.push_back(std::move(row));
    }
  }

  const auto probe = cfg.spectrum.at(grid.front());
  const bool constant = cfg.spectrum.family() ? cfg.spectrum.family()->kind() == "constant" : probe.is_constant();
  if (constant) {
    for (const auto& small : report.rows) {
      for (const auto& large : report.rows) {
        if (small.k == 3 && large.k == 3 && large.d_prime == 4 * small.d_prime) {
          LyapunovDecay decay{small.d_prime, large.d_prime, 3, small.median / large.median, false};
          decay.within_band = decay.factor >= kLyapunovDecayLow && decay.factor <= kLyapunovDecayHigh;
          report.decays.push_back(decay);
        }
      }
    }
  }
  return report;
}

}  // namespace pfcollapse

#endif
