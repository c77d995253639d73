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

#ifndef PFCOLLAPSE_WEIGHTS_HPP
#define PFCOLLAPSE_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/quadrature.hpp>
#include <pfcollapse/sampling.hpp>
#include <pfcollapse/spectrum.hpp>

/**
 * \file
 * \brief Importance weights of the Gaussian Bayes update in canonical
 * coordinates and the statistics that govern their collapse.
 */

namespace pfcollapse {

namespace detail {

inline void require_conformable(const Spectrum& s, const Ensemble& e) {
  require(e.d_prime() == s.d_prime(), "ensemble width must equal d'");
  require(e.n() >= 2, "ensemble needs at least 2 particles");
}

}  // namespace detail

/// -1/2 sum_j lambda_j^2 W_ij^2 per particle; the particle-independent noise term is omitted.
[[nodiscard]] inline std::vector<double> log_unnormalized_weights(const Spectrum& s, const Ensemble& e) {
  detail::require_conformable(s, e);
  detail::require(e.w.allFinite(), "ensemble entries must be finite");
  const auto sq = s.squared();
  std::vector<double> out(e.n());
  for (Eigen::Index i = 0; i < e.w.rows(); ++i) {
    double q = 0.0;
    for (Eigen::Index j = 0; j < e.w.cols(); ++j) {
      const double w = e.w(i, j);
      q += sq[static_cast<std::size_t>(j)] * w * w;
    }
    out[static_cast<std::size_t>(i)] = -0.5 * q;
  }
  return out;
}

/// Normalized weights with their maximum and effective sample size 1 / sum w_i^2.
struct NormalizedWeights {
  std::vector<double> weights;
  double max_weight = 0.0;
  double ess = 0.0;
};

/**
 * Max-shifted exponentiation of log weights.
 *
 * Entries equal to -infinity are accepted and receive weight zero, which the
 * sequential filter relies on; NaN and +infinity are rejected.
 */
[[nodiscard]] inline NormalizedWeights normalize(std::span<const double> log_unnorm) {
  detail::require(log_unnorm.size() >= 2, "normalize needs at least 2 log weights");
  double m = -std::numeric_limits<double>::infinity();
  for (const double l : log_unnorm) {
    detail::require(!std::isnan(l) && l != std::numeric_limits<double>::infinity(),
                    "log weights must be finite or -infinity");
    m = std::max(m, l);
  }
  if (m == -std::numeric_limits<double>::infinity()) {
    throw NumericalError("every log weight is -infinity; the weights cannot be normalized");
  }
  NormalizedWeights out;
  out.weights.resize(log_unnorm.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_unnorm.size(); ++i) {
    out.weights[i] = std::exp(log_unnorm[i] - m);
    total += out.weights[i];
  }
  double sum_sq = 0.0;
  for (auto& w : out.weights) {
    w /= total;
    out.max_weight = std::max(out.max_weight, w);
    sum_sq += w * w;
  }
  out.ess = std::clamp(1.0 / sum_sq, 1.0, static_cast<double>(log_unnorm.size()));
  return out;
}

/// Standardized statistics S_i and the conditional scale sigma_{d'}^2.
struct StandardizedStatistics {
  std::vector<double> s;
  double sigma2 = 0.0;
};

/**
 * S_i = sum_j lambda_j^2 (W_ij^2 - (1 + mu_j^2)) / sqrt(2 sum_j lambda_j^4 (1 + 2 mu_j^2)).
 *
 * Given the observation, each S_i has mean 0 and variance 1. The returned
 * sigma2 is (2/d') sum_j lambda_j^4 (1 + 2 mu_j^2), so sqrt(sigma2 * d') is the
 * denominator above.
 */
[[nodiscard]] inline StandardizedStatistics s_statistics(const Spectrum& s, const CanonicalObservation& obs,
                                                         const Ensemble& e) {
  detail::require_conformable(s, e);
  detail::require(obs.mu.size() == s.d_prime(), "observation length must equal d'");
  const auto sq = s.squared();
  double center = 0.0;
  double var_sum = 0.0;
  for (std::size_t j = 0; j < sq.size(); ++j) {
    const double mu2 = obs.mu[j] * obs.mu[j];
    center += sq[j] * (1.0 + mu2);
    var_sum += sq[j] * sq[j] * (1.0 + 2.0 * mu2);
  }
  const double denom = std::sqrt(2.0 * var_sum);
  StandardizedStatistics out;
  out.sigma2 = 2.0 * var_sum / static_cast<double>(s.d_prime());
  out.s.resize(e.n());
  for (Eigen::Index i = 0; i < e.w.rows(); ++i) {
    double q = 0.0;
    for (Eigen::Index j = 0; j < e.w.cols(); ++j) {
      const double w = e.w(i, j);
      q += sq[static_cast<std::size_t>(j)] * w * w;
    }
    out.s[static_cast<std::size_t>(i)] = (q - center) / denom;
  }
  return out;
}

/// sum_{l >= 2} exp(-rate * (S_(l) - S_(1))) over the ascending order statistics.
[[nodiscard]] inline double order_gap_sum(std::span<const double> s, double rate) {
  detail::require(s.size() >= 2, "order_gap_sum needs at least 2 statistics");
  std::vector<double> sorted(s.begin(), s.end());
  std::stable_sort(sorted.begin(), sorted.end());
  double t = 0.0;
  for (std::size_t l = 1; l < sorted.size(); ++l) {
    t += std::exp(-rate * (sorted[l] - sorted[0]));
  }
  return t;
}

/**
 * Exponent rate that ties the S-gaps to the weights: w_i is proportional to
 * exp(-rate * S_i) with rate = sigma_{d'} sqrt(d') / 2. The factor 1/2 comes
 * from the 1/2 in the Gaussian log-likelihood.
 */
[[nodiscard]] inline double weight_rate(double sigma2, std::size_t d_prime) {
  return 0.5 * std::sqrt(sigma2 * static_cast<double>(d_prime));
}

/// T_{n,d'}, defined so that the largest normalized weight equals 1 / (1 + T).
[[nodiscard]] inline double t_statistic(const StandardizedStatistics& stats, std::size_t d_prime) {
  return order_gap_sum(stats.s, weight_rate(stats.sigma2, d_prime));
}

/// Everything computed from one ensemble.
struct WeightSummary {
  std::vector<double> log_unnorm;
  std::vector<double> weights;
  double max_weight = 0.0;
  double ess = 0.0;
  std::vector<double> s_stats;
  double sigma2_dprime = 0.0;
  double t_stat = 0.0;
};

[[nodiscard]] inline WeightSummary summarize(const Spectrum& s, const CanonicalObservation& obs, const Ensemble& e) {
  WeightSummary out;
  out.log_unnorm = log_unnormalized_weights(s, e);
  auto nw = normalize(out.log_unnorm);
  out.weights = std::move(nw.weights);
  out.max_weight = nw.max_weight;
  out.ess = nw.ess;
  auto stats = s_statistics(s, obs, e);
  out.t_stat = t_statistic(stats, s.d_prime());
  out.s_stats = std::move(stats.s);
  out.sigma2_dprime = stats.sigma2;
  return out;
}

/// tau^2 of the eigenvalue condition, averaged over d' and summed.
struct TauSquared {
  double normalized = 0.0;    ///< (2/d') sum_j (3 lambda_j^4 + 2 lambda_j^2)
  double unnormalized = 0.0;  ///< 2 sum_j (3 lambda_j^4 + 2 lambda_j^2) = d' * normalized
};

[[nodiscard]] inline TauSquared tau_squared(const Spectrum& s) {
  double sum = 0.0;
  for (const double v : s.values()) {
    const double v2 = v * v;
    sum += 3.0 * v2 * v2 + 2.0 * v2;
  }
  return {2.0 * sum / static_cast<double>(s.d_prime()), 2.0 * sum};
}

/// U_i with unit expectation given the observation, and log c_{d'}.
struct UnnormalizedWeights {
  std::vector<double> u;
  double log_c = 0.0;

  [[nodiscard]] double c() const { return std::exp(log_c); }
};

/// log c_{d'} = sum_j [-log(1 + lambda^2) / 2 + lambda^2 / 2 + lambda^4 mu^2 / (2 (1 + lambda^2))].
[[nodiscard]] inline double log_normalizing_constant(const Spectrum& s, const CanonicalObservation& obs) {
  double log_c = 0.0;
  for (std::size_t j = 0; j < s.d_prime(); ++j) {
    const double l2 = s[j] * s[j];
    const double mu = obs.mu[j];
    log_c += -0.5 * std::log1p(l2) + 0.5 * l2 + l2 * l2 * mu * mu / (2.0 * (1.0 + l2));
  }
  return log_c;
}

/// U_i = exp(-1/2 sum_j [lambda_j^2 (Z_ij^2 - 1) + 2 lambda_j^2 mu_j Z_ij] - log c), Z_ij = W_ij - mu_j.
[[nodiscard]] inline UnnormalizedWeights u_weights(const Spectrum& s, const CanonicalObservation& obs,
                                                   const Ensemble& e) {
  detail::require_conformable(s, e);
  detail::require(obs.mu.size() == s.d_prime(), "observation length must equal d'");
  const auto sq = s.squared();
  UnnormalizedWeights out;
  out.log_c = log_normalizing_constant(s, obs);
  out.u.resize(e.n());
  for (Eigen::Index i = 0; i < e.w.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < e.w.cols(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double z = e.w(i, j) - obs.mu[ju];
      acc += sq[ju] * (z * z - 1.0) + 2.0 * sq[ju] * obs.mu[ju] * z;
    }
    out.u[static_cast<std::size_t>(i)] = std::exp(-0.5 * acc - out.log_c);
  }
  return out;
}

/// Coordinate-wise conjugate posterior of V given the canonical observation.
struct PosteriorMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

[[nodiscard]] inline PosteriorMoments exact_posterior(const Spectrum& s, const CanonicalObservation& obs) {
  detail::require(obs.mu.size() == s.d_prime(), "observation length must equal d'");
  PosteriorMoments out;
  out.mean.resize(s.d_prime());
  out.variance.resize(s.d_prime());
  for (std::size_t j = 0; j < s.d_prime(); ++j) {
    const double l2 = s[j] * s[j];
    out.mean[j] = l2 * obs.mu[j] / (1.0 + l2);
    out.variance[j] = 1.0 / (1.0 + l2);
  }
  return out;
}

/// E[g(V_j) | Y] by 64-point Gauss-Hermite quadrature.
template <class G>
[[nodiscard]] double posterior_expectation(const PosteriorMoments& post, std::size_t coordinate, G&& g) {
  detail::require(coordinate < post.mean.size(), "posterior coordinate out of range");
  return gauss_hermite_64().normal_expectation(g, post.mean[coordinate], post.variance[coordinate]);
}

/// E|Z^2 - 1 + 2 mu Z|^k for standard normal Z, by adaptive quadrature split at the sign changes.
[[nodiscard]] inline double centered_square_abs_moment(double mu, int k, double rel_tol = 1e-9) {
  const double root = std::sqrt(mu * mu + 1.0);
  return integrate_against_normal(
      [mu, k](double z) { return std::pow(std::abs(z * z - 1.0 + 2.0 * mu * z), k); }, {-mu - root, -mu + root},
      rel_tol);
}

/**
 * Lyapunov quotient L_k = B^-k sum_j E|xi_j|^k for the summands
 * xi_j = lambda_j^2 ((Z + mu_j)^2 - (1 + mu_j^2)), with
 * B^2 = sum_j lambda_j^4 (2 + 4 mu_j^2).
 */
[[nodiscard]] inline double lyapunov_quotient(const Spectrum& s, const CanonicalObservation& obs, int k) {
  detail::require(k >= 3 && k <= 5, "Lyapunov order k must be 3, 4 or 5");
  detail::require(obs.mu.size() == s.d_prime(), "observation length must equal d'");
  double b2 = 0.0;
  for (std::size_t j = 0; j < s.d_prime(); ++j) {
    const double l2 = s[j] * s[j];
    b2 += l2 * l2 * (2.0 + 4.0 * obs.mu[j] * obs.mu[j]);
  }
  const double b = std::sqrt(b2);
  double total = 0.0;
  for (std::size_t j = 0; j < s.d_prime(); ++j) {
    const double scale = s[j] * s[j] / b;
    total += std::pow(scale, k) * centered_square_abs_moment(obs.mu[j], k);
  }
  return total;
}

}  // namespace pfcollapse

#endif
