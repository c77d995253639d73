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

#ifndef PFCOLLAPSE_PARTICLE_FILTER_HPP
#define PFCOLLAPSE_PARTICLE_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/weights.hpp>

/**
 * \file
 * \brief Sequential bootstrap filter on linear-Gaussian state-space models,
 * with a Kalman filter as the exact reference.
 */

namespace pfcollapse {

namespace detail {

inline void require_symmetric_psd(const Eigen::MatrixXd& m, const std::string& what) {
  require(m.rows() == m.cols(), what + " must be square");
  require(m.allFinite(), what + " must be finite");
  if (m.size() == 0) {
    return;
  }
  const double scale = m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1e-300), what + " must be symmetric");
  if (scale > 0.0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    require(solver.eigenvalues().minCoeff() >= -1e-12 * scale, what + " must be positive semidefinite");
  }
}

/// F with F F^T = cov; Cholesky when positive definite, eigen square root otherwise.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    if (l.allFinite()) {
      return l;
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * root.asDiagonal();
}

inline Eigen::VectorXd draw_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, RngStream& rng) {
  Eigen::VectorXd z(factor.cols());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    z(j) = rng.normal();
  }
  return mean + factor * z;
}

}  // namespace detail

/// X_{t+1} = A X_t + eta_t, Y_t = H X_t + eps_t, X_0 ~ N(m0, P0).
struct LinearGaussianSSM {
  Eigen::MatrixXd a;
  Eigen::MatrixXd q_cov;
  Eigen::MatrixXd h;
  Eigen::MatrixXd r_cov;
  Eigen::VectorXd m0;
  Eigen::MatrixXd p0;

  [[nodiscard]] Eigen::Index state_dim() const noexcept { return a.rows(); }
  [[nodiscard]] Eigen::Index obs_dim() const noexcept { return h.rows(); }

  void validate() const {
    const auto q = a.rows();
    detail::require(q >= 1 && a.cols() == q, "A must be a non-empty square matrix");
    detail::require(q_cov.rows() == q, "Q_cov must be q x q");
    detail::require(h.cols() == q && h.rows() >= 1, "H must be d x q");
    detail::require(r_cov.rows() == h.rows(), "R_cov must be d x d");
    detail::require(m0.size() == q, "m0 must have length q");
    detail::require(p0.rows() == q, "P0 must be q x q");
    detail::require(a.allFinite() && h.allFinite() && m0.allFinite(), "model entries must be finite");
    detail::require_symmetric_psd(q_cov, "Q_cov");
    detail::require_symmetric_psd(r_cov, "R_cov");
    detail::require_symmetric_psd(p0, "P0");
  }
};

struct SimulatedPath {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> observations;
};

/// States X_0..X_{T-1} and observations Y_t = H X_t + eps_t.
[[nodiscard]] inline SimulatedPath simulate_ssm(const LinearGaussianSSM& model, std::size_t steps, RngStream& rng) {
  model.validate();
  detail::require(steps >= 1, "simulation needs at least one step");
  const Eigen::MatrixXd p0_factor = detail::covariance_factor(model.p0);
  const Eigen::MatrixXd q_factor = detail::covariance_factor(model.q_cov);
  const Eigen::MatrixXd r_factor = detail::covariance_factor(model.r_cov);
  const Eigen::VectorXd zero_state = Eigen::VectorXd::Zero(model.state_dim());
  const Eigen::VectorXd zero_obs = Eigen::VectorXd::Zero(model.obs_dim());

  SimulatedPath path;
  Eigen::VectorXd x = detail::draw_gaussian(model.m0, p0_factor, rng);
  for (std::size_t t = 0; t < steps; ++t) {
    path.states.push_back(x);
    path.observations.push_back(model.h * x + detail::draw_gaussian(zero_obs, r_factor, rng));
    if (t + 1 < steps) {
      x = model.a * x + detail::draw_gaussian(zero_state, q_factor, rng);
    }
  }
  return path;
}

/// Filtered posterior N(mean, cov) of X_t given Y_0..Y_t.
struct KalmanStep {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Predict/update recursion with the Joseph-form covariance update.
[[nodiscard]] inline std::vector<KalmanStep> kalman_filter(const LinearGaussianSSM& model,
                                                           std::span<const Eigen::VectorXd> observations) {
  model.validate();
  const auto q = model.state_dim();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(q, q);
  Eigen::VectorXd m = model.m0;
  Eigen::MatrixXd p = model.p0;
  std::vector<KalmanStep> out;
  out.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    detail::require(observations[t].size() == model.obs_dim(), "observation length must equal d");
    if (t > 0) {
      m = model.a * m;
      p = model.a * p * model.a.transpose() + model.q_cov;
      p = 0.5 * (p + p.transpose());
    }
    const Eigen::MatrixXd s = model.h * p * model.h.transpose() + model.r_cov;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (s + s.transpose()));
    const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * scale) {
      throw NumericalError("innovation covariance is numerically singular");
    }
    const Eigen::MatrixXd gain = ldlt.solve(model.h * p).transpose();
    m = m + gain * (observations[t] - model.h * m);
    const Eigen::MatrixXd ikh = identity - gain * model.h;
    p = ikh * p * ikh.transpose() + gain * model.r_cov * gain.transpose();
    p = 0.5 * (p + p.transpose());
    out.push_back({m, p});
  }
  return out;
}

/// n_out categorical draws from \p weights, returned sorted ascending.
[[nodiscard]] inline std::vector<std::size_t> resample_multinomial(std::span<const double> weights, std::size_t n_out,
                                                                   RngStream& rng) {
  detail::require(!weights.empty(), "resampling needs at least one weight");
  double total = 0.0;
  for (const double w : weights) {
    detail::require(std::isfinite(w) && w >= 0.0, "weights must be finite and non-negative");
    total += w;
  }
  detail::require(std::abs(total - 1.0) <= 1e-9, "weights must sum to 1");

  std::vector<double> u(n_out);
  for (auto& x : u) {
    x = rng.uniform();
  }
  std::sort(u.begin(), u.end());

  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      last_positive = i;
    }
  }
  std::vector<std::size_t> out(n_out);
  std::size_t i = 0;
  double cumulative = weights[0];
  for (std::size_t k = 0; k < n_out; ++k) {
    while (i < last_positive && cumulative <= u[k] * total) {
      ++i;
      cumulative += weights[i];
    }
    out[k] = i;
  }
  return out;
}

/// Systematic resampling: one uniform offset, n_out evenly spaced points.
[[nodiscard]] inline std::vector<std::size_t> resample_systematic(std::span<const double> weights, std::size_t n_out,
                                                                  RngStream& rng) {
  detail::require(!weights.empty() && n_out >= 1, "resampling needs weights and a positive output count");
  double total = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    detail::require(std::isfinite(weights[i]) && weights[i] >= 0.0, "weights must be finite and non-negative");
    total += weights[i];
    if (weights[i] > 0.0) {
      last_positive = i;
    }
  }
  detail::require(std::abs(total - 1.0) <= 1e-9, "weights must sum to 1");
  const double offset = rng.uniform();
  std::vector<std::size_t> out(n_out);
  std::size_t i = 0;
  double cumulative = weights[0];
  for (std::size_t k = 0; k < n_out; ++k) {
    const double point = (static_cast<double>(k) + offset) / static_cast<double>(n_out) * total;
    while (i < last_positive && cumulative <= point) {
      ++i;
      cumulative += weights[i];
    }
    out[k] = i;
  }
  return out;
}

enum class ResamplePolicy { always, ess_threshold };
enum class Resampler { multinomial, systematic };

struct FilterOptions {
  std::size_t particles = 1000;
  ResamplePolicy policy = ResamplePolicy::ess_threshold;
  /// Resample when ess < threshold * n under the ess_threshold policy.
  double threshold = 0.5;
  Resampler resampler = Resampler::multinomial;
};

struct FilterStep {
  double max_weight = 0.0;
  double ess = 0.0;
  Eigen::VectorXd pf_mean;
  Eigen::VectorXd kalman_mean;
  Eigen::MatrixXd kalman_cov;
  bool resampled = false;
};

using FilterTrace = std::vector<FilterStep>;

/**
 * Bootstrap particle filter.
 *
 * The stream is consumed in a fixed order: n * q normals for the initial
 * particles (particle by particle), then per later step n * q normals for the
 * process noise, then the resampler's uniforms whenever it fires. Weights are
 * recorded after the Bayes update and before resampling; resampling resets
 * them to uniform.
 */
[[nodiscard]] inline FilterTrace bootstrap_filter(const LinearGaussianSSM& model,
                                                  std::span<const Eigen::VectorXd> observations,
                                                  const FilterOptions& options, RngStream& rng) {
  model.validate();
  const std::size_t n = options.particles;
  detail::require(n >= 2, "the filter needs at least 2 particles");
  detail::require(options.threshold > 0.0 && options.threshold <= 1.0, "ESS threshold must lie in (0, 1]");
  const Eigen::LLT<Eigen::MatrixXd> r_llt(model.r_cov);
  detail::require(r_llt.info() == Eigen::Success, "R_cov must be positive definite for the likelihood");

  const auto kalman = kalman_filter(model, observations);
  const auto q = model.state_dim();
  const auto n_idx = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd p0_factor = detail::covariance_factor(model.p0);
  const Eigen::MatrixXd q_factor = detail::covariance_factor(model.q_cov);

  auto draw_noise = [&rng, q, n_idx](const Eigen::MatrixXd& factor) {
    Eigen::MatrixXd z(q, n_idx);
    for (Eigen::Index i = 0; i < n_idx; ++i) {
      for (Eigen::Index j = 0; j < q; ++j) {
        z(j, i) = rng.normal();
      }
    }
    return Eigen::MatrixXd(factor * z);
  };

  Eigen::MatrixXd particles = draw_noise(p0_factor).colwise() + model.m0;
  std::vector<double> log_prior(n, 0.0);
  std::vector<double> log_post(n);

  FilterTrace trace;
  trace.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    if (t > 0) {
      particles = model.a * particles + draw_noise(q_factor);
    }
    const Eigen::MatrixXd residual = (-(model.h * particles)).colwise() + observations[t];
    const Eigen::MatrixXd whitened = r_llt.matrixL().solve(residual);
    for (std::size_t i = 0; i < n; ++i) {
      log_post[i] = log_prior[i] - 0.5 * whitened.col(static_cast<Eigen::Index>(i)).squaredNorm();
    }
    const auto nw = normalize(log_post);
    const Eigen::Map<const Eigen::VectorXd> w(nw.weights.data(), n_idx);

    FilterStep step;
    step.max_weight = nw.max_weight;
    step.ess = nw.ess;
    step.pf_mean = particles * w;
    step.kalman_mean = kalman[t].mean;
    step.kalman_cov = kalman[t].cov;

    const bool resample = options.policy == ResamplePolicy::always ||
                          nw.ess < options.threshold * static_cast<double>(n);
    if (resample) {
      const auto idx = options.resampler == Resampler::multinomial ? resample_multinomial(nw.weights, n, rng)
                                                                    : resample_systematic(nw.weights, n, rng);
      Eigen::MatrixXd next(q, n_idx);
      for (std::size_t k = 0; k < n; ++k) {
        next.col(static_cast<Eigen::Index>(k)) = particles.col(static_cast<Eigen::Index>(idx[k]));
      }
      particles = std::move(next);
      std::fill(log_prior.begin(), log_prior.end(), 0.0);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        log_prior[i] = nw.weights[i] > 0.0 ? std::log(nw.weights[i]) : -std::numeric_limits<double>::infinity();
      }
    }
    step.resampled = resample;
    trace.push_back(std::move(step));
  }
  return trace;
}

}  // namespace pfcollapse

#endif
