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

#ifndef PFCOLLAPSE_SAMPLING_HPP
#define PFCOLLAPSE_SAMPLING_HPP

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/spectrum.hpp>

namespace pfcollapse {

/// Canonical data vector: mu_j = V_j + eps_j / lambda_j, one realized observation.
struct CanonicalObservation {
  std::vector<double> mu;
  Spectrum spectrum;

  CanonicalObservation(std::vector<double> mu_values, Spectrum s) : mu(std::move(mu_values)), spectrum(std::move(s)) {
    detail::require(mu.size() == spectrum.d_prime(), "observation length must equal d'");
    for (const double m : mu) {
      detail::require(std::isfinite(m), "observation entries must be finite");
    }
  }
};

using EnsembleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x d' rotated particle coordinates W_ij, rows i.i.d. N(mu, I) given the observation.
struct Ensemble {
  EnsembleMatrix w;

  [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(w.rows()); }
  [[nodiscard]] std::size_t d_prime() const noexcept { return static_cast<std::size_t>(w.cols()); }
};

/// Draws (V_j, eps_j) pairs in coordinate order; two normals per coordinate.
[[nodiscard]] inline CanonicalObservation draw_observation(const Spectrum& s, RngStream& rng) {
  std::vector<double> mu(s.d_prime());
  for (std::size_t j = 0; j < s.d_prime(); ++j) {
    const double inv = 1.0 / s[j];
    detail::require(std::isfinite(inv), "lambda too small: 1/lambda overflows");
    const double v = rng.normal();
    const double eps = rng.normal();
    mu[j] = v + eps * inv;
  }
  return CanonicalObservation{std::move(mu), s};
}

/// Draws rows W_i = mu + Z_i in row-major order (particle by particle).
[[nodiscard]] inline Ensemble draw_ensemble(const CanonicalObservation& obs, std::size_t n, RngStream& rng) {
  detail::require(n >= 2, "ensemble size n must be at least 2");
  const auto d = static_cast<Eigen::Index>(obs.mu.size());
  Ensemble e{EnsembleMatrix(static_cast<Eigen::Index>(n), d)};
  for (Eigen::Index i = 0; i < e.w.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      e.w(i, j) = obs.mu[static_cast<std::size_t>(j)] + rng.normal();
    }
  }
  return e;
}

}  // namespace pfcollapse

#endif
