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

#ifndef PFCOLLAPSE_QUADRATURE_HPP
#define PFCOLLAPSE_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/statistics.hpp>

namespace pfcollapse {

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line.
class GaussHermiteRule {
 public:
  explicit GaussHermiteRule(std::size_t points) : nodes_(points), weights_(points) {
    detail::require(points >= 1, "Gauss-Hermite rule needs at least one point");
    const auto n = static_cast<Eigen::Index>(points);

    // Golub-Welsch starting values, then Newton polishing on the orthonormal recurrence.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
      jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k) / 2.0);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);

    for (std::size_t i = 0; i < points; ++i) {
      double x = solver.eigenvalues()(static_cast<Eigen::Index>(i));
      double dp = 0.0;
      for (int iter = 0; iter < 20; ++iter) {
        const auto [p, d] = evaluate(x, points);
        dp = d;
        const double step = p / d;
        x -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) {
          break;
        }
      }
      dp = evaluate(x, points).second;
      nodes_[i] = x;
      weights_[i] = 2.0 / (dp * dp);
    }
  }

  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

  /// E[g(X)] for X ~ N(mean, variance).
  template <class F>
  [[nodiscard]] double normal_expectation(F&& g, double mean, double variance) const {
    const double scale = std::sqrt(2.0 * variance);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      sum += weights_[i] * g(mean + scale * nodes_[i]);
    }
    return sum / std::sqrt(std::numbers::pi);
  }

 private:
  // Orthonormal Hermite polynomial p_n(x) and its derivative.
  static std::pair<double, double> evaluate(double x, std::size_t n) {
    double p1 = 1.0 / std::pow(std::numbers::pi, 0.25);
    double p2 = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      const auto jd = static_cast<double>(j);
      p1 = x * std::sqrt(2.0 / jd) * p2 - std::sqrt((jd - 1.0) / jd) * p3;
    }
    return {p1, std::sqrt(2.0 * static_cast<double>(n)) * p2};
  }

  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Shared 64-point rule.
[[nodiscard]] inline const GaussHermiteRule& gauss_hermite_64() {
  static const GaussHermiteRule rule(64);
  return rule;
}

/**
 * Adaptive Gauss-Kronrod integral of f(z) * phi(z) over the real line, split
 * at the given breakpoints so kinks in f sit on panel boundaries.
 */
template <class F>
[[nodiscard]] double integrate_against_normal(F&& f, std::vector<double> breakpoints, double rel_tol = 1e-9) {
  std::sort(breakpoints.begin(), breakpoints.end());
  std::vector<double> edges;
  edges.push_back(-std::numeric_limits<double>::infinity());
  for (const double b : breakpoints) {
    if (std::isfinite(b) && (edges.size() == 1 || b > edges.back())) {
      edges.push_back(b);
    }
  }
  edges.push_back(std::numeric_limits<double>::infinity());

  const auto integrand = [&f](double z) {
    if (!std::isfinite(z)) {
      return 0.0;
    }
    const double v = f(z) * normal_pdf(z);
    return std::isfinite(v) ? v : 0.0;
  };

  double total = 0.0;
  double total_error = 0.0;
  double total_l1 = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    double error = 0.0;
    double l1 = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, edges[k], edges[k + 1], 20,
                                                                            rel_tol, &error, &l1);
    total_error += error;
    total_l1 += l1;
  }
  if (!std::isfinite(total) || total_error > 10.0 * rel_tol * std::max(total_l1, 1e-300)) {
    std::ostringstream msg;
    msg << "adaptive quadrature did not converge: estimate " << total << ", error " << total_error << ", L1 "
        << total_l1 << ", tolerance " << rel_tol;
    throw QuadratureError(msg.str());
  }
  return total;
}

}  // namespace pfcollapse

#endif
