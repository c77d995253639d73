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

#ifndef PFCOLLAPSE_SPECTRUM_HPP
#define PFCOLLAPSE_SPECTRUM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include <pfcollapse/errors.hpp>

/**
 * \file
 * \brief Eigenvalue spectra of cov(HX) and the reduction of an observation
 * model to canonical diagonal coordinates.
 *
 * A spectrum stores the standard-deviation scale values lambda_j, so that
 * lambda_j^2 are the eigenvalues of H * Sigma_X * H^T.
 */

namespace pfcollapse {

/// Ordered, strictly positive lambda values of one canonical observation model.
class Spectrum {
 public:
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    detail::require(!values_.empty(), "spectrum must hold at least one value (d' >= 1)");
    for (std::size_t j = 0; j < values_.size(); ++j) {
      const double v = values_[j];
      detail::require(std::isfinite(v) && v > 0.0, "spectrum values must be finite and strictly positive");
      if (j > 0) {
        detail::require(v <= values_[j - 1], "spectrum values must be sorted non-increasing");
      }
    }
  }

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t d_prime() const noexcept { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t j) const noexcept { return values_[j]; }

  /// Squared values lambda_j^2 (the eigenvalues of cov(HX)).
  [[nodiscard]] std::vector<double> squared() const {
    std::vector<double> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(), [](double v) { return v * v; });
    return out;
  }

  /// First \p d values.
  [[nodiscard]] Spectrum prefix(std::size_t d) const {
    detail::require(d >= 1 && d <= values_.size(), "prefix length must lie in [1, d']");
    return Spectrum{std::vector<double>(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(d))};
  }

  /// Every lambda multiplied by \p factor (lambda^2 by factor^2).
  [[nodiscard]] Spectrum scaled(double factor) const {
    detail::require(std::isfinite(factor) && factor > 0.0, "spectrum scale factor must be positive");
    std::vector<double> out(values_);
    for (auto& v : out) {
      v *= factor;
    }
    return Spectrum{std::move(out)};
  }

  /// Spectrum extended by one trailing value, which must not exceed the current last value.
  [[nodiscard]] Spectrum appended(double value) const {
    std::vector<double> out(values_);
    out.push_back(value);
    return Spectrum{std::move(out)};
  }

  [[nodiscard]] bool is_constant() const noexcept { return values_.front() == values_.back(); }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::vector<double> values_;
};

/// Sum of lambda_j^2 over the spectrum.
[[nodiscard]] inline double effective_dimension(const Spectrum& s) {
  double sum = 0.0;
  for (const double v : s.values()) {
    sum += v * v;
  }
  return sum;
}

/// Summable (case i) versus divergent (case ii) infinite sequences of lambda_j^2.
enum class SummabilityCase { summable, divergent };

/// Parametric infinite sequence of lambda values.
class SpectrumFamily {
 public:
  /// lambda_j = level.
  struct Constant {
    double level;
  };
  /// lambda_j^2 = j^(-exponent).
  struct PowerDecay {
    double exponent;
  };
  /// lambda_j^2 = ratio^j.
  struct Geometric {
    double ratio;
  };
  /// lambda_1 = big, lambda_j = small for j >= 2.
  struct SingleDominant {
    double big;
    double small;
  };

  using Parameters = std::variant<Constant, PowerDecay, Geometric, SingleDominant>;

  static SpectrumFamily constant(double level) { return SpectrumFamily{Constant{level}}; }
  static SpectrumFamily power_decay(double exponent) { return SpectrumFamily{PowerDecay{exponent}}; }
  static SpectrumFamily geometric(double ratio) { return SpectrumFamily{Geometric{ratio}}; }
  static SpectrumFamily single_dominant(double big, double small) { return SpectrumFamily{SingleDominant{big, small}}; }

  [[nodiscard]] const Parameters& parameters() const noexcept { return params_; }

  [[nodiscard]] std::string kind() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return "constant";
          } else if constexpr (std::is_same_v<T, PowerDecay>) {
            return "power_decay";
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return "geometric";
          } else {
            return "single_dominant";
          }
        },
        params_);
  }

  /// Compact CSV-safe label, e.g. `power_decay:p=0.25`.
  [[nodiscard]] std::string label() const {
    std::ostringstream out;
    out << kind() << ':';
    std::visit(
        [&out](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Constant>) {
            out << "c=" << p.level;
          } else if constexpr (std::is_same_v<T, PowerDecay>) {
            out << "p=" << p.exponent;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            out << "r=" << p.ratio;
          } else {
            out << "big=" << p.big << ";small=" << p.small;
          }
        },
        params_);
    return out.str();
  }

  void validate() const {
    std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Constant>) {
            detail::require(std::isfinite(p.level) && p.level > 0.0, "constant family needs level > 0");
          } else if constexpr (std::is_same_v<T, PowerDecay>) {
            detail::require(std::isfinite(p.exponent) && p.exponent > 0.0, "power_decay family needs p > 0");
          } else if constexpr (std::is_same_v<T, Geometric>) {
            detail::require(p.ratio > 0.0 && p.ratio < 1.0, "geometric family needs 0 < r < 1");
          } else {
            detail::require(std::isfinite(p.big) && std::isfinite(p.small) && p.small > 0.0 && p.big >= p.small,
                            "single_dominant family needs big >= small > 0");
          }
        },
        params_);
  }

  [[nodiscard]] SummabilityCase summability() const {
    return std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Geometric>) {
            return SummabilityCase::summable;
          } else if constexpr (std::is_same_v<T, PowerDecay>) {
            return p.exponent > 1.0 ? SummabilityCase::summable : SummabilityCase::divergent;
          } else {
            return SummabilityCase::divergent;
          }
        },
        params_);
  }

  /// lambda_j for the 1-based index \p j.
  [[nodiscard]] double value(std::size_t j) const {
    const auto jd = static_cast<double>(j);
    return std::visit(
        [jd](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return p.level;
          } else if constexpr (std::is_same_v<T, PowerDecay>) {
            return std::pow(jd, -0.5 * p.exponent);
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return std::pow(p.ratio, 0.5 * jd);
          } else {
            return jd == 1.0 ? p.big : p.small;
          }
        },
        params_);
  }

  friend bool operator==(const SpectrumFamily& a, const SpectrumFamily& b) { return a.label() == b.label(); }

 private:
  explicit SpectrumFamily(Parameters params) : params_(params) {}

  Parameters params_;
};

/// First \p d_prime terms of the family's sequence.
[[nodiscard]] inline Spectrum generate_spectrum(const SpectrumFamily& family, std::size_t d_prime) {
  family.validate();
  detail::require(d_prime >= 1, "d' must be at least 1");
  std::vector<double> values(d_prime);
  for (std::size_t j = 0; j < d_prime; ++j) {
    values[j] = family.value(j + 1);
  }
  return Spectrum{std::move(values)};
}

/**
 * Shortest prefix of the family whose lambda^2 sum reaches \p target; the last
 * value is trimmed so the sum equals the target exactly (up to rounding).
 */
[[nodiscard]] inline Spectrum truncate_to_effective_dimension(const SpectrumFamily& family, double target,
                                                              std::size_t max_terms = 10'000'000) {
  family.validate();
  detail::require(std::isfinite(target) && target > 0.0, "target effective dimension must be positive");
  std::vector<double> values;
  double sum = 0.0;
  for (std::size_t j = 1; j <= max_terms; ++j) {
    const double v = family.value(j);
    const double v2 = v * v;
    if (sum + v2 >= target) {
      const double rest = target - sum;
      if (rest > 0.0) {
        values.push_back(std::sqrt(rest));
      }
      return Spectrum{std::move(values)};
    }
    values.push_back(v);
    sum += v2;
  }
  throw ValidationError("family does not reach the target effective dimension within max_terms");
}

/// Dense observation model Y = H X + eps with X ~ N(0, Sigma_X) and eps ~ N(0, I).
struct ObservationModel {
  Eigen::MatrixXd h;
  Eigen::MatrixXd sigma_x;

  [[nodiscard]] Eigen::Index d() const noexcept { return h.rows(); }
  [[nodiscard]] Eigen::Index q() const noexcept { return h.cols(); }

  void validate() const {
    detail::require(h.rows() >= 1 && h.cols() >= 1, "H must be non-empty");
    detail::require(sigma_x.rows() == h.cols() && sigma_x.cols() == h.cols(), "Sigma_X must be q x q with q = cols(H)");
    detail::require(h.allFinite() && sigma_x.allFinite(), "H and Sigma_X must be finite");
    const double scale = sigma_x.cwiseAbs().maxCoeff();
    const double asym = (sigma_x - sigma_x.transpose()).cwiseAbs().maxCoeff();
    detail::require(asym <= 1e-12 * std::max(scale, 1e-300), "Sigma_X must be symmetric");
    if (scale > 0.0) {
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma_x, Eigen::EigenvaluesOnly);
      const double top = solver.eigenvalues().maxCoeff();
      detail::require(solver.eigenvalues().minCoeff() >= -1e-10 * std::max(top, 0.0),
                      "Sigma_X must be positive semidefinite");
    }
  }
};

/// Spectrum plus the d x d orthogonal matrix whose leading d' columns span cov(HX).
struct CanonicalForm {
  Spectrum spectrum;
  Eigen::MatrixXd rotation;
};

/**
 * Reduces a general model to canonical diagonal form through a symmetric
 * eigendecomposition of H * Sigma_X * H^T.
 *
 * Eigenvalues at or below `rank_rtol * max_eigenvalue` are dropped. The
 * rotation lists the retained eigenvectors first, in descending eigenvalue
 * order, followed by the null-space eigenvectors.
 */
[[nodiscard]] inline CanonicalForm canonicalize(const ObservationModel& model, double rank_rtol = 1e-10) {
  model.validate();
  detail::require(rank_rtol > 0.0 && rank_rtol < 1.0, "rank_rtol must lie in (0, 1)");

  Eigen::MatrixXd cov = model.h * model.sigma_x * model.h.transpose();
  cov = 0.5 * (cov + cov.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of H Sigma_X H^T did not converge");
  }
  const Eigen::VectorXd& eig = solver.eigenvalues();
  const auto d = static_cast<std::size_t>(eig.size());

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&eig](std::size_t a, std::size_t b) {
    return eig(static_cast<Eigen::Index>(a)) > eig(static_cast<Eigen::Index>(b));
  });

  const double top = eig(static_cast<Eigen::Index>(order.front()));
  if (!(top > 0.0)) {
    throw ZeroRankError("zero-rank model: H Sigma_X H^T has no positive eigenvalue");
  }
  const double cutoff = rank_rtol * top;

  std::vector<double> values;
  Eigen::MatrixXd rotation(cov.rows(), cov.cols());
  for (std::size_t k = 0; k < d; ++k) {
    const auto src = static_cast<Eigen::Index>(order[k]);
    rotation.col(static_cast<Eigen::Index>(k)) = solver.eigenvectors().col(src);
    if (eig(src) > cutoff) {
      values.push_back(std::sqrt(eig(src)));
    }
  }
  if (values.empty()) {
    throw ZeroRankError("zero-rank model: every eigenvalue is below the rank cutoff");
  }
  return CanonicalForm{Spectrum{std::move(values)}, std::move(rotation)};
}

}  // namespace pfcollapse

#endif
