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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/particle_filter.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/sampling.hpp>
#include <pfcollapse/spectrum.hpp>
#include <pfcollapse/statistics.hpp>
#include <pfcollapse/weights.hpp>

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using pfcollapse::derive_stream;
using pfcollapse::LinearGaussianSSM;

LinearGaussianSSM identity_model(Eigen::Index q) {
  return {MatrixXd::Identity(q, q), MatrixXd::Identity(q, q), MatrixXd::Identity(q, q),
          MatrixXd::Identity(q, q), VectorXd::Zero(q),         MatrixXd::Identity(q, q)};
}

LinearGaussianSSM two_state_model() {
  LinearGaussianSSM m;
  m.a.resize(2, 2);
  m.a << 0.9, 0.2, -0.1, 0.8;
  m.q_cov.resize(2, 2);
  m.q_cov << 0.3, 0.05, 0.05, 0.2;
  m.h.resize(3, 2);
  m.h << 1.0, 0.0, 0.5, 1.0, -1.0, 2.0;
  m.r_cov.resize(3, 3);
  m.r_cov << 1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 2.0;
  m.m0.resize(2);
  m.m0 << 1.0, -0.5;
  m.p0.resize(2, 2);
  m.p0 << 1.0, 0.3, 0.3, 2.0;
  return m;
}

TEST(SimulateSsm, DegenerateDynamics) {
  auto model = identity_model(2);
  model.a.setZero();
  model.q_cov.setZero();
  model.p0.setZero();
  auto rng = derive_stream(1, {"sim-zero"});
  const auto path = pfcollapse::simulate_ssm(model, 5, rng);
  ASSERT_EQ(path.states.size(), 5U);
  double spread = 0.0;
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(path.states[t], VectorXd::Zero(2));
    spread += path.observations[t].squaredNorm();
  }
  EXPECT_GT(spread, 0.0);
}

TEST(SimulateSsm, ConstantPathWithoutProcessNoise) {
  auto model = identity_model(3);
  model.q_cov.setZero();
  auto rng = derive_stream(2, {"sim-const"});
  const auto path = pfcollapse::simulate_ssm(model, 6, rng);
  for (std::size_t t = 1; t < 6; ++t) {
    EXPECT_EQ(path.states[t], path.states[0]);
  }
}

// Joint-Gaussian conditioning of X_t on Y_0..Y_t, built from the stacked covariance.
std::vector<pfcollapse::KalmanStep> batch_posterior(const LinearGaussianSSM& m, const std::vector<VectorXd>& ys) {
  const auto q = m.state_dim();
  const auto d = m.obs_dim();
  const auto steps = static_cast<Eigen::Index>(ys.size());
  std::vector<VectorXd> means{m.m0};
  std::vector<MatrixXd> transitions{MatrixXd::Identity(q, q)};
  for (Eigen::Index t = 1; t < steps; ++t) {
    means.push_back(m.a * means.back());
  }
  // cov(X_s, X_t) for s <= t is P_s (A^T)^(t-s), P_s the marginal covariance.
  std::vector<MatrixXd> marginal{m.p0};
  for (Eigen::Index t = 1; t < steps; ++t) {
    marginal.push_back(m.a * marginal.back() * m.a.transpose() + m.q_cov);
  }
  MatrixXd sxx(q * steps, q * steps);
  for (Eigen::Index s = 0; s < steps; ++s) {
    for (Eigen::Index t = s; t < steps; ++t) {
      MatrixXd power = MatrixXd::Identity(q, q);
      for (Eigen::Index k = s; k < t; ++k) {
        power = m.a * power;
      }
      const MatrixXd c = marginal[static_cast<std::size_t>(s)] * power.transpose();
      sxx.block(q * s, q * t, q, q) = c;
      sxx.block(q * t, q * s, q, q) = c.transpose();
    }
  }
  std::vector<pfcollapse::KalmanStep> out;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::Index k = t + 1;
    MatrixXd hbig = MatrixXd::Zero(d * k, q * k);
    VectorXd ymean(d * k);
    VectorXd yobs(d * k);
    MatrixXd rbig = MatrixXd::Zero(d * k, d * k);
    for (Eigen::Index s = 0; s < k; ++s) {
      hbig.block(d * s, q * s, d, q) = m.h;
      ymean.segment(d * s, d) = m.h * means[static_cast<std::size_t>(s)];
      yobs.segment(d * s, d) = ys[static_cast<std::size_t>(s)];
      rbig.block(d * s, d * s, d, d) = m.r_cov;
    }
    const MatrixXd sk = sxx.topLeftCorner(q * k, q * k);
    const MatrixXd syy = hbig * sk * hbig.transpose() + rbig;
    const MatrixXd sxy = sk.block(q * t, 0, q, q * k) * hbig.transpose();
    const Eigen::LLT<MatrixXd> llt(syy);
    const VectorXd mean = means[static_cast<std::size_t>(t)] + sxy * llt.solve(yobs - ymean);
    const MatrixXd cov = marginal[static_cast<std::size_t>(t)] - sxy * llt.solve(sxy.transpose());
    out.push_back({mean, cov});
  }
  return out;
}

TEST(KalmanFilter, MatchesBatchConditioning) {
  const auto model = two_state_model();
  auto rng = derive_stream(3, {"kalman"});
  const auto path = pfcollapse::simulate_ssm(model, 8, rng);
  const auto kf = pfcollapse::kalman_filter(model, path.observations);
  const auto batch = batch_posterior(model, path.observations);
  ASSERT_EQ(kf.size(), 8U);
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_TRUE(kf[t].mean.isApprox(batch[t].mean, 1e-9)) << "t=" << t;
    EXPECT_TRUE(kf[t].cov.isApprox(batch[t].cov, 1e-9)) << "t=" << t;
  }
}

TEST(KalmanFilter, UninformativeObservationsPropagatePrior) {
  auto model = two_state_model();
  model.h.setZero();
  std::vector<VectorXd> ys(5, VectorXd::Constant(3, 7.0));
  const auto kf = pfcollapse::kalman_filter(model, ys);
  VectorXd m = model.m0;
  MatrixXd p = model.p0;
  for (std::size_t t = 0; t < 5; ++t) {
    if (t > 0) {
      m = model.a * m;
      p = model.a * p * model.a.transpose() + model.q_cov;
    }
    EXPECT_TRUE(kf[t].mean.isApprox(m, 1e-12));
    EXPECT_TRUE(kf[t].cov.isApprox(p, 1e-12));
  }
}

TEST(KalmanFilter, SingularInnovationIsAnError) {
  auto model = identity_model(1);
  model.p0.setZero();
  model.r_cov.setZero();
  EXPECT_THROW((void)pfcollapse::kalman_filter(model, std::vector<VectorXd>{VectorXd::Zero(1)}),
               pfcollapse::NumericalError);
}

TEST(Model, Validation) {
  auto model = identity_model(2);
  model.q_cov(0, 1) = 0.5;
  EXPECT_THROW(model.validate(), pfcollapse::ValidationError);
  model = identity_model(2);
  model.p0(1, 1) = -1.0;
  EXPECT_THROW(model.validate(), pfcollapse::ValidationError);
  model = identity_model(2);
  model.h = MatrixXd::Identity(2, 3);
  EXPECT_THROW(model.validate(), pfcollapse::ValidationError);
}

TEST(Resample, DegenerateWeights) {
  auto rng = derive_stream(4, {"degenerate"});
  const std::vector<double> w{1.0, 0.0, 0.0};
  for (const auto i : pfcollapse::resample_multinomial(w, 100, rng)) {
    EXPECT_EQ(i, 0U);
  }
  for (const auto i : pfcollapse::resample_systematic(w, 100, rng)) {
    EXPECT_EQ(i, 0U);
  }
  const std::vector<double> last{0.0, 0.0, 1.0};
  for (const auto i : pfcollapse::resample_multinomial(last, 50, rng)) {
    EXPECT_EQ(i, 2U);
  }
}

TEST(Resample, MultinomialFrequencies) {
  auto rng = derive_stream(5, {"multinomial"});
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const std::size_t n = 200'000;
  std::vector<double> counts(4, 0.0);
  for (const auto i : pfcollapse::resample_multinomial(w, n, rng)) {
    counts[i] += 1.0;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const double se = std::sqrt(w[i] * (1.0 - w[i]) / static_cast<double>(n));
    EXPECT_NEAR(counts[i] / static_cast<double>(n), w[i], 4.0 * se) << i;
  }
}

TEST(Resample, SystematicCountsAreNearlyExact) {
  auto rng = derive_stream(6, {"systematic"});
  const std::vector<double> w{0.05, 0.15, 0.3, 0.5};
  const std::size_t n = 1000;
  const auto idx = pfcollapse::resample_systematic(w, n, rng);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto count = static_cast<double>(std::count(idx.begin(), idx.end(), i));
    EXPECT_LE(std::abs(count - w[i] * static_cast<double>(n)), 1.0 + 1e-9) << i;
  }
}

TEST(Resample, RejectsBadWeights) {
  auto rng = derive_stream(7, {"bad"});
  const std::vector<double> unnormalized{0.5, 0.6};
  EXPECT_THROW((void)pfcollapse::resample_multinomial(unnormalized, 3, rng), pfcollapse::ValidationError);
  const std::vector<double> negative{1.5, -0.5};
  EXPECT_THROW((void)pfcollapse::resample_systematic(negative, 3, rng), pfcollapse::ValidationError);
}

// One step with A = I, Q = 0, P0 = diag(lambda^2), H = R = I, y = -lambda * mu reproduces the
// static update: particle X_i = lambda * Z_i, residual -lambda (mu + Z_i) = -lambda W_i.
TEST(BootstrapFilter, SingleStepMatchesStaticUpdate) {
  const auto s = pfcollapse::generate_spectrum(pfcollapse::SpectrumFamily::power_decay(0.5), 30);
  auto obs_rng = derive_stream(8, {"static", "observation"});
  const auto obs = pfcollapse::draw_observation(s, obs_rng);

  auto model = identity_model(30);
  model.q_cov.setZero();
  VectorXd y(30);
  for (Eigen::Index j = 0; j < 30; ++j) {
    const double l = s[static_cast<std::size_t>(j)];
    model.p0(j, j) = l * l;
    y(j) = -l * obs.mu[static_cast<std::size_t>(j)];
  }
  pfcollapse::FilterOptions options;
  options.particles = 500;
  options.policy = pfcollapse::ResamplePolicy::always;

  auto filter_rng = derive_stream(8, {"static", "ensemble"});
  const auto trace = pfcollapse::bootstrap_filter(model, std::vector<VectorXd>{y}, options, filter_rng);
  auto static_rng = derive_stream(8, {"static", "ensemble"});
  const auto e = pfcollapse::draw_ensemble(obs, 500, static_rng);
  const auto summary = pfcollapse::summarize(s, obs, e);
  ASSERT_EQ(trace.size(), 1U);
  EXPECT_NEAR(trace[0].max_weight, summary.max_weight, 1e-12);
  EXPECT_NEAR(trace[0].ess, summary.ess, 1e-9 * summary.ess);
  EXPECT_NEAR(trace[0].max_weight, 1.0 / (1.0 + summary.t_stat), 1e-10);
}

TEST(BootstrapFilter, UniformWeightsGiveFullEss) {
  auto model = identity_model(2);
  model.h.setZero();
  auto rng = derive_stream(9, {"flat"});
  const std::vector<VectorXd> ys(4, VectorXd::Ones(2));
  pfcollapse::FilterOptions options;
  options.particles = 64;
  options.policy = pfcollapse::ResamplePolicy::always;
  for (const auto& step : pfcollapse::bootstrap_filter(model, ys, options, rng)) {
    EXPECT_DOUBLE_EQ(step.ess, 64.0);
    EXPECT_DOUBLE_EQ(step.max_weight, 1.0 / 64.0);
    EXPECT_TRUE(step.resampled);
  }
}

TEST(BootstrapFilter, ThresholdPolicyResamplesOnlyWhenEssIsLow) {
  const auto model = two_state_model();
  auto sim = derive_stream(10, {"threshold", "observation"});
  const auto path = pfcollapse::simulate_ssm(model, 12, sim);
  pfcollapse::FilterOptions options;
  options.particles = 400;
  options.threshold = 0.5;
  auto rng = derive_stream(10, {"threshold", "ensemble"});
  const auto trace = pfcollapse::bootstrap_filter(model, path.observations, options, rng);
  for (const auto& step : trace) {
    EXPECT_EQ(step.resampled, step.ess < 0.5 * 400.0);
    EXPECT_GE(step.ess, 1.0);
    EXPECT_LE(step.ess, 400.0);
  }
}

TEST(BootstrapFilter, TracksKalmanMean) {
  const auto model = two_state_model();
  auto sim = derive_stream(11, {"track", "observation"});
  const auto path = pfcollapse::simulate_ssm(model, 10, sim);
  pfcollapse::FilterOptions options;
  options.particles = 20'000;
  options.policy = pfcollapse::ResamplePolicy::always;
  auto rng = derive_stream(11, {"track", "ensemble"});
  const auto trace = pfcollapse::bootstrap_filter(model, path.observations, options, rng);
  // A loose 5-sigma band per coordinate: the 3-sigma band is exercised by the acceptance suite.
  for (const auto& step : trace) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double band = 5.0 * std::sqrt(step.kalman_cov(j, j) / step.ess);
      EXPECT_LT(std::abs(step.pf_mean(j) - step.kalman_mean(j)), band);
    }
  }
}

TEST(BootstrapFilter, SystematicResamplerRuns) {
  const auto model = two_state_model();
  auto sim = derive_stream(12, {"sys", "observation"});
  const auto path = pfcollapse::simulate_ssm(model, 5, sim);
  pfcollapse::FilterOptions options;
  options.particles = 5000;
  options.policy = pfcollapse::ResamplePolicy::always;
  options.resampler = pfcollapse::Resampler::systematic;
  auto rng = derive_stream(12, {"sys", "ensemble"});
  const auto trace = pfcollapse::bootstrap_filter(model, path.observations, options, rng);
  for (const auto& step : trace) {
    EXPECT_LT((step.pf_mean - step.kalman_mean).norm(), 0.2);
  }
}

// First step with max weight above 0.9 (steps + 1 if never).
std::size_t first_collapse(std::size_t d, std::uint64_t seed, std::size_t steps) {
  const auto model = identity_model(static_cast<Eigen::Index>(d));
  auto sim = derive_stream(seed, {"collapse", d, "observation"});
  const auto path = pfcollapse::simulate_ssm(model, steps, sim);
  pfcollapse::FilterOptions options;
  options.particles = 300;
  options.policy = pfcollapse::ResamplePolicy::always;
  auto rng = derive_stream(seed, {"collapse", d, "ensemble"});
  const auto trace = pfcollapse::bootstrap_filter(model, path.observations, options, rng);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (trace[t].max_weight > 0.9) {
      return t;
    }
  }
  return steps + 1;
}

TEST(BootstrapFilter, CollapseComesSoonerInHigherDimension) {
  std::size_t previous = 1000;
  for (const std::size_t d : {2UL, 10UL, 40UL, 120UL}) {
    std::vector<double> firsts;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      firsts.push_back(static_cast<double>(first_collapse(d, seed, 8)));
    }
    const auto median = static_cast<std::size_t>(pfcollapse::median(firsts));
    EXPECT_LE(median, previous) << "d=" << d;
    previous = median;
  }
  // In 120 dimensions the weights are degenerate within the first two observations.
  EXPECT_LE(previous, 1U);
}

}  // namespace
