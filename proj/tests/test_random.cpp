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

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/sampling.hpp>
#include <pfcollapse/spectrum.hpp>
#include <pfcollapse/statistics.hpp>

namespace {

using pfcollapse::derive_stream;
using pfcollapse::Philox4x32;
using pfcollapse::RngStream;
using pfcollapse::Spectrum;

TEST(Philox, KnownAnswerVectors) {
  // Reference vectors distributed with the Random123 library (kat_vectors, philox4x32 10 rounds).
  constexpr auto zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (Philox4x32::Counter{0x6627e8d5U, 0xe169c58dU, 0xbc57ac4cU, 0x9b00dbd8U}));

  const auto ones = Philox4x32::block({0xffffffffU, 0xffffffffU, 0xffffffffU, 0xffffffffU}, {0xffffffffU, 0xffffffffU});
  EXPECT_EQ(ones, (Philox4x32::Counter{0x408f276dU, 0x41c83b0eU, 0xa20bc7c6U, 0x6d5451fdU}));

  const auto pi = Philox4x32::block({0x243f6a88U, 0x85a308d3U, 0x13198a2eU, 0x03707344U}, {0xa4093822U, 0x299f31d0U});
  EXPECT_EQ(pi, (Philox4x32::Counter{0xd16cfe09U, 0x94fdccebU, 0x5001e420U, 0x24126ea1U}));
}

TEST(DeriveStream, SamePathIsBitwiseIdentical) {
  auto a = derive_stream(42, {"exp", 0, 1, "ensemble"});
  auto b = derive_stream(42, {"exp", 0, 1, "ensemble"});
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    ASSERT_EQ(std::bit_cast<std::uint64_t>(x), std::bit_cast<std::uint64_t>(y));
  }
}

TEST(DeriveStream, DistinctPathsDiffer) {
  const std::array<std::uint64_t, 5> firsts{
      derive_stream(1, {"exp", 0, 1}).next_u64(), derive_stream(1, {"exp", 0, 2}).next_u64(),
      derive_stream(2, {"exp", 0, 1}).next_u64(), derive_stream(1, {"exp", 1, 0}).next_u64(),
      // An integer label and its decimal string encode differently.
      derive_stream(1, {"exp", "0", 1}).next_u64()};
  for (std::size_t i = 0; i < firsts.size(); ++i) {
    for (std::size_t j = i + 1; j < firsts.size(); ++j) {
      EXPECT_NE(firsts[i], firsts[j]) << i << " vs " << j;
    }
  }
}

TEST(DeriveStream, SiblingStreamsAreUncorrelated) {
  auto a = derive_stream(5, {0, 1});
  auto b = derive_stream(5, {0, 2});
  std::vector<double> xs(100'000);
  std::vector<double> ys(100'000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = a.normal();
    ys[i] = b.normal();
  }
  EXPECT_LT(std::abs(pfcollapse::correlation(xs, ys)), 0.01);
}

TEST(DeriveStream, NormalMomentsAndShape) {
  auto rng = derive_stream(9, {"moments"});
  std::vector<double> xs(1'000'000);
  rng.fill_normal(xs);
  const auto m = pfcollapse::mean_se(xs);
  EXPECT_LT(std::abs(m.mean), 0.004);
  EXPECT_LT(std::abs(pfcollapse::sample_variance(xs) - 1.0), 0.006);
  xs.resize(20'000);
  EXPECT_LT(pfcollapse::ks_distance_normal(xs), pfcollapse::ks_critical_01(xs.size()));
}

TEST(RngStream, ConsumesTwoWordsPerBlock) {
  auto rng = derive_stream(3, {"count"});
  EXPECT_EQ(rng.words_consumed(), 0U);
  (void)rng.next_u64();
  EXPECT_EQ(rng.words_consumed(), 1U);
  (void)rng.uniform();
  (void)rng.normal();
  EXPECT_EQ(rng.words_consumed(), 3U);
}

TEST(RngStream, UniformsAreStrictlyInsideTheUnitInterval) {
  auto rng = derive_stream(4, {"uniform"});
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  // Extreme words map to the extreme representable uniforms, which still have finite quantiles.
  const double smallest = 0.5 * 0x1p-52;
  const double largest = (0x1p52 - 0.5) * 0x1p-52;
  EXPECT_LT(largest, 1.0);
  EXPECT_TRUE(std::isfinite(pfcollapse::normal_quantile(smallest)));
  EXPECT_TRUE(std::isfinite(pfcollapse::normal_quantile(largest)));
  EXPECT_NEAR(pfcollapse::normal_quantile(0.975), 1.959963984540054, 1e-14);
}

TEST(DrawObservation, VarianceWithUnitSpectrum) {
  const Spectrum s({1.0});
  auto rng = derive_stream(11, {"obs-var"});
  std::vector<double> mu(100'000);
  for (auto& m : mu) {
    m = pfcollapse::draw_observation(s, rng).mu[0];
  }
  EXPECT_NEAR(pfcollapse::sample_variance(mu), 2.0, 0.03);
}

TEST(DrawObservation, NearNoiselessMode) {
  const Spectrum s({1e6});
  auto rng = derive_stream(12, {"obs-noiseless"});
  std::vector<double> mu(100'000);
  for (auto& m : mu) {
    m = pfcollapse::draw_observation(s, rng).mu[0];
  }
  EXPECT_NEAR(pfcollapse::sample_variance(mu), 1.0, 0.015);
}

TEST(DrawObservation, DeterministicAndGuarded) {
  const auto s = pfcollapse::generate_spectrum(pfcollapse::SpectrumFamily::power_decay(1.0), 20);
  auto a = derive_stream(13, {"obs"});
  auto b = derive_stream(13, {"obs"});
  EXPECT_EQ(pfcollapse::draw_observation(s, a).mu, pfcollapse::draw_observation(s, b).mu);

  auto c = derive_stream(13, {"tiny"});
  EXPECT_THROW((void)pfcollapse::draw_observation(Spectrum({1e-310}), c), pfcollapse::ValidationError);
}

TEST(DrawEnsemble, CentredOnObservation) {
  const Spectrum s({2.0, 1.0, 0.5});
  const pfcollapse::CanonicalObservation obs{{1.5, -0.5, 3.0}, s};
  auto rng = derive_stream(14, {"ensemble"});
  const auto e = pfcollapse::draw_ensemble(obs, 50'000, rng);
  ASSERT_EQ(e.n(), 50'000U);
  ASSERT_EQ(e.d_prime(), 3U);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Eigen::VectorXd col = e.w.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1);
    EXPECT_NEAR(mean, obs.mu[static_cast<std::size_t>(j)], 4.0 / std::sqrt(50'000.0));
    EXPECT_NEAR(var, 1.0, 0.03);
  }
  auto r2 = derive_stream(14, {"small"});
  EXPECT_THROW((void)pfcollapse::draw_ensemble(obs, 1, r2), pfcollapse::ValidationError);
}

TEST(DrawEnsemble, RowMajorStreamOrder) {
  const Spectrum s({1.0, 1.0});
  const pfcollapse::CanonicalObservation obs{{0.0, 0.0}, s};
  auto rng = derive_stream(15, {"order"});
  auto ref = derive_stream(15, {"order"});
  const auto e = pfcollapse::draw_ensemble(obs, 3, rng);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      EXPECT_EQ(e.w(i, j), ref.normal());
    }
  }
}

}  // namespace
