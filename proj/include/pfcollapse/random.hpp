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

#ifndef PFCOLLAPSE_RANDOM_HPP
#define PFCOLLAPSE_RANDOM_HPP

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <openssl/evp.h>

#include <pfcollapse/errors.hpp>

/**
 * \file
 * \brief Deterministic, path-addressed random streams.
 *
 * Byte-level contract:
 *  - A stream is keyed by SHA-256 over the little-endian encoding of
 *    (master_seed, label_0, label_1, ...). Integer labels are encoded as the
 *    byte 0x00 followed by 8 little-endian bytes; string labels as 0x01, an
 *    8-byte little-endian length, then the raw bytes.
 *  - Digest bytes [0, 8) form the Philox4x32-10 key (two little-endian u32),
 *    bytes [8, 16) the high 64 bits of the 128-bit counter. The low 64 bits
 *    count blocks from zero.
 *  - Block words (x0, x1, x2, x3) yield two u64 outputs, x0 | x1 << 32 and
 *    x2 | x3 << 32, in that order.
 *  - uniform() = ((u64 >> 12) + 0.5) * 2^-52, exactly representable and in the open interval (0, 1).
 *  - normal() = Phi^-1(uniform()), one u64 per variate.
 */

namespace pfcollapse {

/// Philox4x32 with 10 rounds.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  [[nodiscard]] static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53U;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
};

/// One element of a stream path: an integer or a string.
class PathLabel {
 public:
  template <std::integral T>
  PathLabel(T value) : value_(static_cast<std::int64_t>(value)) {}  // NOLINT(google-explicit-constructor)
  PathLabel(std::string value) : value_(std::move(value)) {}        // NOLINT(google-explicit-constructor)
  PathLabel(const char* value) : value_(std::string(value)) {}      // NOLINT(google-explicit-constructor)
  PathLabel(std::string_view value) : value_(std::string(value)) {}  // NOLINT(google-explicit-constructor)

  [[nodiscard]] const std::variant<std::int64_t, std::string>& value() const noexcept { return value_; }

  friend bool operator==(const PathLabel&, const PathLabel&) = default;

 private:
  std::variant<std::int64_t, std::string> value_;
};

/// Standard normal quantile function.
[[nodiscard]] inline double normal_quantile(double u) {
  return -1.4142135623730950488 * boost::math::erfc_inv(2.0 * u);
}

/// Counter-based stream of 64-bit words, uniforms, and standard normals.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(Philox4x32::Key key, std::uint64_t counter_high) noexcept : key_(key), counter_high_(counter_high) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }

  result_type next_u64() noexcept {
    if (buffered_ == 0) {
      refill();
    }
    return buffer_[2 - buffered_--];
  }

  double uniform() noexcept { return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1p-52; }

  double normal() { return normal_quantile(uniform()); }

  void fill_normal(std::span<double> out) {
    for (auto& x : out) {
      x = normal();
    }
  }

  /// Number of 64-bit words consumed so far.
  [[nodiscard]] std::uint64_t words_consumed() const noexcept { return 2 * block_ - buffered_; }

 private:
  void refill() noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                  static_cast<std::uint32_t>(counter_high_),
                                  static_cast<std::uint32_t>(counter_high_ >> 32)};
    const auto out = Philox4x32::block(ctr, key_);
    buffer_[0] = static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
    buffer_[1] = static_cast<std::uint64_t>(out[2]) | (static_cast<std::uint64_t>(out[3]) << 32);
    buffered_ = 2;
    ++block_;
  }

  Philox4x32::Key key_;
  std::uint64_t counter_high_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  unsigned buffered_ = 0;
};

namespace detail {

inline void append_le64(std::vector<unsigned char>& bytes, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
}

inline std::array<unsigned char, 32> sha256(std::span<const unsigned char> bytes) {
  std::array<unsigned char, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw NumericalError("SHA-256 digest failed");
  }
  return digest;
}

inline std::uint64_t load_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

}  // namespace detail

/// Stream for (master_seed, path); equal inputs give bitwise-equal output on any platform.
[[nodiscard]] inline RngStream derive_stream(std::uint64_t master_seed, std::span<const PathLabel> path) {
  std::vector<unsigned char> bytes;
  detail::append_le64(bytes, master_seed);
  for (const auto& label : path) {
    if (const auto* i = std::get_if<std::int64_t>(&label.value())) {
      bytes.push_back(0x00);
      detail::append_le64(bytes, static_cast<std::uint64_t>(*i));
    } else {
      const auto& s = std::get<std::string>(label.value());
      bytes.push_back(0x01);
      detail::append_le64(bytes, s.size());
      bytes.insert(bytes.end(), s.begin(), s.end());
    }
  }
  const auto digest = detail::sha256(bytes);
  const std::uint64_t key = detail::load_le64(digest.data());
  const std::uint64_t high = detail::load_le64(digest.data() + 8);
  return RngStream{{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)}, high};
}

[[nodiscard]] inline RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<PathLabel> path) {
  return derive_stream(master_seed, std::span<const PathLabel>(path.begin(), path.size()));
}

/// Role component of the documented path layout (experiment, cell, replicate, role).
enum class StreamRole { observation, ensemble, resample };

[[nodiscard]] inline std::string to_string(StreamRole role) {
  switch (role) {
    case StreamRole::observation:
      return "observation";
    case StreamRole::ensemble:
      return "ensemble";
    case StreamRole::resample:
      return "resample";
  }
  return "unknown";
}

}  // namespace pfcollapse

#endif
