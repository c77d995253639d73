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

#ifndef PFCOLLAPSE_CSV_HPP
#define PFCOLLAPSE_CSV_HPP

#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <pfcollapse/harness.hpp>
#include <pfcollapse/particle_filter.hpp>
#include <pfcollapse/random.hpp>

/**
 * \file
 * \brief CSV tables for every experiment, plus atomic file output.
 *
 * Numbers use the shortest round-trip decimal form with '.' as separator;
 * rows end in '\n'.
 */

namespace pfcollapse {

/// Shortest decimal string that parses back to exactly \p x.
[[nodiscard]] inline std::string format_number(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc{}) {
    throw std::runtime_error("number formatting failed");
  }
  return std::string(buf.data(), ptr);
}

[[nodiscard]] inline std::string format_number(std::size_t x) { return std::to_string(x); }

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { append(header); }

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> fields{to_field(cells)...};
    if (fields.size() != columns_) {
      throw std::logic_error("CSV row width does not match the header");
    }
    append(fields);
  }

  [[nodiscard]] const std::string& str() const noexcept { return text_; }

 private:
  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(const char* s) { return s; }
  static std::string to_field(double x) { return format_number(x); }
  static std::string to_field(std::size_t x) { return format_number(x); }
  static std::string to_field(int x) { return std::to_string(x); }
  static std::string to_field(bool x) { return x ? "1" : "0"; }

  void append(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) {
        text_ += ',';
      }
      text_ += fields[i];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

[[nodiscard]] inline std::string collapse_sweep_csv(const std::string& name, const std::string& family,
                                                    std::span<const CellResult> cells) {
  CsvTable table({"name", "family", "d_prime", "n", "replicates", "effective_dimension", "mean_max_weight",
                  "se_max_weight", "mean_ess", "se_ess", "mean_T", "se_T"});
  for (const auto& c : cells) {
    table.row(name, family, c.d_prime, c.n, c.replicates, c.effective_dimension, c.max_weight.mean, c.max_weight.se,
              c.ess.mean, c.ess.se, c.t.mean, c.t.se);
  }
  return table.str();
}

[[nodiscard]] inline std::string scaling_csv(const std::string& name, const std::string& family,
                                             std::span<const CellResult> cells) {
  CsvTable table({"name", "family", "d_prime", "n", "replicates", "regime_ratio", "ratio_A2", "se_ratio_A2",
                  "ratio_unnorm", "se_ratio_unnorm"});
  for (const auto& c : cells) {
    table.row(name, family, c.d_prime, c.n, c.replicates, c.regime_ratio, c.ratio_a2.mean, c.ratio_a2.se,
              c.ratio_unnorm.mean, c.ratio_unnorm.se);
  }
  return table.str();
}

[[nodiscard]] inline std::string no_collapse_csv(const std::string& name, const std::string& family,
                                                 std::span<const NoCollapseResult> cells) {
  CsvTable table({"name", "family", "d_prime", "n", "replicates", "g", "mean_abs_err", "se_abs_err",
                  "mean_max_weight"});
  for (const auto& c : cells) {
    table.row(name, family, c.d_prime, c.n, c.replicates, to_string(c.g), c.abs_err.mean, c.abs_err.se,
              c.mean_max_weight);
  }
  return table.str();
}

[[nodiscard]] inline std::string normality_csv(const std::string& name, const std::string& family,
                                               std::span<const NormalityResult> cells) {
  CsvTable table({"name", "family", "d_prime", "samples", "ks_distance", "tail_ratio_2", "tail_ratio_3"});
  for (const auto& c : cells) {
    table.row(name, family, c.d_prime, c.samples, c.ks_distance, c.tail_ratio_2, c.tail_ratio_3);
  }
  return table.str();
}

[[nodiscard]] inline std::string lyapunov_csv(const std::string& name, const std::string& family,
                                              std::span<const LyapunovResult> rows) {
  CsvTable table({"name", "family", "d_prime", "k", "median_L", "p90_L"});
  for (const auto& r : rows) {
    table.row(name, family, r.d_prime, r.k, r.median, r.p90);
  }
  return table.str();
}

/// t,max_weight,ess,resampled,pf_mean_0..,kalman_mean_0..
[[nodiscard]] inline std::string filter_trace_csv(const FilterTrace& trace) {
  const auto q = trace.empty() ? Eigen::Index{0} : trace.front().pf_mean.size();
  std::string text = "t,max_weight,ess,resampled";
  for (Eigen::Index j = 0; j < q; ++j) {
    text += ",pf_mean_" + std::to_string(j);
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    text += ",kalman_mean_" + std::to_string(j);
  }
  text += '\n';
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& s = trace[t];
    text += std::to_string(t) + ',' + format_number(s.max_weight) + ',' + format_number(s.ess) + ',' +
            (s.resampled ? "1" : "0");
    for (Eigen::Index j = 0; j < q; ++j) {
      text += ',' + format_number(s.pf_mean(j));
    }
    for (Eigen::Index j = 0; j < q; ++j) {
      text += ',' + format_number(s.kalman_mean(j));
    }
    text += '\n';
  }
  return text;
}

/// Writes to a sibling temporary file and renames it over \p path.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::filesystem::filesystem_error("cannot open for writing", tmp,
                                              std::make_error_code(std::errc::permission_denied));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      throw std::filesystem::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
    }
  }
  std::filesystem::rename(tmp, path);
}

/// Lower-case hex SHA-256 of \p contents.
[[nodiscard]] inline std::string sha256_hex(std::string_view contents) {
  const auto digest = detail::sha256(
      std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(contents.data()), contents.size()));
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (const unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0x0F];
  }
  return out;
}

}  // namespace pfcollapse

#endif
