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

#ifndef PFCOLLAPSE_CONFIG_HPP
#define PFCOLLAPSE_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include <pfcollapse/errors.hpp>
#include <pfcollapse/harness.hpp>
#include <pfcollapse/particle_filter.hpp>
#include <pfcollapse/spectrum.hpp>

/**
 * \file
 * \brief JSON forms of spectra, experiment configurations, and models.
 *
 * Spectrum objects take one of two shapes:
 *   {"kind": "power_decay", "params": {"p": 1}, "d_prime": 4}
 *   {"values": [1.0, 0.5]}
 * Family parameters are "level" (constant), "p" (power_decay), "r"
 * (geometric), and "big"/"small" (single_dominant). Inside an experiment
 * config "d_prime" may be omitted, and "effective_dimension": S truncates the
 * family to the shortest prefix whose lambda^2 sum is S.
 */

namespace pfcollapse {

using Json = nlohmann::json;

namespace detail {

inline void require_known_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    require(allowed.count(key) == 1, "unknown key '" + key + "' in " + where);
  }
}

/// Non-negative integer; JSON would otherwise wrap -1 into a huge unsigned value.
inline std::uint64_t as_count(const Json& v, const std::string& key) {
  require(v.is_number_unsigned(), "'" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  const auto& v = j.at(key);
  if constexpr (std::is_unsigned_v<T>) {
    return static_cast<T>(as_count(v, key));
  } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
    require(v.is_array(), std::string("'") + key + "' must be an array");
    T out;
    for (const auto& item : v) {
      out.push_back(static_cast<std::size_t>(as_count(item, key)));
    }
    return out;
  } else {
    return v.get<T>();
  }
}

inline Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), what + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  require(j[0].is_array() && !j[0].empty(), what + " rows must be non-empty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols, what + " must be rectangular");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  require(j.is_array(), what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

/// Rethrows JSON type and range errors as validation errors.
template <class Fn>
auto translate_json_errors(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("invalid configuration: ") + e.what());
  }
}

}  // namespace detail

[[nodiscard]] inline SpectrumFamily family_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    const auto kind = j.at("kind").get<std::string>();
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    std::optional<SpectrumFamily> family;
    if (kind == "constant") {
      detail::require_known_keys(params, {"level"}, "constant params");
      family = SpectrumFamily::constant(detail::get_or(params, "level", 1.0));
    } else if (kind == "power_decay") {
      detail::require_known_keys(params, {"p"}, "power_decay params");
      family = SpectrumFamily::power_decay(params.at("p").get<double>());
    } else if (kind == "geometric") {
      detail::require_known_keys(params, {"r"}, "geometric params");
      family = SpectrumFamily::geometric(params.at("r").get<double>());
    } else if (kind == "single_dominant") {
      detail::require_known_keys(params, {"big", "small"}, "single_dominant params");
      family = SpectrumFamily::single_dominant(params.at("big").get<double>(), params.at("small").get<double>());
    } else {
      throw ValidationError("unknown spectrum kind '" + kind + "'");
    }
    family->validate();
    return *family;
  });
}

[[nodiscard]] inline Json family_to_json(const SpectrumFamily& family) {
  Json params = Json::object();
  std::visit(
      [&params](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SpectrumFamily::Constant>) {
          params["level"] = p.level;
        } else if constexpr (std::is_same_v<T, SpectrumFamily::PowerDecay>) {
          params["p"] = p.exponent;
        } else if constexpr (std::is_same_v<T, SpectrumFamily::Geometric>) {
          params["r"] = p.ratio;
        } else {
          params["big"] = p.big;
          params["small"] = p.small;
        }
      },
      family.parameters());
  return Json{{"kind", family.kind()}, {"params", params}};
}

/// Parses either spectrum shape; the family shape needs "d_prime".
[[nodiscard]] inline Spectrum spectrum_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require(j.is_object(), "spectrum must be a JSON object");
    if (j.contains("values")) {
      detail::require_known_keys(j, {"values", "d_prime"}, "spectrum");
      Spectrum s{j.at("values").get<std::vector<double>>()};
      if (j.contains("d_prime")) {
        detail::require(detail::as_count(j.at("d_prime"), "d_prime") == s.d_prime(),
                        "d_prime must equal the number of values");
      }
      return s;
    }
    detail::require_known_keys(j, {"kind", "params", "d_prime"}, "spectrum");
    const auto d_prime = static_cast<std::size_t>(detail::as_count(j.at("d_prime"), "d_prime"));
    return generate_spectrum(family_from_json(j), d_prime);
  });
}

[[nodiscard]] inline Json spectrum_to_json(const Spectrum& s) {
  return Json{{"values", std::vector<double>(s.values().begin(), s.values().end())}, {"d_prime", s.d_prime()}};
}

[[nodiscard]] inline Json spectrum_to_json(const SpectrumFamily& family, std::size_t d_prime) {
  auto j = family_to_json(family);
  j["d_prime"] = d_prime;
  return j;
}

[[nodiscard]] inline SpectrumSource spectrum_source_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require(j.is_object(), "spectrum must be a JSON object");
    if (j.contains("values")) {
      detail::require_known_keys(j, {"values"}, "spectrum");
      return SpectrumSource::from_values(Spectrum{j.at("values").get<std::vector<double>>()});
    }
    detail::require_known_keys(j, {"kind", "params", "effective_dimension"}, "spectrum");
    const auto family = family_from_json(j);
    if (j.contains("effective_dimension")) {
      return SpectrumSource::truncated(family, j.at("effective_dimension").get<double>());
    }
    return SpectrumSource::from_family(family);
  });
}

/**
 * Experiment configuration. Keys: name, spectrum, d_prime_grid, n_grid,
 * replicates, seed, observation_mode ("fixed_per_cell" |
 * "redraw_per_replicate"), tempering_alpha, budget, samples, k (list),
 * observation_draws, g ("tanh" | "clip" | "indicator").
 */
[[nodiscard]] inline ExperimentConfig experiment_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require_known_keys(j,
                               {"name", "spectrum", "d_prime_grid", "n_grid", "replicates", "seed", "observation_mode",
                                "tempering_alpha", "budget", "samples", "k", "observation_draws", "g"},
                               "experiment config");
    ExperimentConfig cfg;
    cfg.name = detail::get_or<std::string>(j, "name", "experiment");
    detail::require(j.contains("spectrum"), "experiment config needs a 'spectrum' object");
    cfg.spectrum = spectrum_source_from_json(j.at("spectrum"));
    cfg.d_prime_grid = detail::get_or(j, "d_prime_grid", std::vector<std::size_t>{});
    cfg.n_grid = detail::get_or(j, "n_grid", std::vector<std::size_t>{});
    cfg.replicates = detail::get_or<std::size_t>(j, "replicates", cfg.replicates);
    cfg.master_seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    const auto mode = detail::get_or<std::string>(j, "observation_mode", "redraw_per_replicate");
    if (mode == "fixed_per_cell") {
      cfg.observation_mode = ObservationMode::fixed_per_cell;
    } else if (mode == "redraw_per_replicate") {
      cfg.observation_mode = ObservationMode::redraw_per_replicate;
    } else {
      throw ValidationError("observation_mode must be fixed_per_cell or redraw_per_replicate");
    }
    cfg.tempering_alpha = detail::get_or(j, "tempering_alpha", 1.0);
    cfg.budget = detail::get_or<std::uint64_t>(j, "budget", cfg.budget);
    cfg.samples = detail::get_or<std::size_t>(j, "samples", cfg.samples);
    cfg.lyapunov_orders = detail::get_or(j, "k", cfg.lyapunov_orders);
    cfg.observation_draws = detail::get_or<std::size_t>(j, "observation_draws", cfg.observation_draws);
    const auto g = detail::get_or<std::string>(j, "g", "tanh");
    if (g == "tanh") {
      cfg.g = TestFunction::tanh;
    } else if (g == "clip") {
      cfg.g = TestFunction::clipped_identity;
    } else if (g == "indicator") {
      cfg.g = TestFunction::positive_indicator;
    } else {
      throw ValidationError("g must be tanh, clip or indicator");
    }
    return cfg;
  });
}

/// {"H": [[...]], "Sigma_X": [[...]], "rank_rtol": 1e-10}
struct CanonicalizeConfig {
  ObservationModel model;
  double rank_rtol = 1e-10;
};

[[nodiscard]] inline CanonicalizeConfig canonicalize_config_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require_known_keys(j, {"H", "Sigma_X", "rank_rtol"}, "canonicalize config");
    CanonicalizeConfig cfg;
    cfg.model.h = detail::matrix_from_json(j.at("H"), "H");
    cfg.model.sigma_x = detail::matrix_from_json(j.at("Sigma_X"), "Sigma_X");
    cfg.rank_rtol = detail::get_or(j, "rank_rtol", 1e-10);
    cfg.model.validate();
    return cfg;
  });
}

/// Dense model: A, Q, H, R (default identity), m0, P0.
[[nodiscard]] inline LinearGaussianSSM ssm_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require_known_keys(j, {"A", "Q", "H", "R", "m0", "P0"}, "model");
    LinearGaussianSSM m;
    m.a = detail::matrix_from_json(j.at("A"), "A");
    m.q_cov = detail::matrix_from_json(j.at("Q"), "Q");
    m.h = detail::matrix_from_json(j.at("H"), "H");
    m.r_cov = j.contains("R") ? detail::matrix_from_json(j.at("R"), "R")
                              : Eigen::MatrixXd::Identity(m.h.rows(), m.h.rows());
    m.m0 = detail::vector_from_json(j.at("m0"), "m0");
    m.p0 = detail::matrix_from_json(j.at("P0"), "P0");
    m.validate();
    return m;
  });
}

/// Filter run: model, steps or explicit observations, particles, policy, threshold, resampler.
struct FilterConfig {
  std::string name = "filter";
  LinearGaussianSSM model;
  std::size_t steps = 10;
  std::optional<std::vector<Eigen::VectorXd>> observations;
  FilterOptions options;
  std::uint64_t master_seed = 0;
};

[[nodiscard]] inline FilterConfig filter_config_from_json(const Json& j) {
  return detail::translate_json_errors([&j] {
    detail::require_known_keys(
        j, {"name", "model", "steps", "observations", "particles", "resample", "threshold", "resampler", "seed"},
        "filter config");
    FilterConfig cfg;
    cfg.name = detail::get_or<std::string>(j, "name", "filter");
    cfg.model = ssm_from_json(j.at("model"));
    cfg.steps = detail::get_or<std::size_t>(j, "steps", cfg.steps);
    detail::require(cfg.steps >= 1, "steps must be at least 1");
    if (j.contains("observations")) {
      std::vector<Eigen::VectorXd> obs;
      for (const auto& row : j.at("observations")) {
        obs.push_back(detail::vector_from_json(row, "observation"));
        detail::require(obs.back().size() == cfg.model.obs_dim(), "observation length must equal d");
      }
      detail::require(!obs.empty(), "observations must be non-empty");
      cfg.observations = std::move(obs);
    }
    cfg.options.particles = detail::get_or<std::size_t>(j, "particles", cfg.options.particles);
    detail::require(cfg.options.particles >= 2, "particles must satisfy n >= 2");
    const auto policy = detail::get_or<std::string>(j, "resample", "ess_threshold");
    if (policy == "always") {
      cfg.options.policy = ResamplePolicy::always;
    } else if (policy == "ess_threshold") {
      cfg.options.policy = ResamplePolicy::ess_threshold;
    } else {
      throw ValidationError("resample must be always or ess_threshold");
    }
    cfg.options.threshold = detail::get_or(j, "threshold", cfg.options.threshold);
    detail::require(cfg.options.threshold > 0.0 && cfg.options.threshold <= 1.0, "threshold must lie in (0, 1]");
    const auto resampler = detail::get_or<std::string>(j, "resampler", "multinomial");
    if (resampler == "multinomial") {
      cfg.options.resampler = Resampler::multinomial;
    } else if (resampler == "systematic") {
      cfg.options.resampler = Resampler::systematic;
    } else {
      throw ValidationError("resampler must be multinomial or systematic");
    }
    cfg.master_seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    return cfg;
  });
}

/// Reads and parses a JSON file; parse errors become validation errors.
[[nodiscard]] inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot read config file " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace pfcollapse

#endif
