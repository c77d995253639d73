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


#ifndef PFCOLLAPSE_CLI_HPP
#define PFCOLLAPSE_CLI_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <pfcollapse/config.hpp>
#include <pfcollapse/csv.hpp>
#include <pfcollapse/errors.hpp>
#include <pfcollapse/harness.hpp>
#include <pfcollapse/parallel.hpp>
#include <pfcollapse/particle_filter.hpp>
#include <pfcollapse/random.hpp>
#include <pfcollapse/spectrum.hpp>
#include <pfcollapse/version.hpp>

/**
 * \file
 * \brief Command-line front end.
 *
 * Exit codes: 0 success, 1 output or numerical failure, 2 usage or
 * validation error, 3 budget refusal.
 */

namespace pfcollapse {

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBudget = 3;

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  unsigned workers = default_workers();
  std::optional<std::uint64_t> budget;
};

/// Raised when the output directory cannot be created or written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Accumulates output files and writes manifest.json after all of them.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw OutputError("cannot create output directory " + dir_.string());
    }
    const auto probe = dir_ / ".pfcollapse-probe";
    {
      std::ofstream out(probe);
      if (!out) {
        throw OutputError("output directory is not writable: " + dir_.string());
      }
    }
    std::filesystem::remove(probe, ec);
  }

  void write(const std::string& file, const std::string& contents) {
    try {
      write_file_atomic(dir_ / file, contents);
    } catch (const std::filesystem::filesystem_error& e) {
      throw OutputError(e.what());
    }
    digests_[file] = sha256_hex(contents);
  }

  void finish(Json manifest) {
    manifest["files"] = digests_;
    write("manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  Json digests_ = Json::object();
};

inline Json manifest_base(const std::string& command, const Json& config, std::uint64_t seed) {
  return Json{{"command", command}, {"config", config}, {"master_seed", seed}, {"version", kVersion}};
}

inline ExperimentConfig load_experiment(const Options& opts, Json& raw) {
  raw = read_json_file(opts.config);
  auto cfg = experiment_from_json(raw);
  if (opts.seed) {
    cfg.master_seed = *opts.seed;
  }
  if (opts.budget) {
    cfg.budget = *opts.budget;
  }
  cfg.workers = opts.workers;
  return cfg;
}

template <class Rows>
Json cell_timings(const Rows& rows) {
  Json cells = Json::array();
  for (const auto& r : rows) {
    Json cell{{"d_prime", r.d_prime}, {"seconds", r.seconds}};
    if constexpr (requires { r.n; }) {
      cell["n"] = r.n;
    }
    if constexpr (requires { r.k; }) {
      cell["k"] = r.k;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

inline void warn_regime(const std::vector<CellResult>& cells, std::ostream& err) {
  for (const auto& c : cells) {
    if (c.regime_warning) {
      err << "warning: cell d'=" << c.d_prime << " n=" << c.n << " has regime ratio " << c.regime_ratio
          << " > 0.5; asymptotic scaling may not apply\n";
    }
  }
}

inline int run_replicated(const std::string& command, const Options& opts, std::ostream& err) {
  Json raw;
  const auto cfg = load_experiment(opts, raw);
  cfg.validate_replicated();
  ArtifactWriter writer(opts.out);
  const auto cells = command == "sweep" ? run_collapse_sweep(cfg) : run_scaling_check(cfg);
  const auto& label = cfg.spectrum.label();
  if (command == "sweep") {
    writer.write("collapse_sweep.csv", collapse_sweep_csv(cfg.name, label, cells));
  } else {
    warn_regime(cells, err);
    writer.write("scaling.csv", scaling_csv(cfg.name, label, cells));
  }
  auto manifest = manifest_base(command, raw, cfg.master_seed);
  manifest["cells"] = cell_timings(cells);
  writer.finish(std::move(manifest));
  return kExitOk;
}

inline int run_no_collapse(const Options& opts) {
  Json raw;
  const auto cfg = load_experiment(opts, raw);
  cfg.validate_replicated();
  ArtifactWriter writer(opts.out);
  const auto cells = run_no_collapse_check(cfg);
  writer.write("no_collapse.csv", no_collapse_csv(cfg.name, cfg.spectrum.label(), cells));
  auto manifest = manifest_base("no-collapse", raw, cfg.master_seed);
  manifest["cells"] = cell_timings(cells);
  writer.finish(std::move(manifest));
  return kExitOk;
}

inline int run_normality(const Options& opts) {
  Json raw;
  const auto cfg = load_experiment(opts, raw);
  cfg.validate_common();
  ArtifactWriter writer(opts.out);
  const auto cells = run_normality_check(cfg);
  writer.write("normality.csv", normality_csv(cfg.name, cfg.spectrum.label(), cells));
  auto manifest = manifest_base("normality", raw, cfg.master_seed);
  manifest["cells"] = cell_timings(cells);
  writer.finish(std::move(manifest));
  return kExitOk;
}

inline int run_lyapunov(const Options& opts, std::ostream& err) {
  Json raw;
  const auto cfg = load_experiment(opts, raw);
  cfg.validate_common();
  ArtifactWriter writer(opts.out);
  const auto report = run_lyapunov_check(cfg);
  for (const auto& d : report.decays) {
    if (!d.within_band) {
      err << "warning: median L_" << d.k << " ratio between d'=" << d.d_small << " and d'=" << d.d_large << " is "
          << d.factor << ", outside [" << kLyapunovDecayLow << ", " << kLyapunovDecayHigh << "]\n";
    }
  }
  writer.write("lyapunov.csv", lyapunov_csv(cfg.name, cfg.spectrum.label(), report.rows));
  auto manifest = manifest_base("lyapunov", raw, cfg.master_seed);
  manifest["cells"] = cell_timings(report.rows);
  writer.finish(std::move(manifest));
  return kExitOk;
}

inline bool is_safe_file_stem(const std::string& name) {
  if (name.empty() || name == "." || name == ".." || name == "manifest") {
    return false;
  }
  return std::all_of(name.begin(), name.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
           ch == '-' || ch == '.';
  });
}

inline int run_filter(const Options& opts) {
  const Json raw = read_json_file(opts.config);
  auto cfg = filter_config_from_json(raw);
  detail::require(is_safe_file_stem(cfg.name), "filter name must use only letters, digits, '_', '-' and '.'");
  if (opts.seed) {
    cfg.master_seed = *opts.seed;
  }
  const std::uint64_t budget = opts.budget.value_or(ExperimentConfig{}.budget);
  detail::check_budget(cfg.options.particles, static_cast<std::size_t>(cfg.model.state_dim()), budget);
  ArtifactWriter writer(opts.out);

  const auto start = std::chrono::steady_clock::now();
  std::vector<Eigen::VectorXd> observations;
  if (cfg.observations) {
    observations = *cfg.observations;
  } else {
    auto rng = derive_stream(cfg.master_seed, {cfg.name, 0, 0, to_string(StreamRole::observation)});
    observations = simulate_ssm(cfg.model, cfg.steps, rng).observations;
  }
  auto rng = derive_stream(cfg.master_seed, {cfg.name, 0, 0, to_string(StreamRole::ensemble)});
  const auto trace = bootstrap_filter(cfg.model, observations, cfg.options, rng);
  const double seconds = detail::elapsed_seconds(start);

  writer.write(cfg.name + ".csv", filter_trace_csv(trace));
  auto manifest = manifest_base("filter", raw, cfg.master_seed);
  manifest["cells"] = Json::array({Json{{"steps", trace.size()}, {"seconds", seconds}}});
  writer.finish(std::move(manifest));
  return kExitOk;
}

inline int run_canonicalize(const Options& opts, std::ostream& out) {
  const auto cfg = canonicalize_config_from_json(read_json_file(opts.config));
  const auto canonical = canonicalize(cfg.model, cfg.rank_rtol);
  auto j = spectrum_to_json(canonical.spectrum);
  j["effective_dimension"] = effective_dimension(canonical.spectrum);
  out << j.dump() << "\n";
  return kExitOk;
}

}  // namespace cli

/**
 * Entry point shared by the pfcollapse executable and the tests.
 *
 * Subcommands: sweep, scaling, no-collapse, normality, lyapunov, filter,
 * canonicalize. Each takes --config PATH and optionally --out DIR,
 * --seed U64, --workers K, and --budget N.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Weight-collapse experiments for importance sampling and particle filters", "pfcollapse"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  cli::Options opts;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"sweep", "max weight, ESS and T over a (d', n) grid"},
      {"scaling", "scaled T against its asymptotic limit"},
      {"no-collapse", "self-normalized estimator error for summable spectra"},
      {"normality", "KS distance of the standardized statistic to N(0, 1)"},
      {"lyapunov", "Lyapunov quotients over observation draws"},
      {"filter", "bootstrap particle filter against the Kalman filter"},
      {"canonicalize", "canonical spectrum of an observation model"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    if (name != "canonicalize") {
      sub->add_option("--out", opts.out, "output directory")->capture_default_str();
      sub->add_option("--seed", opts.seed, "master seed; overrides the config");
      sub->add_option("--workers", opts.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
      sub->add_option("--budget", opts.budget, "largest rows x d' scalar draws per cell");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "sweep" || command == "scaling") {
      return cli::run_replicated(command, opts, err);
    }
    if (command == "no-collapse") {
      return cli::run_no_collapse(opts);
    }
    if (command == "normality") {
      return cli::run_normality(opts);
    }
    if (command == "lyapunov") {
      return cli::run_lyapunov(opts, err);
    }
    if (command == "filter") {
      return cli::run_filter(opts);
    }
    return cli::run_canonicalize(opts, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << "\n";
    return cli::kExitBudget;
  } catch (const cli::OutputError& e) {
    err << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }
}

}  // namespace pfcollapse

#endif
