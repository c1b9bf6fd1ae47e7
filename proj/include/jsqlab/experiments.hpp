#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "analytic.hpp"
#include "cavity.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "io.hpp"
#include "network.hpp"
#include "service.hpp"

namespace jsq {

enum class Mode { network, cavity, analytic };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::network: return "network";
    case Mode::cavity: return "cavity";
    case Mode::analytic: return "analytic";
  }
  return "unknown";
}

/// The experiment document accepted by `--config` and echoed into every
/// output. Worker count is deliberately absent: it never changes results.
struct ExperimentConfig {
  Mode mode = Mode::network;
  int D = 2;
  double alpha = 0.5;
  ServiceSpec service;
  int N = 100;
  double horizon = 1e4;
  double warmup_fraction = 0.2;
  std::size_t batches = 20;
  std::size_t k_max = 64;
  std::uint64_t cycles = 100000;
  double tol = 0.05;
  double damping = 1.0;
  std::size_t max_iter = 50;
  std::size_t min_iter = 2;
  double cycle_time_cap = 1e6;
  double noise_threshold = 0.05;
  std::uint64_t seed = 1;
  std::size_t replications = 1;
  std::vector<std::size_t> pair_levels;
  std::string out = "out";

  NetworkConfig network() const {
    NetworkConfig c;
    c.N = N;
    c.D = D;
    c.alpha = alpha;
    c.service = service;
    c.horizon = horizon;
    c.warmup_fraction = warmup_fraction;
    c.seed = seed;
    c.k_max = k_max;
    c.batches = batches;
    return c;
  }

  FixedPointControls fixed_point_controls(std::size_t workers = 1) const {
    FixedPointControls c;
    c.k_max = k_max;
    c.cycles_per_iter = cycles;
    c.damping = damping;
    c.tol = tol;
    c.max_iter = max_iter;
    c.min_iter = min_iter;
    c.cavity.cycle_time_cap = cycle_time_cap;
    c.noise_threshold = noise_threshold;
    c.seed = seed;
    c.workers = workers;
    return c;
  }

  void validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    switch (mode) {
      case Mode::network:
        network().validate();
        for (std::size_t k : pair_levels)
          if (k > k_max) throw ConfigError("pair level beyond k_max");
        break;
      case Mode::cavity:
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
        if (D < 2) throw ConfigError("cavity mode requires D >= 2");
        fixed_point_controls().validate();
        break;
      case Mode::analytic:
        if (D < 2) throw ConfigError("analytic mode requires D >= 2");
        break;
    }
  }
};

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["mode"] = std::string(to_string(c.mode));
  j["D"] = c.D;
  j["alpha"] = c.alpha;
  j["service"] = to_json(c.service);
  if (c.mode == Mode::network) {
    j["N"] = c.N;
    j["horizon"] = c.horizon;
    j["warmup_fraction"] = c.warmup_fraction;
    j["batches"] = c.batches;
    j["pair_levels"] = c.pair_levels;
  }
  j["k_max"] = c.k_max;
  if (c.mode == Mode::cavity) {
    j["cycles"] = c.cycles;
    j["tol"] = c.tol;
    j["damping"] = c.damping;
    j["max_iter"] = c.max_iter;
    j["min_iter"] = c.min_iter;
    j["cycle_time_cap"] = c.cycle_time_cap;
    j["noise_threshold"] = c.noise_threshold;
  }
  j["seed"] = c.seed;
  j["replications"] = c.replications;
  j["out"] = c.out;
  return j;
}

namespace detail {

template <typename T>
T get_checked(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline std::uint64_t get_count(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(std::string("config field '") + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

/// Parses and validates a config document. A sidecar produced by `simulate`
/// is accepted too: its "config" member is used.
inline ExperimentConfig config_from_json(const json& doc) {
  const json& j = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "mode",  "D",        "alpha",     "service",         "N",    "horizon",      "warmup_fraction",
      "batches", "k_max",  "cycles",    "tol",             "damping", "max_iter",  "min_iter", "cycle_time_cap", "noise_threshold",
      "seed",  "replications", "pair_levels", "out"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");

  ExperimentConfig c;
  if (!j.contains("mode")) throw ConfigError("config requires 'mode'");
  const auto mode = detail::get_checked<std::string>(j, "mode");
  if (mode == "network") c.mode = Mode::network;
  else if (mode == "cavity") c.mode = Mode::cavity;
  else if (mode == "analytic") c.mode = Mode::analytic;
  else throw ConfigError("unknown mode '" + mode + "'");

  if (j.contains("D")) c.D = detail::get_checked<int>(j, "D");
  if (j.contains("alpha")) c.alpha = detail::get_checked<double>(j, "alpha");
  if (j.contains("service")) c.service = service_from_json(j["service"]);
  if (j.contains("N")) c.N = detail::get_checked<int>(j, "N");
  if (j.contains("horizon")) c.horizon = detail::get_checked<double>(j, "horizon");
  if (j.contains("warmup_fraction")) c.warmup_fraction = detail::get_checked<double>(j, "warmup_fraction");
  if (j.contains("batches")) c.batches = detail::get_count(j, "batches");
  if (j.contains("k_max")) c.k_max = detail::get_count(j, "k_max");
  if (j.contains("cycles")) c.cycles = detail::get_count(j, "cycles");
  if (j.contains("tol")) c.tol = detail::get_checked<double>(j, "tol");
  if (j.contains("damping")) c.damping = detail::get_checked<double>(j, "damping");
  if (j.contains("max_iter")) c.max_iter = detail::get_count(j, "max_iter");
  if (j.contains("min_iter")) c.min_iter = detail::get_count(j, "min_iter");
  if (j.contains("cycle_time_cap")) c.cycle_time_cap = detail::get_checked<double>(j, "cycle_time_cap");
  if (j.contains("noise_threshold")) c.noise_threshold = detail::get_checked<double>(j, "noise_threshold");
  if (j.contains("seed")) c.seed = detail::get_count(j, "seed");
  if (j.contains("replications")) c.replications = detail::get_count(j, "replications");
  if (j.contains("pair_levels")) c.pair_levels = detail::get_checked<std::vector<std::size_t>>(j, "pair_levels");
  if (j.contains("out")) c.out = detail::get_checked<std::string>(j, "out");
  c.validate();
  return c;
}

inline ExperimentConfig config_from_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

struct SimulateOutputs {
  TailEstimate tail;
  std::string tail_csv;
  std::string pairs_csv;  // empty unless pair levels were requested
  json sidecar;
};

/// Runs `replications` network simulations (in parallel up to `workers`),
/// merges them and renders the CSV + sidecar.
inline SimulateOutputs run_simulate(const ExperimentConfig& config, std::size_t workers = 1) {
  if (config.mode != Mode::network) throw ConfigError("simulate requires mode=network");
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto runs = simulate_replications(config.network(), config.replications, workers);

  SimulateOutputs out;
  std::vector<TailEstimate> parts;
  for (const auto& r : runs) parts.push_back(estimate_tail(r));
  out.tail = merge_estimates(parts);
  out.tail_csv = tail_csv(out.tail);

  if (!config.pair_levels.empty()) {
    out.pairs_csv = "k,cov,ci_low,ci_high\n";
    for (std::size_t k : config.pair_levels) {
      double mean = 0.0, hw2 = 0.0;
      for (const auto& r : runs) {
        const auto ci = pair_dependence(r, k);
        mean += ci.mean;
        hw2 += ci.half_width * ci.half_width;
      }
      const double n = static_cast<double>(runs.size());
      mean /= n;
      const double hw = std::sqrt(hw2) / n;
      out.pairs_csv += std::to_string(k) + "," + format_double(mean) + "," + format_double(mean - hw) + "," +
                       format_double(mean + hw) + "\n";
    }
  }

  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  json seeds = json::array();
  std::uint64_t events = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    seeds.push_back(replication_seed(config.seed, r, config.replications));
    events += runs[r].events;
  }
  out.sidecar["config"] = to_json(config);
  out.sidecar["seed"] = config.seed;
  out.sidecar["replication_seeds"] = seeds;
  out.sidecar["batches"] = config.batches;
  out.sidecar["events"] = events;
  out.sidecar["audit"] = "passed";
  out.sidecar["runtime_seconds"] = elapsed.count();
  return out;
}

struct CavityOutputs {
  FixedPointReport report;
  std::string tail_csv;
  json report_json;
};

inline CavityOutputs run_cavity(const ExperimentConfig& config, std::size_t workers = 1) {
  if (config.mode != Mode::cavity) throw ConfigError("cavity requires mode=cavity");
  config.validate();
  CavityOutputs out;
  out.report = fixed_point(config.service, config.alpha, config.D, config.fixed_point_controls(workers));
  out.tail_csv = tail_csv(out.report.estimate);
  out.report_json["config"] = to_json(config);
  out.report_json["seed"] = config.seed;
  out.report_json["report"] = to_json(out.report);
  return out;
}

/// CSV rows `D,beta,regime,exponent` (exponent empty at the boundary).
inline std::string regime_csv_row(const analytic::RegimeReport& r) {
  return std::to_string(r.D) + "," + format_double(r.beta) + "," + std::string(analytic::to_string(r.regime)) + "," +
         (r.exponent ? format_double(*r.exponent) : std::string()) + "\n";
}

}  // namespace jsq
