// jsqlab: command-line driver for the JSQ(D) simulation and tail-analysis
// library.
//
//   jsqlab simulate --config exp.json [--workers 4] [--out run]
//   jsqlab cavity   --D 2 --alpha 0.5 --service-kind exponential --out fp
//   jsqlab predict  --D 2 --beta 3
//   jsqlab fit      --input fp.csv --model doubly-exponential
//
// Exit codes: 0 success (including a fixed point that did not converge),
// 2 configuration error, 3 runtime or IO error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "jsqlab/jsqlab.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<int> D, N;
  std::optional<double> alpha, beta, horizon, warmup, tol, damping, noise, cap;
  std::optional<std::string> kind, out;
  std::optional<std::uint64_t> seed, cycles;
  std::optional<std::size_t> batches, k_max, max_iter, min_iter, replications;
  std::vector<std::size_t> pair_levels;
  std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment document (or a simulate sidecar)");
  cmd->add_option("--D", f.D, "queues sampled per arrival");
  cmd->add_option("--alpha", f.alpha, "arrival rate per queue");
  cmd->add_option("--service-kind", f.kind, "exponential|lomax|pareto|deterministic|bounded-uniform");
  cmd->add_option("--beta", f.beta, "service tail exponent (lomax, pareto)");
  cmd->add_option("--k-max", f.k_max, "deepest tail level recorded");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--replications", f.replications, "independent replications");
  cmd->add_option("--workers", f.workers, "worker threads (never changes results)");
  cmd->add_option("--out", f.out, "output path prefix");
}

jsq::json overlay(const CommonFlags& f, std::string_view mode) {
  jsq::json doc = jsq::json::object();
  if (!f.config_path.empty()) {
    try {
      doc = jsq::json::parse(jsq::read_file(f.config_path));
    } catch (const jsq::json::parse_error& e) {
      throw jsq::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (doc.contains("config") && doc["config"].is_object()) doc = jsq::json(doc["config"]);
  }
  if (!doc.is_object()) throw jsq::ConfigError("config must be a JSON object");
  if (doc.contains("mode") && doc["mode"] != std::string(mode))
    throw jsq::ConfigError("config mode '" + doc["mode"].dump() + "' does not match subcommand");
  doc["mode"] = std::string(mode);
  if (f.D) doc["D"] = *f.D;
  if (f.N) doc["N"] = *f.N;
  if (f.alpha) doc["alpha"] = *f.alpha;
  if (f.kind || f.beta) {
    jsq::json svc = doc.contains("service") ? doc["service"] : jsq::json::object();
    if (f.kind) {
      svc = jsq::json::object();
      svc["kind"] = *f.kind;
    }
    if (f.beta) svc["beta"] = *f.beta;
    doc["service"] = svc;
  }
  if (f.horizon) doc["horizon"] = *f.horizon;
  if (f.warmup) doc["warmup_fraction"] = *f.warmup;
  if (f.batches) doc["batches"] = *f.batches;
  if (f.k_max) doc["k_max"] = *f.k_max;
  if (f.cycles) doc["cycles"] = *f.cycles;
  if (f.tol) doc["tol"] = *f.tol;
  if (f.damping) doc["damping"] = *f.damping;
  if (f.max_iter) doc["max_iter"] = *f.max_iter;
  if (f.min_iter) doc["min_iter"] = *f.min_iter;
  if (f.cap) doc["cycle_time_cap"] = *f.cap;
  if (f.noise) doc["noise_threshold"] = *f.noise;
  if (f.seed) doc["seed"] = *f.seed;
  if (f.replications) doc["replications"] = *f.replications;
  if (!f.pair_levels.empty()) doc["pair_levels"] = f.pair_levels;
  if (f.out) doc["out"] = *f.out;
  return doc;
}

int cmd_simulate(const CommonFlags& f) {
  const auto config = jsq::config_from_json(overlay(f, "network"));
  const auto out = jsq::run_simulate(config, f.workers);
  jsq::write_file(config.out + ".csv", out.tail_csv);
  jsq::write_file(config.out + ".json", jsq::dump(out.sidecar));
  if (!out.pairs_csv.empty()) jsq::write_file(config.out + "_pairs.csv", out.pairs_csv);
  std::cout << out.tail_csv;
  return 0;
}

int cmd_cavity(const CommonFlags& f) {
  const auto config = jsq::config_from_json(overlay(f, "cavity"));
  const auto out = jsq::run_cavity(config, f.workers);
  jsq::write_file(config.out + ".json", jsq::dump(out.report_json));
  jsq::write_file(config.out + ".csv", out.tail_csv);
  std::cerr << "converged=" << (out.report.converged ? "true" : "false") << " iterations=" << out.report.iterations
            << "\n";
  std::cout << out.tail_csv;
  return 0;
}

struct PredictFlags {
  int D = 2;
  std::optional<double> beta, beta_from, beta_to, c1, c2;
  double beta_step = 0.1;
  std::string format = "csv";
};

int cmd_predict(const PredictFlags& f) {
  std::vector<double> betas;
  if (f.beta) betas.push_back(*f.beta);
  if (f.beta_from || f.beta_to) {
    if (!f.beta_from || !f.beta_to) throw jsq::ConfigError("grid mode needs both --beta-from and --beta-to");
    if (!(f.beta_step > 0.0)) throw jsq::ConfigError("--beta-step must be positive");
    const auto steps = static_cast<long>(std::floor((*f.beta_to - *f.beta_from) / f.beta_step + 1e-9));
    for (long i = 0; i <= steps; ++i) betas.push_back(*f.beta_from + static_cast<double>(i) * f.beta_step);
  }
  if (betas.empty()) throw jsq::ConfigError("predict needs --beta or a --beta-from/--beta-to grid");
  if (f.format != "csv" && f.format != "text") throw jsq::ConfigError("--format must be csv or text");

  if (f.format == "csv") std::cout << "D,beta,regime,exponent\n";
  for (double beta : betas) {
    const auto r = jsq::analytic::classify_regime(f.D, beta, f.c1, f.c2);
    if (f.format == "csv") {
      std::cout << jsq::regime_csv_row(r);
    } else {
      char buf[128];
      std::cout << "D=" << r.D << " beta=" << jsq::format_double(r.beta) << ": " << jsq::analytic::to_string(r.regime);
      if (r.exponent) {
        std::snprintf(buf, sizeof buf, ", %s=%.4f", r.regime == jsq::analytic::Regime::power_law ? "nu" : "q",
                      *r.exponent);
        std::cout << buf;
      }
      std::cout << "\n";
    }
  }
  return 0;
}

struct FitFlags {
  std::string input;
  std::string model;
  jsq::FitOptions options;
  std::optional<std::size_t> k_min, k_max;
};

int cmd_fit(FitFlags f) {
  const auto rows = jsq::parse_tail_csv(jsq::read_file(f.input));
  f.options.k_min = f.k_min;
  f.options.k_max = f.k_max;
  const auto fit = jsq::fit_tail(rows, jsq::parse_tail_model(f.model), f.options);
  std::cout << jsq::dump(jsq::to_json(fit));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JSQ(D) FIFO network simulation, cavity fixed points and tail-exponent analysis"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "simulate the N-queue network; writes <out>.csv and <out>.json");
  add_common(sim, sim_flags);
  sim->add_option("--N", sim_flags.N, "number of queues");
  sim->add_option("--horizon", sim_flags.horizon, "simulated time");
  sim->add_option("--warmup", sim_flags.warmup, "fraction of the horizon discarded");
  sim->add_option("--batches", sim_flags.batches, "batch-means batches");
  sim->add_option("--pair-level", sim_flags.pair_levels, "levels for the pair-dependence CSV");

  CommonFlags cav_flags;
  auto* cav = app.add_subcommand("cavity", "cavity fixed-point iteration; writes <out>.json and <out>.csv");
  add_common(cav, cav_flags);
  cav->add_option("--cycles", cav_flags.cycles, "regeneration cycles per iteration");
  cav->add_option("--tol", cav_flags.tol, "sup log-distance convergence threshold");
  cav->add_option("--damping", cav_flags.damping, "log-space damping weight in (0, 1]");
  cav->add_option("--max-iter", cav_flags.max_iter, "iteration limit");
  cav->add_option("--min-iter", cav_flags.min_iter, "iterations run before convergence is checked");
  cav->add_option("--cycle-time-cap", cav_flags.cap, "abort a regeneration cycle longer than this");
  cav->add_option("--noise-threshold", cav_flags.noise, "relative CI below which a level counts toward convergence");

  PredictFlags pred_flags;
  auto* pred = app.add_subcommand("predict", "classify (D, beta) and print the predicted tail exponent");
  pred->add_option("--D", pred_flags.D, "queues sampled per arrival")->required();
  pred->add_option("--beta", pred_flags.beta, "service tail exponent");
  pred->add_option("--c1", pred_flags.c1, "lower tail constant");
  pred->add_option("--c2", pred_flags.c2, "upper tail constant");
  pred->add_option("--beta-from", pred_flags.beta_from, "grid start");
  pred->add_option("--beta-to", pred_flags.beta_to, "grid end (inclusive)");
  pred->add_option("--beta-step", pred_flags.beta_step, "grid step");
  pred->add_option("--format", pred_flags.format, "csv or text");

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit a tail model to a k,p,ci_low,ci_high CSV");
  fit->add_option("--input", fit_flags.input, "tail CSV")->required();
  fit->add_option("--model", fit_flags.model, "doubly-exponential|power-law|exponential")->required();
  fit->add_option("--base", fit_flags.options.base, "log base of the doubly-exponential model (D)");
  fit->add_option("--max-rel-ci", fit_flags.options.max_relative_ci, "drop levels with larger relative CI");
  fit->add_option("--k-min", fit_flags.k_min, "lowest level considered");
  fit->add_option("--k-max", fit_flags.k_max, "highest level considered");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_flags);
    if (cav->parsed()) return cmd_cavity(cav_flags);
    if (pred->parsed()) return cmd_predict(pred_flags);
    if (fit->parsed()) return cmd_fit(fit_flags);
  } catch (const jsq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
