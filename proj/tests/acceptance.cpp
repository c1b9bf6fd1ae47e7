// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "jsqlab/jsqlab.hpp"

using namespace jsq;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ServiceSpec kExp = make_spec(ServiceKind::exponential);

Outcome analytic_cross_validation() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int cases = 0;
  for (int D : {2, 3, 4}) {
    const double lo = analytic::critical_beta(D) + 0.1;
    for (double beta = lo + 0.05; beta < 10.0; beta += 0.1) {
      const int ell = static_cast<int>(std::floor(beta));
      const analytic::RecursionParams p{D, ell, beta - ell};
      const double a = analytic::q_root(p).q;
      const double b = analytic::recursion_growth(p, 500).q_estimate;
      worst = std::max(worst, std::abs(a - b));
      ++cases;
    }
  }
  const double t = seconds_since(t0);
  o.check(worst < 1e-6, fmt("max |q_root - recursion_growth| = %.2e over %d cases", worst, cases));
  o.check(t < 5.0, fmt("%.2f s", t));
  return o;
}

Outcome closed_form_values() {
  Outcome o;
  const double q3 = analytic::q_of_beta(2, 3.0);
  const double oracle = -std::log2((std::sqrt(5.0) - 1.0) / 2.0);
  o.check(std::abs(q3 - 0.6942419) < 1e-6 && std::abs(q3 - oracle) < 1e-12, fmt("q(2,3) = %.9f", q3));
  const double q25 = analytic::q_of_beta(2, 2.5);
  o.check(std::abs(q25 - 0.45) < 1e-3 && std::abs(q25 + std::log2(std::sqrt(3.0) - 1.0)) < 1e-12,
          fmt("q(2,2.5) = %.9f", q25));
  const double q40 = analytic::q_of_beta(2, 40.0);
  o.check(q40 > 0.999, fmt("q(2,40) = %.9f", q40));
  return o;
}

Outcome limit_tail_cavity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  FixedPointControls ctl;
  ctl.k_max = 32;
  ctl.cycles_per_iter = 100000;
  const auto r = fixed_point(kExp, 0.5, 2, ctl);
  o.check(r.converged, fmt("converged after %zu iterations", r.iterations));
  const double expected[] = {0.5, 0.125, 0.0078125};
  for (std::size_t k = 1; k <= 3; ++k) {
    const double p = r.estimate.p[k], hw = r.estimate.hw[k];
    o.check(std::abs(p - expected[k - 1]) <= 3.0 * hw, fmt("p[%zu] = %.6f +- %.6f", k, p, hw));
  }
  const double t = seconds_since(t0);
  o.check(t < 120.0, fmt("%.1f s", t));
  return o;
}

Outcome limit_tail_network() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  NetworkConfig c;
  c.N = 500;
  c.D = 2;
  c.alpha = 0.5;
  c.service = kExp;
  c.horizon = 20000.0;
  c.k_max = 16;
  c.seed = 2024;
  const auto est = run_network(c);
  o.check(std::abs(est.p[1] - 0.5) <= 3.0 * est.hw[1], fmt("p[1] = %.6f +- %.6f", est.p[1], est.hw[1]));
  o.check(std::abs(est.p[2] - 0.125) <= 3.0 * est.hw[2], fmt("p[2] = %.6f +- %.6f", est.p[2], est.hw[2]));
  o.check(est.p[3] >= 0.0078125 / 2 && est.p[3] <= 0.0078125 * 2, fmt("p[3] = %.6f", est.p[3]));
  const double t = seconds_since(t0);
  o.check(t < 300.0, fmt("%.1f s", t));
  return o;
}

struct RegimeRun {
  FixedPointReport report;
  double seconds = 0.0;
};

RegimeRun lomax_fixed_point(double beta, double alpha, std::uint64_t cycles, std::size_t k_max,
                            std::size_t iterations) {
  const auto t0 = std::chrono::steady_clock::now();
  FixedPointControls ctl;
  ctl.k_max = k_max;
  ctl.cycles_per_iter = cycles;
  ctl.max_iter = iterations;
  ctl.min_iter = iterations;
  ctl.seed = 11;
  ctl.cavity.cycle_time_cap = 1e12;
  RegimeRun run;
  run.report = fixed_point(make_spec(ServiceKind::lomax, beta), alpha, 2, ctl);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome regime_trichotomy() {
  Outcome o;
  {
    const auto run = lomax_fixed_point(1.4, 0.5, 10000000, 1000, 20);
    const auto fit = fit_tail(run.report.estimate, TailModel::power_law, FitOptions{.k_min = 10, .k_max = 100});
    o.check(fit.slope >= 0.45 && fit.slope <= 0.95,
            fmt("beta=1.4 power-law slope %.4f +- %.4f over k in [%zu,%zu] (nu = 0.6667)", fit.slope,
                1.96 * fit.slope_se, fit.k_lo, fit.k_hi));
    o.check(run.seconds < 600.0, fmt("%.0f s", run.seconds));
  }
  {
    const auto run = lomax_fixed_point(2.0, 0.9, 2000000, 300, 30);
    const FitOptions window{.k_min = 3};
    const auto dexp = fit_tail(run.report.estimate, TailModel::doubly_exponential, window);
    const auto power = fit_tail(run.report.estimate, TailModel::power_law, window);
    const auto expo = fit_tail(run.report.estimate, TailModel::exponential, window);
    o.check(expo.r2 > dexp.r2 && expo.r2 > power.r2,
            fmt("beta=2 R2 exponential %.5f, doubly-exponential %.5f, power-law %.5f over k in [%zu,%zu]", expo.r2,
                dexp.r2, power.r2, expo.k_lo, expo.k_hi));
    const double crit = stats::student_quantile(dexp.levels.size() - 2);
    o.check(std::abs(dexp.slope) <= crit * dexp.slope_se,
            fmt("beta=2 doubly-exponential slope %.4f +- %.4f", dexp.slope, crit * dexp.slope_se));
    o.check(run.seconds < 600.0, fmt("%.0f s", run.seconds));
  }
  {
    const auto run = lomax_fixed_point(3.0, 0.9, 2000000, 200, 30);
    const auto fit = fit_tail(run.report.estimate, TailModel::doubly_exponential);
    o.check(fit.slope >= 0.5 && fit.slope <= 0.9,
            fmt("beta=3 doubly-exponential slope %.4f +- %.4f over k in [%zu,%zu] (q = 0.6942)", fit.slope,
                1.96 * fit.slope_se, fit.k_lo, fit.k_hi));
    o.check(run.seconds < 600.0, fmt("%.0f s", run.seconds));
  }
  return o;
}

Outcome arrival_rate_bracket() {
  Outcome o;
  RngStream rng(606);
  auto random_env = [&](std::size_t k_max) {
    std::vector<double> p(k_max + 1, 1.0);
    for (std::size_t k = 1; k <= k_max; ++k) p[k] = p[k - 1] * rng.uniform();
    return TailVector(std::move(p));
  };
  int outside = 0;
  for (int i = 0; i < 1000; ++i) {
    const int D = 1 + static_cast<int>(rng.below(5));
    const auto env = random_env(12);
    const double alpha = rng.uniform();
    const std::size_t k = rng.below(13);
    const double r = effective_arrival_rate(env, k, alpha, D);
    const double base = alpha * std::pow(env.at(k), D - 1);
    if (r < base * (1 - 1e-12) || r > D * base * (1 + 1e-12)) ++outside;
  }
  o.check(outside == 0, fmt("%d of 1000 outside the bracket", outside));

  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int D = 2 + static_cast<int>(rng.below(4));
    const auto env = random_env(8);
    const std::size_t k = rng.below(5);
    const double alpha = 0.2 + 0.7 * rng.uniform();
    const int draws = 100000;
    double sum = 0.0;
    for (int n = 0; n < draws; ++n) {
      bool lower = false;
      int ties = 0;
      for (int j = 0; j < D - 1; ++j) {
        const double u = rng.uniform();
        std::size_t level = 0;
        while (u < env.at(level + 1)) ++level;
        if (level < k) lower = true;
        if (level == k) ++ties;
      }
      sum += lower ? 0.0 : D * alpha / (ties + 1);
    }
    const double mean = sum / draws;
    // Exact second moment of one draw: m ties among the D-1 comparisons.
    const double pk = env.at(k), pk1 = env.at(k + 1);
    double m2 = 0.0;
    for (int m = 0; m < D; ++m)
      m2 += std::tgamma(D) / (std::tgamma(m + 1) * std::tgamma(D - m)) * std::pow(pk - pk1, m) *
            std::pow(pk1, D - 1 - m) / ((m + 1.0) * (m + 1.0));
    m2 *= D * alpha * D * alpha;
    const double exact = effective_arrival_rate(env, k, alpha, D);
    const double se = std::sqrt(std::max(0.0, m2 - exact * exact) / draws);
    const double z = std::abs(mean - exact) / se;
    worst = std::max(worst, z);
  }
  o.check(worst <= 4.0, fmt("max |oracle - rate| = %.2f standard errors over 20 instances", worst));
  return o;
}

Outcome renewal_reward() {
  Outcome o;
  const auto env = TailVector::empty_above_zero(8);
  RngStream rng(707);
  const auto est = tail_from_cycles(simulate_cycles(env, kExp, 0.5, 2, 200000, rng));
  o.check(std::abs(est.p[1] - 1.0 / 3.0) <= 3.0 * est.hw[1], fmt("P1 = %.5f +- %.5f", est.p[1], est.hw[1]));
  const auto rt = measure_return_time(env, kExp, 0.5, 2, 3, 0.5, 100000, rng);
  o.check(std::abs(rt.mean - 2.5) <= 3.0 * rt.half_width, fmt("return time = %.4f +- %.4f", rt.mean, rt.half_width));
  return o;
}

Outcome bound_recursions() {
  Outcome o;
  std::vector<double> prefix;
  for (std::size_t k = 0; k <= 5; ++k) prefix.push_back(analytic::vdk_tail(0.5, 2, k));
  const double q = analytic::q_of_beta(2, 2.5);
  const auto up = analytic::iterate_bound_recursion(analytic::BoundMode::upper_3_6_3, 2, 2.5, {}, 60, prefix);
  const auto lo = analytic::iterate_bound_recursion(analytic::BoundMode::lower_3_1_6, 2, 2.5, {}, 60, prefix);
  const double u = analytic::normalized_double_log(up, 60, 2);
  const double l = analytic::normalized_double_log(lo, 60, 2);
  o.check(std::abs(u - 0.45) <= 0.02, fmt("upper-3.6.3 at k=60: %.4f (q = %.4f)", u, q));
  o.check(std::abs(l - 0.45) <= 0.02, fmt("lower-3.1.6 at k=60: %.4f", l));
  return o;
}

Outcome pair_dependence_decay() {
  Outcome o;
  NetworkConfig c;
  c.D = 2;
  c.alpha = 0.5;
  c.service = kExp;
  c.k_max = 8;
  c.seed = 99;
  c.N = 50;
  c.horizon = 20000.0;
  const auto small = pair_dependence(c, 1);
  c.N = 500;
  const auto large = pair_dependence(c, 1);
  o.check(std::abs(large.mean) < std::abs(small.mean),
          fmt("cov N=50: %.3e +- %.1e, N=500: %.3e +- %.1e", small.mean, small.half_width, large.mean,
              large.half_width));
  o.check(std::abs(large.mean) + large.half_width < std::abs(small.mean) - small.half_width,
          "confidence intervals separated");
  return o;
}

Outcome determinism_and_audits() {
  Outcome o;
  int audited = 0, failed = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    NetworkConfig c;
    c.N = 10 + static_cast<int>(seed * 7 % 90);
    c.D = 1 + static_cast<int>(seed % 3);
    c.alpha = 0.05 * static_cast<double>(seed % 19);
    c.service = seed % 2 ? kExp : make_spec(ServiceKind::lomax, 1.5 + 0.1 * static_cast<double>(seed % 10));
    c.horizon = 1000.0;
    c.seed = seed;
    const auto run = NetworkSimulator(c).run();
    ++audited;
    if (!conservation_audit(run).ok) ++failed;
  }
  o.check(failed == 0, fmt("%d of %d audits failed", failed, audited));

  auto net = config_from_text(R"({"mode": "network", "D": 2, "alpha": 0.7, "N": 40, "horizon": 2000,
    "service": {"kind": "lomax", "beta": 2.5}, "k_max": 20, "seed": 5, "replications": 8, "pair_levels": [1, 2]})");
  const auto a = run_simulate(net, 1);
  const auto b = run_simulate(net, 1);
  const auto w = run_simulate(net, 4);
  o.check(a.tail_csv == b.tail_csv && a.pairs_csv == b.pairs_csv, "network rerun byte-identical");
  o.check(a.tail_csv == w.tail_csv && a.pairs_csv == w.pairs_csv && a.sidecar["events"] == w.sidecar["events"],
          "network output independent of workers");

  auto cav = config_from_text(R"({"mode": "cavity", "D": 2, "alpha": 0.7, "service": {"kind": "lomax", "beta": 2.5},
    "k_max": 30, "cycles": 50000, "seed": 5})");
  const auto c1 = run_cavity(cav, 1);
  const auto c2 = run_cavity(cav, 1);
  const auto c4 = run_cavity(cav, 4);
  o.check(dump(c1.report_json) == dump(c2.report_json) && c1.tail_csv == c2.tail_csv, "cavity rerun byte-identical");
  o.check(dump(c1.report_json) == dump(c4.report_json), "cavity output independent of workers");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"analytic exponent cross-validation", analytic_cross_validation},
      {"closed-form spot values", closed_form_values},
      {"power-of-two tail, cavity route", limit_tail_cavity},
      {"power-of-two tail, network route", limit_tail_network},
      {"regime trichotomy", regime_trichotomy},
      {"arrival-rate bracket and comparison oracle", arrival_rate_bracket},
      {"renewal-reward micro-oracle", renewal_reward},
      {"bound-recursion asymptotics", bound_recursions},
      {"pair dependence decay", pair_dependence_decay},
      {"determinism and audits", determinism_and_audits},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
