#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "service.hpp"
#include "stats.hpp"
#include "tail.hpp"

namespace jsq {

/// Rate at which jobs join the cavity queue while it holds k jobs.
///
/// Potential arrivals come at rate D*alpha and are compared against D-1
/// independent comparison levels drawn from env. The job joins only if every
/// comparison level is >= k; with m of them equal to k it joins with
/// probability 1/(m+1). Summing over the binomial tie count gives
///
///   alpha_k = alpha * (P_k^D - P_{k+1}^D) / (P_k - P_{k+1})
///           = alpha * sum_{j=0}^{D-1} P_k^j P_{k+1}^{D-1-j},
///
/// and the second form also covers P_k = P_{k+1}. The result always lies in
/// [alpha P_k^{D-1}, alpha D P_k^{D-1}].
inline double effective_arrival_rate(const TailVector& env, std::size_t k, double alpha, int D) {
  if (D < 1) throw ConfigError("D must be >= 1");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  const double pk = env.at(k);
  const double pk1 = env.at(k + 1);
  double sum = 0.0;
  double a = 1.0;  // pk^j
  for (int j = 0; j < D; ++j) {
    sum += a * std::pow(pk1, D - 1 - j);
    a *= pk;
  }
  return alpha * sum;
}

/// Regenerative accumulators over cycles from empty back to empty.
struct CycleStats {
  std::uint64_t n_cycles = 0;
  std::uint64_t aborted = 0;
  double total_time = 0.0;
  double t2 = 0.0;
  /// v[k] = summed occupation time with >= k jobs, k = 0..k_max (v[0] = total_time).
  std::vector<double> v, v2, vt;
  std::size_t max_level = 0;

  explicit CycleStats(std::size_t k_max = 0) : v(k_max + 1, 0.0), v2(k_max + 1, 0.0), vt(k_max + 1, 0.0) {}

  std::size_t k_max() const noexcept { return v.size() - 1; }

  CycleStats& operator+=(const CycleStats& o) {
    if (o.v.size() != v.size()) throw ConfigError("cannot merge cycle stats with different k_max");
    n_cycles += o.n_cycles;
    aborted += o.aborted;
    total_time += o.total_time;
    t2 += o.t2;
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] += o.v[k];
      v2[k] += o.v2[k];
      vt[k] += o.vt[k];
    }
    max_level = std::max(max_level, o.max_level);
    return *this;
  }

  friend bool operator==(const CycleStats&, const CycleStats&) = default;
};

struct CavityControls {
  /// Cycles longer than this are aborted and counted in CycleStats::aborted.
  double cycle_time_cap = 1e6;
};

namespace detail {

inline std::vector<double> arrival_rates(const TailVector& env, double alpha, int D, std::size_t levels) {
  std::vector<double> rates(levels);
  for (std::size_t z = 0; z < levels; ++z) rates[z] = effective_arrival_rate(env, z, alpha, D);
  return rates;
}

/// Single-queue cavity dynamics with a frozen environment. Arrivals while at
/// level z come at rate alpha_z (memoryless, so redrawn after every event);
/// the head job departs when its residual service runs out.
class CavityQueue {
 public:
  CavityQueue(const TailVector& env, const ServiceSpec& service, double alpha, int D, double cap)
      : service_(service), cap_(cap) {
    // Beyond k_max + 1 the zero rule makes every rate 0; the geometric rule
    // needs rates further out, which are filled in lazily.
    env_ = &env;
    alpha_ = alpha;
    d_ = D;
    rates_ = arrival_rates(env, alpha, D, env.k_max() + 2);
  }

  double rate(std::size_t z) {
    while (z >= rates_.size()) rates_.push_back(effective_arrival_rate(*env_, rates_.size(), alpha_, d_));
    return rates_[z];
  }

  /// Runs from (z, residual) until the queue empties. Occupation time at each
  /// exact level is added to occ. Returns elapsed time, or a negative value if
  /// the cap was hit.
  double drain(std::size_t z, double residual, RngStream& rng, std::vector<double>& occ, std::size_t& top) {
    double elapsed = 0.0;
    while (z > 0) {
      if (z >= occ.size()) occ.resize(z + 1, 0.0);
      top = std::max(top, z);
      const double a = rng.exponential(rate(z));
      if (a < residual) {
        occ[z] += a;
        elapsed += a;
        residual -= a;
        ++z;
      } else {
        occ[z] += residual;
        elapsed += residual;
        --z;
        if (z > 0) residual = service_.sample(rng);
      }
      if (elapsed > cap_) return -1.0;
    }
    return elapsed;
  }

 private:
  const TailVector* env_;
  const ServiceSpec& service_;
  double alpha_;
  int d_;
  double cap_;
  std::vector<double> rates_;
};

}  // namespace detail

/// Simulates n_cycles regeneration cycles of the cavity process driven by env.
/// Each cycle starts empty, waits Exp(alpha_0) for the first job and ends
/// when the queue next empties.
inline CycleStats simulate_cycles(const TailVector& env, const ServiceSpec& service, double alpha, int D,
                                  std::uint64_t n_cycles, RngStream& rng, CavityControls controls = {}) {
  if (n_cycles < 1) throw ConfigError("simulate_cycles: n_cycles must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (D < 1) throw ConfigError("D must be >= 1");
  const std::size_t k_max = env.k_max();
  detail::CavityQueue queue(env, service, alpha, D, controls.cycle_time_cap);
  CycleStats stats(k_max);
  std::vector<double> occ(k_max + 2, 0.0);
  std::vector<double> cycle_v(k_max + 1, 0.0);

  for (std::uint64_t c = 0; c < n_cycles; ++c) {
    std::size_t top = 0;
    const double idle = rng.exponential(queue.rate(0));
    const double busy = queue.drain(1, service.sample(rng), rng, occ, top);
    if (busy < 0.0 || !std::isfinite(idle)) {
      ++stats.aborted;
      std::fill(occ.begin(), occ.begin() + static_cast<std::ptrdiff_t>(std::min(occ.size(), top + 1)), 0.0);
      continue;
    }
    const double nu = idle + busy;
    // V_k for this cycle is the suffix sum of exact-level occupation.
    const std::size_t hi = std::min(top, k_max);
    double suffix = 0.0;
    for (std::size_t j = top; j > hi; --j) suffix += occ[j];
    for (std::size_t k = hi; k >= 1; --k) {
      suffix += occ[k];
      cycle_v[k] = suffix;
    }
    cycle_v[0] = nu;

    ++stats.n_cycles;
    stats.total_time += nu;
    stats.t2 += nu * nu;
    for (std::size_t k = 0; k <= hi; ++k) {
      stats.v[k] += cycle_v[k];
      stats.v2[k] += cycle_v[k] * cycle_v[k];
      stats.vt[k] += cycle_v[k] * nu;
    }
    stats.max_level = std::max(stats.max_level, top);
    std::fill(occ.begin(), occ.begin() + static_cast<std::ptrdiff_t>(top + 1), 0.0);
  }
  return stats;
}

/// Chunked variant: cycles are split into `chunks` fixed blocks, block i
/// drawing from derive_seed(seed, i). Blocks are merged in index order, so
/// the result does not depend on `workers`.
inline CycleStats simulate_cycles_chunked(const TailVector& env, const ServiceSpec& service, double alpha, int D,
                                          std::uint64_t n_cycles, std::uint64_t seed, std::size_t chunks,
                                          std::size_t workers, CavityControls controls = {}) {
  if (n_cycles < 1) throw ConfigError("simulate_cycles: n_cycles must be >= 1");
  chunks = std::clamp<std::size_t>(chunks, 1, n_cycles);
  std::vector<CycleStats> parts(chunks);
  parallel_for_index(chunks, workers, [&](std::size_t i) {
    const std::uint64_t lo = n_cycles * i / chunks;
    const std::uint64_t hi = n_cycles * (i + 1) / chunks;
    RngStream rng(derive_seed(seed, i));
    parts[i] = simulate_cycles(env, service, alpha, D, hi - lo, rng, controls);
  });
  CycleStats total(env.k_max());
  for (const auto& p : parts) total += p;
  return total;
}

/// Regenerative ratio estimator P_k = sum V_k / sum nu with a delta-method
/// 95% half-width. Levels never visited get P_k = 0 and a rule-of-three
/// upper limit 3/n (capped by the level above).
inline TailEstimate tail_from_cycles(const CycleStats& stats) {
  if (stats.n_cycles < 2) throw ConfigError("tail_from_cycles needs at least 2 cycles");
  const std::size_t levels = stats.v.size();
  const double n = static_cast<double>(stats.n_cycles);
  const double mean_nu = stats.total_time / n;
  const double z = stats::normal_quantile();
  TailEstimate est;
  est.resize(levels);
  est.method = TailEstimate::Method::regenerative;
  est.measurement_time = stats.total_time;
  for (std::size_t k = 0; k < levels; ++k) {
    if (stats.v[k] <= 0.0) continue;
    const double r = stats.v[k] / stats.total_time;
    // sum over cycles of (V - r nu)^2
    const double ss = std::max(0.0, stats.v2[k] - 2.0 * r * stats.vt[k] + r * r * stats.t2);
    est.p[k] = r;
    est.hw[k] = z * std::sqrt(ss / (n - 1.0) / n) / mean_nu;
  }
  est.p[0] = 1.0;
  est.hw[0] = 0.0;
  est.isotonic_applied = enforce_monotone(est.p);
  est.close_intervals();
  for (std::size_t k = 1; k < levels; ++k) {
    if (est.p[k] == 0.0) {
      est.hw[k] = 0.0;
      est.ci_low[k] = 0.0;
      est.ci_high[k] = std::min(3.0 / n, est.ci_high[k - 1]);
    }
  }
  return est;
}

struct FixedPointControls {
  std::size_t k_max = 64;
  std::uint64_t cycles_per_iter = 100000;
  /// Log-space damping weight on the new estimate; 1 is undamped.
  double damping = 1.0;
  /// Convergence threshold on sup_k |log p_new - log p_old|.
  double tol = 0.05;
  std::size_t max_iter = 50;
  std::size_t min_iter = 2;
  /// Only levels whose relative CI half-width is below this enter the distance.
  double noise_threshold = 0.05;
  std::uint64_t seed = 1;
  std::size_t chunks = 16;
  std::size_t workers = 1;
  double log_floor = 1e-300;
  /// Extend the environment geometrically past the last level whose relative
  /// CI is below frontier_threshold, so the support is not truncated to what
  /// one iteration happened to visit.
  bool carry_frontier = true;
  double frontier_threshold = 0.3;
  CavityControls cavity;

  void validate() const {
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
    if (cycles_per_iter < 2) throw ConfigError("cycles_per_iter must be >= 2");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(noise_threshold > 0.0)) throw ConfigError("noise_threshold must be positive");
    if (!(frontier_threshold > 0.0)) throw ConfigError("frontier_threshold must be positive");
    if (!(cavity.cycle_time_cap > 0.0)) throw ConfigError("cycle_time_cap must be positive");
  }
};

struct FixedPointReport {
  TailVector env = TailVector::empty_above_zero(1);
  /// CIs from the last iteration's estimate (zero width if no iteration ran).
  TailEstimate estimate;
  std::vector<double> distances;
  std::size_t iterations = 0;
  bool converged = false;
  std::uint64_t cycles_per_iter = 0;
  std::size_t max_level_visited = 0;
};

/// Iterates env <- T(env), where T runs the cavity process with environment
/// env and returns its regenerative tail estimate. Starts from alpha^k.
inline FixedPointReport fixed_point(const ServiceSpec& service, double alpha, int D, const FixedPointControls& ctl) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (D < 2) throw ConfigError("fixed_point requires D >= 2");
  ctl.validate();

  FixedPointReport report;
  report.cycles_per_iter = ctl.cycles_per_iter;
  report.env = TailVector::geometric(alpha, ctl.k_max);
  report.estimate.resize(ctl.k_max + 1);
  report.estimate.p = report.env.values();
  report.estimate.close_intervals();

  const double log_floor = std::log(ctl.log_floor);
  auto safe_log = [&](double p) { return p > ctl.log_floor ? std::log(p) : log_floor; };

  for (std::size_t it = 0; it < ctl.max_iter; ++it) {
    const CycleStats stats = simulate_cycles_chunked(report.env, service, alpha, D, ctl.cycles_per_iter,
                                                     derive_seed(ctl.seed, it), ctl.chunks, ctl.workers, ctl.cavity);
    if (stats.aborted > 0)
      throw SimulationError("cavity cycle exceeded the time cap (" + std::to_string(stats.aborted) + " aborted)");
    const TailEstimate est = tail_from_cycles(stats);
    report.max_level_visited = std::max(report.max_level_visited, stats.max_level);

    const auto& old = report.env.values();
    // Continue the tail geometrically past the last precisely estimated level.
    std::vector<double> target = est.p;
    if (ctl.carry_frontier) {
      std::size_t m = 0;
      while (m < ctl.k_max && est.p[m + 1] > 0.0 && est.hw[m + 1] < ctl.frontier_threshold * est.p[m + 1]) ++m;
      if (m >= 1 && m < ctl.k_max) {
        const std::size_t w = std::min<std::size_t>(5, m);
        const double ratio = std::min(1.0, std::pow(est.p[m] / est.p[m - w], 1.0 / static_cast<double>(w)));
        for (std::size_t k = m + 1; k <= ctl.k_max; ++k) target[k] = target[k - 1] * ratio;
      }
    }
    std::vector<double> next(old.size());
    double distance = 0.0;
    for (std::size_t k = 0; k < old.size(); ++k) {
      const double lo = safe_log(old[k]);
      const double mixed = (1.0 - ctl.damping) * lo + ctl.damping * safe_log(target[k]);
      next[k] = mixed <= log_floor ? 0.0 : std::exp(mixed);
      const bool precise = est.p[k] > 0.0 && est.hw[k] < ctl.noise_threshold * est.p[k];
      if (precise) distance = std::max(distance, std::abs(safe_log(next[k]) - lo));
    }
    next[0] = 1.0;
    enforce_monotone(next);
    report.env = TailVector(std::move(next), report.env.rule());
    report.estimate = est;
    report.distances.push_back(distance);
    report.iterations = it + 1;
    if (report.iterations >= ctl.min_iter && distance < ctl.tol) {
      report.converged = true;
      break;
    }
  }
  return report;
}

/// Mean time for the cavity queue to empty, started with k jobs and head
/// residual s. A residual of 0 means the head job departs immediately.
inline stats::MeanCI measure_return_time(const TailVector& env, const ServiceSpec& service, double alpha, int D,
                                         std::size_t k, double s, std::uint64_t n_reps, RngStream& rng,
                                         CavityControls controls = {}) {
  if (k < 1) throw ConfigError("measure_return_time: k must be >= 1");
  if (!(s >= 0.0)) throw ConfigError("measure_return_time: s must be nonnegative");
  if (n_reps < 2) throw ConfigError("measure_return_time: n_reps must be >= 2");
  detail::CavityQueue queue(env, service, alpha, D, controls.cycle_time_cap);
  std::vector<double> occ(env.k_max() + 2, 0.0);
  std::vector<double> times;
  times.reserve(n_reps);
  for (std::uint64_t r = 0; r < n_reps; ++r) {
    std::size_t top = 0;
    double t = 0.0;
    if (s > 0.0) {
      t = queue.drain(k, s, rng, occ, top);
    } else if (k > 1) {
      t = queue.drain(k - 1, service.sample(rng), rng, occ, top);
    }
    if (t < 0.0) throw SimulationError("return-time replication exceeded the time cap");
    times.push_back(t);
    std::fill(occ.begin(), occ.end(), 0.0);
  }
  return stats::mean_ci(times);
}

}  // namespace jsq
