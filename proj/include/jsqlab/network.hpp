#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "service.hpp"
#include "stats.hpp"
#include "tail.hpp"

namespace jsq {

/// Each batch of the measurement window must span at least this many mean
/// service times.
inline constexpr double kMinBatchLength = 10.0;

struct NetworkConfig {
  int N = 100;
  /// Number of queues sampled per arrival; D = 1 gives independent M/G/1 queues.
  int D = 2;
  /// Arrival rate per queue; total arrival rate is alpha * N.
  double alpha = 0.5;
  ServiceSpec service;
  double horizon = 1e4;
  double warmup_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t k_max = 64;
  std::size_t batches = 20;
  /// Nonzero: queue indices drawn by the sampler are mapped through a fixed
  /// random relabeling. Used to check exchangeability.
  std::uint64_t relabel_seed = 0;

  double batch_length() const noexcept {
    return horizon * (1.0 - warmup_fraction) / static_cast<double>(batches);
  }

  void validate() const {
    if (D < 1) throw ConfigError("D must be >= 1");
    if (N < D) throw ConfigError("D must not exceed N (D=" + std::to_string(D) + ", N=" + std::to_string(N) + ")");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in [0, 1)");
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
    if (batches < 2) throw ConfigError("at least 2 batches are required");
    if (batch_length() < kMinBatchLength)
      throw ConfigError("horizon too short for " + std::to_string(batches) + " batches (batch length " +
                        std::to_string(batch_length()) + " < " + std::to_string(kMinBatchLength) + ")");
  }
};

/// Everything a completed run leaves behind: per-batch time integrals plus the
/// final state needed by the conservation audit.
struct NetworkRun {
  NetworkConfig config;
  double batch_length = 0.0;
  /// [batch][k] integral of c[k] = #{queues with length >= k}, k = 0..k_max.
  std::vector<std::vector<double>> level_area;
  /// [batch][k] integral of c[k] * (c[k] - 1).
  std::vector<std::vector<double>> pair_area;
  /// [batch] integral of the total number of jobs.
  std::vector<double> jobs_area;

  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t events = 0;
  /// Final per-queue lengths and head-completion times (+inf when idle).
  std::vector<int> lengths;
  std::vector<double> head_completion;
  /// Final incrementally maintained level counts c[0..].
  std::vector<std::int64_t> level_counts;
  int max_length = 0;
  /// FNV-1a digest of the processed event sequence.
  std::uint64_t trace_hash = 0;
};

struct AuditReport {
  bool ok = true;
  bool jobs_balance = true;
  bool levels_match = true;
  bool calendar_consistent = true;
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t in_system = 0;
  std::string detail;
};

/// Discrete-event simulation of N FIFO queues fed by one Poisson(alpha N)
/// stream. Each arrival samples D distinct queues uniformly (partial
/// Fisher-Yates) and joins a shortest one, ties split uniformly.
///
/// Only queue lengths are stored: the head job's service time is drawn when
/// it enters service, which has the same law as carrying it from arrival.
class NetworkSimulator {
 public:
  explicit NetworkSimulator(NetworkConfig config) : config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
  }

  NetworkRun run() {
    init();
    const double inf = std::numeric_limits<double>::infinity();
    const double total_rate = config_.alpha * config_.N;
    double next_arrival = rng_.exponential(total_rate);

    while (true) {
      const double next_departure = calendar_.empty() ? inf : calendar_.top().time;
      const double t = std::min(next_arrival, next_departure);
      if (!(t <= config_.horizon)) break;
      advance_to(t);
      if (next_arrival <= next_departure) {
        on_arrival(t);
        next_arrival = t + rng_.exponential(total_rate);
      } else {
        const Completion done = calendar_.top();
        calendar_.pop();
        on_departure(t, done.queue);
      }
    }
    advance_to(config_.horizon);
    return finish();
  }

 private:
  struct Completion {
    double time;
    std::uint64_t seq;
    int queue;
    // min-heap on (time, seq)
    bool operator<(const Completion& o) const noexcept {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  void init() {
    const auto n = static_cast<std::size_t>(config_.N);
    lengths_.assign(n, 0);
    head_completion_.assign(n, std::numeric_limits<double>::infinity());
    service_start_.assign(n, 0.0);
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), 0);
    label_.resize(n);
    std::iota(label_.begin(), label_.end(), 0);
    if (config_.relabel_seed != 0) {
      RngStream relabel(config_.relabel_seed);
      std::shuffle(label_.begin(), label_.end(), relabel.engine());
    }
    counts_.assign(2, 0);
    counts_[0] = config_.N;

    const std::size_t levels = config_.k_max + 1;
    area_.assign(levels, 0.0);
    pair_.assign(levels, 0.0);
    last_.assign(levels, 0.0);
    jobs_ = 0;
    jobs_acc_ = 0.0;
    jobs_last_ = 0.0;

    warmup_end_ = config_.horizon * config_.warmup_fraction;
    batch_length_ = config_.batch_length();
    batch_ = -1;
    next_boundary_ = warmup_end_;

    out_ = NetworkRun{};
    out_.config = config_;
    out_.batch_length = batch_length_;
    out_.trace_hash = 0xcbf29ce484222325ULL;
    seq_ = 0;
    calendar_ = {};
  }

  double boundary(std::ptrdiff_t batch) const noexcept {
    const auto b = static_cast<std::size_t>(batch);
    if (b + 1 == config_.batches) return config_.horizon;
    return warmup_end_ + static_cast<double>(b + 1) * batch_length_;
  }

  // Close every segment boundary at or before t.
  void advance_to(double t) {
    while (batch_ < static_cast<std::ptrdiff_t>(config_.batches) && t >= next_boundary_) {
      close_segment(next_boundary_);
      ++batch_;
      if (batch_ < static_cast<std::ptrdiff_t>(config_.batches)) next_boundary_ = boundary(batch_);
    }
  }

  void close_segment(double tb) {
    for (std::size_t k = 0; k < area_.size(); ++k) flush_level(k, tb);
    jobs_acc_ += static_cast<double>(jobs_) * (tb - jobs_last_);
    jobs_last_ = tb;
    if (batch_ >= 0) {
      out_.level_area.push_back(area_);
      out_.pair_area.push_back(pair_);
      out_.jobs_area.push_back(jobs_acc_);
    }
    std::fill(area_.begin(), area_.end(), 0.0);
    std::fill(pair_.begin(), pair_.end(), 0.0);
    jobs_acc_ = 0.0;
  }

  void flush_level(std::size_t k, double t) {
    const double c = static_cast<double>(level(k));
    const double dt = t - last_[k];
    area_[k] += c * dt;
    pair_[k] += c * (c - 1.0) * dt;
    last_[k] = t;
  }

  std::int64_t level(std::size_t k) const noexcept { return k < counts_.size() ? counts_[k] : 0; }

  void change_level(std::size_t k, int delta, double t) {
    if (k < area_.size()) flush_level(k, t);
    if (k >= counts_.size()) counts_.resize(k + 1, 0);
    counts_[k] += delta;
  }

  void change_jobs(int delta, double t) {
    jobs_acc_ += static_cast<double>(jobs_) * (t - jobs_last_);
    jobs_last_ = t;
    jobs_ += delta;
  }

  void trace(double t, int type, int queue) noexcept {
    std::uint64_t bits;
    std::memcpy(&bits, &t, sizeof bits);
    for (std::uint64_t word : {bits, static_cast<std::uint64_t>(type), static_cast<std::uint64_t>(queue)}) {
      for (int i = 0; i < 8; ++i) {
        out_.trace_hash ^= (word >> (8 * i)) & 0xFF;
        out_.trace_hash *= 0x100000001b3ULL;
      }
    }
  }

  void start_service(int q, double t) {
    const double s = config_.service.sample(rng_);
    head_completion_[static_cast<std::size_t>(q)] = t + s;
    service_start_[static_cast<std::size_t>(q)] = t;
    calendar_.push({t + s, seq_++, q});
  }

  void on_arrival(double t) {
    ++out_.arrivals;
    ++out_.events;
    const auto n = static_cast<std::uint64_t>(config_.N);
    int best = -1;
    int best_len = INT_MAX;
    std::uint64_t ties = 0;
    for (int i = 0; i < config_.D; ++i) {
      const auto ui = static_cast<std::uint64_t>(i);
      const std::uint64_t j = ui + rng_.below(n - ui);
      std::swap(perm_[ui], perm_[j]);
      const int q = label_[static_cast<std::size_t>(perm_[ui])];
      const int len = lengths_[static_cast<std::size_t>(q)];
      if (len < best_len) {
        best = q;
        best_len = len;
        ties = 1;
      } else if (len == best_len) {
        ++ties;
        if (rng_.below(ties) == 0) best = q;
      }
    }
    const int len = ++lengths_[static_cast<std::size_t>(best)];
    out_.max_length = std::max(out_.max_length, len);
    change_level(static_cast<std::size_t>(len), +1, t);
    change_jobs(+1, t);
    trace(t, 0, best);
    if (len == 1) start_service(best, t);
  }

  void on_departure(double t, int q) {
    ++out_.departures;
    ++out_.events;
    const auto uq = static_cast<std::size_t>(q);
    const int old_len = lengths_[uq]--;
    change_level(static_cast<std::size_t>(old_len), -1, t);
    change_jobs(-1, t);
    trace(t, 1, q);
    if (lengths_[uq] > 0) {
      start_service(q, t);
    } else {
      head_completion_[uq] = std::numeric_limits<double>::infinity();
    }
  }

  NetworkRun finish() {
    out_.lengths = lengths_;
    out_.head_completion = head_completion_;
    out_.level_counts = counts_;
    return std::move(out_);
  }

  NetworkConfig config_;
  RngStream rng_;

  std::vector<int> lengths_;
  std::vector<double> head_completion_;
  // Elapsed-service origin per queue; carried but never consumed.
  std::vector<double> service_start_;
  std::vector<int> perm_;
  std::vector<int> label_;
  std::vector<std::int64_t> counts_;
  std::priority_queue<Completion> calendar_;
  std::uint64_t seq_ = 0;

  std::vector<double> area_, pair_, last_;
  std::int64_t jobs_ = 0;
  double jobs_acc_ = 0.0, jobs_last_ = 0.0;

  double warmup_end_ = 0.0;
  double batch_length_ = 0.0;
  std::ptrdiff_t batch_ = -1;
  double next_boundary_ = 0.0;

  NetworkRun out_;
};

/// Bookkeeping identities every run must satisfy.
inline AuditReport conservation_audit(const NetworkRun& run) {
  AuditReport r;
  r.arrivals = run.arrivals;
  r.departures = run.departures;
  for (int len : run.lengths) r.in_system += static_cast<std::uint64_t>(len);
  r.jobs_balance = r.arrivals == r.departures + r.in_system;
  if (!r.jobs_balance) r.detail += "arrivals != departures + in-system; ";

  std::vector<std::int64_t> rebuilt(run.level_counts.size(), 0);
  for (int len : run.lengths) {
    if (static_cast<std::size_t>(len) >= rebuilt.size()) rebuilt.resize(static_cast<std::size_t>(len) + 1, 0);
    for (int j = 0; j <= len; ++j) ++rebuilt[static_cast<std::size_t>(j)];
  }
  std::vector<std::int64_t> counted = run.level_counts;
  counted.resize(std::max(counted.size(), rebuilt.size()), 0);
  rebuilt.resize(counted.size(), 0);
  r.levels_match = counted == rebuilt;
  if (!r.levels_match) r.detail += "level counts differ from rebuilt counts; ";

  for (std::size_t q = 0; q < run.lengths.size(); ++q) {
    const bool busy = run.lengths[q] >= 1;
    const bool scheduled = std::isfinite(run.head_completion[q]);
    if (busy != scheduled) {
      r.calendar_consistent = false;
      r.detail += "queue " + std::to_string(q) + " head-completion mismatch; ";
      break;
    }
  }
  r.ok = r.jobs_balance && r.levels_match && r.calendar_consistent;
  return r;
}

/// Audit and throw SimulationError on any mismatch.
inline void require_audit(const NetworkRun& run) {
  const AuditReport r = conservation_audit(run);
  if (!r.ok) throw SimulationError("conservation audit failed: " + r.detail);
}

inline NetworkRun simulate_network(const NetworkConfig& config) {
  NetworkRun run = NetworkSimulator(config).run();
  require_audit(run);
  return run;
}

/// Batch-means tail estimate p[k] = time-average of c[k] / N.
inline TailEstimate estimate_tail(const NetworkRun& run) {
  const std::size_t levels = run.config.k_max + 1;
  const std::size_t batches = run.level_area.size();
  const double norm = static_cast<double>(run.config.N) * run.batch_length;
  TailEstimate est;
  est.resize(levels);
  est.method = TailEstimate::Method::batch_means;
  est.measurement_time = run.batch_length * static_cast<double>(batches);
  std::vector<double> xs(batches);
  for (std::size_t k = 0; k < levels; ++k) {
    for (std::size_t b = 0; b < batches; ++b) xs[b] = run.level_area[b][k] / norm;
    const auto ci = stats::mean_ci(xs);
    est.p[k] = ci.mean;
    est.hw[k] = ci.half_width;
  }
  est.p[0] = 1.0;
  est.hw[0] = 0.0;
  est.isotonic_applied = enforce_monotone(est.p);
  est.close_intervals();
  return est;
}

inline TailEstimate run_network(const NetworkConfig& config) { return estimate_tail(simulate_network(config)); }

/// Time-averaged Cov(1{Z^1 >= k}, 1{Z^2 >= k}) for a pair of distinct queues.
/// By exchangeability every pair has the same covariance, so the product term
/// is averaged over all ordered pairs: c(c-1) / (N(N-1)).
inline stats::MeanCI pair_dependence(const NetworkRun& run, std::size_t k) {
  if (k > run.config.k_max) throw ConfigError("pair_dependence: level beyond k_max");
  if (run.config.N < 2) throw ConfigError("pair_dependence needs N >= 2");
  const double n = static_cast<double>(run.config.N);
  const double len = run.batch_length;
  std::vector<double> xs;
  xs.reserve(run.level_area.size());
  for (std::size_t b = 0; b < run.level_area.size(); ++b) {
    const double p = run.level_area[b][k] / (n * len);
    const double pp = run.pair_area[b][k] / (n * (n - 1.0) * len);
    xs.push_back(pp - p * p);
  }
  return stats::mean_ci(xs);
}

inline stats::MeanCI pair_dependence(const NetworkConfig& config, std::size_t k) {
  return pair_dependence(simulate_network(config), k);
}

/// Time-averaged number of jobs per queue.
inline stats::MeanCI mean_jobs_per_queue(const NetworkRun& run) {
  std::vector<double> xs;
  for (double a : run.jobs_area) xs.push_back(a / (static_cast<double>(run.config.N) * run.batch_length));
  return stats::mean_ci(xs);
}

/// Replication r uses derive_seed(config.seed, r); a single replication uses
/// config.seed itself.
inline std::uint64_t replication_seed(std::uint64_t base, std::size_t index, std::size_t replications) {
  return replications == 1 ? base : derive_seed(base, index);
}

inline std::vector<NetworkRun> simulate_replications(const NetworkConfig& config, std::size_t replications,
                                                     std::size_t workers) {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  config.validate();
  std::vector<NetworkRun> runs(replications);
  parallel_for_index(replications, workers, [&](std::size_t r) {
    NetworkConfig c = config;
    c.seed = replication_seed(config.seed, r, replications);
    runs[r] = simulate_network(c);
  });
  return runs;
}

/// Average of replication-level estimates; half-widths combine as
/// sqrt(sum hw^2) / R.
inline TailEstimate merge_estimates(const std::vector<TailEstimate>& parts) {
  if (parts.empty()) throw ConfigError("nothing to merge");
  if (parts.size() == 1) return parts.front();
  const std::size_t levels = parts.front().p.size();
  const double r = static_cast<double>(parts.size());
  TailEstimate out;
  out.resize(levels);
  out.method = TailEstimate::Method::merged;
  for (const auto& e : parts) {
    if (e.p.size() != levels) throw ConfigError("cannot merge estimates with different k_max");
    out.measurement_time += e.measurement_time;
    for (std::size_t k = 0; k < levels; ++k) {
      out.p[k] += e.p[k];
      out.hw[k] += e.hw[k] * e.hw[k];
    }
  }
  for (std::size_t k = 0; k < levels; ++k) {
    out.p[k] /= r;
    out.hw[k] = std::sqrt(out.hw[k]) / r;
  }
  out.isotonic_applied = enforce_monotone(out.p);
  out.close_intervals();
  return out;
}

}  // namespace jsq
