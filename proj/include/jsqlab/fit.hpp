#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "stats.hpp"
#include "tail.hpp"

namespace jsq {

enum class TailModel { doubly_exponential, power_law, exponential };

inline std::string_view to_string(TailModel m) {
  switch (m) {
    case TailModel::doubly_exponential: return "doubly-exponential";
    case TailModel::power_law: return "power-law";
    case TailModel::exponential: return "exponential";
  }
  return "unknown";
}

inline TailModel parse_tail_model(std::string_view s) {
  if (s == "doubly-exponential") return TailModel::doubly_exponential;
  if (s == "power-law") return TailModel::power_law;
  if (s == "exponential") return TailModel::exponential;
  throw ConfigError("unknown tail model '" + std::string(s) + "'");
}

struct FitOptions {
  /// Log base for the doubly-exponential model (the D of q_D).
  double base = 2.0;
  /// Levels whose CI half-width exceeds this fraction of p are dropped.
  double max_relative_ci = 0.3;
  std::optional<std::size_t> k_min, k_max;
};

struct TailFit {
  TailModel model = TailModel::exponential;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
  std::size_t k_lo = 0, k_hi = 0;
  std::vector<std::size_t> levels;
  std::vector<double> weights;

  friend bool operator==(const TailFit&, const TailFit&) = default;
};

/// Tail rows as read from or written to the `k,p,ci_low,ci_high` CSV.
struct TailRows {
  std::vector<std::size_t> k;
  std::vector<double> p, ci_low, ci_high;

  static TailRows from(const TailEstimate& e) {
    TailRows r;
    for (std::size_t k = 0; k < e.p.size(); ++k) {
      r.k.push_back(k);
      r.p.push_back(e.p[k]);
      r.ci_low.push_back(e.ci_low[k]);
      r.ci_high.push_back(e.ci_high[k]);
    }
    return r;
  }
};

namespace detail {

// Transformed coordinates (x, y) and dy/dp for a model.
struct Coordinates {
  double x, y, dy_dp;
};

inline std::optional<Coordinates> transform(TailModel model, std::size_t k, double p, double base) {
  if (k == 0 || !(p > 0.0) || !(p < 1.0)) return std::nullopt;
  const double kd = static_cast<double>(k);
  const double inv = -std::log(p);  // log(1/p) > 0
  switch (model) {
    case TailModel::doubly_exponential:
      return Coordinates{kd, std::log(inv) / std::log(base), -1.0 / (p * inv * std::log(base))};
    case TailModel::power_law:
      return Coordinates{std::log(kd), inv, -1.0 / p};
    case TailModel::exponential:
      return Coordinates{kd, inv, -1.0 / p};
  }
  return std::nullopt;
}

}  // namespace detail

/// Weighted least squares of the model's transformed tail against its level
/// coordinate:
///   doubly-exponential  log_base log(1/p) vs k   (slope ~ q)
///   power-law           log(1/p) vs log k        (slope ~ nu)
///   exponential         log(1/p) vs k            (slope ~ rate)
/// Weights are inverse delta-method variances from the CI half-widths; if any
/// retained level has a zero-width interval all weights are 1.
inline TailFit fit_tail(const TailRows& rows, TailModel model, const FitOptions& opt = {}) {
  if (!(opt.base > 1.0)) throw ConfigError("fit base must exceed 1");
  TailFit fit;
  fit.model = model;
  std::vector<double> xs, ys, var;
  bool all_positive = true;
  std::string usable;
  for (std::size_t i = 0; i < rows.k.size(); ++i) {
    const std::size_t k = rows.k[i];
    if (opt.k_min && k < *opt.k_min) continue;
    if (opt.k_max && k > *opt.k_max) continue;
    const double p = rows.p[i];
    const double hw = 0.5 * (rows.ci_high[i] - rows.ci_low[i]);
    if (!(p > 0.0) || hw >= opt.max_relative_ci * p) continue;
    const auto c = detail::transform(model, k, p, opt.base);
    if (!c) continue;
    xs.push_back(c->x);
    ys.push_back(c->y);
    const double sd = std::abs(c->dy_dp) * hw / stats::normal_quantile();
    var.push_back(sd * sd);
    if (!(sd > 0.0)) all_positive = false;
    fit.levels.push_back(k);
    usable += (usable.empty() ? "" : ",") + std::to_string(k);
  }
  if (xs.size() < 4)
    throw InsufficientDataError("fit_tail: need at least 4 usable levels, have " + std::to_string(xs.size()) +
                                " [" + usable + "]");

  const std::size_t n = xs.size();
  fit.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.weights[i] = all_positive ? 1.0 / var[i] : 1.0;

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += fit.weights[i];
    sx += fit.weights[i] * xs[i];
    sy += fit.weights[i] * ys[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += fit.weights[i] * dx * dx;
    sxy += fit.weights[i] * dx * dy;
    syy += fit.weights[i] * dy * dy;
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("fit_tail: usable levels have no spread");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += fit.weights[i] * r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  fit.k_lo = fit.levels.front();
  fit.k_hi = fit.levels.back();
  return fit;
}

inline TailFit fit_tail(const TailEstimate& est, TailModel model, const FitOptions& opt = {}) {
  return fit_tail(TailRows::from(est), model, opt);
}

}  // namespace jsq
