#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace jsq::analytic {

/// Window parameters of the linear recursion
///   R_k = (D-1) (R_{k-l+1} + ... + R_{k-1} + eta R_{k-l}),  R_k = 1 for k <= 0.
/// Its growth exponent belongs to the tail exponent beta = l + eta - 1 of the
/// recursion itself; a service tail exponent beta maps to l = floor(beta),
/// eta = frac(beta) (see q_of_beta).
struct RecursionParams {
  int D = 2;
  int ell = 2;
  double eta = 0.0;

  double recursion_beta() const noexcept { return ell + eta - 1.0; }

  void validate() const {
    if (D < 2) throw ConfigError("recursion requires D >= 2");
    if (ell < 1) throw ConfigError("recursion window ell must be >= 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  }
};

struct RootResult {
  double x_star = 0.0;
  double q = 0.0;
  double residual = 0.0;
};

/// h(x) = (D-1)(x + x^2 + ... + x^{l-1} + eta x^l) - 1, strictly increasing on (0, 1).
inline double characteristic(const RecursionParams& p, double x) {
  double sum = 0.0;
  double pw = 1.0;
  for (int i = 1; i < p.ell; ++i) {
    pw *= x;
    sum += pw;
  }
  sum += p.eta * pw * x;
  return (p.D - 1) * sum - 1.0;
}

/// Dominant root of the recursion, as x* = 1/gamma_1 in (1/D, 1), found by
/// bisection on the sum form of the characteristic equation. q = log_D(1/x*).
///
/// The polynomial form D x - 1 = (D-1)((1-eta) x^l + eta x^{l+1}) has an
/// extra root at x = 1, so bracketing is done on h instead.
inline RootResult q_root(const RecursionParams& p) {
  p.validate();
  double lo = 1.0 / p.D;
  double hi = 1.0;
  // h(1/D) < 0 and h(1) = (D-1)(l-1+eta) - 1 >= 0, with equality only at the
  // critical point D = 2, l = 2, eta = 0, where x* = 1 and q = 0.
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double h = characteristic(p, mid);
    if (h == 0.0) {
      lo = hi = mid;
      break;
    }
    (h < 0.0 ? lo : hi) = mid;
  }
  const double hl = std::abs(characteristic(p, lo));
  const double hh = std::abs(characteristic(p, hi));
  RootResult r;
  r.x_star = hl <= hh ? lo : hi;
  r.residual = std::min(hl, hh);
  r.q = -std::log(r.x_star) / std::log(static_cast<double>(p.D));
  return r;
}

inline RootResult q_root(int D, int ell, double eta) { return q_root(RecursionParams{D, ell, eta}); }

/// Threshold D/(D-1) separating the power-law and doubly-exponential regimes.
inline double critical_beta(int D) { return static_cast<double>(D) / (D - 1); }

/// Doubly-exponential rate q_D(beta) for beta > D/(D-1), using
/// l = floor(beta), eta = beta - floor(beta).
inline double q_of_beta(int D, double beta) {
  if (D < 2) throw ConfigError("q_of_beta requires D >= 2");
  if (!(beta > critical_beta(D)))
    throw ConfigError("q_of_beta: beta must exceed D/(D-1); use classify_regime for other beta");
  const double fl = std::floor(beta);
  return q_root(RecursionParams{D, static_cast<int>(fl), beta - fl}).q;
}

struct GrowthEstimate {
  /// log_D(R_k / R_{k-1}) at k = k_max.
  double q_estimate = 0.0;
  /// (1/k) log_D R_k for k = 1..k_max (index 0 holds k = 1).
  std::vector<double> normalized_log;
  /// Natural log of R_k for k = 1..k_max.
  std::vector<double> log_r;
};

/// Iterates the recursion with unit initial data, rescaling the window to
/// avoid overflow.
inline GrowthEstimate recursion_growth(const RecursionParams& p, std::size_t k_max) {
  p.validate();
  if (k_max < 50) throw ConfigError("recursion_growth: k_max must be >= 50");
  const auto ell = static_cast<std::size_t>(p.ell);
  const double log_d = std::log(static_cast<double>(p.D));
  // window[0] = R_{k-l}, ..., window[l-1] = R_{k-1}, all scaled by exp(-log_scale).
  std::vector<double> window(ell, 1.0);
  double log_scale = 0.0;
  GrowthEstimate g;
  g.log_r.reserve(k_max);
  g.normalized_log.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    double sum = p.eta * window[0];
    for (std::size_t i = 1; i < ell; ++i) sum += window[i];
    const double next = (p.D - 1) * sum;
    std::rotate(window.begin(), window.begin() + 1, window.end());
    window.back() = next;
    if (next > 1e100) {
      for (double& w : window) w /= next;
      log_scale += std::log(next);
    }
    const double log_rk = std::log(window.back()) + log_scale;
    g.log_r.push_back(log_rk);
    g.normalized_log.push_back(log_rk / (static_cast<double>(k) * log_d));
  }
  g.q_estimate = (g.log_r[k_max - 1] - g.log_r[k_max - 2]) / log_d;
  return g;
}

/// Natural log of Q_k = e^{R_k} under the product recursion
///   Q_k = (prod_{i=k-l+1}^{k-1} Q_i^{D-1}) Q_{k-l}^{eta (D-1)},  Q_k = e for k <= 0,
/// evaluated term by term in log space (no rescaling; callers keep k small).
inline std::vector<double> product_form_log(const RecursionParams& p, std::size_t k_max) {
  p.validate();
  const auto ell = static_cast<std::size_t>(p.ell);
  std::vector<double> log_q(ell, 1.0);  // indices 0..l-1 hold k = -l+1..0
  for (std::size_t k = 1; k <= k_max; ++k) {
    const std::size_t idx = k + ell - 1;
    double acc = p.eta * (p.D - 1) * log_q[idx - ell];
    for (std::size_t i = idx - ell + 1; i < idx; ++i) acc += (p.D - 1) * log_q[i];
    log_q.push_back(acc);
  }
  return {log_q.begin() + static_cast<std::ptrdiff_t>(ell), log_q.end()};
}

/// Limit of P_k^{(N)} for exponential service as N -> infinity:
/// alpha^{(D^k - 1)/(D - 1)}, evaluated in log space.
inline double log_vdk_tail(double alpha, int D, std::size_t k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("vdk_tail: alpha must lie in (0, 1)");
  if (D < 2) throw ConfigError("vdk_tail: D must be >= 2");
  // (D^k - 1)/(D - 1) = 1 + D + ... + D^{k-1}
  double exponent = 0.0;
  double pw = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    exponent += pw;
    pw *= D;
  }
  return exponent * std::log(alpha);
}

inline double vdk_tail(double alpha, int D, std::size_t k) {
  const double lp = log_vdk_tail(alpha, D, k);
  return lp < -745.0 ? 0.0 : std::exp(lp);
}

/// Power-law exponent nu_beta = (beta - 1) / (1 - (D-1)(beta - 1)) for
/// 1 < beta < D/(D-1).
inline double gamma_exponent(int D, double beta) {
  if (D < 2) throw ConfigError("gamma_exponent requires D >= 2");
  if (!(beta > 1.0)) throw ConfigError("gamma_exponent: beta must exceed 1");
  const double denom = 1.0 - (D - 1) * (beta - 1.0);
  if (!(denom > 0.0) || !(beta < critical_beta(D)))
    throw ConfigError("gamma_exponent: beta must be below D/(D-1)");
  return (beta - 1.0) / denom;
}

enum class Regime { doubly_exponential, power_law, exponential_boundary };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::doubly_exponential: return "doubly-exponential";
    case Regime::power_law: return "power-law";
    case Regime::exponential_boundary: return "exponential-boundary";
  }
  return "unknown";
}

inline constexpr double kBoundaryTolerance = 1e-12;

struct RegimeReport {
  int D = 2;
  double beta = 0.0;
  Regime regime = Regime::doubly_exponential;
  /// q_D(beta) for doubly-exponential, nu_beta for power-law, empty at the boundary.
  std::optional<double> exponent;
  std::optional<double> c1, c2;
  std::string note;
};

inline RegimeReport classify_regime(int D, double beta, std::optional<double> c1 = std::nullopt,
                                    std::optional<double> c2 = std::nullopt) {
  if (D < 2) throw ConfigError("classify_regime requires D >= 2");
  if (!(beta > 1.0)) throw ConfigError("beta must exceed 1 (beta <= 1 has infinite mean)");
  if (c1 && c2 && !(*c1 > 0.0 && *c1 <= *c2)) throw ConfigError("tail constants must satisfy 0 < c1 <= c2");
  RegimeReport r;
  r.D = D;
  r.beta = beta;
  r.c1 = c1;
  r.c2 = c2;
  const double crit = critical_beta(D);
  if (std::abs(beta - crit) <= kBoundaryTolerance) {
    r.regime = Regime::exponential_boundary;
    r.note = "log(1/P_k) grows linearly in k; the rate is not explicit and increases without bound as c2 decreases to 0";
  } else if (beta > crit) {
    r.regime = Regime::doubly_exponential;
    r.exponent = q_of_beta(D, beta);
  } else {
    r.regime = Regime::power_law;
    r.exponent = gamma_exponent(D, beta);
  }
  return r;
}

struct AffineResult {
  double limit = 0.0;
  std::vector<double> sequence;
  bool increasing = false;
  bool decreasing = false;
};

/// R(n) = a R(n-1) + b from R(0) = c, 0 < a < 1: converges to b / (1 - a),
/// increasing iff c is below the limit.
inline AffineResult affine_limit(double a, double b, double c, std::size_t n = 0) {
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("affine_limit: a must lie in (0, 1)");
  AffineResult r;
  r.limit = b / (1.0 - a);
  r.increasing = c < r.limit;
  r.decreasing = c > r.limit;
  if (n > 0) {
    r.sequence.reserve(n + 1);
    double x = c;
    r.sequence.push_back(x);
    for (std::size_t i = 1; i <= n; ++i) {
      x = a * x + b;
      r.sequence.push_back(x);
    }
  }
  return r;
}

/// The multiplicative instance: Q_k(n) = k^{-R(n)} with a = (D-1)(beta-1),
/// b = (1-2 eta)(beta-1), c = beta - 1 - 2 eta beta; limit (1 - 2 eta) nu_beta.
inline AffineResult power_law_affine(int D, double beta, double eta, std::size_t n = 0) {
  if (!(eta > 0.0 && eta < 0.5)) throw ConfigError("eta must lie in (0, 1/2)");
  const double a = (D - 1) * (beta - 1.0);
  return affine_limit(a, (1.0 - 2.0 * eta) * (beta - 1.0), beta - 1.0 - 2.0 * eta * beta, n);
}

enum class BoundMode { lower_3_1_2, lower_3_1_6, upper_3_6_3, upper_3_6_4 };

inline std::string_view to_string(BoundMode m) {
  switch (m) {
    case BoundMode::lower_3_1_2: return "lower-3.1.2";
    case BoundMode::lower_3_1_6: return "lower-3.1.6";
    case BoundMode::upper_3_6_3: return "upper-3.6.3";
    case BoundMode::upper_3_6_4: return "upper-3.6.4";
  }
  return "unknown";
}

inline BoundMode parse_bound_mode(std::string_view s) {
  for (auto m : {BoundMode::lower_3_1_2, BoundMode::lower_3_1_6, BoundMode::upper_3_6_3, BoundMode::upper_3_6_4})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown bound mode '" + std::string(s) + "'");
}

struct BoundConstants {
  double C = 1.0;
  /// Only used by upper-3.6.4.
  double delta = 0.1;
};

/// Generates log(1/P_k), k = 0..k_max, from one of the tail-bound recursions.
/// `prefix` holds P_0 = 1, P_1, ... for the levels that are given rather than
/// generated; levels below 0 are taken as P = 1. With k_1 = ceil(k - beta) and
/// frac = beta - floor(beta):
///
///   lower-3.1.2  log P_k = k log(C / 8k) + (D-1) sum_{i<k} log P_i
///   lower-3.1.6  log P_k = log C - k log 3 + (D-1) sum_{i=k_1+1}^{k-1} log P_i + frac (D-1) log P_{k_1}
///   upper-3.6.3  log P_k = log C + (beta+1) log k + (same products as lower-3.1.6)
///   upper-3.6.4  log P_k = log C + (beta+1) log k + (D-1) sum_{i=k_1+2}^{k-1} log P_i
///                          + (1-delta)(D-1) log P_{k_1+1}
///
/// Each generated value is clipped so that 1 >= P_{k-1} >= P_k, which keeps
/// both kinds of bound valid for a tail.
inline std::vector<double> iterate_bound_recursion(BoundMode mode, int D, double beta, BoundConstants constants,
                                                   std::size_t k_max, const std::vector<double>& prefix) {
  if (D < 2) throw ConfigError("bound recursions require D >= 2");
  if (!(beta > 1.0)) throw ConfigError("beta must exceed 1");
  if (!(constants.C > 0.0)) throw ConfigError("constant C must be positive");
  if (prefix.empty() || prefix[0] != 1.0) throw ConfigError("initial segment must start with P_0 = 1");
  for (std::size_t i = 1; i < prefix.size(); ++i)
    if (!(prefix[i] > 0.0) || prefix[i] > prefix[i - 1])
      throw ConfigError("initial segment must be a positive nonincreasing tail prefix");
  const bool integral = std::floor(beta) == beta;
  switch (mode) {
    case BoundMode::lower_3_1_2: break;
    case BoundMode::lower_3_1_6:
      if (!(beta > critical_beta(D))) throw ConfigError("lower-3.1.6 applies only for beta > D/(D-1)");
      break;
    case BoundMode::upper_3_6_3:
      if (!(beta > critical_beta(D))) throw ConfigError("upper-3.6.3 applies only for beta > D/(D-1)");
      if (integral) throw ConfigError("upper-3.6.3 applies only to non-integer beta; use upper-3.6.4");
      break;
    case BoundMode::upper_3_6_4:
      if (!(beta > critical_beta(D))) throw ConfigError("upper-3.6.4 applies only for beta > D/(D-1)");
      if (!integral) throw ConfigError("upper-3.6.4 applies only to integer beta; use upper-3.6.3");
      if (!(constants.delta > 0.0 && constants.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
      break;
  }

  const double frac = beta - std::floor(beta);
  const double dm1 = D - 1;
  std::vector<double> L;  // L[k] = log(1/P_k)
  L.reserve(k_max + 1);
  for (std::size_t i = 0; i < prefix.size() && i <= k_max; ++i) L.push_back(-std::log(prefix[i]));
  auto at = [&](long long i) { return i <= 0 ? 0.0 : L[static_cast<std::size_t>(i)]; };
  // sum_{i=from}^{to} L_i
  auto window = [&](long long from, long long to) {
    double s = 0.0;
    for (long long i = std::max(from, 1LL); i <= to; ++i) s += L[static_cast<std::size_t>(i)];
    return s;
  };

  for (std::size_t uk = L.size(); uk <= k_max; ++uk) {
    const auto k = static_cast<long long>(uk);
    const double kd = static_cast<double>(k);
    const auto k1 = static_cast<long long>(std::ceil(kd - beta));
    double log_p = 0.0;
    switch (mode) {
      case BoundMode::lower_3_1_2:
        log_p = kd * std::log(constants.C / (8.0 * kd)) - dm1 * window(0, k - 1);
        break;
      case BoundMode::lower_3_1_6:
        log_p = std::log(constants.C) - kd * std::log(3.0) - dm1 * window(k1 + 1, k - 1) - frac * dm1 * at(k1);
        break;
      case BoundMode::upper_3_6_3:
        log_p = std::log(constants.C) + (beta + 1.0) * std::log(kd) - dm1 * window(k1 + 1, k - 1) -
                frac * dm1 * at(k1);
        break;
      case BoundMode::upper_3_6_4:
        log_p = std::log(constants.C) + (beta + 1.0) * std::log(kd) - dm1 * window(k1 + 2, k - 1) -
                (1.0 - constants.delta) * dm1 * at(k1 + 1);
        break;
    }
    L.push_back(std::max(-log_p, L.back()));
  }
  return L;
}

/// (1/k) log_D log(1/P_k) for a bound sequence; NaN where log(1/P_k) <= 0.
inline double normalized_double_log(const std::vector<double>& log_inv_p, std::size_t k, int D) {
  const double L = log_inv_p.at(k);
  if (!(L > 0.0) || k == 0) return std::nan("");
  return std::log(L) / std::log(static_cast<double>(D)) / static_cast<double>(k);
}

}  // namespace jsq::analytic
