#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "rng.hpp"

namespace jsq {

enum class ServiceKind { exponential, lomax, pareto, deterministic, bounded_uniform };

inline std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::exponential: return "exponential";
    case ServiceKind::lomax: return "lomax";
    case ServiceKind::pareto: return "pareto";
    case ServiceKind::deterministic: return "deterministic";
    case ServiceKind::bounded_uniform: return "bounded-uniform";
  }
  return "unknown";
}

inline ServiceKind parse_service_kind(std::string_view name) {
  if (name == "exponential") return ServiceKind::exponential;
  if (name == "lomax") return ServiceKind::lomax;
  if (name == "pareto") return ServiceKind::pareto;
  if (name == "deterministic") return ServiceKind::deterministic;
  if (name == "bounded-uniform") return ServiceKind::bounded_uniform;
  throw ConfigError("unknown service kind '" + std::string(name) + "'");
}

inline bool kind_takes_beta(ServiceKind kind) noexcept {
  return kind == ServiceKind::lomax || kind == ServiceKind::pareto;
}

/// A mean-1 service-time law. The scale is always derived from the kind and
/// the tail exponent so that the mean is exactly 1; callers cannot supply it.
///
///   exponential      rate 1
///   lomax            tail (1 + s/sigma)^-beta, sigma = beta - 1
///   pareto           tail (s/s_min)^-beta for s >= s_min, s_min = (beta-1)/beta
///   deterministic    point mass at 1
///   bounded-uniform  uniform on [0, 2]
///
/// Closed forms hold on the whole half-line, not only beyond some threshold.
/// Plain pareto has a hazard rate that jumps at s_min (not monotone), so lomax
/// is the default heavy-tailed law.
class ServiceSpec {
 public:
  ServiceSpec() = default;

  ServiceKind kind() const noexcept { return kind_; }
  std::optional<double> beta() const noexcept {
    if (kind_takes_beta(kind_)) return beta_;
    return std::nullopt;
  }
  /// Lomax scale sigma or pareto minimum s_min; 1 for the parameter-free kinds.
  double scale() const noexcept { return scale_; }

  /// Constant c in tail(s) ~ c * s^-beta for the power-law kinds, 0 otherwise.
  double tail_constant() const noexcept {
    if (!kind_takes_beta(kind_)) return 0.0;
    return std::pow(scale_, beta_);
  }

  bool hazard_monotone() const noexcept { return kind_ != ServiceKind::pareto; }

  double mean() const noexcept { return 1.0; }

  /// log Pr(S > s); -inf outside the support.
  double log_tail(double s) const {
    if (!(s >= 0.0)) throw ConfigError("tail: s must be nonnegative");
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    switch (kind_) {
      case ServiceKind::exponential: return -s;
      case ServiceKind::lomax: return -beta_ * std::log1p(s / scale_);
      case ServiceKind::pareto: return s < scale_ ? 0.0 : -beta_ * std::log(s / scale_);
      case ServiceKind::deterministic: return s < 1.0 ? 0.0 : neg_inf;
      case ServiceKind::bounded_uniform: return s < 2.0 ? std::log1p(-s / 2.0) : neg_inf;
    }
    return neg_inf;
  }

  /// Pr(S > s). Evaluated through log_tail, so deep tails underflow to 0
  /// gracefully rather than through pow().
  double tail(double s) const {
    const double lt = log_tail(s);
    return lt < -745.0 ? 0.0 : std::exp(lt);
  }

  double cdf(double s) const { return -std::expm1(log_tail(s)); }

  /// Inverse transform of one uniform u in (0, 1): the returned s satisfies
  /// tail(s) = u.
  double quantile_of_tail(double u) const noexcept {
    switch (kind_) {
      case ServiceKind::exponential: return -std::log(u);
      case ServiceKind::lomax: return scale_ * std::expm1(-std::log(u) / beta_);
      case ServiceKind::pareto: return scale_ * std::exp(-std::log(u) / beta_);
      case ServiceKind::deterministic: return 1.0;
      case ServiceKind::bounded_uniform: return 2.0 * (1.0 - u);
    }
    return 1.0;
  }

  /// One draw; always consumes exactly one uniform so that streams stay
  /// aligned across kinds.
  double sample(RngStream& rng) const noexcept { return quantile_of_tail(rng.uniform()); }

  friend bool operator==(const ServiceSpec&, const ServiceSpec&) = default;

 private:
  friend ServiceSpec make_spec(ServiceKind, std::optional<double>);

  ServiceKind kind_ = ServiceKind::exponential;
  double beta_ = 0.0;
  double scale_ = 1.0;
};

inline ServiceSpec make_spec(ServiceKind kind, std::optional<double> beta = std::nullopt) {
  ServiceSpec spec;
  spec.kind_ = kind;
  if (kind_takes_beta(kind)) {
    if (!beta) throw ConfigError(std::string(to_string(kind)) + " requires beta");
    if (!(*beta > 1.0) || !std::isfinite(*beta))
      throw ConfigError("beta must be a finite value > 1 (beta <= 1 has infinite mean)");
    spec.beta_ = *beta;
    spec.scale_ = kind == ServiceKind::lomax ? *beta - 1.0 : (*beta - 1.0) / *beta;
  } else if (beta) {
    throw ConfigError(std::string(to_string(kind)) + " takes no beta");
  }
  return spec;
}

}  // namespace jsq
