#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace jsq {

/// How P_k is continued past the last stored level.
enum class Extrapolation { zero, geometric };

/// A queue-length tail P_k = Pr(length >= k) for k = 0..k_max, with
/// P_0 = 1 and 1 >= P_k >= P_{k+1} >= 0.
class TailVector {
 public:
  explicit TailVector(std::vector<double> p, Extrapolation rule = Extrapolation::zero)
      : p_(std::move(p)), rule_(rule) {
    validate();
  }

  /// p[k] = 0 for k >= 1.
  static TailVector empty_above_zero(std::size_t k_max) {
    std::vector<double> p(k_max + 1, 0.0);
    p[0] = 1.0;
    return TailVector(std::move(p));
  }

  /// p[k] = ratio^k.
  static TailVector geometric(double ratio, std::size_t k_max) {
    std::vector<double> p(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) p[k] = std::pow(ratio, static_cast<double>(k));
    return TailVector(std::move(p));
  }

  std::size_t k_max() const noexcept { return p_.size() - 1; }
  Extrapolation rule() const noexcept { return rule_; }
  const std::vector<double>& values() const noexcept { return p_; }

  /// P_k for any k >= 0, applying the extrapolation rule beyond k_max.
  double at(std::size_t k) const noexcept {
    if (k < p_.size()) return p_[k];
    if (rule_ == Extrapolation::zero || p_.size() < 2) return 0.0;
    const double last = p_.back();
    const double prev = p_[p_.size() - 2];
    if (prev <= 0.0) return 0.0;
    return last * std::pow(last / prev, static_cast<double>(k - k_max()));
  }

  double operator[](std::size_t k) const noexcept { return at(k); }

 private:
  void validate() const {
    if (p_.empty()) throw ConfigError("tail vector must contain P_0");
    if (p_[0] != 1.0) throw ConfigError("tail vector must have P_0 = 1");
    for (std::size_t k = 1; k < p_.size(); ++k) {
      if (!(p_[k] >= 0.0) || p_[k] > p_[k - 1])
        throw ConfigError("tail vector must be nonincreasing in [0,1] (level " + std::to_string(k) + ")");
    }
  }

  std::vector<double> p_;
  Extrapolation rule_;
};

/// A tail estimate with a confidence interval per level.
struct TailEstimate {
  enum class Method { batch_means, regenerative, merged };

  std::vector<double> p;
  /// Symmetric half-width of the 95% interval; ci_low/ci_high are p -/+ hw
  /// clipped to [0, 1].
  std::vector<double> hw;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  double measurement_time = 0.0;
  Method method = Method::batch_means;
  /// Set when monotonicity had to be restored by clipping.
  bool isotonic_applied = false;

  std::size_t k_max() const noexcept { return p.empty() ? 0 : p.size() - 1; }
  double half_width(std::size_t k) const noexcept { return hw[k]; }

  void resize(std::size_t levels) {
    p.assign(levels, 0.0);
    hw.assign(levels, 0.0);
    ci_low.assign(levels, 0.0);
    ci_high.assign(levels, 0.0);
  }

  /// Recompute ci_low/ci_high from p and hw.
  void close_intervals() {
    for (std::size_t k = 0; k < p.size(); ++k) {
      ci_low[k] = std::max(0.0, p[k] - hw[k]);
      ci_high[k] = std::min(1.0, p[k] + hw[k]);
    }
  }

  TailVector as_tail_vector() const { return TailVector(p); }
};

inline std::string_view to_string(TailEstimate::Method m) {
  switch (m) {
    case TailEstimate::Method::batch_means: return "batch-means";
    case TailEstimate::Method::regenerative: return "regenerative";
    case TailEstimate::Method::merged: return "merged";
  }
  return "unknown";
}

/// Running minimum so that p[k+1] <= p[k]. Returns true if anything changed.
inline bool enforce_monotone(std::vector<double>& p) {
  bool changed = false;
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] > p[k - 1]) {
      p[k] = p[k - 1];
      changed = true;
    }
  }
  return changed;
}

}  // namespace jsq
