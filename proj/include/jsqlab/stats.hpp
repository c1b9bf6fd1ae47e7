#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace jsq::stats {

inline constexpr double kConfidence = 0.95;

inline double normal_quantile(double level = kConfidence) {
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

inline double student_quantile(std::size_t df, double level = kConfidence) {
  return boost::math::quantile(boost::math::students_t(static_cast<double>(df)), 0.5 + level / 2.0);
}

struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
};

/// Mean with a Student-t half-width over i.i.d. (batch or replication) values.
inline MeanCI mean_ci(std::span<const double> xs, double level = kConfidence) {
  MeanCI out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  out.half_width = student_quantile(xs.size() - 1, level) * std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

}  // namespace jsq::stats
