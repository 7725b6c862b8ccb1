#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmvol/error.hpp"

namespace pmvol {

/// Missing cells are stored as quiet NaN throughout the toolkit.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_missing(double x) noexcept { return std::isnan(x); }

using Column = std::vector<double>;

namespace stats {

[[nodiscard]] inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ValidationError("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample standard deviation with the n-1 denominator.
[[nodiscard]] inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) throw ValidationError("sample standard deviation needs at least two points");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Linear-interpolation quantile (Hyndman-Fan type 7, the R/NumPy default).
[[nodiscard]] inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw ValidationError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

[[nodiscard]] inline std::vector<double> present(std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs)
    if (!is_missing(x)) out.push_back(x);
  return out;
}

[[nodiscard]] inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided p-value against the standard normal.
[[nodiscard]] inline double two_sided_p(double t) {
  if (std::isnan(t)) return kMissing;
  return std::erfc(std::fabs(t) / std::sqrt(2.0));
}

/// One-sided upper-tail p-value against the standard normal.
[[nodiscard]] inline double upper_tail_p(double z) {
  if (std::isnan(z)) return kMissing;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

/// Significance markers at the 0.10 / 0.05 / 0.01 levels.
[[nodiscard]] inline std::string stars(double p) {
  if (is_missing(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

[[nodiscard]] inline double sample_kurtosis(std::span<const double> xs) {
  const double m = mean(xs);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const auto n = static_cast<double>(xs.size());
  m2 /= n;
  m4 /= n;
  return m4 / (m2 * m2);
}

}  // namespace stats
}  // namespace pmvol
