#pragma once

// Small statistical helpers shared by the test binaries. They are written
// independently of the library's own KS code so that they can act as oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace besqlab::testkit {

// sup |F_n - F| for a sample against a continuous CDF.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// sup |F_a - F_b| by brute force over the pooled points (quadratic-free:
// both arrays are sorted and scanned with binary search).
inline double ks_two_sample_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  auto ecdf = [](const std::vector<double>& v, double x) {
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) /
           static_cast<double>(v.size());
  };
  for (double x : a) d = std::max(d, std::fabs(ecdf(a, x) - ecdf(b, x)));
  for (double x : b) d = std::max(d, std::fabs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

// Asymptotic one-sided critical values c(alpha) with P(sqrt(n) D > c) = alpha.
inline constexpr double kKsCrit01 = 1.628;   // alpha = 0.01
inline constexpr double kKsCrit001 = 1.949;  // alpha = 0.001

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace besqlab::testkit
