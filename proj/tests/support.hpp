#pragma once

// Shared statistical helpers for the test suites. Everything here is
// deliberately independent of the library internals it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace test_support {

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / (v.size() - 1);
}

inline double sd(const std::vector<double>& v) { return std::sqrt(variance(v)); }

/// Standard error of the sample mean.
inline double se_mean(const std::vector<double>& v) { return sd(v) / std::sqrt(double(v.size())); }

/// Batch-means standard error for correlated (MCMC) draws.
inline double se_batch_means(const std::vector<double>& v, int batches = 50) {
  const int b = static_cast<int>(v.size()) / batches;
  if (b < 2) return se_mean(v);
  std::vector<double> bm;
  for (int i = 0; i + b <= static_cast<int>(v.size()); i += b) {
    double s = 0.0;
    for (int j = i; j < i + b; ++j) s += v[j];
    bm.push_back(s / b);
  }
  return sd(bm) / std::sqrt(double(bm.size()));
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i; else ++j;
    d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

/// Critical value of the two-sample KS test at significance alpha.
inline double ks_critical(size_t n, size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt((double(n) + double(m)) / (double(n) * double(m)));
}

/// Composite Simpson integral of f on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double log_normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * M_PI * var)) - d * d / (2.0 * var);
}

/// log of the Poisson pmf.
inline double log_poisson_pmf(int k, double rate) {
  return k * std::log(rate) - rate - std::lgamma(k + 1.0);
}

}  // namespace test_support
