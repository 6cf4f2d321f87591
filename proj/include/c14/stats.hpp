#pragma once

// Small numeric helpers shared by the estimators and the studies.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace c14::stats {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_add(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double logsumexp(std::span<const double> v) {
  double m = neg_inf;
  for (double x : v) m = std::max(m, x);
  if (m == neg_inf) return neg_inf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty range");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Linear interpolation between order statistics (R type 7). `sorted` must be sorted.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty range");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

// P(X >= k) for X ~ Binomial(n, 1/2).
inline double binomial_upper_tail_half(int k, int n) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  double acc = neg_inf;
  for (int i = k; i <= n; ++i) {
    const double lp = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                      n * std::numbers::ln2;
    acc = log_add(acc, lp);
  }
  return std::min(1.0, std::exp(acc));
}

struct SignTest {
  int positive = 0;
  int negative = 0;
  double p_value = 1.0;  // one-sided, H1: positives dominate
};

// Zeros are dropped, the usual convention.
inline SignTest sign_test(std::span<const double> diffs) {
  SignTest t;
  for (double d : diffs) {
    if (d > 0) ++t.positive;
    else if (d < 0) ++t.negative;
  }
  t.p_value = binomial_upper_tail_half(t.positive, t.positive + t.negative);
  return t;
}

// Kolmogorov distribution tail, P(sqrt(n) D > x) asymptotically.
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample KS test against Uniform(0, 1).
inline KsResult ks_uniform(std::vector<double> u) {
  if (u.empty()) throw std::invalid_argument("ks_uniform: empty sample");
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double f = std::clamp(u[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  // Stephens' small-sample correction.
  return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)};
}

}  // namespace c14::stats
