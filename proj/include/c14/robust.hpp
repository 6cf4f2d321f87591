#pragma once

// Huber psi/rho and the interval-truncated M-estimate of one sample's date.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "c14/model.hpp"

namespace c14 {

// Huber threshold in units of the measurement sigma. c = +inf is the Gaussian
// model, c = 0 is treated as the c -> 0+ limit (weighted median, absolute loss).
struct HuberSpec {
  double c = 1.345;

  static HuberSpec gaussian() { return {std::numeric_limits<double>::infinity()}; }

  bool is_gaussian() const noexcept { return std::isinf(c); }
};

inline double huber_psi(double x, double c) {
  if (std::isinf(c)) return x;
  return std::clamp(x, -c, c);
}

inline double huber_rho(double x, double c) {
  const double a = std::abs(x);
  if (a <= c) return 0.5 * x * x;
  return c * a - 0.5 * c * c;
}

enum class Truncation { none, lower, upper };

struct MEstimate {
  double mu = 0.0;
  Truncation flag = Truncation::none;
};

// Precomputes the unconstrained root interval of
//   A(mu) = sum_i psi_c((y_i - mu) / s_i) / s_i
// so that the truncated estimate for any [lo, hi] is O(1).
class RobustSample {
 public:
  static constexpr double tolerance = 1e-6;

  RobustSample(std::span<const Observation> obs, HuberSpec spec)
      : obs_(obs.begin(), obs.end()), c_(spec.c) {
    if (obs_.empty()) throw std::invalid_argument("RobustSample: no observations");
    if (!(c_ >= 0.0)) throw std::invalid_argument("RobustSample: negative Huber threshold");
    for (const auto& o : obs_)
      if (!(o.sigma > 0.0)) throw std::invalid_argument("RobustSample: nonpositive sigma");
    solve_root_interval();
  }

  // Nonincreasing in mu.
  double score(double mu) const {
    double a = 0.0;
    for (const auto& o : obs_) {
      const double r = (o.value - mu) / o.sigma;
      a += (c_ == 0.0 ? sign(r) : huber_psi(r, c_)) / o.sigma;
    }
    return a;
  }

  // sum_i rho_c(residual_i); the negative log pseudo-likelihood up to a constant.
  double loss(double mu) const {
    double l = 0.0;
    for (const auto& o : obs_) {
      const double r = (o.value - mu) / o.sigma;
      l += c_ == 0.0 ? std::abs(r) : huber_rho(r, c_);
    }
    return l;
  }

  double root_lo() const noexcept { return root_lo_; }
  double root_hi() const noexcept { return root_hi_; }
  double unconstrained() const noexcept { return 0.5 * (root_lo_ + root_hi_); }

  MEstimate within(double lo, double hi) const {
    if (lo > hi) throw std::invalid_argument("m_estimate_interval: lo > hi");
    if (hi < root_lo_) return {hi, Truncation::upper};
    if (lo > root_hi_) return {lo, Truncation::lower};
    const double a = std::max(lo, root_lo_);
    const double b = std::min(hi, root_hi_);
    return {0.5 * (a + b), Truncation::none};
  }

  std::span<const Observation> observations() const noexcept { return obs_; }

 private:
  static double sign(double x) { return (x > 0.0) - (x < 0.0); }

  // Sign of A(mu), treating cancellation noise as zero so flat segments are
  // found even for tiny c.
  int score_sign(double mu) const {
    double a = 0.0, scale = 0.0;
    for (const auto& o : obs_) {
      const double r = (o.value - mu) / o.sigma;
      const double t = (c_ == 0.0 ? sign(r) : huber_psi(r, c_)) / o.sigma;
      a += t;
      scale += std::abs(t);
    }
    if (std::abs(a) <= 1e-12 * scale) return 0;
    return a > 0.0 ? 1 : -1;
  }

  void solve_root_interval() {
    double ymin = obs_.front().value, ymax = ymin;
    for (const auto& o : obs_) {
      ymin = std::min(ymin, o.value);
      ymax = std::max(ymax, o.value);
    }
    // A > 0 left of every observation and A < 0 right of every observation.
    const double left = ymin - 1.0, right = ymax + 1.0;

    // sup{mu : A(mu) > 0}
    double a = left, b = right;
    while (b - a > 0.1 * tolerance) {
      const double m = 0.5 * (a + b);
      (score_sign(m) > 0 ? a : b) = m;
    }
    root_lo_ = 0.5 * (a + b);

    // inf{mu : A(mu) < 0}
    a = left;
    b = right;
    while (b - a > 0.1 * tolerance) {
      const double m = 0.5 * (a + b);
      (score_sign(m) < 0 ? b : a) = m;
    }
    root_hi_ = std::max(root_lo_, 0.5 * (a + b));
  }

  std::vector<Observation> obs_;
  double c_;
  double root_lo_ = 0.0;
  double root_hi_ = 0.0;
};

// Root of A on [lo, hi] with boundary clamping: returns hi (flag upper) when
// A(hi) > 0, lo (flag lower) when A(lo) < 0. Flat root segments resolve to
// their midpoint.
inline MEstimate m_estimate_interval(std::span<const Observation> obs, HuberSpec spec, double lo,
                                     double hi) {
  if (lo > hi) throw std::invalid_argument("m_estimate_interval: lo > hi");
  return RobustSample(obs, spec).within(lo, hi);
}

}  // namespace c14
