#pragma once

// Calibration-curve toolkit: BP/concentration conversions, kernel smoothing,
// the local affine calibration with its residual diagnostics, and the
// Wiener-prior Gaussian model of the curve.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c14/hpd.hpp"
#include "c14/model.hpp"
#include "c14/rng.hpp"
#include "c14/stats.hpp"

namespace c14 {

inline constexpr double libby_mean_life = 8033.0;
inline constexpr double cambridge_mean_life = 8267.0;

struct CalibPoint {
  double cal_year = 0.0;  // signed calendar axis
  double bp_age = 0.0;
  double sigma = 1.0;
  std::string source_lab;
};

inline double bp_from_fraction(double f) {
  if (!(f > 0.0)) throw std::invalid_argument("bp_from_fraction: fraction must be positive");
  return -libby_mean_life * std::log(f);
}

// C(y)/C0 for a sample of calendar year y with conventional age bp.
inline double concentration_ratio(double cal_year, double bp) {
  return std::exp((cal_year - time_axis::present_year) / cambridge_mean_life - bp / libby_mean_life);
}

// Nadaraya-Watson smoother of bp_age over cal_year with a Gaussian kernel.
inline std::vector<double> kernel_smooth(std::span<const CalibPoint> points, double bandwidth,
                                         std::span<const double> eval_grid) {
  if (points.empty()) throw std::invalid_argument("kernel_smooth: no points");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel_smooth: bandwidth must be positive");
  std::vector<double> out(eval_grid.size());
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t k = 0; k < eval_grid.size(); ++k) {
    // Shift exponents by the nearest point so far-away grid years do not underflow to 0/0.
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& p : points) dmin = std::min(dmin, std::abs(eval_grid[k] - p.cal_year));
    double num = 0.0, den = 0.0;
    for (const auto& p : points) {
      const double d = eval_grid[k] - p.cal_year;
      const double w = std::exp(-(d * d - dmin * dmin) * inv);
      num += w * p.bp_age;
      den += w;
    }
    out[k] = num / den;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Affine calibration

struct AffineFit {
  AffineCalibration model;
  std::vector<double> years;      // points used, ascending
  std::vector<double> residuals;  // bp - fitted, same order
  std::vector<std::string> labs;
};

// OLS of bp on calendar year over `window` (inclusive), dropping points whose
// year is within `tolerance` of an exclusion.
inline AffineFit fit_affine(std::span<const CalibPoint> points, std::pair<double, double> window,
                            std::vector<double> exclusions = {}, double tolerance = 1e-6) {
  if (window.first > window.second) std::swap(window.first, window.second);
  std::vector<const CalibPoint*> used;
  for (const auto& p : points) {
    if (p.cal_year < window.first || p.cal_year > window.second) continue;
    bool excluded = false;
    for (double e : exclusions) excluded = excluded || std::abs(p.cal_year - e) <= tolerance;
    if (!excluded) used.push_back(&p);
  }
  if (used.size() < 3) throw std::invalid_argument("fit_affine: fewer than 3 points after exclusion");
  std::stable_sort(used.begin(), used.end(),
                   [](const CalibPoint* a, const CalibPoint* b) { return a->cal_year < b->cal_year; });

  const double n = static_cast<double>(used.size());
  double mx = 0.0, my = 0.0;
  for (auto* p : used) {
    mx += p->cal_year;
    my += p->bp_age;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (auto* p : used) {
    sxx += (p->cal_year - mx) * (p->cal_year - mx);
    sxy += (p->cal_year - mx) * (p->bp_age - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_affine: degenerate design (all years equal)");

  AffineFit fit;
  auto& m = fit.model;
  m.fwd_slope = sxy / sxx;
  m.fwd_intercept = my - m.fwd_slope * mx;
  if (m.fwd_slope != 0.0) {
    m.slope = 1.0 / m.fwd_slope;
    m.intercept = -m.fwd_intercept / m.fwd_slope;
  } else {
    m.slope = 0.0;
    m.intercept = 0.0;
  }
  m.window = window;
  m.exclusions = std::move(exclusions);
  m.n_points = used.size();

  double ss = 0.0;
  for (auto* p : used) {
    const double r = p->bp_age - (m.fwd_intercept + m.fwd_slope * p->cal_year);
    fit.years.push_back(p->cal_year);
    fit.residuals.push_back(r);
    fit.labs.push_back(p->source_lab);
    ss += r * r;
  }
  m.residual_sd = std::sqrt(ss / (n - 2.0));
  return fit;
}

enum class PermutationMode { full, split_halves };

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
};

inline double lag1_autocorrelation(std::span<const double> r) {
  const double m = stats::mean(r);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    den += (r[i] - m) * (r[i] - m);
    if (i + 1 < r.size()) num += (r[i] - m) * (r[i + 1] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

// One-sided: p = fraction of permutations whose lag-1 autocorrelation is at
// least the observed one. Split-halves permutes each chronological half on its own.
inline PermutationTest permutation_serial_correlation(std::span<const double> residuals,
                                                      std::size_t n_perm, PermutationMode mode,
                                                      std::uint64_t seed) {
  if (residuals.size() < 3) throw std::invalid_argument("permutation test: fewer than 3 residuals");
  if (n_perm < 100) throw std::invalid_argument("permutation test: n_perm must be >= 100");
  PermutationTest out;
  out.statistic = lag1_autocorrelation(residuals);
  out.permutations = n_perm;
  std::vector<double> work(residuals.begin(), residuals.end());
  const std::size_t half = work.size() / 2;
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    if (mode == PermutationMode::full) {
      rng.shuffle(work.begin(), work.end());
    } else {
      rng.shuffle(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(half));
      rng.shuffle(work.begin() + static_cast<std::ptrdiff_t>(half), work.end());
    }
    if (lag1_autocorrelation(work) >= out.statistic) ++hits;
  }
  out.p_value = static_cast<double>(hits) / static_cast<double>(n_perm);
  return out;
}

struct LabEffect {
  std::vector<std::string> labs;  // sorted
  std::vector<double> offsets;    // mean residual per lab
  std::vector<std::size_t> counts;
  double spread = 0.0;            // max offset - min offset
  double f_statistic = 0.0;
  double p_value = 1.0;
};

namespace detail {

inline double anova_f(std::span<const double> r, std::span<const std::size_t> group, std::size_t k) {
  std::vector<double> sum(k, 0.0);
  std::vector<double> cnt(k, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sum[group[i]] += r[i];
    cnt[group[i]] += 1.0;
    grand += r[i];
  }
  grand /= static_cast<double>(r.size());
  double between = 0.0, within = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    if (cnt[g] > 0) between += cnt[g] * std::pow(sum[g] / cnt[g] - grand, 2);
  for (std::size_t i = 0; i < r.size(); ++i) within += std::pow(r[i] - sum[group[i]] / cnt[group[i]], 2);
  const double df1 = static_cast<double>(k - 1);
  const double df2 = static_cast<double>(r.size() - k);
  if (between <= 0.0) return 0.0;
  if (within <= 0.0 || df2 <= 0.0) return std::numeric_limits<double>::infinity();
  return (between / df1) / (within / df2);
}

}  // namespace detail

// One-way lab means of residuals, with an F statistic whose p-value comes from
// permuting the lab labels.
inline LabEffect lab_effect(std::span<const double> residuals, std::span<const std::string> labs,
                            std::size_t n_perm = 2000, std::uint64_t seed = 1) {
  if (residuals.size() != labs.size()) throw std::invalid_argument("lab_effect: length mismatch");
  std::map<std::string, std::size_t> index;
  for (const auto& l : labs) index.emplace(l, 0);
  if (index.size() < 2) throw std::invalid_argument("lab_effect: need at least two labs");
  LabEffect out;
  for (auto& [name, i] : index) {
    i = out.labs.size();
    out.labs.push_back(name);
  }
  std::vector<std::size_t> group(labs.size());
  for (std::size_t i = 0; i < labs.size(); ++i) group[i] = index[labs[i]];
  const std::size_t k = out.labs.size();
  out.offsets.assign(k, 0.0);
  out.counts.assign(k, 0);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    out.offsets[group[i]] += residuals[i];
    ++out.counts[group[i]];
  }
  for (std::size_t g = 0; g < k; ++g) out.offsets[g] /= static_cast<double>(out.counts[g]);
  const auto [lo, hi] = std::minmax_element(out.offsets.begin(), out.offsets.end());
  out.spread = *hi - *lo;

  out.f_statistic = detail::anova_f(residuals, group, k);
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    rng.shuffle(group);
    if (detail::anova_f(residuals, group, k) >= out.f_statistic) ++hits;
  }
  out.p_value = n_perm ? static_cast<double>(hits) / static_cast<double>(n_perm) : 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Wiener-prior Gaussian curve model
//
// beta(y) has prior mean gamma0 + gamma1 * y and covariance
// sigma2 * min(y_i - origin, y_j - origin).

struct WienerPriorModel {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double sigma2 = 0.0;
  std::optional<double> origin;  // default: earliest data year - 1

  double prior_mean(double y) const { return gamma0 + gamma1 * y; }
};

struct CurveMarginals {
  std::vector<double> years;
  std::vector<double> mean;
  std::vector<double> variance;
};

class GaussianCurvePosterior {
 public:
  std::vector<double> years;  // data grid, input order
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  double origin() const noexcept { return origin_; }
  const WienerPriorModel& model() const noexcept { return model_; }

  // Conditional-Gaussian marginals at arbitrary years >= origin.
  CurveMarginals predict(std::span<const double> at) const {
    CurveMarginals out;
    out.years.assign(at.begin(), at.end());
    out.mean.resize(at.size());
    out.variance.resize(at.size());
    const auto n = static_cast<Eigen::Index>(years.size());
    Eigen::VectorXd k(n);
    for (std::size_t j = 0; j < at.size(); ++j) {
      const double t = at[j] - origin_;
      if (t < 0.0) throw std::invalid_argument("GaussianCurvePosterior::predict: year before origin");
      for (Eigen::Index i = 0; i < n; ++i)
        k[i] = model_.sigma2 * std::min(t, years[static_cast<std::size_t>(i)] - origin_);
      out.mean[j] = model_.prior_mean(at[j]) + k.dot(alpha_);
      const double reduce = n ? k.dot(llt_.solve(k)) : 0.0;
      out.variance[j] = std::max(0.0, model_.sigma2 * t - reduce);
    }
    return out;
  }

  CurveMarginals marginals() const {
    CurveMarginals out;
    out.years = years;
    out.mean.assign(mean.data(), mean.data() + mean.size());
    out.variance.resize(years.size());
    for (std::size_t i = 0; i < years.size(); ++i)
      out.variance[i] = std::max(0.0, covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    return out;
  }

 private:
  friend GaussianCurvePosterior wiener_posterior(std::span<const CalibPoint>, const WienerPriorModel&);
  WienerPriorModel model_;
  double origin_ = 0.0;
  Eigen::VectorXd alpha_;        // (K + V)^-1 (z - m)
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double default_origin(std::span<const CalibPoint> points) {
  double first = std::numeric_limits<double>::infinity();
  for (const auto& p : points) first = std::min(first, p.cal_year);
  return first - 1.0;
}

inline GaussianCurvePosterior wiener_posterior(std::span<const CalibPoint> points,
                                               const WienerPriorModel& model) {
  if (!(model.sigma2 >= 0.0)) throw std::invalid_argument("wiener_posterior: sigma2 must be >= 0");
  if (points.empty()) throw std::invalid_argument("wiener_posterior: no calibration points");
  GaussianCurvePosterior post;
  post.model_ = model;
  post.origin_ = model.origin ? *model.origin : default_origin(points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd resid(n), prior(n);
  post.years.resize(points.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    if (!(p.sigma > 0.0)) throw std::invalid_argument("wiener_posterior: measurement sigma must be > 0");
    const double ti = p.cal_year - post.origin_;
    if (ti < 0.0) throw std::invalid_argument("wiener_posterior: data year before origin");
    post.years[static_cast<std::size_t>(i)] = p.cal_year;
    prior[i] = model.prior_mean(p.cal_year);
    resid[i] = p.bp_age - prior[i];
    for (Eigen::Index j = 0; j < n; ++j)
      K(i, j) = model.sigma2 * std::min(ti, points[static_cast<std::size_t>(j)].cal_year - post.origin_);
  }
  Eigen::MatrixXd A = K;
  for (Eigen::Index i = 0; i < n; ++i) A(i, i) += points[static_cast<std::size_t>(i)].sigma *
                                                  points[static_cast<std::size_t>(i)].sigma;
  post.llt_.compute(A);
  if (post.llt_.info() != Eigen::Success)
    throw std::runtime_error("wiener_posterior: K + V is not positive definite");
  post.alpha_ = post.llt_.solve(resid);
  post.mean = prior + K * post.alpha_;
  post.covariance = K - K * post.llt_.solve(K);
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  return post;
}

// Moment gap on the Wiener increments: prior minus posterior expected squared
// detrended increments, summed over the (year-sorted) data and the first step
// from the origin, where the curve is pinned to its prior mean. The posterior
// moments come from a Kalman/RTS pass, which matches the dense solve in
// wiener_posterior but costs O(n).
inline double sigma2_moment_gap(std::span<const CalibPoint> points, WienerPriorModel model,
                                double sigma2) {
  std::vector<CalibPoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CalibPoint& a, const CalibPoint& b) { return a.cal_year < b.cal_year; });
  model.sigma2 = sigma2;
  const double origin = model.origin ? *model.origin : default_origin(sorted);
  const std::size_t n = sorted.size();
  std::vector<double> m_pred(n), p_pred(n), m_f(n), p_f(n);
  double m = 0.0, P = 0.0, prev_year = origin;
  for (std::size_t i = 0; i < n; ++i) {
    const double dy = sorted[i].cal_year - prev_year;
    if (dy < 0.0) throw std::invalid_argument("sigma2_moment_gap: data year before origin");
    p_pred[i] = P + sigma2 * dy;
    m_pred[i] = m;
    const double v = sorted[i].sigma * sorted[i].sigma;
    const double gain = p_pred[i] / (p_pred[i] + v);
    m = m_f[i] = m + gain * (sorted[i].bp_age - model.prior_mean(sorted[i].cal_year) - m);
    P = p_f[i] = (1.0 - gain) * p_pred[i];
    prev_year = sorted[i].cal_year;
  }
  // Smoothed mean, variance and covariance with the previous point.
  std::vector<double> m_s(n), p_s(n), c_s(n, 0.0);
  m_s[n - 1] = m_f[n - 1];
  p_s[n - 1] = p_f[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    const double J = p_pred[i + 1] > 0.0 ? p_f[i] / p_pred[i + 1] : 0.0;
    m_s[i] = m_f[i] + J * (m_s[i + 1] - m_pred[i + 1]);
    p_s[i] = p_f[i] + J * J * (p_s[i + 1] - p_pred[i + 1]);
    c_s[i + 1] = J * p_s[i + 1];
  }
  double prior_sum = 0.0, post_sum = 0.0;
  double prev_dev = 0.0, prev_var = 0.0;
  prev_year = origin;
  for (std::size_t i = 0; i < n; ++i) {
    prior_sum += sigma2 * (sorted[i].cal_year - prev_year);
    post_sum += (m_s[i] - prev_dev) * (m_s[i] - prev_dev) + p_s[i] + prev_var - 2.0 * c_s[i];
    prev_year = sorted[i].cal_year;
    prev_dev = m_s[i];
    prev_var = p_s[i];
  }
  return prior_sum - post_sum;
}

struct Sigma2Estimate {
  double sigma2 = 0.0;
  bool warning = false;  // no sign change in the bracket; endpoint returned
};

// Empirical-Bayes sigma2: root of the moment gap, found by scanning a log grid
// of [lo, hi] for the last change from negative to positive and bisecting it.
inline Sigma2Estimate estimate_sigma2(std::span<const CalibPoint> points, const WienerPriorModel& model,
                                      double lo = 1e-6, double hi = 1e6) {
  if (points.size() < 2) throw std::invalid_argument("estimate_sigma2: need at least 2 points");
  constexpr int scan = 60;
  const double a = std::log(lo), b = std::log(hi);
  std::vector<double> xs(scan + 1), gs(scan + 1);
  for (int i = 0; i <= scan; ++i) {
    xs[i] = a + (b - a) * i / scan;
    gs[i] = sigma2_moment_gap(points, model, std::exp(xs[i]));
  }
  int bracket = -1;
  for (int i = 0; i < scan; ++i)
    if (gs[i] < 0.0 && gs[i + 1] >= 0.0) bracket = i;
  if (bracket < 0) {
    const bool low = std::abs(gs.front()) <= std::abs(gs.back());
    return {low ? lo : hi, true};
  }
  double l = xs[bracket], h = xs[bracket + 1];
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (l + h);
    (sigma2_moment_gap(points, model, std::exp(m)) < 0.0 ? l : h) = m;
  }
  return {std::exp(0.5 * (l + h)), false};
}

// ---------------------------------------------------------------------------
// Calibrating a new determination against a Gaussian curve

struct CalibrationResult {
  std::vector<double> years;
  std::vector<double> log_likelihood;
  std::vector<double> density;  // cell masses, sum to 1
  std::vector<char> member;
  std::vector<std::pair<double, double>> intervals;  // inclusive member runs
  double mass = 0.0;
  double threshold = 0.0;
  double step = 1.0;
  double total_length = 0.0;  // member count * step
  double span = 0.0;          // last - first member + step
};

namespace detail {

inline std::vector<double> calibration_loglik(double obs_bp, double obs_sigma, const CurveMarginals& curve) {
  if (curve.years.empty()) throw std::invalid_argument("calibration: empty curve");
  std::vector<double> ll(curve.years.size());
  for (std::size_t k = 0; k < ll.size(); ++k)
    ll[k] = stats::normal_logpdf(obs_bp, curve.mean[k], std::sqrt(curve.variance[k] + obs_sigma * obs_sigma));
  return ll;
}

inline double grid_step(const std::vector<double>& years) {
  return years.size() > 1 ? std::abs(years[1] - years[0]) : 1.0;
}

}  // namespace detail

inline CalibrationResult bayes_calibrate(double obs_bp, double obs_sigma, const CurveMarginals& curve,
                                         double level = 0.9) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bayes_calibrate: level must be in (0, 1)");
  CalibrationResult out;
  out.years = curve.years;
  out.step = detail::grid_step(curve.years);
  out.log_likelihood = detail::calibration_loglik(obs_bp, obs_sigma, curve);
  const double top = *std::max_element(out.log_likelihood.begin(), out.log_likelihood.end());
  out.density.resize(out.years.size());
  double total = 0.0;
  for (std::size_t k = 0; k < out.density.size(); ++k) total += out.density[k] = std::exp(out.log_likelihood[k] - top);
  for (double& d : out.density) d /= total;

  auto sel = hpd_select(out.density, level);
  out.member = std::move(sel.member);
  out.mass = sel.mass;
  out.threshold = sel.threshold;
  std::size_t first = out.member.size(), last = 0, count = 0;
  for (std::size_t k = 0; k < out.member.size(); ++k) {
    if (!out.member[k]) continue;
    ++count;
    first = std::min(first, k);
    last = k;
    if (k == 0 || !out.member[k - 1]) out.intervals.push_back({out.years[k], out.years[k]});
    out.intervals.back().second = out.years[k];
  }
  out.total_length = static_cast<double>(count) * out.step;
  out.span = count ? std::abs(out.years[last] - out.years[first]) + out.step : 0.0;
  return out;
}

struct ConfidenceInterval {
  double center = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double y) const { return y >= lo && y <= hi; }
};

// Interval of length match_length centred at the likelihood maximizer; ties
// resolve to the earliest grid year.
inline ConfidenceInterval mle_calibrate(double obs_bp, double obs_sigma, const CurveMarginals& curve,
                                        double match_length) {
  if (!(match_length >= 0.0)) throw std::invalid_argument("mle_calibrate: negative length");
  const auto ll = detail::calibration_loglik(obs_bp, obs_sigma, curve);
  std::size_t best = 0;
  for (std::size_t k = 1; k < ll.size(); ++k)
    if (ll[k] > ll[best] || (ll[k] == ll[best] && curve.years[k] < curve.years[best])) best = k;
  const double c = curve.years[best];
  return {c, c - 0.5 * match_length, c + 0.5 * match_length};
}

}  // namespace c14
