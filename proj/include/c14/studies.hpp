#pragma once

// Simulation studies: the two-period toy, the ordered-sequence table, the
// monotone-bias and four-layer comparisons, the empirical-Bayes change time,
// the calibration coverage tables and the concentration series.
//
// Every study is a pure function of its config; replications draw from
// Rng::stream(seed, index) so results do not depend on the thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "boundary_bayes.hpp"
#include "calibration.hpp"
#include "hpd.hpp"
#include "model.hpp"
#include "order_mle.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace c14::studies {

// ---------------------------------------------------------------------------
// Two-period toy

struct TwoPeriodRow {
  int M = 0;
  CredibleInterval interval;
};

inline std::vector<TwoPeriodRow> run_two_period_study(int K, std::span<const int> M_values,
                                                      TwoPeriodConfig base = {}) {
  if (M_values.empty()) throw std::invalid_argument("run_two_period_study: empty M range");
  std::vector<TwoPeriodRow> rows;
  for (int M : M_values) {
    TwoPeriodConfig cfg = base;
    cfg.K = K;
    cfg.M = M;
    auto ci = two_period_credible(cfg);
    ci.grid.clear();
    ci.density.clear();
    rows.push_back({M, std::move(ci)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Ordered sequence of events (radiocarbon axis, handled as -BP so that the
// order is increasing toward the present)

struct SequenceRow {
  double truth_bp = 0.0;
  double y_bp = 0.0;
  double mean_bp = 0.0;
  double upper_bp = 0.0;  // older end of the 95% interval
  double lower_bp = 0.0;  // younger end
  bool covers() const { return truth_bp <= upper_bp && truth_bp >= lower_bp; }
};

struct SequenceConfig {
  bool fixed_data = true;
  std::size_t steps = 1'000'000;
  std::uint64_t seed = 1;
  double sigma = 30.0;
  double t_s_bp = 3150.0;
  double t_e_bp = 2850.0;
};

struct SequenceReport {
  std::vector<SequenceRow> rows;
  double acceptance_rate = 0.0;
};

inline constexpr std::array<double, 10> table1_truth_bp{3140, 3130, 3120, 3110, 3100, 3090, 3080, 3070, 3060, 3050};
inline constexpr std::array<double, 10> table1_y_bp{3130.2, 3116.3, 3050.0, 3136.8, 3080.3,
                                                    3088.4, 3076.3, 3111.7, 3088.8, 3129.2};

inline SequenceReport run_sequence_study(const SequenceConfig& cfg = {}) {
  std::vector<double> y(table1_y_bp.begin(), table1_y_bp.end());
  if (!cfg.fixed_data) {
    Rng rng = Rng::stream(cfg.seed, 0);
    for (std::size_t m = 0; m < y.size(); ++m) y[m] = rng.normal(table1_truth_bp[m], cfg.sigma);
  }
  std::vector<double> neg(y.size()), sig(y.size(), cfg.sigma);
  for (std::size_t m = 0; m < y.size(); ++m) neg[m] = -y[m];
  McmcConfig mc;
  mc.steps = cfg.steps;
  mc.seed = cfg.seed;
  const auto s = mcmc_ordered_events(neg, sig, -cfg.t_s_bp, -cfg.t_e_bp, mc);
  SequenceReport rep;
  rep.acceptance_rate = s.chain.acceptance_rate;
  for (std::size_t m = 0; m < y.size(); ++m)
    rep.rows.push_back({table1_truth_bp[m], y[m], -s.mean[m], -s.lower[m], -s.upper[m]});
  return rep;
}

// ---------------------------------------------------------------------------
// Monotone truths with uneven gaps: ordered MLE against the uniform-order Bayes

struct MonotoneBiasConfig {
  std::size_t M = 30;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::size_t steps = 20'000;
  double sigma = 30.0;
  double t_s = 0.0;
  double t_e = 300.0;
  double first_gap = 20.0;  // gaps shrink geometrically: first_gap * ratio^k
  double ratio = 0.85;
  double offset = 10.0;     // first truth at t_s + offset
  unsigned threads = 0;
};

// The versioned fixture: truths crowd toward the early end and leave the late
// part of the window empty.
inline std::vector<double> monotone_fixture(const MonotoneBiasConfig& cfg) {
  std::vector<double> t(cfg.M);
  double x = cfg.t_s + cfg.offset, gap = cfg.first_gap;
  for (std::size_t k = 0; k < cfg.M; ++k) {
    t[k] = x;
    x += gap;
    gap *= cfg.ratio;
  }
  return t;
}

struct MonotoneReplicate {
  std::vector<double> y, mle, bayes;
  double late_excess = 0.0;  // mean |bayes - truth| - mean |mle - truth| over the late third
};

struct MonotoneBiasReport {
  std::vector<double> truth;
  std::vector<MonotoneReplicate> replicates;
  std::vector<double> mean_error_mle, mean_error_bayes;  // signed, per index
  stats::SignTest late_sign;
};

inline MonotoneBiasReport run_monotone_bias_study(const MonotoneBiasConfig& cfg = {}) {
  if (cfg.replications < 1) throw std::invalid_argument("run_monotone_bias_study: replications >= 1");
  MonotoneBiasReport rep;
  rep.truth = monotone_fixture(cfg);
  const std::size_t M = cfg.M;
  rep.replicates.resize(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    auto& out = rep.replicates[r];
    out.y.resize(M);
    for (std::size_t m = 0; m < M; ++m) out.y[m] = cfg.sigma > 0 ? rng.normal(rep.truth[m], cfg.sigma) : rep.truth[m];
    std::vector<double> sig(M, std::max(cfg.sigma, 1e-9));
    out.mle = ordered_sequence_mle(out.y, sig, cfg.t_s, cfg.t_e);
    McmcConfig mc;
    mc.steps = cfg.steps;
    mc.seed = rng.bits();
    out.bayes = mcmc_ordered_events(out.y, sig, cfg.t_s, cfg.t_e, mc).mean;
    const std::size_t from = M - M / 3;
    double eb = 0.0, em = 0.0;
    for (std::size_t m = from; m < M; ++m) {
      eb += std::abs(out.bayes[m] - rep.truth[m]);
      em += std::abs(out.mle[m] - rep.truth[m]);
    }
    out.late_excess = (eb - em) / static_cast<double>(M - from);
  });
  rep.mean_error_mle.assign(M, 0.0);
  rep.mean_error_bayes.assign(M, 0.0);
  std::vector<double> late;
  for (const auto& r : rep.replicates) {
    for (std::size_t m = 0; m < M; ++m) {
      rep.mean_error_mle[m] += (r.mle[m] - rep.truth[m]) / static_cast<double>(cfg.replications);
      rep.mean_error_bayes[m] += (r.bayes[m] - rep.truth[m]) / static_cast<double>(cfg.replications);
    }
    late.push_back(r.late_excess);
  }
  rep.late_sign = stats::sign_test(late);
  return rep;
}

// ---------------------------------------------------------------------------
// Four layers, four events each

struct FourLayerConfig {
  std::size_t layers = 4;
  std::size_t per_layer = 4;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::size_t steps = 20'000;
  double sigma = 15.0;
  double t_s = 0.0;
  double t_e = 400.0;
  // Truths of layer g are uniform on the middle `fill` fraction of
  // [t_s + g*w, t_s + (g+1)*w], w = (t_e - t_s) / layers.
  double fill = 0.8;
  unsigned threads = 0;
};

struct FourLayerReplicate {
  std::vector<std::vector<double>> truth, y;
  LayerComparison fit;
  // Summed within-layer spread (max - min): truth minus estimate.
  double contraction_b = 0.0;
  double contraction_a = 0.0;
  double contraction_mle = 0.0;
};

struct FourLayerReport {
  std::vector<FourLayerReplicate> replicates;
  stats::SignTest prior_b_sign;  // positives: prior B spreads less than truth
  stats::SignTest prior_a_sign;
  double mean_contraction_a = 0.0, mean_contraction_b = 0.0, mean_contraction_mle = 0.0;
};

namespace detail {

inline double spread_sum(const std::vector<std::vector<double>>& v) {
  double s = 0.0;
  for (const auto& l : v) s += *std::max_element(l.begin(), l.end()) - *std::min_element(l.begin(), l.end());
  return s;
}

}  // namespace detail

inline FourLayerReport run_four_layer_study(const FourLayerConfig& cfg = {}) {
  if (cfg.replications < 1) throw std::invalid_argument("run_four_layer_study: replications >= 1");
  FourLayerReport rep;
  rep.replicates.resize(cfg.replications);
  const double w = (cfg.t_e - cfg.t_s) / static_cast<double>(cfg.layers);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    auto& out = rep.replicates[r];
    std::vector<std::vector<Observation>> layers(cfg.layers);
    out.truth.resize(cfg.layers);
    out.y.resize(cfg.layers);
    for (std::size_t g = 0; g < cfg.layers; ++g) {
      const double lo = cfg.t_s + (static_cast<double>(g) + 0.5 * (1.0 - cfg.fill)) * w;
      for (std::size_t m = 0; m < cfg.per_layer; ++m) {
        const double t = lo + cfg.fill * w * rng.uniform();
        const double y = cfg.sigma > 0 ? rng.normal(t, cfg.sigma) : t;
        out.truth[g].push_back(t);
        out.y[g].push_back(y);
        layers[g].push_back({y, std::max(cfg.sigma, 1e-9)});
      }
      std::sort(out.truth[g].begin(), out.truth[g].end());
    }
    LayerConfig lc;
    lc.steps = cfg.steps;
    lc.seed = rng.bits();
    out.fit = layer_priors_compare(layers, cfg.t_s, cfg.t_e, lc);
    const double truth_spread = detail::spread_sum(out.truth);
    out.contraction_b = truth_spread - detail::spread_sum(out.fit.prior_b);
    out.contraction_a = truth_spread - detail::spread_sum(out.fit.prior_a);
    out.contraction_mle = truth_spread - detail::spread_sum(out.fit.mle);
  });
  std::vector<double> b, a;
  for (const auto& r : rep.replicates) {
    b.push_back(r.contraction_b);
    a.push_back(r.contraction_a);
    rep.mean_contraction_a += r.contraction_a / static_cast<double>(cfg.replications);
    rep.mean_contraction_b += r.contraction_b / static_cast<double>(cfg.replications);
    rep.mean_contraction_mle += r.contraction_mle / static_cast<double>(cfg.replications);
  }
  rep.prior_b_sign = stats::sign_test(b);
  rep.prior_a_sign = stats::sign_test(a);
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical-Bayes change time

struct EbChangeConfig {
  double t_s = time_axis::from_bce(1100);
  double t_e = time_axis::from_bce(900);
  double tau = time_axis::from_bce(1000);
  double sigma = 10.0;
  std::size_t per_stratum = 20;
  double beta1_a = 0.1, beta1_b = 0.2;  // stratum I dates on [t_s, tau]
  double beta2_a = 0.2, beta2_b = 0.1;  // stratum II dates on [tau, t_e]
  std::size_t em_iterations = 5;  // early stop; longer runs overfit the mixing weights
  double support_step = 1.0;
  double level = 0.9;
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct EbChangeReplicate {
  std::vector<Observation> first, second;
  MixingDistribution pi1, pi2;
  TauDensity posterior;
  double lo = 0.0, hi = 0.0, mean = 0.0;
  bool covers = false;
};

struct EbChangeReport {
  std::vector<EbChangeReplicate> replicates;  // densities kept for the first replicate only
  double coverage = 0.0;
  double mean_width = 0.0;
};

inline EbChangeReplicate eb_change_replicate(const EbChangeConfig& cfg, Rng& rng) {
  EbChangeReplicate r;
  for (std::size_t j = 0; j < cfg.per_stratum; ++j) {
    const double a = cfg.t_s + (cfg.tau - cfg.t_s) * rng.beta(cfg.beta1_a, cfg.beta1_b);
    const double b = cfg.tau + (cfg.t_e - cfg.tau) * rng.beta(cfg.beta2_a, cfg.beta2_b);
    r.first.push_back({rng.normal(a, cfg.sigma), cfg.sigma});
    r.second.push_back({rng.normal(b, cfg.sigma), cfg.sigma});
  }
  std::vector<double> support;
  for (double x = cfg.t_s; x <= cfg.t_e + 1e-9; x += cfg.support_step) support.push_back(x);
  auto fit = [&](const std::vector<Observation>& obs) {
    std::vector<double> v, s;
    for (const auto& o : obs) {
      v.push_back(o.value);
      s.push_back(o.sigma);
    }
    return eb_em_deconvolve(v, s, support, cfg.em_iterations);
  };
  r.pi1 = fit(r.first);
  r.pi2 = fit(r.second);
  r.posterior = eb_change_posterior(r.pi1, r.pi2, r.first, r.second, support);
  const auto sel = hpd_select(r.posterior.density, cfg.level);
  r.lo = cfg.t_e;
  r.hi = cfg.t_s;
  for (std::size_t k = 0; k < support.size(); ++k) {
    r.mean += support[k] * r.posterior.density[k];
    if (sel.member[k]) {
      r.lo = std::min(r.lo, support[k]);
      r.hi = std::max(r.hi, support[k]);
    }
  }
  r.covers = cfg.tau >= r.lo - 0.5 * cfg.support_step && cfg.tau <= r.hi + 0.5 * cfg.support_step;
  return r;
}

inline EbChangeReport run_eb_change_study(const EbChangeConfig& cfg = {}) {
  if (cfg.replications < 1) throw std::invalid_argument("run_eb_change_study: replications >= 1");
  EbChangeReport rep;
  rep.replicates.resize(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    rep.replicates[r] = eb_change_replicate(cfg, rng);
    if (r > 0) {
      rep.replicates[r].posterior = {};
      rep.replicates[r].pi1 = {};
      rep.replicates[r].pi2 = {};
    }
  });
  for (const auto& r : rep.replicates) {
    rep.coverage += r.covers ? 1.0 : 0.0;
    rep.mean_width += r.hi - r.lo + cfg.support_step;
  }
  rep.coverage /= static_cast<double>(cfg.replications);
  rep.mean_width /= static_cast<double>(cfg.replications);
  return rep;
}

// ---------------------------------------------------------------------------
// Calibration coverage

enum class CoverageMode { misspecified, prior_drawn };

struct CoverageConfig {
  CoverageMode mode = CoverageMode::misspecified;
  std::size_t replications = 5000;
  std::uint64_t seed = 1;
  double gamma0 = 1950.0;  // BP = gamma0 + gamma1 * year on the signed axis
  double gamma1 = -1.0;
  double oldest_bce = 1450.0;
  double newest_bce = 750.0;
  double data_spacing = 10.0;
  double data_sigma = 21.0;
  double misfit_amplitude = 70.0;  // misspecified mode: size of the cubic-sine departure from the drift
  double obs_sigma = 20.0;
  double level = 0.9;
  std::vector<double> targets_bce{1386, 1244, 1101, 959, 816};
  std::size_t refresh = 20;          // new calibration data every `refresh` replications
  double prior_sigma2 = 20.0;        // prior-drawn mode: Wiener rate of the true curve
  std::optional<double> fixed_sigma2;  // misspecified mode: skip the empirical-Bayes step
  unsigned threads = 0;
};

struct CoverageRow {
  double year_bce = 0.0;
  double bayes_coverage = 0.0;
  double bayes_range = 0.0;   // mean span of the credible set
  double bayes_length = 0.0;  // mean total length of the credible set
  double freq_coverage = 0.0;
  double freq_range = 0.0;    // mean interval length (= bayes_length)
  double bayes_se = 0.0;      // binomial standard errors
  double freq_se = 0.0;
};

struct CoverageReport {
  CoverageConfig config;
  std::vector<CoverageRow> rows;
  std::vector<double> sigma2;  // per refresh block
  std::size_t sigma2_warnings = 0;
};

namespace detail {

inline double misspecified_truth(const CoverageConfig& cfg, double year) {
  const double oldest = time_axis::from_bce(cfg.oldest_bce), newest = time_axis::from_bce(cfg.newest_bce);
  const double r = (year - oldest) / (newest - oldest);
  return cfg.gamma0 + cfg.gamma1 * year + cfg.misfit_amplitude * r * r * r * std::sin(time_axis::to_bce(year) / 20.0);
}

inline std::vector<double> data_years(const CoverageConfig& cfg) {
  std::vector<double> y;
  const double oldest = time_axis::from_bce(cfg.oldest_bce), newest = time_axis::from_bce(cfg.newest_bce);
  for (double x = oldest; x <= newest + 1e-9; x += cfg.data_spacing) y.push_back(x);
  return y;
}

// One Brownian path with drift over the sorted union of `years`, pinned to
// the prior mean at `origin`.
inline std::vector<double> draw_prior_curve(const CoverageConfig& cfg, std::vector<double> years, double origin,
                                            Rng& rng) {
  std::sort(years.begin(), years.end());
  std::vector<double> v(years.size());
  double prev = origin, w = 0.0;
  for (std::size_t i = 0; i < years.size(); ++i) {
    w += std::sqrt(cfg.prior_sigma2 * (years[i] - prev)) * rng.normal();
    prev = years[i];
    v[i] = cfg.gamma0 + cfg.gamma1 * years[i] + w;
  }
  return v;
}

}  // namespace detail

inline CoverageReport run_calibration_coverage_study(const CoverageConfig& cfg = {}) {
  if (cfg.replications < 1) throw std::invalid_argument("coverage study: replications >= 1");
  if (cfg.refresh < 1) throw std::invalid_argument("coverage study: refresh >= 1");
  CoverageReport rep;
  rep.config = cfg;
  const auto dyears = detail::data_years(cfg);
  const double origin = dyears.front() - 1.0;
  std::vector<double> grid;
  for (double x = dyears.front(); x <= dyears.back() + 1e-9; x += 1.0) grid.push_back(x);
  const std::size_t T = cfg.targets_bce.size();
  std::vector<double> targets(T);
  for (std::size_t k = 0; k < T; ++k) targets[k] = time_axis::from_bce(cfg.targets_bce[k]);

  // True curve values at the data years and the targets.
  std::vector<double> truth_data(dyears.size()), truth_target(T);
  if (cfg.mode == CoverageMode::misspecified) {
    for (std::size_t i = 0; i < dyears.size(); ++i) truth_data[i] = detail::misspecified_truth(cfg, dyears[i]);
    for (std::size_t k = 0; k < T; ++k) truth_target[k] = detail::misspecified_truth(cfg, targets[k]);
  } else {
    std::vector<double> all = dyears;
    all.insert(all.end(), targets.begin(), targets.end());
    Rng curve_rng = Rng::stream(cfg.seed, ~std::uint64_t{0});
    const auto path = detail::draw_prior_curve(cfg, all, origin, curve_rng);
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    auto lookup = [&](double y) {
      return path[static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), y) - sorted.begin())];
    };
    for (std::size_t i = 0; i < dyears.size(); ++i) truth_data[i] = lookup(dyears[i]);
    for (std::size_t k = 0; k < T; ++k) truth_target[k] = lookup(targets[k]);
  }
  std::vector<std::size_t> target_cell(T);
  for (std::size_t k = 0; k < T; ++k)
    target_cell[k] = static_cast<std::size_t>(std::lround(targets[k] - grid.front()));

  const std::size_t blocks = (cfg.replications + cfg.refresh - 1) / cfg.refresh;
  struct Tally {
    std::vector<double> bc, br, bl, fc;
    double sigma2 = 0.0;
    bool warn = false;
  };
  std::vector<Tally> tally(blocks);
  parallel_for(blocks, cfg.threads, [&](std::size_t b) {
    Rng rng = Rng::stream(cfg.seed, b);
    Tally& t = tally[b];
    t.bc.assign(T, 0.0);
    t.br.assign(T, 0.0);
    t.bl.assign(T, 0.0);
    t.fc.assign(T, 0.0);
    std::vector<CalibPoint> pts;
    for (std::size_t i = 0; i < dyears.size(); ++i)
      pts.push_back({dyears[i], rng.normal(truth_data[i], cfg.data_sigma), cfg.data_sigma, "sim"});
    WienerPriorModel model{cfg.gamma0, cfg.gamma1, 0.0, origin};
    if (cfg.mode == CoverageMode::prior_drawn) {
      model.sigma2 = cfg.prior_sigma2;
    } else if (cfg.fixed_sigma2) {
      model.sigma2 = *cfg.fixed_sigma2;
    } else {
      const auto est = estimate_sigma2(pts, model);
      model.sigma2 = est.sigma2;
      t.warn = est.warning;
    }
    t.sigma2 = model.sigma2;
    const auto curve = wiener_posterior(pts, model).predict(grid);
    const std::size_t reps = std::min(cfg.refresh, cfg.replications - b * cfg.refresh);
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t k = 0; k < T; ++k) {
        const double obs = rng.normal(truth_target[k], cfg.obs_sigma);
        const auto bay = bayes_calibrate(obs, cfg.obs_sigma, curve, cfg.level);
        const auto freq = mle_calibrate(obs, cfg.obs_sigma, curve, bay.total_length);
        t.bc[k] += bay.member[target_cell[k]] ? 1.0 : 0.0;
        t.br[k] += bay.span;
        t.bl[k] += bay.total_length;
        t.fc[k] += freq.contains(targets[k]) ? 1.0 : 0.0;
      }
  });

  const double n = static_cast<double>(cfg.replications);
  rep.rows.resize(T);
  for (std::size_t k = 0; k < T; ++k) rep.rows[k].year_bce = cfg.targets_bce[k];
  for (const auto& t : tally) {
    rep.sigma2.push_back(t.sigma2);
    rep.sigma2_warnings += t.warn ? 1 : 0;
    for (std::size_t k = 0; k < T; ++k) {
      rep.rows[k].bayes_coverage += t.bc[k] / n;
      rep.rows[k].bayes_range += t.br[k] / n;
      rep.rows[k].bayes_length += t.bl[k] / n;
      rep.rows[k].freq_coverage += t.fc[k] / n;
    }
  }
  for (auto& row : rep.rows) {
    row.freq_range = row.bayes_length;
    row.bayes_se = std::sqrt(row.bayes_coverage * (1.0 - row.bayes_coverage) / n);
    row.freq_se = std::sqrt(row.freq_coverage * (1.0 - row.freq_coverage) / n);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Concentration series

struct ConcentrationSeries {
  double bandwidth = 20.0;
  std::vector<double> years;
  std::vector<double> smoothed_bp;
  std::vector<double> log_ratio;  // log C(y)/C0
};

struct DecayReference {
  double anchor_year = 0.0;
  double anchor_log_ratio = 0.0;
  double slope = -1.0 / cambridge_mean_life;  // per calendar year, in log concentration
  double at(double year) const { return anchor_log_ratio + slope * (year - anchor_year); }
};

struct ConcentrationFigures {
  std::vector<ConcentrationSeries> series;
  std::vector<DecayReference> references;  // anchored on the first series
};

inline ConcentrationFigures emit_concentration_figures(std::span<const CalibPoint> points,
                                                       std::span<const double> bandwidths,
                                                       double from_bce = 850, double to_bce = 250,
                                                       std::vector<double> anchors_bce = {734, 334}) {
  if (points.empty()) throw std::invalid_argument("emit_concentration_figures: no calibration data");
  if (bandwidths.empty()) throw std::invalid_argument("emit_concentration_figures: no bandwidths");
  ConcentrationFigures out;
  std::vector<double> years;
  for (double y = time_axis::from_bce(from_bce); y <= time_axis::from_bce(to_bce) + 1e-9; y += 1.0) years.push_back(y);
  for (double bw : bandwidths) {
    ConcentrationSeries s;
    s.bandwidth = bw;
    s.years = years;
    s.smoothed_bp = kernel_smooth(points, bw, years);
    for (std::size_t i = 0; i < years.size(); ++i)
      s.log_ratio.push_back(std::log(concentration_ratio(years[i], s.smoothed_bp[i])));
    out.series.push_back(std::move(s));
  }
  for (double a : anchors_bce) {
    const double y = time_axis::from_bce(a);
    const auto bp = kernel_smooth(points, bandwidths.front(), std::span<const double>(&y, 1));
    out.references.push_back({y, std::log(concentration_ratio(y, bp[0]))});
  }
  return out;
}

}  // namespace c14::studies
