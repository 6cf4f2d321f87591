#include <gtest/gtest.h>

#include <cmath>

#include "c14/studies.hpp"

using namespace c14;
using namespace c14::studies;

TEST(TwoPeriodStudy, SymmetricAndMonotone) {
  std::vector<int> Ms;
  for (int M = 1; M <= 20; ++M) Ms.push_back(M);
  const auto rows = run_two_period_study(5, Ms);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].interval.mid(), rows[i - 1].interval.mid());
  const std::vector<int> five{5};
  EXPECT_NEAR(run_two_period_study(5, five)[0].interval.mid(), time_axis::from_bce(1000), 0.05);
}

TEST(TwoPeriodStudy, NoiselessLimitCollapses) {
  TwoPeriodConfig base;
  double prev = 1e9;
  const std::vector<int> M{3};
  for (double sd : {10.0, 3.0, 1.0, 0.3}) {
    base.sd = sd;
    const auto ci = run_two_period_study(3, M, base)[0].interval;
    EXPECT_LT(ci.hi - ci.lo, prev);
    prev = ci.hi - ci.lo;
    EXPECT_LE(ci.lo, time_axis::from_bce(1000) + 3 * sd);
    EXPECT_GE(ci.hi, time_axis::from_bce(1000) - 3 * sd);
  }
  EXPECT_LT(prev, 2.0);
}

TEST(SequenceStudy, FixedDataRowThree) {
  SequenceConfig cfg;
  cfg.steps = 1'000'000;
  const auto rep = run_sequence_study(cfg);
  ASSERT_EQ(rep.rows.size(), 10u);
  EXPECT_DOUBLE_EQ(rep.rows[2].truth_bp, 3120);
  EXPECT_DOUBLE_EQ(rep.rows[2].y_bp, 3050.0);
  EXPECT_NEAR(rep.rows[2].mean_bp, 3113.4, 2.0);
  EXPECT_NEAR(rep.rows[0].mean_bp, 3137.2, 2.0);
  for (const auto& r : rep.rows) {
    EXPECT_TRUE(r.covers()) << r.truth_bp;
    EXPECT_GE(r.upper_bp, r.mean_bp);
    EXPECT_LE(r.lower_bp, r.mean_bp);
  }
  for (std::size_t m = 1; m < rep.rows.size(); ++m) EXPECT_LE(rep.rows[m].mean_bp, rep.rows[m - 1].mean_bp);
}

TEST(SequenceStudy, FreshDrawsReproducible) {
  SequenceConfig cfg;
  cfg.fixed_data = false;
  cfg.steps = 5000;
  cfg.seed = 12;
  const auto a = run_sequence_study(cfg), b = run_sequence_study(cfg);
  for (std::size_t m = 0; m < a.rows.size(); ++m) {
    EXPECT_EQ(a.rows[m].y_bp, b.rows[m].y_bp);
    EXPECT_EQ(a.rows[m].mean_bp, b.rows[m].mean_bp);
  }
  cfg.seed = 13;
  EXPECT_NE(run_sequence_study(cfg).rows[0].y_bp, a.rows[0].y_bp);
}

TEST(MonotoneBiasStudy, BayesMonotoneAndLateBias) {
  MonotoneBiasConfig cfg;
  const auto rep = run_monotone_bias_study(cfg);
  for (const auto& r : rep.replicates)
    for (std::size_t m = 1; m < r.bayes.size(); ++m) EXPECT_LE(r.bayes[m - 1], r.bayes[m]);
  EXPECT_LT(rep.late_sign.p_value, 0.05);
}

TEST(MonotoneBiasStudy, LowNoiseRecoversTruth) {
  MonotoneBiasConfig cfg;
  cfg.sigma = 0.2;
  cfg.replications = 3;
  cfg.steps = 20'000;
  const auto rep = run_monotone_bias_study(cfg);
  for (const auto& r : rep.replicates)
    for (std::size_t m = 0; m < rep.truth.size(); ++m) {
      EXPECT_NEAR(r.mle[m], rep.truth[m], 1.0);
      EXPECT_NEAR(r.bayes[m], rep.truth[m], 1.0);
    }
}

TEST(FourLayerStudy, PriorBDisplacement) {
  FourLayerConfig cfg;
  const auto rep = run_four_layer_study(cfg);
  EXPECT_LT(rep.prior_b_sign.p_value, 0.01);
  EXPECT_GT(rep.mean_contraction_b, rep.mean_contraction_a);
}

TEST(FourLayerStudy, Reproducible) {
  FourLayerConfig cfg;
  cfg.replications = 3;
  cfg.steps = 2000;
  const auto a = run_four_layer_study(cfg), b = run_four_layer_study(cfg);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(a.replicates[r].fit.prior_b, b.replicates[r].fit.prior_b);
}

TEST(EbChangeStudy, CoverageOfNinetyPercentSets) {
  EbChangeConfig cfg;
  const auto rep = run_eb_change_study(cfg);
  EXPECT_GE(rep.coverage, 0.80);
  double s = 0;
  for (double v : rep.replicates.front().posterior.density) s += v;
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(CoverageStudy, NominalWhenPriorIsExact) {
  CoverageConfig cfg;
  cfg.misfit_amplitude = 0.0;
  cfg.fixed_sigma2 = 0.0;
  cfg.replications = 2000;
  const auto rep = run_calibration_coverage_study(cfg);
  // The outer targets sit within 3 sigma of the curve's ends, where the grid
  // cuts off credible mass; only the interior ones are nominal.
  for (std::size_t k = 1; k + 1 < rep.rows.size(); ++k)
    EXPECT_NEAR(rep.rows[k].bayes_coverage, 0.90, 0.02) << rep.rows[k].year_bce;
}

TEST(CoverageStudy, ReproducibleAndThreadIndependent) {
  CoverageConfig cfg;
  cfg.replications = 100;
  cfg.threads = 1;
  const auto a = run_calibration_coverage_study(cfg);
  cfg.threads = 3;
  const auto b = run_calibration_coverage_study(cfg);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].bayes_coverage, b.rows[k].bayes_coverage);
    EXPECT_EQ(a.rows[k].bayes_range, b.rows[k].bayes_range);
    EXPECT_GT(a.rows[k].bayes_se, 0.0 - 1e-12);
  }
  EXPECT_EQ(a.sigma2, b.sigma2);
}

TEST(ConcentrationFigures, SlopesAndDelegation) {
  std::vector<CalibPoint> pts;
  for (double y = -1000; y <= -100; y += 5) pts.push_back({y, 2400 - (y + 550) * 0.9 + 20 * std::sin(y / 30), 10, ""});
  const std::vector<double> bw{20, 60};
  const auto f = emit_concentration_figures(pts, bw);
  ASSERT_EQ(f.series.size(), 2u);
  EXPECT_DOUBLE_EQ(f.series[0].years.front(), -850);
  EXPECT_DOUBLE_EQ(f.series[0].years.back(), -250);
  const auto ref = kernel_smooth(pts, 20, f.series[0].years);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_DOUBLE_EQ(f.series[0].smoothed_bp[i], ref[i]);
  ASSERT_EQ(f.references.size(), 2u);
  for (const auto& r : f.references) {
    EXPECT_DOUBLE_EQ(r.slope, -1.0 / 8267.0);
    EXPECT_NEAR(r.at(r.anchor_year + 100) - r.at(r.anchor_year), -100.0 / 8267.0, 1e-15);
  }
}
