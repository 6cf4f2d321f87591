#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "c14/boundary_bayes.hpp"
#include "c14/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace c14;

namespace {

double total(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

StratifiedDataset short_period_toy() {
  using time_axis::from_bce;
  return fixture::simple_dataset({{from_bce(980)}, {from_bce(980), from_bce(920)}, {from_bce(920)}}, 25,
                                 from_bce(1250), from_bce(650));
}

}  // namespace

TEST(HpdRegion, UniformAndSpike) {
  GridDensity u{{{0, 1, 2, 3, 4}}, std::vector<double>(5, 0.2)};
  const auto flat = hpd_region(u, 0.5);
  EXPECT_EQ(flat.count, 3u);
  EXPECT_NEAR(flat.mass, 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(flat.projections[0].first, 0.0);
  EXPECT_DOUBLE_EQ(flat.projections[0].second, 2.0);
  GridDensity spike{{{0, 1, 2, 3, 4}}, {0, 0, 1, 0, 0}};
  const auto one = hpd_region(spike, 0.95);
  EXPECT_EQ(one.count, 1u);
  EXPECT_DOUBLE_EQ(one.projections[0].first, 2.0);
  EXPECT_DOUBLE_EQ(one.projections[0].second, 2.0);
}

TEST(HpdRegion, SuperlevelSetWithinOneCell) {
  Rng rng(6);
  for (int f = 0; f < 200; ++f) {
    const std::size_t n = 5 + rng.below(200);
    GridDensity g{{std::vector<double>(n)}, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      g.axes[0][i] = double(i);
      g.mass[i] = rng.below(4) == 0 ? 0.0 : std::exp(rng.normal(0, 2));
    }
    const double s = total(g.mass);
    for (double& m : g.mass) m /= s;
    const double level = rng.uniform(0.05, 0.99);
    const auto r = hpd_region(g, level);
    double lowest_in = std::numeric_limits<double>::infinity(), highest_out = 0;
    for (std::size_t i = 0; i < n; ++i)
      (r.member[i] ? lowest_in : highest_out) =
          r.member[i] ? std::min(lowest_in, g.mass[i]) : std::max(highest_out, g.mass[i]);
    EXPECT_GE(r.mass, level - 1e-12);
    EXPECT_LE(r.mass, level + lowest_in + 1e-12);
    EXPECT_LE(highest_out, lowest_in);
  }
}

TEST(BoundaryPosterior, TwoStrataMatchesQuadratureOracle) {
  Rng rng(42);
  for (double c : {std::numeric_limits<double>::infinity(), 1.345, 0.5}) {
    for (int f = 0; f < 4; ++f) {
      std::vector<std::vector<std::vector<Observation>>> s(2);
      std::vector<std::vector<oracle::Obs>> first, second;
      for (std::size_t g = 0; g < 2; ++g)
        for (int m = 0; m < 2 + f % 2; ++m) {
          std::vector<Observation> obs;
          std::vector<oracle::Obs> ob;
          for (int k = 0; k < 1 + m % 2; ++k) {
            const double v = rng.uniform(0, 60) + 15.0 * g, sd = rng.uniform(3, 10);
            obs.push_back({v, sd});
            ob.push_back({v, sd});
          }
          s[g].push_back(obs);
          (g == 0 ? first : second).push_back(ob);
        }
      const auto d = fixture::calendar_dataset(s, -10, 90);
      const auto post = boundary_posterior(d, {c}, 1.0);
      const auto ref = oracle::two_strata_posterior(first, second, c, post.axis);
      ASSERT_EQ(ref.size(), post.marginals[0].size());
      double worst = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - post.marginals[0][i]));
      EXPECT_LE(worst, 1e-6) << "c = " << c << " fixture " << f;
    }
  }
}

TEST(BoundaryPosterior, PriorOnlyIsFlatOnCone) {
  StratifiedDataset d;
  d.t_start = 0;
  d.t_end = 20;
  d.strata.resize(3);
  const auto post = boundary_posterior(d, {}, 1.0);
  ASSERT_TRUE(post.joint);
  const auto& j = *post.joint;
  const std::size_t n = post.axis.size();
  const double cell = 2.0 / double(n * (n + 1));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) EXPECT_NEAR(j.mass[a * n + b], a <= b ? cell : 0.0, 1e-12);
}

TEST(BoundaryPosterior, ReflectionSymmetry) {
  const auto d = fixture::simple_dataset({{-30, -12}, {12, 30}}, 8, -60, 60);
  const auto post = boundary_posterior(d, {}, 1.0);
  const auto& m = post.marginals[0];
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], m[m.size() - 1 - i], 1e-9);
  EXPECT_NEAR(post.mean[0], 0.0, 1e-6);
}

TEST(BoundaryPosterior, ShortPeriodToyModeHasZeroLengthMiddle) {
  const auto post = boundary_posterior(short_period_toy(), {}, 1.0);
  EXPECT_EQ(post.mode[0], post.mode[1]);
}

TEST(BoundaryPosterior, NormalizedAndConsistent) {
  const auto post = boundary_posterior(short_period_toy(), {}, 1.0);
  ASSERT_TRUE(post.joint);
  const auto& j = *post.joint;
  EXPECT_NEAR(total(j.mass), 1.0, 1e-6);
  for (const auto& m : post.marginals) EXPECT_NEAR(total(m), 1.0, 1e-6);
  EXPECT_NEAR(total(post.pairs[0].mass), 1.0, 1e-6);
  // Marginals are sums of the joint; mode is the joint argmax.
  const std::size_t n = post.axis.size();
  std::size_t arg = 0;
  for (std::size_t f = 1; f < j.mass.size(); ++f)
    if (j.mass[f] > j.mass[arg]) arg = f;
  EXPECT_NEAR(j.mass[arg], j.mass[post.mode[0] * n + post.mode[1]], 1e-12);
  for (std::size_t a = 0; a < n; a += 37) {
    double s = 0;
    for (std::size_t b = 0; b < n; ++b) s += j.mass[a * n + b];
    EXPECT_NEAR(s, post.marginals[0][a], 1e-9);
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) EXPECT_EQ(j.mass[a * n + b], 0.0);
}

TEST(BoundaryPosterior, HpdMassWithinOneCell) {
  const auto post = boundary_posterior(short_period_toy(), {}, 1.0);
  for (double level : {0.5, 0.9, 0.95}) {
    const auto r = hpd_region(post.pairs[0], level);
    EXPECT_GE(r.mass, level - 1e-12);
    EXPECT_LE(r.mass, level + r.threshold * post.pairs[0].cell_volume() + 1e-12);
  }
}

TEST(Mcmc, SingleEventMatchesTruncatedNormal) {
  const std::vector<double> y{10}, s{30};
  McmcConfig cfg;
  cfg.steps = 1'000'000;
  cfg.seed = 5;
  const auto r = mcmc_ordered_events(y, s, 0, 100, cfg);
  EXPECT_NEAR(r.mean[0], oracle::truncated_normal_mean(10, 30, 0, 100), 0.5);
}

TEST(Mcmc, PriorOnlyBetaMoments) {
  const std::vector<double> y(5, 0.0), s(5, 1.0);
  McmcConfig cfg;
  cfg.steps = 200'000;
  cfg.seed = 9;
  cfg.likelihood = false;
  const auto r = mcmc_ordered_events(y, s, 0, 1, cfg);
  const double M = 5;
  for (std::size_t m = 0; m < 5; ++m) {
    const double k = double(m + 1);
    const double mean = k / (M + 1), var = k * (M - k + 1) / ((M + 1) * (M + 1) * (M + 2));
    double sum = 0, sq = 0;
    for (std::size_t row = 0; row < r.chain.rows; ++row) {
      const double v = r.chain.at(row, m);
      sum += v;
      sq += v * v;
    }
    const double n = double(r.chain.rows);
    EXPECT_NEAR(sum / n, mean, 0.01);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), var, 0.005);
  }
}

TEST(Mcmc, ChainRespectsOrderAndIsDeterministic) {
  const std::vector<double> y{50, 30, 70, 60}, s{20, 20, 20, 20};
  McmcConfig cfg;
  cfg.steps = 5000;
  cfg.seed = 3;
  const auto a = mcmc_ordered_events(y, s, 0, 100, cfg);
  const auto b = mcmc_ordered_events(y, s, 0, 100, cfg);
  EXPECT_EQ(a.chain.states, b.chain.states);
  for (std::size_t row = 0; row < a.chain.rows; ++row) {
    double prev = 0;
    for (std::size_t m = 0; m < 4; ++m) {
      EXPECT_GE(a.chain.at(row, m), prev);
      prev = a.chain.at(row, m);
    }
    EXPECT_LE(prev, 100);
  }
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_LE(a.lower[m], a.mean[m]);
    EXPECT_GE(a.upper[m], a.mean[m]);
  }
}

TEST(LayerPriors, ZeroNoiseRecoversTruth) {
  std::vector<std::vector<Observation>> layers;
  for (int g = 0; g < 3; ++g) {
    layers.emplace_back();
    for (int m = 0; m < 3; ++m) layers.back().push_back({30.0 * g + 8.0 * m + 5, 0.01});
  }
  LayerConfig cfg;
  cfg.steps = 20'000;
  cfg.mle_grid_step = 0.05;
  const auto r = layer_priors_compare(layers, 0, 90, cfg);
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_NEAR(r.mle[g][m], layers[g][m].value, 0.05);
      EXPECT_NEAR(r.prior_a[g][m], layers[g][m].value, 0.05);
      EXPECT_NEAR(r.prior_b[g][m], layers[g][m].value, 0.05);
    }
}

TEST(LayerPriors, SymmetricLayoutPriorAMatchesMle) {
  // Reflection-symmetric about 50 with well separated layers.
  std::vector<std::vector<Observation>> layers{{{10, 3}, {14, 3}, {18, 3}},
                                               {{40, 3}, {46, 3}},
                                               {{54, 3}, {60, 3}},
                                               {{82, 3}, {86, 3}, {90, 3}}};
  LayerConfig cfg;
  cfg.steps = 200'000;
  const auto r = layer_priors_compare(layers, 0, 100, cfg);
  for (std::size_t g = 0; g < layers.size(); ++g)
    for (std::size_t m = 0; m < layers[g].size(); ++m) {
      EXPECT_NEAR(r.prior_a[g][m], r.mle[g][m], 1.0);
      const std::size_t gg = layers.size() - 1 - g, mm = layers[gg].size() - 1 - m;
      EXPECT_NEAR(r.prior_a[g][m] - 50, 50 - r.prior_a[gg][mm], 0.3);
    }
}

TEST(TwoPeriod, SymmetricCase) {
  TwoPeriodConfig cfg;
  cfg.K = 1;
  cfg.M = 1;
  const auto ci = two_period_credible(cfg);
  EXPECT_NEAR(ci.mid(), time_axis::from_bce(1000), 0.05);
  EXPECT_NEAR(total(ci.density), 1.0, 1e-12);
}

TEST(TwoPeriod, MidpointMonotoneInM) {
  TwoPeriodConfig cfg;
  cfg.K = 5;
  double prev = -std::numeric_limits<double>::infinity();
  for (int M = 1; M <= 20; ++M) {
    cfg.M = M;
    const double mid = two_period_credible(cfg).mid();
    EXPECT_GT(mid, prev) << "M = " << M;
    prev = mid;
  }
}

TEST(TwoPeriod, RemoteShiftActsOnlyThroughLengthFactors) {
  TwoPeriodConfig cfg;
  cfg.K = 5;
  cfg.M = 20;
  cfg.length_factors = false;
  const auto near = two_period_credible(cfg);
  cfg.remote_early = cfg.t_s - 10 * cfg.sd;
  cfg.remote_late = cfg.t_e + 10 * cfg.sd;
  const auto far = two_period_credible(cfg);
  EXPECT_LT(std::abs(near.lo - far.lo), 0.1);
  EXPECT_LT(std::abs(near.hi - far.hi), 0.1);
  cfg.length_factors = true;
  const auto with = two_period_credible(cfg);
  EXPECT_GT(std::abs(with.mid() - far.mid()), 1.0);
}

TEST(EbEm, Examples) {
  const std::vector<double> obs{1, 2, 3}, sig{1, 1, 1}, one{2};
  EXPECT_DOUBLE_EQ(eb_em_deconvolve(obs, sig, one, 10).weights[0], 1.0);
  const std::vector<double> sym{-1, 1, -3, 3}, sig4(4, 1.0), two{-2, 2};
  const auto w = eb_em_deconvolve(sym, sig4, two, 50).weights;
  EXPECT_NEAR(w[0], w[1], 1e-12);
}

TEST(EbEm, MonotoneLikelihoodAndProbabilityWeights) {
  Rng rng(15);
  for (int f = 0; f < 100; ++f) {
    const std::size_t n = 5 + rng.below(30);
    std::vector<double> obs(n), sig(n), support;
    for (std::size_t j = 0; j < n; ++j) {
      obs[j] = rng.normal(0, 20);
      sig[j] = rng.uniform(2, 15);
    }
    for (double s = -60; s <= 60; s += 1 + rng.below(6)) support.push_back(s);
    const auto r = eb_em_deconvolve(obs, sig, support, 200, 0.0);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
      EXPECT_GE(r.loglik_trace[i], r.loglik_trace[i - 1] - 1e-9);
    for (std::size_t it : {1, 2, 7}) {
      const auto w = eb_em_deconvolve(obs, sig, support, it, 0.0).weights;
      for (double v : w) EXPECT_GE(v, 0.0);
      EXPECT_NEAR(total(w), 1.0, 1e-12);
    }
  }
}

TEST(EbChange, FlatAcrossGapAndNormalized) {
  MixingDistribution pi1{{-100, -90, -80}, {0.3, 0.4, 0.3}, {}};
  MixingDistribution pi2{{80, 90, 100}, {0.2, 0.5, 0.3}, {}};
  const std::vector<Observation> first{{-95, 5}, {-85, 5}}, second{{85, 5}, {95, 5}};
  std::vector<double> grid;
  for (double t = -50; t <= 50; t += 1) grid.push_back(t);
  const auto d = eb_change_posterior(pi1, pi2, first, second, grid);
  EXPECT_NEAR(total(d.density), 1.0, 1e-12);
  for (double v : d.density) EXPECT_NEAR(v, 1.0 / grid.size(), 1e-12);
}

TEST(Sensitivity, EmptyListIsBaseline) {
  const auto d = short_period_toy();
  const auto r = remote_sample_sensitivity(d, {}, 2.0, SensitivityMode::duplicate, {});
  EXPECT_EQ(r.baseline.marginals, r.modified.marginals);
  EXPECT_EQ(r.baseline_lengths, r.modified_lengths);
}

TEST(Sensitivity, DuplicateShortensRemoveLengthens) {
  // Remote samples far from the boundaries in the outer strata.
  const auto d = fixture::simple_dataset({{-1200, -1000, -990}, {-970, -960}, {-940, -930, -700}}, 20, -1250, -650);
  const std::vector<std::string> ids{d.strata[0].samples[0].id, d.strata[2].samples[2].id};
  const auto dup = remote_sample_sensitivity(d, {}, 1.0, SensitivityMode::duplicate, ids);
  const auto rem = remote_sample_sensitivity(d, {}, 1.0, SensitivityMode::remove, ids);
  EXPECT_EQ(dup.affected_strata, (std::vector<std::size_t>{0, 2}));
  for (std::size_t g : {0u, 2u}) {
    EXPECT_LT(dup.modified_lengths[g], dup.baseline_lengths[g]) << "stratum " << g;
    EXPECT_GT(rem.modified_lengths[g], rem.baseline_lengths[g]) << "stratum " << g;
  }
  EXPECT_THROW(remote_sample_sensitivity(d, {}, 1.0, SensitivityMode::remove, std::vector<std::string>{"nope"}),
               std::invalid_argument);
}
