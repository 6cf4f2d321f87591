#include <gtest/gtest.h>

#include <cmath>

#include "c14/order_mle.hpp"
#include "c14/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace c14;

TEST(OrderedSequenceMle, Examples) {
  const std::vector<double> y{1, 2, 3}, s{1, 1, 1};
  EXPECT_EQ(ordered_sequence_mle(y, s, 0, 10), y);
  const std::vector<double> y2{10, 0}, s2{1, 1};
  const auto mu = ordered_sequence_mle(y2, s2, -100, 100);
  EXPECT_DOUBLE_EQ(mu[0], 5.0);
  EXPECT_DOUBLE_EQ(mu[1], 5.0);
  const std::vector<double> low{-5, -7, -3};
  for (double m : ordered_sequence_mle(low, s, 0, 10)) EXPECT_DOUBLE_EQ(m, 0.0);
}

TEST(OrderedSequenceMle, MatchesExhaustiveGrid) {
  Rng rng(1234);
  const double h = 0.25;
  for (int f = 0; f < 1000; ++f) {
    const std::size_t M = 1 + rng.below(4);
    std::vector<double> y(M), s(M);
    for (std::size_t m = 0; m < M; ++m) {
      y[m] = rng.uniform(-3, 13);
      s[m] = rng.uniform(0.5, 3);
    }
    const auto mu = ordered_sequence_mle(y, s, 0, 10);
    const auto grid = oracle::isotonic_grid(y, s, 0, 10, h);
    for (std::size_t m = 0; m < M; ++m) {
      EXPECT_LE(std::abs(mu[m] - grid[m]), h) << "fixture " << f;
      if (m) {
        EXPECT_LE(mu[m - 1], mu[m]);
      }
    }
    EXPECT_LE(oracle::weighted_ss(y, s, mu), oracle::weighted_ss(y, s, grid) + 1e-12);
  }
}

TEST(ProfileLoglik, SingleObservationIsZero) {
  const auto d = fixture::simple_dataset({{5}}, 1, 0, 10);
  EXPECT_DOUBLE_EQ(profile_loglik(BoundaryVector(0, 10, {}), d, {}), 0.0);
}

TEST(ProfileLoglik, DecreasesAwayFromSaturatedData) {
  // Both samples sit above the first interval; pulling tau down truncates them harder.
  const auto d = fixture::simple_dataset({{60}, {80}}, 5, 0, 100);
  double prev = profile_loglik(BoundaryVector(0, 100, {60}), d, {});
  for (double t = 59; t >= 0; t -= 1) {
    const double v = profile_loglik(BoundaryVector(0, 100, {t}), d, {});
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(ProfileLoglik, RelabelingInvariantAndContinuous) {
  auto d = fixture::simple_dataset({{10, 30, 25}, {40, 45}, {70}}, 8, 0, 100);
  auto swapped = d;
  std::swap(swapped.strata[0].samples[0], swapped.strata[0].samples[2]);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    double a = rng.uniform(0, 100), b = rng.uniform(0, 100);
    if (a > b) std::swap(a, b);
    const BoundaryVector tau(0, 100, {a, b});
    const double v = profile_loglik(tau, d, {});
    EXPECT_NEAR(v, profile_loglik(tau, swapped, {}), 1e-12);
    const double eps = 1e-4;
    if (a + eps <= b) {
      EXPECT_NEAR(profile_loglik(BoundaryVector(0, 100, {a + eps, b}), d, {}), v, 1e-2);
    }
  }
}

TEST(MaximizeBoundaries, FlatPlateauInGap) {
  const auto d = fixture::simple_dataset({{100, 110}, {210, 220}}, 10, 0, 300);
  const auto r = maximize_boundaries(d, {}, 1.0);
  EXPECT_NEAR(r.profile.plateau_lo[0], 110, 1e-9);
  EXPECT_NEAR(r.profile.plateau_hi[0], 210, 1e-9);
  EXPECT_NEAR(r.fit.tau_hat.interior()[0], 160, 1e-9);
  EXPECT_DOUBLE_EQ(r.profile.plateau_count, 101.0);
  for (double t = 110; t <= 210; t += 10)
    EXPECT_NEAR(profile_loglik(BoundaryVector(0, 300, {t}), d, {}), r.profile.max_value, 1e-9);
}

TEST(MaximizeBoundaries, MatchesBruteForceForThreeStrata) {
  Rng rng(77);
  for (int f = 0; f < 20; ++f) {
    std::vector<std::vector<std::vector<Observation>>> s(3);
    for (std::size_t g = 0; g < 3; ++g)
      for (int m = 0; m < 2; ++m) {
        std::vector<Observation> obs;
        const int k = 1 + static_cast<int>(rng.below(2));
        for (int j = 0; j < k; ++j) obs.push_back({rng.uniform(0, 60), rng.uniform(2, 8)});
        s[g].push_back(obs);
      }
    const auto d = fixture::calendar_dataset(s, 0, 60);
    const HuberSpec c{f % 2 ? 1.345 : std::numeric_limits<double>::infinity()};
    const auto r = maximize_boundaries(d, c, 2.0);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    std::vector<double> curve0(r.profile.axis.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < r.profile.axis.size(); ++i)
      for (std::size_t j = i; j < r.profile.axis.size(); ++j) {
        const double v = profile_loglik(BoundaryVector(0, 60, {r.profile.axis[i], r.profile.axis[j]}), d, c);
        curve0[i] = std::max(curve0[i], v);
        if (v > best + 1e-9) {
          best = v;
          count = 1;
        } else if (std::abs(v - best) <= 1e-9) {
          ++count;
        }
      }
    EXPECT_NEAR(r.profile.max_value, best, 1e-8);
    EXPECT_EQ(static_cast<std::size_t>(r.profile.plateau_count), count);
    for (std::size_t i = 0; i < curve0.size(); ++i) EXPECT_NEAR(r.profile.curves[0][i], curve0[i], 1e-8);
    EXPECT_NEAR(profile_loglik(r.grid_maximizer, d, c), best, 1e-8);
  }
}

TEST(MaximizeBoundaries, NoSingleCoordinateImprovement) {
  Rng rng(3);
  for (int f = 0; f < 10; ++f) {
    std::vector<std::vector<double>> v(4);
    for (std::size_t g = 0; g < 4; ++g)
      for (int m = 0; m < 3; ++m) v[g].push_back(25.0 * g + rng.uniform(-10, 35));
    const auto d = fixture::simple_dataset(v, 6, -20, 120);
    const auto r = maximize_boundaries(d, {}, 1.0);
    const double best = profile_loglik(r.grid_maximizer, d, {});
    for (std::size_t k = 0; k < 3; ++k)
      for (double step : {-1.0, 1.0}) {
        auto t = r.grid_maximizer;
        const double nv = t.interior()[k] + step;
        try {
          t.set(k, nv);
        } catch (const std::invalid_argument&) {
          continue;
        }
        EXPECT_LE(profile_loglik(t, d, {}), best + 1e-9);
      }
  }
}

TEST(MaximizeBoundaries, TruncationFlags) {
  const auto d = fixture::simple_dataset({{10, 55}, {45, 90}}, 4, 0, 100);
  const auto r = maximize_boundaries(d, {}, 1.0);
  const double tau = r.fit.tau_hat.interior()[0];
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t m = 0; m < 2; ++m) {
      const double y = d.strata[g].samples[m].determinations[0].value;
      const double lo = g == 0 ? 0 : tau, hi = g == 0 ? tau : 100;
      const bool outside = y < lo || y > hi;
      EXPECT_EQ(r.fit.flags[g][m] != Truncation::none, outside);
      EXPECT_GE(r.fit.mu_hat[g][m], lo);
      EXPECT_LE(r.fit.mu_hat[g][m], hi);
    }
}
