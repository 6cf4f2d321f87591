#include <gtest/gtest.h>

#include <cmath>

#include "c14/io.hpp"
#include "c14/resampling.hpp"
#include "c14/rng.hpp"
#include "fixtures.hpp"

using namespace c14;

namespace {

StratifiedDataset demo() {
  auto t = io::read_determinations_file(std::string(C14_DEMO_DATA) + "/rehov_shaped.csv");
  auto d = to_calendar(t.dataset, AffineCalibration::iron_age_levant());
  d.t_start = -1250;
  d.t_end = -650;
  return d;
}

StratifiedDataset small() {
  return fixture::simple_dataset({{-1010, -995, -1030}, {-985, -960, -970}, {-940, -930, -925, -910}}, 15, -1100,
                                 -850);
}

BootstrapCloud gaussian_cloud(std::size_t B, const std::vector<double>& center, double sd, std::uint64_t seed) {
  Rng rng(seed);
  BootstrapCloud c;
  for (std::size_t r = 0; r < B; ++r) {
    std::vector<double> v;
    for (double m : center) v.push_back(rng.normal(m, sd));
    c.replicates.emplace_back(-1e6, 1e6, v);
  }
  c.repaired.assign(B, 0);
  return c;
}

}  // namespace

TEST(Bootstrap, SingleReplicateReproducible) {
  BootstrapConfig cfg;
  cfg.replicates = 1;
  cfg.seed = 77;
  const auto a = bootstrap_nonparametric(small(), cfg);
  const auto b = bootstrap_nonparametric(small(), cfg);
  EXPECT_EQ(a.replicates, b.replicates);
}

TEST(Bootstrap, ThreadCountDoesNotMatter) {
  BootstrapConfig cfg;
  cfg.replicates = 64;
  cfg.seed = 5;
  cfg.threads = 1;
  const auto serial = bootstrap_nonparametric(small(), cfg);
  cfg.threads = 4;
  const auto parallel = bootstrap_nonparametric(small(), cfg);
  EXPECT_EQ(serial.replicates, parallel.replicates);
  EXPECT_EQ(serial.repaired, parallel.repaired);
  const auto e1 = pca_ellipsoid(serial), e4 = pca_ellipsoid(parallel);
  EXPECT_EQ(e1.member, e4.member);
  EXPECT_TRUE(e1.eigenvectors.isApprox(e4.eigenvectors, 0.0) || e1.eigenvectors == e4.eigenvectors);

  const auto fit = maximize_boundaries(small(), {}, 1.0, false).fit;
  cfg.threads = 1;
  const auto p1 = bootstrap_parametric(small(), fit, cfg);
  cfg.threads = 3;
  const auto p3 = bootstrap_parametric(small(), fit, cfg);
  EXPECT_EQ(p1.replicates, p3.replicates);
}

TEST(Bootstrap, InputOrderDoesNotMatter) {
  auto d = small();
  auto shuffled = d;
  std::swap(shuffled.strata[0].samples[0], shuffled.strata[0].samples[2]);
  std::swap(shuffled.strata[2].samples[1], shuffled.strata[2].samples[3]);
  BootstrapConfig cfg;
  cfg.replicates = 64;
  cfg.seed = 8;
  const auto a = bootstrap_nonparametric(d, cfg), b = bootstrap_nonparametric(shuffled, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t k = 0; k < a.dims(); ++k)
      EXPECT_NEAR(a.replicates[r].interior()[k], b.replicates[r].interior()[k], 1e-9);
  EXPECT_EQ(a.repairs, b.repairs);

  const auto fa = maximize_boundaries(d, {}, 1.0, false).fit;
  const auto fb = maximize_boundaries(shuffled, {}, 1.0, false).fit;
  const auto pa = bootstrap_parametric(d, fa, cfg), pb = bootstrap_parametric(shuffled, fb, cfg);
  for (std::size_t r = 0; r < pa.size(); ++r)
    for (std::size_t k = 0; k < pa.dims(); ++k)
      EXPECT_NEAR(pa.replicates[r].interior()[k], pb.replicates[r].interior()[k], 1e-9);
}

TEST(Bootstrap, SingletonStratumIsRepaired) {
  auto d = fixture::simple_dataset({{-1010, -995, -1030, -1000}, {-960}, {-940, -930, -925}}, 15, -1100, -850);
  BootstrapConfig cfg;
  cfg.replicates = 300;
  cfg.seed = 2;
  const auto cloud = bootstrap_nonparametric(d, cfg);
  // P(the singleton is never drawn in 8 draws) = (7/8)^8 ~ 0.34.
  EXPECT_GT(cloud.repairs, 60u);
  EXPECT_LT(cloud.repairs, 150u);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> counts;
    detail::draw_counts(d, BootstrapScheme::nonparametric, 8, rng, counts);
    EXPECT_GE(counts[4], 1.0);  // the singleton
    EXPECT_GT(counts[0] + counts[1] + counts[2] + counts[3], 0.0);
    EXPECT_GT(counts[5] + counts[6] + counts[7], 0.0);
  }
}

TEST(Bootstrap, RepairRateMatchesOccupancyProbability) {
  const auto d = demo();
  BootstrapConfig cfg;
  cfg.replicates = 5000;
  cfg.seed = 3;
  cfg.grid_step = 5.0;
  const auto cloud = bootstrap_nonparametric(d, cfg);
  // Inclusion-exclusion over strata left empty by n multinomial draws.
  const double n = double(d.sample_count());
  std::vector<double> m;
  for (const auto& s : d.strata) m.push_back(double(s.samples.size()));
  double p = 0;
  const std::size_t G = m.size();
  for (std::size_t mask = 1; mask < (1u << G); ++mask) {
    double gone = 0;
    int bits = 0;
    for (std::size_t g = 0; g < G; ++g)
      if (mask >> g & 1) {
        gone += m[g];
        ++bits;
      }
    p += (bits % 2 ? 1 : -1) * std::pow((n - gone) / n, n);
  }
  EXPECT_NEAR(cloud.repair_rate(), p, 0.01);
}

TEST(Bootstrap, ParametricZeroNoiseReturnsFit) {
  const auto d = small();
  const auto fit = maximize_boundaries(d, {}, 1.0, false).fit;
  BootstrapConfig cfg;
  cfg.replicates = 20;
  const auto cloud = bootstrap_parametric(d, fit, cfg, 1e-6);
  for (const auto& r : cloud.replicates)
    for (std::size_t k = 0; k < r.interior().size(); ++k)
      EXPECT_LE(std::abs(r.interior()[k] - fit.tau_hat.interior()[k]), cfg.grid_step);
}

TEST(Bootstrap, ParametricCentroidNearFit) {
  const auto d = demo();
  const auto fit = maximize_boundaries(d, {}, 1.0, false).fit;
  BootstrapConfig cfg;
  cfg.replicates = 300;
  cfg.seed = 4;
  const auto cloud = bootstrap_parametric(d, fit, cfg);
  for (std::size_t k = 0; k < cloud.dims(); ++k) {
    double s = 0;
    for (const auto& r : cloud.replicates) s += r.interior()[k];
    // The boundary MLE is biased by several years under resampling.
    EXPECT_NEAR(s / cloud.size(), fit.tau_hat.interior()[k], 15.0) << "boundary " << k;
  }
}

TEST(Pca, IsotropicCloud) {
  const auto cloud = gaussian_cloud(4000, {0, 100, 200}, 5, 9);
  const auto e = pca_ellipsoid(cloud, 0.95);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(e.eigenvalues(j), 1.0, 0.1);
  EXPECT_NEAR(double(e.members), 0.95 * 4000, 1.0);
}

TEST(Pca, OrthonormalAndReconstructs) {
  Rng rng(10);
  BootstrapCloud c;
  for (int r = 0; r < 500; ++r) {
    const double a = rng.normal(0, 10), b = a + 20 + std::abs(rng.normal(5, 3)), d = b + 15 + rng.uniform(0, 10);
    c.replicates.emplace_back(-1e4, 1e4, std::vector<double>{a, b, d});
  }
  const auto e = pca_ellipsoid(c);
  const Eigen::MatrixXd I = e.eigenvectors.transpose() * e.eigenvectors;
  EXPECT_TRUE(I.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-10));
  const Eigen::MatrixXd back = e.scores * e.eigenvectors.transpose();
  for (int r = 0; r < 500; ++r)
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(back(r, k), (c.replicates[r].interior()[k] - e.center[k]) / e.scale[k], 1e-8);
}

TEST(Pca, MembershipMonotoneInCoverage) {
  const auto cloud = gaussian_cloud(1000, {0, 50}, 4, 12);
  const auto e90 = pca_ellipsoid(cloud, 0.90), e95 = pca_ellipsoid(cloud, 0.95), all = pca_ellipsoid(cloud, 1.0);
  for (std::size_t r = 0; r < cloud.size(); ++r) {
    if (e90.member[r]) {
      EXPECT_TRUE(e95.member[r]);
    }
    EXPECT_TRUE(all.member[r]);
  }
  EXPECT_EQ(all.members, cloud.size());
}

TEST(Pca, DegenerateCloud) {
  BootstrapCloud c;
  for (int r = 0; r < 20; ++r) c.replicates.emplace_back(0, 100, std::vector<double>{30, 60});
  const auto e = pca_ellipsoid(c);
  EXPECT_EQ(e.coords.size(), 0u);
  EXPECT_EQ(e.members, 20u);
  const auto pcs = pc_intervals(c, e);
  for (const auto& pc : pcs.components) EXPECT_DOUBLE_EQ(pc.hi - pc.lo, 0.0);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_DOUBLE_EQ(pcs.boundary_hi[k] - pcs.boundary_lo[k], 0.0);
}

TEST(Pca, LengthComponentLabelled) {
  // Boundaries 0 and 1 move in opposite directions; boundary 2 is independent.
  Rng rng(14);
  BootstrapCloud c;
  for (int r = 0; r < 2000; ++r) {
    const double u = rng.normal(0, 6);
    c.replicates.emplace_back(-1e4, 1e4,
                              std::vector<double>{-u + rng.normal(0, 1), 60 + u + rng.normal(0, 1), 100 + rng.normal(0, 2)});
  }
  const auto e = pca_ellipsoid(c);
  const auto pcs = pc_intervals(c, e);
  EXPECT_EQ(pcs.components[0].kind, "length");
  EXPECT_EQ(pcs.components[0].boundaries, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(std::abs(e.eigenvectors(0, 0)), std::sqrt(0.5), 0.05);
  EXPECT_EQ(pcs.components[1].kind, "boundary");
}
