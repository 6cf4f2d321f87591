// End-to-end run on the bundled synthetic four-stratum data set: calendar
// conversion, boundary MLE, bootstrap ellipsoid and the boundary posterior.

#include <cstdio>
#include <string>

#include "c14/c14.hpp"

using namespace c14;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : std::string(C14_DEMO_DATA) + "/rehov_shaped.csv";
  auto table = io::read_determinations_file(path);
  auto data = to_calendar(table.dataset, AffineCalibration::iron_age_levant());
  data.t_start = time_axis::from_bce(1250);
  data.t_end = time_axis::from_bce(650);
  data = validate_dataset(data);
  std::printf("%zu strata, %zu samples, %zu determinations\n", data.strata.size(), data.sample_count(),
              data.determination_count());

  const HuberSpec c{1.345};
  const auto mle = maximize_boundaries(data, c, 1.0, false);
  std::printf("\nBoundary MLE (BCE)\n");
  for (std::size_t k = 0; k + 1 < data.strata.size(); ++k)
    std::printf("  %-14s %7.1f   plateau %4.0f..%4.0f\n",
                (data.strata[k].name + "->" + data.strata[k + 1].name).c_str(),
                time_axis::to_bce(mle.fit.tau_hat.interior()[k]), time_axis::to_bce(mle.profile.plateau_lo[k]),
                time_axis::to_bce(mle.profile.plateau_hi[k]));

  BootstrapConfig bc;
  bc.replicates = 1000;
  bc.c = c;
  const auto cloud = bootstrap_nonparametric(data, bc);
  const auto e = pca_ellipsoid(cloud);
  const auto pcs = pc_intervals(cloud, e);
  std::printf("\nBootstrap: %zu replicates, repair rate %.3f\n", cloud.size(), cloud.repair_rate());
  for (const auto& pc : pcs.components) {
    std::printf("  PC%zu eigenvalue %.3f loadings", pc.component + 1, e.eigenvalues(static_cast<Eigen::Index>(pc.component)));
    for (double v : pc.loadings) std::printf(" %+.2f", v);
    std::printf("  -> %s [%.1f, %.1f]\n", pc.kind.c_str(), pc.lo, pc.hi);
  }

  const auto post = boundary_posterior(data, c, 1.0);
  std::printf("\nPosterior (BCE): mode / mean / 95%% HPD of the marginal\n");
  for (std::size_t k = 0; k < post.boundaries; ++k) {
    const auto h = hpd_region(post.marginal(k), 0.95);
    std::printf("  tau%zu  %5.0f  %7.1f  %5.0f..%5.0f\n", k + 2, time_axis::to_bce(post.mode_value(k)),
                time_axis::to_bce(post.mean[k]), time_axis::to_bce(h.projections[0].first),
                time_axis::to_bce(h.projections[0].second));
  }
  for (std::size_t s = 0; s < data.strata.size(); ++s)
    std::printf("  E[length %s] = %.1f y\n", data.strata[s].name.c_str(), post.mean_length(s));
  return 0;
}
