// The two-period toy: one transition between 1100 and 900 BCE, five
// stratum-I observations and M = 1..20 stratum-II observations. The credible
// interval drifts toward the stratum with more observations.

#include <cstdio>
#include <vector>

#include "c14/c14.hpp"

int main() {
  using namespace c14;
  std::vector<int> M;
  for (int m = 1; m <= 20; ++m) M.push_back(m);
  std::printf(" M   95%% interval (BCE)   midpoint\n");
  for (const auto& row : studies::run_two_period_study(5, M))
    std::printf("%2d   %7.1f .. %7.1f   %7.1f\n", row.M, time_axis::to_bce(row.interval.lo),
                time_axis::to_bce(row.interval.hi), time_axis::to_bce(row.interval.mid()));

  TwoPeriodConfig flat;
  flat.M = 20;
  flat.length_factors = false;
  const auto ab = two_period_credible(flat);
  std::printf("\nM = 20 without the 1/length factors: %.1f .. %.1f BCE\n", time_axis::to_bce(ab.lo),
              time_axis::to_bce(ab.hi));
  return 0;
}
