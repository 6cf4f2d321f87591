#pragma once

// Highest-density selection over a discrete set of cell masses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace c14 {

struct HpdSelection {
  std::vector<char> member;
  double threshold = 0.0;  // smallest member mass
  double mass = 0.0;       // total member mass
  std::size_t count = 0;
};

// Greedy descending accumulation until the mass reaches `level`. No excluded
// cell is denser than an admitted one; among equal masses the lower index is
// admitted first, so the overshoot is below one cell.
inline HpdSelection hpd_select(std::span<const double> mass, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("hpd: level must be in (0, 1)");
  double total = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0)) throw std::invalid_argument("hpd: negative or NaN mass");
    total += m;
  }
  if (!(total > 0.0)) throw std::invalid_argument("hpd: zero total mass");

  std::vector<std::size_t> order(mass.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });

  HpdSelection out;
  out.member.assign(mass.size(), 0);
  const double target = level * total;
  std::size_t k = 0;
  double acc = 0.0;
  while (k < order.size() && acc < target) acc += mass[order[k++]];

  for (std::size_t i = 0; i < k; ++i) out.member[order[i]] = 1;
  out.threshold = mass[order[k - 1]] / total;
  out.mass = acc / total;
  out.count = k;
  return out;
}

}  // namespace c14
