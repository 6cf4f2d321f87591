#pragma once

// Small dataset builders shared by the unit suites.

#include <string>
#include <vector>

#include "c14/model.hpp"

namespace c14::fixture {

// strata[g][m] lists the observations (calendar years) of sample m in stratum g.
inline StratifiedDataset calendar_dataset(const std::vector<std::vector<std::vector<Observation>>>& strata,
                                          double t_start, double t_end) {
  StratifiedDataset d;
  d.t_start = t_start;
  d.t_end = t_end;
  d.scale = TimeScale::calendar;
  int id = 0;
  for (std::size_t g = 0; g < strata.size(); ++g) {
    Stratum s;
    s.name = "S" + std::to_string(g + 1);
    for (const auto& obs : strata[g]) {
      Sample smp;
      smp.id = "x" + std::to_string(++id);
      for (const auto& o : obs) smp.determinations.push_back({o.value, o.sigma, "lab", ""});
      s.samples.push_back(std::move(smp));
    }
    d.strata.push_back(std::move(s));
  }
  return d;
}

// One single-determination sample per value.
inline StratifiedDataset simple_dataset(const std::vector<std::vector<double>>& values, double sigma, double t_start,
                                        double t_end) {
  std::vector<std::vector<std::vector<Observation>>> s;
  for (const auto& g : values) {
    s.emplace_back();
    for (double v : g) s.back().push_back({{v, sigma}});
  }
  return calendar_dataset(s, t_start, t_end);
}

}  // namespace c14::fixture
