#pragma once

// Bootstrap clouds of the boundary MLE and the correlation-PCA ellipsoid used
// to summarize them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "order_mle.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace c14 {

enum class BootstrapScheme { nonparametric, poisson, fixed_strata, parametric };

inline const char* scheme_name(BootstrapScheme s) {
  switch (s) {
    case BootstrapScheme::nonparametric: return "nonparametric";
    case BootstrapScheme::poisson: return "poisson";
    case BootstrapScheme::fixed_strata: return "fixed-strata";
    case BootstrapScheme::parametric: return "parametric";
  }
  return "?";
}

struct BootstrapCloud {
  BootstrapScheme scheme = BootstrapScheme::nonparametric;
  std::uint64_t seed = 0;
  std::vector<BoundaryVector> replicates;
  std::vector<char> repaired;  // replicate needed an empty-stratum repair
  std::size_t repairs = 0;

  std::size_t size() const noexcept { return replicates.size(); }
  std::size_t dims() const { return replicates.empty() ? 0 : replicates.front().interior().size(); }
  double repair_rate() const { return replicates.empty() ? 0.0 : double(repairs) / double(replicates.size()); }
};

struct BootstrapConfig {
  std::size_t replicates = 5000;
  std::uint64_t seed = 1;
  BootstrapScheme scheme = BootstrapScheme::nonparametric;
  double grid_step = 1.0;
  HuberSpec c{};
  unsigned threads = 0;
  // Total draw count for the nonparametric scheme; 0 means the sample count.
  std::size_t draws = 0;
};

namespace detail {

// Multiplicities for one replicate. Returns true when a stratum had to be repaired.
inline bool draw_counts(const StratifiedDataset& data, BootstrapScheme scheme, std::size_t draws, Rng& rng,
                        std::vector<double>& counts) {
  const std::size_t n = data.sample_count();
  counts.assign(n, 0.0);
  std::vector<std::size_t> offset;
  std::size_t acc = 0;
  for (const auto& s : data.strata) {
    offset.push_back(acc);
    acc += s.samples.size();
  }
  switch (scheme) {
    case BootstrapScheme::nonparametric:
      for (std::size_t d = 0; d < draws; ++d) counts[rng.below(n)] += 1.0;
      break;
    case BootstrapScheme::poisson:
      for (auto& c : counts) c = rng.poisson(1.0);
      break;
    case BootstrapScheme::fixed_strata:
      for (std::size_t g = 0; g < data.strata.size(); ++g) {
        const auto m = data.strata[g].samples.size();
        for (std::size_t d = 0; d < m; ++d) counts[offset[g] + rng.below(m)] += 1.0;
      }
      break;
    case BootstrapScheme::parametric:
      throw std::invalid_argument("draw_counts: parametric scheme has no counts");
  }
  bool repaired = false;
  for (std::size_t g = 0; g < data.strata.size(); ++g) {
    const auto m = data.strata[g].samples.size();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += counts[offset[g] + i];
    if (total == 0.0 && m > 0) {
      counts[offset[g] + rng.below(m)] = 1.0;
      repaired = true;
    }
  }
  return repaired;
}

// Flat dataset positions in canonical order: strata as given, samples by id
// within each stratum. RNG draws follow this order so that reordering the
// input file does not change any replicate.
inline std::vector<std::size_t> canonical_positions(const StratifiedDataset& data) {
  std::vector<std::size_t> out;
  std::size_t offset = 0;
  for (const auto& s : data.strata) {
    std::vector<std::size_t> idx(s.samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return s.samples[a].id < s.samples[b].id; });
    for (auto i : idx) out.push_back(offset + i);
    offset += s.samples.size();
  }
  return out;
}

inline BoundaryVector centroid_of(const ProfileProblem& problem, const ProfileGrid& grid) {
  return problem.boundaries_from_values(grid.plateau_centroid);
}

}  // namespace detail

// Resamples whole samples (all determinations of a sample travel together)
// and refits the boundary MLE on each replicate. Replicate r uses the RNG
// stream (seed, r), so the cloud does not depend on the worker count.
inline BootstrapCloud bootstrap_nonparametric(const StratifiedDataset& data, const BootstrapConfig& cfg) {
  if (cfg.replicates < 1) throw std::invalid_argument("bootstrap: B must be >= 1");
  if (cfg.scheme == BootstrapScheme::parametric)
    throw std::invalid_argument("bootstrap_nonparametric: use bootstrap_parametric for the parametric scheme");
  const ProfileProblem problem(data, cfg.c, cfg.grid_step);
  const std::size_t draws = cfg.draws ? cfg.draws : data.sample_count();
  const auto canon = detail::canonical_positions(data);

  BootstrapCloud cloud;
  cloud.scheme = cfg.scheme;
  cloud.seed = cfg.seed;
  cloud.replicates.resize(cfg.replicates);
  cloud.repaired.assign(cfg.replicates, 0);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    std::vector<double> drawn, counts(canon.size());
    cloud.repaired[r] = detail::draw_counts(data, cfg.scheme, draws, rng, drawn) ? 1 : 0;
    for (std::size_t i = 0; i < canon.size(); ++i) counts[canon[i]] = drawn[i];
    const auto grid = problem.solve(counts, false);
    cloud.replicates[r] = detail::centroid_of(problem, grid);
  });
  for (char c : cloud.repaired) cloud.repairs += c ? 1 : 0;
  return cloud;
}

// Redraws every determination from N(mu-hat of its sample, sigma^2) and refits.
// `noise_scale` multiplies the lab sigmas used for the draws only.
inline BootstrapCloud bootstrap_parametric(const StratifiedDataset& data, const MleFit& fit, BootstrapConfig cfg,
                                           double noise_scale = 1.0) {
  if (cfg.replicates < 1) throw std::invalid_argument("bootstrap: B must be >= 1");
  require_calendar(data, "bootstrap_parametric");
  if (fit.mu_hat.size() != data.strata.size())
    throw std::invalid_argument("bootstrap_parametric: fit does not match the dataset");
  for (std::size_t g = 0; g < data.strata.size(); ++g)
    if (fit.mu_hat[g].size() != data.strata[g].samples.size())
      throw std::invalid_argument("bootstrap_parametric: fit does not match the dataset");

  BootstrapCloud cloud;
  cloud.scheme = BootstrapScheme::parametric;
  cloud.seed = cfg.seed;
  cloud.replicates.resize(cfg.replicates);
  cloud.repaired.assign(cfg.replicates, 0);
  // (stratum, sample) pairs in canonical order.
  std::vector<std::pair<std::size_t, std::size_t>> order;
  {
    const auto canon = detail::canonical_positions(data);
    std::vector<std::pair<std::size_t, std::size_t>> flat;
    for (std::size_t g = 0; g < data.strata.size(); ++g)
      for (std::size_t m = 0; m < data.strata[g].samples.size(); ++m) flat.push_back({g, m});
    for (auto i : canon) order.push_back(flat[i]);
  }
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    StratifiedDataset sim = data;
    for (const auto& [g, m] : order)
      for (auto& d : sim.strata[g].samples[m].determinations)
        d.value = rng.normal(fit.mu_hat[g][m], noise_scale * d.sigma);
    const ProfileProblem problem(sim, cfg.c, cfg.grid_step);
    cloud.replicates[r] = detail::centroid_of(problem, problem.solve({}, false));
  });
  return cloud;
}

// ---------------------------------------------------------------------------
// PCA ellipsoid

struct PcaEllipsoid {
  std::vector<std::size_t> coords;  // boundary indices kept (constant ones dropped)
  std::vector<double> center;       // per kept coordinate
  std::vector<double> scale;        // per kept coordinate standard deviation
  Eigen::MatrixXd eigenvectors;     // columns, descending eigenvalue
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd scores;           // replicate x component
  std::vector<double> radius2;      // per replicate
  double radius2_cut = 0.0;
  double coverage = 0.95;
  std::vector<char> member;
  std::size_t members = 0;
  std::vector<std::string> warnings;
};

// Standardizes the cloud, eigendecomposes the correlation matrix and keeps the
// points whose squared radius sum_k s_k^2 / lambda_k is at most the coverage
// quantile. Components with eigenvalue below 1e-10 * dim do not enter the radius.
inline PcaEllipsoid pca_ellipsoid(const BootstrapCloud& cloud, double coverage = 0.95) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw std::invalid_argument("pca_ellipsoid: coverage in (0, 1]");
  const std::size_t B = cloud.size(), dim = cloud.dims();
  if (B < dim + 1) throw std::invalid_argument("pca_ellipsoid: need at least dimension + 1 replicates");
  PcaEllipsoid e;
  e.coverage = coverage;

  for (std::size_t k = 0; k < dim; ++k) {
    std::vector<double> v(B);
    for (std::size_t r = 0; r < B; ++r) v[r] = cloud.replicates[r].interior()[k];
    const double m = stats::mean(v), sd = std::sqrt(stats::variance(v));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      std::ostringstream w;
      w << "boundary " << k << " is constant across replicates; dropped";
      e.warnings.push_back(w.str());
      continue;
    }
    e.coords.push_back(k);
    e.center.push_back(m);
    e.scale.push_back(sd);
  }
  const std::size_t d = e.coords.size();
  e.member.assign(B, 0);
  e.radius2.assign(B, 0.0);
  if (d == 0) {
    std::fill(e.member.begin(), e.member.end(), 1);
    e.members = B;
    return e;
  }

  Eigen::MatrixXd z(B, d);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t j = 0; j < d; ++j)
      z(r, j) = (cloud.replicates[r].interior()[e.coords[j]] - e.center[j]) / e.scale[j];
  const Eigen::MatrixXd corr = (z.transpose() * z) / static_cast<double>(B - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_ellipsoid: eigendecomposition failed");
  e.eigenvalues = solver.eigenvalues().reverse();
  e.eigenvectors = solver.eigenvectors().rowwise().reverse();
  // Fix the sign so the largest-magnitude loading of each component is positive.
  for (Eigen::Index j = 0; j < e.eigenvectors.cols(); ++j) {
    Eigen::Index arg;
    e.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (e.eigenvectors(arg, j) < 0) e.eigenvectors.col(j) *= -1.0;
  }
  e.scores = z * e.eigenvectors;

  const double floor = 1e-10 * static_cast<double>(d);
  for (std::size_t r = 0; r < B; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      if (e.eigenvalues(j) > floor) s += e.scores(r, j) * e.scores(r, j) / e.eigenvalues(j);
    e.radius2[r] = s;
  }
  std::vector<double> sorted = e.radius2;
  std::sort(sorted.begin(), sorted.end());
  const auto need = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(B) - 1e-9));
  e.radius2_cut = sorted[std::clamp<std::size_t>(need, 1, B) - 1];
  for (std::size_t r = 0; r < B; ++r)
    if (e.radius2[r] <= e.radius2_cut) {
      e.member[r] = 1;
      ++e.members;
    }
  return e;
}

// One interpretable summary per principal component. Loadings with |v| >= 0.35
// are treated as active: one active boundary is read as that boundary, two
// adjacent ones of opposite sign as the length of the stratum between them,
// two of the same sign as their midpoint. Anything else is reported as the raw
// component score.
struct PcInterval {
  std::size_t component = 0;
  std::string kind;  // boundary | length | midpoint | score
  std::vector<std::size_t> boundaries;
  std::vector<double> loadings;
  double lo = 0.0;
  double hi = 0.0;
};

struct PcSummary {
  std::vector<PcInterval> components;
  std::vector<double> boundary_lo, boundary_hi;  // member range per boundary
};

inline PcSummary pc_intervals(const BootstrapCloud& cloud, const PcaEllipsoid& e, double active = 0.35) {
  PcSummary out;
  const std::size_t dim = cloud.dims();
  out.boundary_lo.assign(dim, std::numeric_limits<double>::infinity());
  out.boundary_hi.assign(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < cloud.size(); ++r) {
    if (!e.member[r]) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      out.boundary_lo[k] = std::min(out.boundary_lo[k], cloud.replicates[r].interior()[k]);
      out.boundary_hi[k] = std::max(out.boundary_hi[k], cloud.replicates[r].interior()[k]);
    }
  }
  const auto d = static_cast<std::size_t>(e.eigenvectors.cols());
  for (std::size_t j = 0; j < d; ++j) {
    PcInterval pc;
    pc.component = j;
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < d; ++i) {
      pc.loadings.push_back(e.eigenvectors(i, j));
      if (std::abs(e.eigenvectors(i, j)) >= active) act.push_back(i);
    }
    for (auto i : act) pc.boundaries.push_back(e.coords[i]);
    std::function<double(std::size_t)> value;
    if (act.size() == 1) {
      pc.kind = "boundary";
      const auto k = e.coords[act[0]];
      value = [&, k](std::size_t r) { return cloud.replicates[r].interior()[k]; };
    } else if (act.size() == 2 && e.coords[act[1]] == e.coords[act[0]] + 1) {
      const auto a = e.coords[act[0]], b = e.coords[act[1]];
      const bool opposite = e.eigenvectors(act[0], j) * e.eigenvectors(act[1], j) < 0;
      pc.kind = opposite ? "length" : "midpoint";
      if (opposite)
        value = [&, a, b](std::size_t r) { return cloud.replicates[r].interior()[b] - cloud.replicates[r].interior()[a]; };
      else
        value = [&, a, b](std::size_t r) {
          return 0.5 * (cloud.replicates[r].interior()[a] + cloud.replicates[r].interior()[b]);
        };
    } else {
      pc.kind = "score";
      value = [&, j](std::size_t r) { return e.scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)); };
    }
    pc.lo = std::numeric_limits<double>::infinity();
    pc.hi = -pc.lo;
    for (std::size_t r = 0; r < cloud.size(); ++r) {
      if (!e.member[r]) continue;
      const double v = value(r);
      pc.lo = std::min(pc.lo, v);
      pc.hi = std::max(pc.hi, v);
    }
    out.components.push_back(std::move(pc));
  }
  return out;
}

}  // namespace c14
