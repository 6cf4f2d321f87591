#pragma once

// Order-constrained maximum likelihood: isotonic fit of an ordered event
// sequence, and the profile pseudo-likelihood of stratum boundaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "c14/model.hpp"
#include "c14/robust.hpp"

namespace c14 {

// Weighted least squares under mu_1 <= ... <= mu_M and t_s <= mu <= t_e.
// Pool-adjacent-violators with weights 1/sigma^2, then clipping to the box;
// clipping the unconstrained isotonic fit is optimal for the bounded problem.
inline std::vector<double> ordered_sequence_mle(std::span<const double> y, std::span<const double> sigma,
                                                double t_s, double t_e) {
  if (y.size() != sigma.size()) throw std::invalid_argument("ordered_sequence_mle: length mismatch");
  if (t_s > t_e) throw std::invalid_argument("ordered_sequence_mle: t_s > t_e");
  struct Block {
    double sum_wy, sum_w;
    std::size_t n;
    double value() const { return sum_wy / sum_w; }
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("ordered_sequence_mle: sigma must be positive");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    blocks.push_back({w * y[i], w, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value() >= blocks.back().value()) {
      auto top = blocks.back();
      blocks.pop_back();
      blocks.back().sum_wy += top.sum_wy;
      blocks.back().sum_w += top.sum_w;
      blocks.back().n += top.n;
    }
  }
  std::vector<double> mu;
  mu.reserve(y.size());
  for (const auto& b : blocks) mu.insert(mu.end(), b.n, std::clamp(b.value(), t_s, t_e));
  return mu;
}

namespace detail {

inline std::vector<std::vector<RobustSample>> robust_samples(const StratifiedDataset& data, HuberSpec c) {
  std::vector<std::vector<RobustSample>> out(data.strata.size());
  for (std::size_t g = 0; g < data.strata.size(); ++g)
    for (const auto& s : data.strata[g].samples) {
      const auto obs = s.observations();
      out[g].emplace_back(obs, c);
    }
  return out;
}

}  // namespace detail

// l(tau) = -sum rho_c(residual at the interval-truncated M-estimate); higher is better.
inline double profile_loglik(const BoundaryVector& tau, const StratifiedDataset& data, HuberSpec c) {
  require_calendar(data, "profile_loglik");
  if (tau.strata() != data.strata.size()) throw std::invalid_argument("profile_loglik: boundary count mismatch");
  double l = 0.0;
  for (std::size_t g = 0; g < data.strata.size(); ++g) {
    const auto [lo, hi] = tau.interval(g);
    for (const auto& s : data.strata[g].samples) {
      const auto obs = s.observations();
      const RobustSample rs(obs, c);
      l -= rs.loss(rs.within(lo, hi).mu);
    }
  }
  return l;
}

struct MleFit {
  BoundaryVector tau_hat;
  std::vector<std::vector<double>> mu_hat;  // [stratum][sample]
  std::vector<std::vector<Truncation>> flags;
  double loglik = 0.0;
};

// Pairwise profile surface over adjacent boundaries (k, k+1), the others
// maximized out. value(i, j) is -inf where i > j.
struct ProfileSurface {
  std::size_t first = 0;  // boundary index k (0-based over interior boundaries)
  std::size_t n = 0;
  std::vector<double> values;
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

struct ProfileGrid {
  std::vector<double> axis;                  // grid nodes, t_start .. t_end
  std::vector<std::vector<double>> curves;   // per boundary 1-D profile
  std::vector<ProfileSurface> surfaces;      // adjacent pairs
  std::vector<std::size_t> argmax;           // lexicographically smallest maximizer (node indices)
  double max_value = 0.0;
  // Plateau of maximizers: per-boundary bounding box and set centroid.
  std::vector<double> plateau_lo, plateau_hi, plateau_centroid;
  double plateau_count = 0.0;  // number of maximizing grid vectors
};

struct MleResult {
  MleFit fit;           // at the plateau centroid
  BoundaryVector grid_maximizer;
  ProfileGrid profile;
};

// Precomputed per-sample loss tables on the boundary grid. The profile
// criterion separates into per-boundary costs, so the monotone grid search is
// a chain dynamic program.
class ProfileProblem {
 public:
  ProfileProblem(const StratifiedDataset& data, HuberSpec c, double grid_step) : c_(c) {
    require_calendar(data, "maximize_boundaries");
    if (!(grid_step > 0.0)) throw std::invalid_argument("maximize_boundaries: grid_step must be positive");
    const double width = data.t_end - data.t_start;
    if (!(width > 0.0)) throw std::invalid_argument("maximize_boundaries: empty window");
    if (grid_step > width) throw std::invalid_argument("maximize_boundaries: grid too coarse for the window");
    t_start_ = data.t_start;
    t_end_ = data.t_end;
    for (std::size_t i = 0;; ++i) {
      const double x = data.t_start + static_cast<double>(i) * grid_step;
      if (x >= data.t_end - 1e-9 * grid_step) break;
      axis_.push_back(x);
    }
    axis_.push_back(data.t_end);
    const std::size_t n = axis_.size();

    for (std::size_t g = 0; g < data.strata.size(); ++g) {
      for (const auto& s : data.strata[g].samples) {
        const auto obs = s.observations();
        Entry e{g, RobustSample(obs, c), 0.0, std::vector<double>(n)};
        e.hmin = e.rs.loss(e.rs.unconstrained());
        for (std::size_t i = 0; i < n; ++i) e.excess[i] = std::max(0.0, e.rs.loss(axis_[i]) - e.hmin);
        entries_.push_back(std::move(e));
      }
    }
    strata_ = data.strata.size();
  }

  const std::vector<double>& axis() const noexcept { return axis_; }
  std::size_t samples() const noexcept { return entries_.size(); }
  std::size_t strata() const noexcept { return strata_; }

  // weights: one multiplicity per sample in dataset order; empty means all 1.
  ProfileGrid solve(std::span<const double> weights = {}, bool with_surfaces = true) const {
    const std::size_t n = axis_.size();
    const std::size_t nb = strata_ - 1;
    auto w = [&](std::size_t s) { return weights.empty() ? 1.0 : weights[s]; };
    if (!weights.empty() && weights.size() != entries_.size())
      throw std::invalid_argument("ProfileProblem::solve: weight count mismatch");

    // low[g][i]: stratum g lower edge at node i; high[g][i]: upper edge at node i.
    std::vector<std::vector<double>> low(strata_, std::vector<double>(n, 0.0)), high = low;
    double constant = 0.0;
    for (std::size_t s = 0; s < entries_.size(); ++s) {
      const double ws = w(s);
      if (ws == 0.0) continue;
      const auto& e = entries_[s];
      constant += ws * e.hmin;
      for (std::size_t i = 0; i < n; ++i) {
        if (e.rs.root_hi() < axis_[i]) low[e.g][i] += ws * e.excess[i];
        if (e.rs.root_lo() > axis_[i]) high[e.g][i] += ws * e.excess[i];
      }
    }
    constant += low[0][0] + high[strata_ - 1][n - 1];

    ProfileGrid out;
    out.axis = axis_;
    if (nb == 0) {
      out.max_value = -constant;
      out.plateau_count = 1.0;
      return out;
    }

    std::vector<std::vector<double>> cost(nb, std::vector<double>(n));
    for (std::size_t k = 0; k < nb; ++k)
      for (std::size_t i = 0; i < n; ++i) cost[k][i] = high[k][i] + low[k + 1][i];

    // Forward minima F_k(i) over tau_k = i; backward minima B_k(i).
    std::vector<std::vector<double>> F(nb, std::vector<double>(n)), B = F;
    F[0] = cost[0];
    for (std::size_t k = 1; k < nb; ++k) {
      double run = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        run = std::min(run, F[k - 1][i]);
        F[k][i] = cost[k][i] + run;
      }
    }
    B[nb - 1] = cost[nb - 1];
    for (std::size_t k = nb - 1; k-- > 0;) {
      double run = std::numeric_limits<double>::infinity();
      for (std::size_t i = n; i-- > 0;) {
        run = std::min(run, B[k + 1][i]);
        B[k][i] = cost[k][i] + run;
      }
    }
    const double best = *std::min_element(F[nb - 1].begin(), F[nb - 1].end());
    out.max_value = -(constant + best);
    const double tol = 1e-9 * (1.0 + std::abs(best) + constant);
    auto tight = [&](double v, double ref) { return v <= ref + tol; };

    out.curves.assign(nb, std::vector<double>(n));
    for (std::size_t k = 0; k < nb; ++k)
      for (std::size_t i = 0; i < n; ++i) out.curves[k][i] = -(constant + F[k][i] + B[k][i] - cost[k][i]);

    if (with_surfaces) {
      for (std::size_t k = 0; k + 1 < nb; ++k) {
        ProfileSurface s{k, n, std::vector<double>(n * n, -std::numeric_limits<double>::infinity())};
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i; j < n; ++j) s.values[i * n + j] = -(constant + F[k][i] + B[k + 1][j]);
        out.surfaces.push_back(std::move(s));
      }
    }

    // Lexicographically smallest maximizer.
    out.argmax.resize(nb);
    double prefix = 0.0;
    std::size_t from = 0;
    for (std::size_t k = 0; k < nb; ++k) {
      std::size_t pick = n;
      for (std::size_t i = from; i < n; ++i)
        if (tight(prefix + B[k][i], best)) {
          pick = i;
          break;
        }
      if (pick == n) pick = from;  // unreachable with a consistent tolerance
      out.argmax[k] = pick;
      prefix += cost[k][pick];
      from = pick;
    }

    // Count maximizing paths: cf_k(i) paths ending at i with prefix F_k(i),
    // cb_k(i) paths starting at i with suffix B_k(i).
    std::vector<std::vector<double>> cf(nb, std::vector<double>(n, 1.0)), cb = cf;
    for (std::size_t k = 1; k < nb; ++k) {
      double m = std::numeric_limits<double>::infinity(), acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = F[k - 1][i];
        if (v < m - tol) {
          m = v;
          acc = cf[k - 1][i];
        } else if (tight(v, m)) {
          acc += cf[k - 1][i];
        }
        cf[k][i] = acc;
      }
    }
    for (std::size_t k = nb - 1; k-- > 0;) {
      double m = std::numeric_limits<double>::infinity(), acc = 0.0;
      for (std::size_t i = n; i-- > 0;) {
        const double v = B[k + 1][i];
        if (v < m - tol) {
          m = v;
          acc = cb[k + 1][i];
        } else if (tight(v, m)) {
          acc += cb[k + 1][i];
        }
        cb[k][i] = acc;
      }
    }
    out.plateau_lo.assign(nb, 0.0);
    out.plateau_hi.assign(nb, 0.0);
    out.plateau_centroid.assign(nb, 0.0);
    for (std::size_t k = 0; k < nb; ++k) {
      double total = 0.0, moment = 0.0;
      std::size_t lo = n, hi = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!tight(F[k][i] + B[k][i] - cost[k][i], best)) continue;
        const double mult = cf[k][i] * cb[k][i];
        total += mult;
        moment += mult * axis_[i];
        lo = std::min(lo, i);
        hi = std::max(hi, i);
      }
      out.plateau_lo[k] = axis_[lo];
      out.plateau_hi[k] = axis_[hi];
      out.plateau_centroid[k] = moment / total;
      if (k == 0) out.plateau_count = total;
    }
    return out;
  }

  // mu-hat, flags and criterion at an arbitrary boundary vector.
  MleFit fit_at(const BoundaryVector& tau, std::span<const double> weights = {}) const {
    MleFit fit;
    fit.tau_hat = tau;
    fit.mu_hat.assign(strata_, {});
    fit.flags.assign(strata_, {});
    for (std::size_t s = 0; s < entries_.size(); ++s) {
      const auto& e = entries_[s];
      const auto [lo, hi] = tau.interval(e.g);
      const auto est = e.rs.within(lo, hi);
      fit.mu_hat[e.g].push_back(est.mu);
      fit.flags[e.g].push_back(est.flag);
      fit.loglik -= (weights.empty() ? 1.0 : weights[s]) * e.rs.loss(est.mu);
    }
    return fit;
  }

  BoundaryVector boundaries_from_nodes(std::span<const std::size_t> nodes) const {
    std::vector<double> t;
    for (auto i : nodes) t.push_back(axis_[i]);
    return {t_start_, t_end_, t};
  }

  BoundaryVector boundaries_from_values(std::span<const double> values) const {
    return {t_start_, t_end_, std::vector<double>(values.begin(), values.end())};
  }

 private:
  struct Entry {
    std::size_t g;
    RobustSample rs;
    double hmin;
    std::vector<double> excess;  // loss(node) - hmin
  };

  HuberSpec c_;
  double t_start_ = 0.0, t_end_ = 0.0;
  std::vector<double> axis_;
  std::vector<Entry> entries_;
  std::size_t strata_ = 0;
};

// Exhaustive search over the monotone boundary grid. The point estimate is
// the centroid of the set of grid maximizers.
inline MleResult maximize_boundaries(const StratifiedDataset& data, HuberSpec c, double grid_step,
                                     bool with_surfaces = true) {
  if (data.strata.empty()) throw std::invalid_argument("maximize_boundaries: no strata");
  const ProfileProblem problem(data, c, grid_step);
  MleResult r;
  r.profile = problem.solve({}, with_surfaces);
  r.grid_maximizer = problem.boundaries_from_nodes(r.profile.argmax);
  r.fit = problem.fit_at(problem.boundaries_from_values(r.profile.plateau_centroid));
  return r;
}

}  // namespace c14
