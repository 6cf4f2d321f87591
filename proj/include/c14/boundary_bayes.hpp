#pragma once

// Bayesian side: the gridded boundary posterior under the uniform-cone prior,
// HPD regions, Metropolis-within-Gibbs samplers for ordered events and layered
// priors, the two-period toy, and empirical-Bayes deconvolution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c14/hpd.hpp"
#include "c14/model.hpp"
#include "c14/order_mle.hpp"
#include "c14/rng.hpp"
#include "c14/robust.hpp"
#include "c14/stats.hpp"

namespace c14 {

// Cell masses on a product grid, row-major (last axis fastest).
struct GridDensity {
  std::vector<std::vector<double>> axes;
  std::vector<double> mass;

  std::size_t dims() const noexcept { return axes.size(); }
  double cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.size() > 1 ? (a.back() - a.front()) / static_cast<double>(a.size() - 1) : 1.0;
    return v;
  }
  std::vector<std::size_t> unravel(std::size_t flat) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
      idx[d] = flat % axes[d].size();
      flat /= axes[d].size();
    }
    return idx;
  }
};

struct HpdRegion {
  double level = 0.0;
  double threshold = 0.0;  // density (mass / cell volume) of the lowest member
  double mass = 0.0;
  std::size_t count = 0;
  std::vector<char> member;
  std::vector<std::pair<double, double>> projections;  // per axis min/max over members
};

inline HpdRegion hpd_region(const GridDensity& grid, double level) {
  auto sel = hpd_select(grid.mass, level);
  HpdRegion r;
  r.level = level;
  r.threshold = sel.threshold / grid.cell_volume();
  r.mass = sel.mass;
  r.count = sel.count;
  r.projections.assign(grid.dims(), {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (std::size_t f = 0; f < sel.member.size(); ++f) {
    if (!sel.member[f]) continue;
    const auto idx = grid.unravel(f);
    for (std::size_t d = 0; d < idx.size(); ++d) {
      r.projections[d].first = std::min(r.projections[d].first, grid.axes[d][idx[d]]);
      r.projections[d].second = std::max(r.projections[d].second, grid.axes[d][idx[d]]);
    }
  }
  r.member = std::move(sel.member);
  return r;
}

// ---------------------------------------------------------------------------
// Boundary posterior

struct PosteriorGrid {
  std::vector<double> axis;  // boundary grid nodes, t_start .. t_end
  std::size_t boundaries = 0;
  double log_normalizer = 0.0;             // log of the unnormalized grid sum
  std::vector<std::vector<double>> marginals;  // per boundary, masses over axis
  std::vector<GridDensity> pairs;          // adjacent boundaries (k, k+1)
  std::optional<GridDensity> joint;        // full grid when small enough
  std::vector<std::size_t> mode;           // node indices of the grid mode
  std::vector<double> mean;

  double mode_value(std::size_t k) const { return axis[mode[k]]; }

  GridDensity marginal(std::size_t k) const { return {{axis}, marginals.at(k)}; }

  // E[length of stratum g] from the boundary means.
  double mean_length(std::size_t g) const {
    const double lo = g == 0 ? axis.front() : mean.at(g - 1);
    const double hi = g == boundaries ? axis.back() : mean.at(g);
    return hi - lo;
  }
};

struct PosteriorOptions {
  std::vector<double> weights;           // per-sample multiplicity; empty = all 1
  std::size_t joint_cell_limit = 4'000'000;
};

namespace detail {

// Log of the average of exp(-sum rho) over [x_i, x_j] for one sample, from
// per-cell quadrature between grid nodes. Cumulative sums run toward the
// density peak so differences of tail intervals keep their precision.
class SampleIntegral {
 public:
  SampleIntegral(std::span<const Observation> obs, HuberSpec c, std::span<const double> x) : x_(x) {
    const std::size_t n = x.size();
    std::vector<double> logf(n);
    for (std::size_t i = 0; i < n; ++i) {
      double l = 0.0;
      for (const auto& o : obs) {
        const double r = (o.value - x[i]) / o.sigma;
        l -= c.c == 0.0 ? std::abs(r) : huber_rho(r, c.c);
      }
      logf[i] = l;
    }
    peak_ = static_cast<std::size_t>(std::max_element(logf.begin(), logf.end()) - logf.begin());
    shift_ = logf[peak_];
    f_.resize(n);
    for (std::size_t i = 0; i < n; ++i) f_[i] = std::exp(static_cast<long double>(logf[i] - shift_));

    // Cell integrals by composite 5-point Gauss-Legendre, panels no wider
    // than a quarter of the smallest sigma.
    static constexpr double gx[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                     0.9061798459386640};
    static constexpr double gw[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                     0.2369268850561891, 0.2369268850561891};
    double smin = std::numeric_limits<double>::infinity();
    for (const auto& o : obs) smin = std::min(smin, o.sigma);
    auto f_at = [&](double t) {
      double l = 0.0;
      for (const auto& o : obs) {
        const double r = (o.value - t) / o.sigma;
        l -= c.c == 0.0 ? std::abs(r) : huber_rho(r, c.c);
      }
      return std::exp(static_cast<long double>(l - shift_));
    };
    std::vector<long double> cell(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double h = x[i + 1] - x[i];
      const int panels = std::max(1, static_cast<int>(std::ceil(4.0 * h / smin)));
      const double ph = h / panels;
      long double s = 0.0L;
      for (int p = 0; p < panels; ++p) {
        const double m = x[i] + (p + 0.5) * ph;
        for (int k = 0; k < 5; ++k) s += gw[k] * f_at(m + 0.5 * ph * gx[k]);
      }
      cell[i] = 0.5L * ph * s;
    }
    left_.assign(n, 0.0L);
    right_.assign(n, 0.0L);
    for (std::size_t i = 1; i < n; ++i) left_[i] = left_[i - 1] + cell[i - 1];
    for (std::size_t i = n - 1; i-- > 0;) right_[i] = right_[i + 1] + cell[i];
  }

  // log( (1/(x_j - x_i)) * integral ), or log f(x_i) when i == j.
  double log_mean(std::size_t i, std::size_t j) const {
    if (i == j) return f_[i] > 0 ? static_cast<double>(std::log(f_[i])) + shift_ : stats::neg_inf;
    long double integral;
    if (j <= peak_) integral = left_[j] - left_[i];
    else if (i >= peak_) integral = right_[i] - right_[j];
    else integral = left_[j] - left_[i];
    if (!(integral > 0)) return stats::neg_inf;
    return static_cast<double>(std::log(integral)) + shift_ - std::log(x_[j] - x_[i]);
  }

 private:
  std::span<const double> x_;
  std::size_t peak_ = 0;
  double shift_ = 0.0;
  std::vector<long double> f_, left_, right_;
};

struct Table2 {
  std::size_t n = 0;
  std::vector<double> v;  // v[i*n + j], i <= j
  double operator()(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

}  // namespace detail

inline PosteriorGrid boundary_posterior(const StratifiedDataset& data, HuberSpec c, double grid_step,
                                        const PosteriorOptions& opt = {}) {
  require_calendar(data, "boundary_posterior");
  const std::size_t G = data.strata.size();
  if (G < 2) throw std::invalid_argument("boundary_posterior: need at least 2 strata");
  if (!(grid_step > 0.0)) throw std::invalid_argument("boundary_posterior: grid_step must be positive");
  if (!(data.t_end > data.t_start)) throw std::invalid_argument("boundary_posterior: empty window");
  if (grid_step > data.t_end - data.t_start) throw std::invalid_argument("boundary_posterior: grid too coarse");

  PosteriorGrid post;
  for (std::size_t i = 0;; ++i) {
    const double x = data.t_start + static_cast<double>(i) * grid_step;
    if (x >= data.t_end - 1e-9 * grid_step) break;
    post.axis.push_back(x);
  }
  post.axis.push_back(data.t_end);
  const auto& x = post.axis;
  const std::size_t n = x.size();
  const std::size_t nb = G - 1;
  post.boundaries = nb;

  std::size_t total_samples = 0;
  for (const auto& s : data.strata) total_samples += s.samples.size();
  if (!opt.weights.empty() && opt.weights.size() != total_samples)
    throw std::invalid_argument("boundary_posterior: weight count mismatch");

  // phi[g](i, j): log factor of stratum g spanning nodes i..j.
  std::vector<detail::Table2> phi(G);
  std::size_t flat = 0;
  for (std::size_t g = 0; g < G; ++g) {
    auto& t = phi[g];
    t.n = n;
    t.v.assign(n * n, 0.0);
    const std::size_t i_lo = 0, i_hi = g == 0 ? 0 : n - 1;
    const std::size_t j_lo = g == G - 1 ? n - 1 : 0;
    for (const auto& s : data.strata[g].samples) {
      const double w = opt.weights.empty() ? 1.0 : opt.weights[flat];
      ++flat;
      if (w == 0.0) continue;
      const auto obs = s.observations();
      const detail::SampleIntegral integ(obs, c, x);
      for (std::size_t i = i_lo; i <= i_hi; ++i)
        for (std::size_t j = std::max(i, j_lo); j < n; ++j) t.v[i * n + j] += w * integ.log_mean(i, j);
    }
  }

  const double ninf = stats::neg_inf;
  // alpha[k](i): log mass of strata left of boundary k with tau_k = node i.
  std::vector<std::vector<double>> alpha(nb, std::vector<double>(n, ninf)), beta = alpha;
  for (std::size_t i = 0; i < n; ++i) alpha[0][i] = phi[0](0, i);
  std::vector<double> buf(n);
  for (std::size_t k = 1; k < nb; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i <= j; ++i) buf[i] = alpha[k - 1][i] + phi[k](i, j);
      alpha[k][j] = stats::logsumexp(std::span<const double>(buf.data(), j + 1));
    }
  for (std::size_t i = 0; i < n; ++i) beta[nb - 1][i] = phi[G - 1](i, n - 1);
  for (std::size_t k = nb - 1; k-- > 0;)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) buf[j - i] = phi[k + 1](i, j) + beta[k + 1][j];
      beta[k][i] = stats::logsumexp(std::span<const double>(buf.data(), n - i));
    }
  for (std::size_t i = 0; i < n; ++i) buf[i] = alpha[0][i] + beta[0][i];
  const double logz = stats::logsumexp(std::span<const double>(buf.data(), n));
  if (!std::isfinite(logz))
    throw std::runtime_error("boundary_posterior: zero total mass (every cell underflowed)");
  post.log_normalizer = logz;

  post.marginals.assign(nb, std::vector<double>(n, 0.0));
  post.mean.assign(nb, 0.0);
  for (std::size_t k = 0; k < nb; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += post.marginals[k][i] = std::exp(alpha[k][i] + beta[k][i] - logz);
    for (std::size_t i = 0; i < n; ++i) {
      post.marginals[k][i] /= s;
      post.mean[k] += post.marginals[k][i] * x[i];
    }
  }
  for (std::size_t k = 0; k + 1 < nb; ++k) {
    GridDensity p{{x, x}, std::vector<double>(n * n, 0.0)};
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        s += p.mass[i * n + j] = std::exp(alpha[k][i] + phi[k + 1](i, j) + beta[k + 1][j] - logz);
    for (double& m : p.mass) m /= s;
    post.pairs.push_back(std::move(p));
  }

  // Max-product mode, earliest node on ties.
  {
    std::vector<std::vector<double>> best(nb, std::vector<double>(n, ninf));
    std::vector<std::vector<std::size_t>> from(nb, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i) best[0][i] = phi[0](0, i);
    for (std::size_t k = 1; k < nb; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= j; ++i) {
          const double v = best[k - 1][i] + phi[k](i, j);
          if (v > best[k][j]) {
            best[k][j] = v;
            from[k][j] = i;
          }
        }
    std::size_t arg = 0;
    double top = ninf;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = best[nb - 1][i] + phi[G - 1](i, n - 1);
      if (v > top) {
        top = v;
        arg = i;
      }
    }
    post.mode.assign(nb, 0);
    post.mode[nb - 1] = arg;
    for (std::size_t k = nb - 1; k-- > 0;) post.mode[k] = from[k + 1][post.mode[k + 1]];
  }

  double cells = 1.0;
  for (std::size_t k = 0; k < nb; ++k) cells *= static_cast<double>(n);
  if (nb <= 3 && cells <= static_cast<double>(opt.joint_cell_limit)) {
    GridDensity j;
    j.axes.assign(nb, x);
    j.mass.assign(static_cast<std::size_t>(cells), 0.0);
    std::vector<std::size_t> idx(nb, 0);
    for (std::size_t f = 0; f < j.mass.size(); ++f) {
      std::size_t r = f;
      for (std::size_t d = nb; d-- > 0;) {
        idx[d] = r % n;
        r /= n;
      }
      bool ordered = true;
      for (std::size_t d = 1; d < nb; ++d) ordered = ordered && idx[d - 1] <= idx[d];
      if (!ordered) continue;
      double lp = phi[0](0, idx[0]) + phi[G - 1](idx[nb - 1], n - 1);
      for (std::size_t d = 1; d < nb; ++d) lp += phi[d](idx[d - 1], idx[d]);
      j.mass[f] = std::exp(lp - logz);
    }
    post.joint = std::move(j);
  }
  return post;
}

// ---------------------------------------------------------------------------
// Ordered-event sampler

struct Chain {
  std::vector<double> states;  // stored rows (after burn-in, thinned), row-major
  std::size_t parameters = 0;
  std::size_t rows = 0;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t steps = 0;

  double at(std::size_t row, std::size_t p) const { return states[row * parameters + p]; }
};

struct McmcConfig {
  std::size_t steps = 1'000'000;  // full sweeps over all events
  std::uint64_t seed = 1;
  double burn_fraction = 0.1;
  std::size_t thin = 1;
  bool likelihood = true;  // false samples the prior
};

struct McmcSummary {
  Chain chain;
  std::vector<double> mean;
  std::vector<double> lower;  // 2.5%
  std::vector<double> upper;  // 97.5%
};

namespace detail {

inline McmcSummary summarize_chain(Chain chain) {
  McmcSummary s;
  const std::size_t p = chain.parameters;
  s.mean.assign(p, 0.0);
  s.lower.assign(p, 0.0);
  s.upper.assign(p, 0.0);
  std::vector<double> col(chain.rows);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t r = 0; r < chain.rows; ++r) col[r] = chain.at(r, j);
    s.mean[j] = stats::mean(col);
    std::sort(col.begin(), col.end());
    s.lower[j] = stats::quantile_sorted(col, 0.025);
    s.upper[j] = stats::quantile_sorted(col, 0.975);
  }
  s.chain = std::move(chain);
  return s;
}

}  // namespace detail

// Single-site Metropolis-within-Gibbs under the uniform order prior
// t_s < mu_1 < ... < mu_M < t_e: each site proposes uniformly between its
// neighbours and accepts by the Gaussian likelihood ratio.
inline McmcSummary mcmc_ordered_events(std::span<const double> y, std::span<const double> sigma, double t_s,
                                       double t_e, const McmcConfig& cfg) {
  if (y.size() != sigma.size()) throw std::invalid_argument("mcmc_ordered_events: length mismatch");
  if (y.empty()) throw std::invalid_argument("mcmc_ordered_events: no events");
  if (!(t_s < t_e)) throw std::invalid_argument("mcmc_ordered_events: infeasible bounds");
  if (cfg.steps < 1000) throw std::invalid_argument("mcmc_ordered_events: steps must be >= 1000");
  const std::size_t M = y.size();
  std::vector<double> mu(M);
  for (std::size_t m = 0; m < M; ++m) mu[m] = t_s + (t_e - t_s) * static_cast<double>(m + 1) / static_cast<double>(M + 1);
  std::vector<double> inv2v(M);
  for (std::size_t m = 0; m < M; ++m) inv2v[m] = 0.5 / (sigma[m] * sigma[m]);

  Rng rng(cfg.seed);
  Chain chain;
  chain.parameters = M;
  chain.seed = cfg.seed;
  chain.steps = cfg.steps;
  chain.burn_in = static_cast<std::size_t>(cfg.burn_fraction * static_cast<double>(cfg.steps));
  const std::size_t thin = std::max<std::size_t>(1, cfg.thin);
  chain.states.reserve((cfg.steps - chain.burn_in) / thin * M + M);
  std::size_t accepted = 0, proposed = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t m = 0; m < M; ++m) {
      const double a = m ? mu[m - 1] : t_s;
      const double b = m + 1 < M ? mu[m + 1] : t_e;
      const double prop = rng.uniform(a, b);
      ++proposed;
      bool accept = true;
      if (cfg.likelihood) {
        const double dn = y[m] - prop, dc = y[m] - mu[m];
        const double lr = -(dn * dn - dc * dc) * inv2v[m];
        accept = lr >= 0.0 || std::log(rng.uniform_open()) < lr;
      }
      if (accept) {
        mu[m] = prop;
        ++accepted;
      }
    }
    if (step >= chain.burn_in && (step - chain.burn_in) % thin == 0) {
      chain.states.insert(chain.states.end(), mu.begin(), mu.end());
      ++chain.rows;
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  return detail::summarize_chain(std::move(chain));
}

// ---------------------------------------------------------------------------
// Layered priors

struct LayerComparison {
  std::vector<std::vector<double>> mle;      // [layer][event]
  std::vector<std::vector<double>> prior_a;  // posterior means, conditional-uniform events
  std::vector<std::vector<double>> prior_b;  // posterior means, uniform transitions then uniform events
  std::vector<double> prior_b_boundaries;    // posterior means of interior transitions
  double acceptance_a = 0.0;
  double acceptance_b = 0.0;
};

struct LayerConfig {
  std::size_t steps = 100'000;
  std::uint64_t seed = 1;
  double burn_fraction = 0.1;
  double mle_grid_step = 0.1;
};

// layers[g] are the observations of layer g (oldest first); one event per observation.
inline LayerComparison layer_priors_compare(const std::vector<std::vector<Observation>>& layers, double t_s,
                                            double t_e, const LayerConfig& cfg) {
  const std::size_t G = layers.size();
  if (G == 0) throw std::invalid_argument("layer_priors_compare: no layers");
  if (!(t_s < t_e)) throw std::invalid_argument("layer_priors_compare: infeasible bounds");
  for (const auto& l : layers)
    if (l.empty()) throw std::invalid_argument("layer_priors_compare: empty layer");
  LayerComparison out;

  {
    StratifiedDataset d;
    d.t_start = t_s;
    d.t_end = t_e;
    for (std::size_t g = 0; g < G; ++g) {
      Stratum s{"L" + std::to_string(g + 1), {}};
      for (std::size_t m = 0; m < layers[g].size(); ++m)
        s.samples.push_back({std::to_string(g) + "." + std::to_string(m), {{layers[g][m].value, layers[g][m].sigma, "", ""}}});
      d.strata.push_back(std::move(s));
    }
    out.mle = maximize_boundaries(d, HuberSpec::gaussian(), cfg.mle_grid_step, false).fit.mu_hat;
  }

  auto loglik = [&](std::size_t g, std::size_t m, double v) {
    const double z = (layers[g][m].value - v) / layers[g][m].sigma;
    return -0.5 * z * z;
  };
  auto init_events = [&](const std::vector<double>& tau) {
    std::vector<std::vector<double>> mu(G);
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t M = layers[g].size();
      for (std::size_t m = 0; m < M; ++m)
        mu[g].push_back(tau[g] + (tau[g + 1] - tau[g]) * static_cast<double>(m + 1) / static_cast<double>(M + 1));
    }
    return mu;
  };
  std::vector<double> tau0(G + 1);
  for (std::size_t g = 0; g <= G; ++g) tau0[g] = t_s + (t_e - t_s) * static_cast<double>(g) / static_cast<double>(G);
  const std::size_t burn = static_cast<std::size_t>(cfg.burn_fraction * static_cast<double>(cfg.steps));

  auto accept = [](Rng& rng, double lr) { return lr >= 0.0 || std::log(rng.uniform_open()) < lr; };
  auto layer_max = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  auto layer_min = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };

  // Prior A: each event uniform between the previous layer's max and the next layer's min.
  {
    Rng rng = Rng::stream(cfg.seed, 0);
    auto mu = init_events(tau0);
    std::vector<std::vector<double>> sum(G);
    for (std::size_t g = 0; g < G; ++g) sum[g].assign(layers[g].size(), 0.0);
    std::size_t acc = 0, prop = 0, kept = 0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      for (std::size_t g = 0; g < G; ++g) {
        const double a = g ? layer_max(mu[g - 1]) : t_s;
        const double b = g + 1 < G ? layer_min(mu[g + 1]) : t_e;
        for (std::size_t m = 0; m < mu[g].size(); ++m) {
          const double p = rng.uniform(a, b);
          ++prop;
          if (accept(rng, loglik(g, m, p) - loglik(g, m, mu[g][m]))) {
            mu[g][m] = p;
            ++acc;
          }
        }
      }
      if (step >= burn) {
        ++kept;
        for (std::size_t g = 0; g < G; ++g)
          for (std::size_t m = 0; m < mu[g].size(); ++m) sum[g][m] += mu[g][m];
      }
    }
    for (auto& l : sum)
      for (double& v : l) v /= static_cast<double>(kept);
    out.prior_a = std::move(sum);
    out.acceptance_a = static_cast<double>(acc) / static_cast<double>(prop);
  }

  // Prior B: transitions uniform on the ordered cone, events uniform within
  // their layer's interval. Joint weight prod_g (tau_{g+1} - tau_g)^(-M_g).
  {
    Rng rng = Rng::stream(cfg.seed, 1);
    auto tau = tau0;
    auto mu = init_events(tau);
    std::vector<std::vector<double>> sum(G);
    for (std::size_t g = 0; g < G; ++g) sum[g].assign(layers[g].size(), 0.0);
    std::vector<double> tsum(G > 0 ? G - 1 : 0, 0.0);
    std::size_t acc = 0, prop = 0, kept = 0;
    auto log_prior_tau = [&](std::size_t k, double v) {
      // Factors of the two layers adjacent to interior transition k (1..G-1).
      return -static_cast<double>(layers[k - 1].size()) * std::log(v - tau[k - 1]) -
             static_cast<double>(layers[k].size()) * std::log(tau[k + 1] - v);
    };
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      for (std::size_t g = 0; g < G; ++g)
        for (std::size_t m = 0; m < mu[g].size(); ++m) {
          const double p = rng.uniform(tau[g], tau[g + 1]);
          ++prop;
          if (accept(rng, loglik(g, m, p) - loglik(g, m, mu[g][m]))) {
            mu[g][m] = p;
            ++acc;
          }
        }
      for (std::size_t k = 1; k < G; ++k) {
        const double a = layer_max(mu[k - 1]), b = layer_min(mu[k]);
        const double p = rng.uniform(a, b);
        ++prop;
        if (accept(rng, log_prior_tau(k, p) - log_prior_tau(k, tau[k]))) {
          tau[k] = p;
          ++acc;
        }
      }
      if (step >= burn) {
        ++kept;
        for (std::size_t g = 0; g < G; ++g)
          for (std::size_t m = 0; m < mu[g].size(); ++m) sum[g][m] += mu[g][m];
        for (std::size_t k = 1; k < G; ++k) tsum[k - 1] += tau[k];
      }
    }
    for (auto& l : sum)
      for (double& v : l) v /= static_cast<double>(kept);
    for (double& v : tsum) v /= static_cast<double>(kept);
    out.prior_b = std::move(sum);
    out.prior_b_boundaries = std::move(tsum);
    out.acceptance_b = static_cast<double>(acc) / static_cast<double>(prop);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-period toy: one transition tau between fixed t_s and t_e

struct TwoPeriodConfig {
  double t_s = time_axis::from_bce(1100);
  double t_e = time_axis::from_bce(900);
  double boundary_obs = time_axis::from_bce(1000);  // one observation from each stratum
  std::optional<double> remote_early;  // K-1 stratum-I observations, default t_s
  std::optional<double> remote_late;   // M-1 stratum-II observations, default t_e
  double sd = 10.0;
  int K = 5;
  int M = 1;
  double level = 0.95;
  std::size_t cells = 20000;
  bool length_factors = true;  // false drops the 1/length prior factors (ablation)
};

struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  std::vector<double> grid;
  std::vector<double> density;  // cell masses
};

namespace detail {

// P(a < Z < b) for standard normal, accurate in both tails.
inline double normal_interval_prob(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return 1.0 - 0.5 * std::erfc(-a / std::numbers::sqrt2) - 0.5 * std::erfc(b / std::numbers::sqrt2);
}

}  // namespace detail

// Posterior of the single transition, by midpoint quadrature on (t_s, t_e).
// Each stratum-I observation contributes (1/(tau - t_s)) * P(t_s < T < tau)
// under N(y, sd^2), stratum II likewise on (tau, t_e).
inline CredibleInterval two_period_credible(const TwoPeriodConfig& cfg) {
  if (cfg.K < 1 || cfg.M < 1) throw std::invalid_argument("two_period_credible: K and M must be >= 1");
  if (!(cfg.t_s < cfg.t_e)) throw std::invalid_argument("two_period_credible: t_s must precede t_e");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw std::invalid_argument("two_period_credible: level in (0, 1)");
  const double early = cfg.remote_early.value_or(cfg.t_s);
  const double late = cfg.remote_late.value_or(cfg.t_e);
  std::vector<std::pair<double, int>> first{{cfg.boundary_obs, 1}}, second{{cfg.boundary_obs, 1}};
  if (cfg.K > 1) first.push_back({early, cfg.K - 1});
  if (cfg.M > 1) second.push_back({late, cfg.M - 1});

  CredibleInterval out;
  const std::size_t n = cfg.cells;
  const double h = (cfg.t_e - cfg.t_s) / static_cast<double>(n);
  out.grid.resize(n);
  std::vector<double> lp(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = cfg.t_s + (static_cast<double>(i) + 0.5) * h;
    out.grid[i] = tau;
    double l = 0.0;
    for (const auto& [y, count] : first) {
      const double p = detail::normal_interval_prob((cfg.t_s - y) / cfg.sd, (tau - y) / cfg.sd);
      l += count * (std::log(p) - (cfg.length_factors ? std::log(tau - cfg.t_s) : 0.0));
    }
    for (const auto& [y, count] : second) {
      const double p = detail::normal_interval_prob((tau - y) / cfg.sd, (cfg.t_e - y) / cfg.sd);
      l += count * (std::log(p) - (cfg.length_factors ? std::log(cfg.t_e - tau) : 0.0));
    }
    lp[i] = l;
  }
  const double top = *std::max_element(lp.begin(), lp.end());
  out.density.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += out.density[i] = std::exp(lp[i] - top);
  for (double& d : out.density) d /= total;

  // Equal tails from the piecewise-linear CDF over cell edges.
  const double tail = 0.5 * (1.0 - cfg.level);
  auto invert = [&](double q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (acc + out.density[i] >= q) {
        const double frac = out.density[i] > 0 ? (q - acc) / out.density[i] : 0.0;
        return cfg.t_s + (static_cast<double>(i) + frac) * h;
      }
      acc += out.density[i];
    }
    return cfg.t_e;
  };
  out.lo = invert(tail);
  out.hi = invert(1.0 - tail);
  return out;
}

// ---------------------------------------------------------------------------
// Empirical Bayes

struct MixingDistribution {
  std::vector<double> support;
  std::vector<double> weights;
  std::vector<double> loglik_trace;  // log-likelihood before each update, then final
};

// Nonparametric MLE of the mixing distribution of N(t, sigma_j^2) on a fixed
// support grid by EM, stopped early at max_iter or when the log-likelihood
// gain falls below `tolerance`.
inline MixingDistribution eb_em_deconvolve(std::span<const double> obs, std::span<const double> sigmas,
                                           std::span<const double> support, std::size_t max_iter,
                                           double tolerance = 1e-8) {
  if (support.empty()) throw std::invalid_argument("eb_em_deconvolve: empty support");
  if (max_iter < 1) throw std::invalid_argument("eb_em_deconvolve: max_iter must be >= 1");
  if (obs.size() != sigmas.size()) throw std::invalid_argument("eb_em_deconvolve: length mismatch");
  const std::size_t n = obs.size(), K = support.size();
  MixingDistribution out;
  out.support.assign(support.begin(), support.end());
  out.weights.assign(K, 1.0 / static_cast<double>(K));
  if (n == 0) return out;

  // Kernel matrix in scaled form: kern[j][k] = exp(logphi - rowmax_j).
  std::vector<double> kern(n * K), rowmax(n);
  for (std::size_t j = 0; j < n; ++j) {
    double m = stats::neg_inf;
    for (std::size_t k = 0; k < K; ++k) {
      kern[j * K + k] = stats::normal_logpdf(obs[j], support[k], sigmas[j]);
      m = std::max(m, kern[j * K + k]);
    }
    rowmax[j] = m;
    for (std::size_t k = 0; k < K; ++k) kern[j * K + k] = std::exp(kern[j * K + k] - m);
  }
  auto loglik = [&](const std::vector<double>& w) {
    double l = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += w[k] * kern[j * K + k];
      l += std::log(s) + rowmax[j];
    }
    return l;
  };
  double current = loglik(out.weights);
  std::vector<double> next(K);
  for (std::size_t it = 0; it < max_iter; ++it) {
    out.loglik_trace.push_back(current);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += out.weights[k] * kern[j * K + k];
      for (std::size_t k = 0; k < K; ++k) next[k] += out.weights[k] * kern[j * K + k] / s;
    }
    double total = 0.0;
    for (double v : next) total += v;
    for (std::size_t k = 0; k < K; ++k) out.weights[k] = next[k] / total;
    const double updated = loglik(out.weights);
    const double gain = updated - current;
    current = updated;
    if (gain < tolerance) break;
  }
  out.loglik_trace.push_back(current);
  return out;
}

struct TauDensity {
  std::vector<double> grid;
  std::vector<double> density;  // cell masses, sum to 1
};

// Plug-in posterior for the change time: pi1 truncated to support <= tau and
// pi2 to support >= tau, each renormalized, then the marginal likelihood of
// both strata under a flat prior for tau. Truncations with no mass give 0.
inline TauDensity eb_change_posterior(const MixingDistribution& pi1, const MixingDistribution& pi2,
                                      std::span<const Observation> first, std::span<const Observation> second,
                                      std::span<const double> tau_grid) {
  TauDensity out;
  out.grid.assign(tau_grid.begin(), tau_grid.end());
  std::vector<double> lp(tau_grid.size(), stats::neg_inf);
  auto stratum_loglik = [](const MixingDistribution& pi, std::span<const Observation> obs, auto keep) {
    double kept = 0.0;
    for (std::size_t k = 0; k < pi.support.size(); ++k)
      if (keep(pi.support[k])) kept += pi.weights[k];
    if (!(kept > 0.0)) return stats::neg_inf;
    double l = 0.0;
    std::vector<double> terms;
    for (const auto& o : obs) {
      terms.clear();
      for (std::size_t k = 0; k < pi.support.size(); ++k)
        if (keep(pi.support[k]) && pi.weights[k] > 0.0)
          terms.push_back(std::log(pi.weights[k] / kept) + stats::normal_logpdf(o.value, pi.support[k], o.sigma));
      l += stats::logsumexp(terms);
    }
    return l;
  };
  for (std::size_t t = 0; t < tau_grid.size(); ++t) {
    const double tau = tau_grid[t];
    lp[t] = stratum_loglik(pi1, first, [&](double s) { return s <= tau; }) +
            stratum_loglik(pi2, second, [&](double s) { return s >= tau; });
  }
  const double z = stats::logsumexp(lp);
  if (!std::isfinite(z)) throw std::runtime_error("eb_change_posterior: zero likelihood on the whole grid");
  out.density.resize(lp.size());
  for (std::size_t t = 0; t < lp.size(); ++t) out.density[t] = std::exp(lp[t] - z);
  return out;
}

// ---------------------------------------------------------------------------
// Remote-sample sensitivity

enum class SensitivityMode { duplicate, remove };

struct SensitivityResult {
  PosteriorGrid baseline;
  PosteriorGrid modified;
  std::vector<std::size_t> affected_strata;  // strata holding the listed samples
  std::vector<double> baseline_lengths;      // posterior mean length per stratum
  std::vector<double> modified_lengths;
};

inline SensitivityResult remote_sample_sensitivity(const StratifiedDataset& data, HuberSpec c, double grid_step,
                                                   SensitivityMode mode, std::span<const std::string> ids) {
  std::vector<double> weights;
  for (const auto& s : data.strata) weights.insert(weights.end(), s.samples.size(), 1.0);
  std::vector<std::size_t> offsets;
  std::size_t acc = 0;
  for (const auto& s : data.strata) {
    offsets.push_back(acc);
    acc += s.samples.size();
  }
  SensitivityResult out;
  for (const auto& id : ids) {
    const auto [g, m] = data.locate(id);
    if (g == StratifiedDataset::npos) throw std::invalid_argument("remote_sample_sensitivity: unknown sample id '" + id + "'");
    weights[offsets[g] + m] = mode == SensitivityMode::duplicate ? 2.0 : 0.0;
    if (std::find(out.affected_strata.begin(), out.affected_strata.end(), g) == out.affected_strata.end())
      out.affected_strata.push_back(g);
  }
  std::sort(out.affected_strata.begin(), out.affected_strata.end());
  out.baseline = boundary_posterior(data, c, grid_step);
  PosteriorOptions opt;
  opt.weights = std::move(weights);
  out.modified = ids.empty() ? out.baseline : boundary_posterior(data, c, grid_step, opt);
  for (std::size_t g = 0; g < data.strata.size(); ++g) {
    out.baseline_lengths.push_back(out.baseline.mean_length(g));
    out.modified_lengths.push_back(out.modified.mean_length(g));
  }
  return out;
}

}  // namespace c14
