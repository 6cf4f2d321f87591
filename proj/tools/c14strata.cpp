// c14strata: ingestion, stratigraphic boundary analysis, simulation studies
// and remote-sample sensitivity from the command line.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <locale>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bundle.hpp"
#include "c14/c14.hpp"

using namespace c14;
using c14::cli::json;
using c14::cli::RunBundle;
using c14::io::fmt;

namespace {

struct Globals {
  unsigned threads = 0;
  std::string out = "runs";
  std::string run_dir;
  std::uint64_t seed = 1;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("C14STRATA_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == std::string(s).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("C14STRATA_SEED is not an unsigned integer: '") + s + "'");
  }
  return 1;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : io::detail::split_csv(s)) {
    double v = 0.0;
    if (!io::detail::parse_double(f, v)) throw UsageError(what + ": not a number '" + f + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> parse_ids(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : io::detail::split_csv(s))
    if (!f.empty()) out.push_back(f);
  return out;
}

HuberSpec parse_huber(const std::string& s) {
  if (s == "inf" || s == "gaussian") return HuberSpec::gaussian();
  double v = 0.0;
  if (!io::detail::parse_double(s, v) || v < 0.0) throw UsageError("--c: expected a nonnegative number or 'inf'");
  return {v};
}

json huber_json(HuberSpec c) { return c.is_gaussian() ? json("inf") : json(c.c); }

// ---------------------------------------------------------------------------
// Dataset loading shared by analyze and sensitivity

struct DataOptions {
  std::string path;
  std::string window;  // "start_bce,end_bce"
  std::string affine;  // "intercept,slope"
  std::string c = "1.345";
  double grid_step = 1.0;
};

void add_data_options(CLI::App* sub, DataOptions& o) {
  sub->add_option("data", o.path, "Determination CSV (sample_id,stratum,bp,sigma,lab)")->required()->check(CLI::ExistingFile);
  sub->add_option("--window", o.window, "Analysis window as start_bce,end_bce (default: data range +-150 y, rounded to 50)");
  sub->add_option("--affine", o.affine, "Calendar map intercept,slope: year = intercept + slope * BP")
      ->default_str("2221.8,-1.135");
  sub->add_option("--c", o.c, "Huber threshold in sigma units; 'inf' for the Gaussian model")->default_str("1.345");
  sub->add_option("--grid-step", o.grid_step, "Boundary grid step in years")->default_val(1.0)->check(CLI::PositiveNumber);
}

struct Loaded {
  StratifiedDataset data;
  AffineCalibration map;
  HuberSpec c;
};

Loaded load(const DataOptions& o) {
  Loaded l;
  l.c = parse_huber(o.c);
  l.map = AffineCalibration::iron_age_levant();
  if (!o.affine.empty()) {
    const auto v = parse_list(o.affine, "--affine");
    if (v.size() != 2) throw UsageError("--affine: expected intercept,slope");
    l.map = AffineCalibration::from_coefficients(v[0], v[1]);
  }
  auto table = io::read_determinations_file(o.path);
  l.data = to_calendar(std::move(table.dataset), l.map);
  if (!o.window.empty()) {
    const auto v = parse_list(o.window, "--window");
    if (v.size() != 2) throw UsageError("--window: expected start_bce,end_bce");
    l.data.t_start = time_axis::from_bce(v[0]);
    l.data.t_end = time_axis::from_bce(v[1]);
  } else {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : l.data.strata)
      for (const auto& m : s.samples)
        for (const auto& d : m.determinations) {
          lo = std::min(lo, d.value);
          hi = std::max(hi, d.value);
        }
    if (std::isfinite(lo)) {
      l.data.t_start = 50.0 * std::floor((lo - 150.0) / 50.0);
      l.data.t_end = 50.0 * std::ceil((hi + 150.0) / 50.0);
    }
  }
  l.data = validate_dataset(std::move(l.data));
  return l;
}

json data_config(const DataOptions& o, const Loaded& l) {
  return {{"window_bce", {time_axis::to_bce(l.data.t_start), time_axis::to_bce(l.data.t_end)}},
          {"affine", {l.map.intercept, l.map.slope}},
          {"c", huber_json(l.c)},
          {"grid_step", o.grid_step}};
}

std::string boundary_name(const StratifiedDataset& d, std::size_t k) {
  return d.strata[k].name + "->" + d.strata[k + 1].name;
}

// ---------------------------------------------------------------------------
// Serialization helpers

std::string marginals_csv(const PosteriorGrid& p) {
  std::ostringstream o;
  io::write_marginals_csv(o, p);
  return o.str();
}

std::string dense_csv(const GridDensity& g) {
  std::ostringstream o;
  io::write_dense_csv(o, g);
  return o.str();
}

json hpd_json(const HpdRegion& h) {
  json proj = json::array();
  for (const auto& [lo, hi] : h.projections)
    proj.push_back({{"lo_bce", time_axis::to_bce(lo)}, {"hi_bce", time_axis::to_bce(hi)}});
  return {{"level", h.level}, {"mass", h.mass}, {"cells", h.count}, {"threshold", h.threshold}, {"projections", proj}};
}

svg::Plot marginal_plot(const PosteriorGrid& p, const StratifiedDataset& d, const std::string& title) {
  static const char* colors[] = {"#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053"};
  svg::Plot plot{title, "year (negative = BCE)", "posterior mass", {}};
  for (std::size_t k = 0; k < p.boundaries; ++k)
    plot.series.push_back({boundary_name(d, k), p.axis, p.marginals[k], false, colors[k % 6]});
  return plot;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  std::string determinations;
  std::vector<std::string> intcal;
};

int cmd_ingest(const Globals& g, const IngestOptions& o) {
  if (o.determinations.empty() && o.intcal.empty())
    throw UsageError("ingest: give --determinations and/or --intcal");
  std::vector<std::string> inputs;
  if (!o.determinations.empty()) inputs.push_back(o.determinations);
  inputs.insert(inputs.end(), o.intcal.begin(), o.intcal.end());
  json cfg = {{"determinations", o.determinations}, {"intcal", o.intcal}};
  RunBundle run("ingest", cfg, inputs, g.out, g.run_dir);
  json report;
  report["schema_version"] = cli::schema_version;

  if (!o.determinations.empty()) {
    const auto t = io::read_determinations_file(o.determinations);
    auto cal = to_calendar(t.dataset, AffineCalibration::iron_age_levant());
    cal.t_start = -std::numeric_limits<double>::max();
    cal.t_end = std::numeric_limits<double>::max();
    validate_dataset(cal);
    std::cout << o.determinations << ": " << t.dataset.sample_count() << " samples, "
              << t.dataset.determination_count() << " determinations, " << t.dataset.strata.size() << " strata\n";
    json strata = json::array();
    for (const auto& s : t.dataset.strata) {
      std::size_t dets = 0;
      for (const auto& m : s.samples) dets += m.determinations.size();
      std::cout << "  " << s.name << ": " << s.samples.size() << " samples, " << dets << " determinations\n";
      strata.push_back({{"name", s.name}, {"samples", s.samples.size()}, {"determinations", dets}});
    }
    report["determinations"] = {{"path", o.determinations},
                                {"samples", t.dataset.sample_count()},
                                {"determinations", t.dataset.determination_count()},
                                {"strata", strata}};
    std::ostringstream canon;
    io::write_determinations(canon, t.dataset);
    run.write("dataset.csv", canon.str());
  }
  if (!o.intcal.empty()) {
    std::ostringstream canon;
    canon << "year,bp,sigma,dataset\n";
    json files = json::array();
    for (const auto& path : o.intcal) {
      const auto t = io::read_intcal_file(path);
      std::cout << path << ": " << t.points.size() << " calibration points, " << t.comments
                << " comment lines skipped\n";
      files.push_back({{"path", path}, {"points", t.points.size()}, {"comments", t.comments}});
      for (const auto& p : t.points)
        canon << fmt(p.cal_year, 1) << ',' << fmt(p.bp_age, 2) << ',' << fmt(p.sigma, 2) << ',' << p.source_lab << '\n';
    }
    report["calibration"] = files;
    run.write("calibration.csv", canon.str());
  }
  run.write_json("summary.json", report);
  const bool ok = run.finish();
  std::cout << "run directory: " << run.dir().string() << "\n";
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  DataOptions data;
  std::size_t bootstrap = 1000;
  bool parametric = false;
  bool posterior = true;
  double hpd = 0.95;
};

int cmd_analyze(const Globals& g, const AnalyzeOptions& o) {
  const auto l = load(o.data);
  const auto& d = l.data;
  json cfg = data_config(o.data, l);
  cfg["bootstrap"] = o.bootstrap;
  cfg["parametric"] = o.parametric;
  cfg["posterior"] = o.posterior;
  cfg["hpd"] = o.hpd;
  cfg["seed"] = g.seed;
  RunBundle run("analyze", cfg, {o.data.path}, g.out, g.run_dir);
  json summary;
  summary["schema_version"] = cli::schema_version;
  summary["dataset"] = {{"samples", d.sample_count()}, {"determinations", d.determination_count()}, {"strata", d.strata.size()}};
  summary["config"] = cfg;
  const std::size_t nb = d.strata.size() - 1;

  // MLE and profile surfaces
  const auto mle = maximize_boundaries(d, l.c, o.data.grid_step, true);
  {
    std::ostringstream o1;
    o1 << "boundary,name,estimate,estimate_bce,grid_maximizer,plateau_lo,plateau_hi\n";
    json b = json::array();
    for (std::size_t k = 0; k < nb; ++k) {
      const double t = mle.fit.tau_hat.interior()[k];
      o1 << k + 2 << ',' << boundary_name(d, k) << ',' << fmt(t, 3) << ',' << fmt(time_axis::to_bce(t), 3) << ','
         << fmt(mle.grid_maximizer.interior()[k], 3) << ',' << fmt(mle.profile.plateau_lo[k], 3) << ','
         << fmt(mle.profile.plateau_hi[k], 3) << '\n';
      b.push_back({{"name", boundary_name(d, k)},
                   {"estimate_bce", time_axis::to_bce(t)},
                   {"plateau_bce", {time_axis::to_bce(mle.profile.plateau_lo[k]), time_axis::to_bce(mle.profile.plateau_hi[k])}}});
    }
    run.write("mle_boundaries.csv", o1.str());
    std::ostringstream o2;
    o2 << "sample_id,stratum,mu_hat,mu_hat_bce,truncation\n";
    for (std::size_t s = 0; s < d.strata.size(); ++s)
      for (std::size_t m = 0; m < d.strata[s].samples.size(); ++m) {
        const auto f = mle.fit.flags[s][m];
        o2 << d.strata[s].samples[m].id << ',' << d.strata[s].name << ',' << fmt(mle.fit.mu_hat[s][m], 3) << ','
           << fmt(time_axis::to_bce(mle.fit.mu_hat[s][m]), 3) << ','
           << (f == Truncation::none ? "none" : f == Truncation::lower ? "lower" : "upper") << '\n';
      }
    run.write("mle_samples.csv", o2.str());
    std::ostringstream o3;
    o3 << "year";
    for (std::size_t k = 0; k < nb; ++k) o3 << ",tau" << k + 2;
    o3 << '\n';
    for (std::size_t i = 0; i < mle.profile.axis.size(); ++i) {
      o3 << fmt(mle.profile.axis[i], 3);
      for (std::size_t k = 0; k < nb; ++k) o3 << ',' << fmt(mle.profile.curves[k][i], 6);
      o3 << '\n';
    }
    run.write("profile_curves.csv", o3.str());
    for (const auto& s : mle.profile.surfaces) {
      GridDensity gd{{mle.profile.axis, mle.profile.axis}, s.values};
      run.write("profile_surface_" + std::to_string(s.first + 2) + "_" + std::to_string(s.first + 3) + ".csv",
                dense_csv(gd));
    }
    svg::Plot plot{"Profile pseudo-log-likelihood", "year (negative = BCE)", "profile", {}};
    for (std::size_t k = 0; k < nb; ++k) {
      std::vector<double> y = mle.profile.curves[k];
      for (double& v : y)
        if (v < mle.profile.max_value - 50.0) v = std::numeric_limits<double>::quiet_NaN();
      plot.series.push_back({boundary_name(d, k), mle.profile.axis, y});
    }
    run.write("profile_curves.svg", svg::render(plot));
    summary["mle"] = {{"boundaries", b}, {"loglik", mle.fit.loglik}, {"plateau_count", mle.profile.plateau_count}};
    std::cout << "MLE boundaries (BCE):";
    for (double t : mle.fit.tau_hat.interior()) std::cout << ' ' << fmt(time_axis::to_bce(t), 1);
    std::cout << '\n';
  }

  // Bootstrap cloud and ellipsoid
  if (o.bootstrap > 0) {
    BootstrapConfig bc;
    bc.replicates = o.bootstrap;
    bc.seed = g.seed;
    bc.grid_step = o.data.grid_step;
    bc.c = l.c;
    bc.threads = g.threads;
    const auto cloud = o.parametric ? bootstrap_parametric(d, mle.fit, bc) : bootstrap_nonparametric(d, bc);
    json bj = {{"scheme", scheme_name(cloud.scheme)}, {"replicates", cloud.size()}, {"repair_rate", cloud.repair_rate()}};
    std::ostringstream oc;
    if (cloud.size() > cloud.dims()) {
      const auto e = pca_ellipsoid(cloud, 0.95);
      const auto pcs = pc_intervals(cloud, e);
      io::write_cloud_csv(oc, cloud, &e);
      json comps = json::array();
      for (const auto& pc : pcs.components) {
        json names = json::array();
        for (auto k : pc.boundaries) names.push_back(boundary_name(d, k));
        comps.push_back({{"component", pc.component + 1},
                         {"eigenvalue", e.eigenvalues(static_cast<Eigen::Index>(pc.component))},
                         {"loadings", pc.loadings},
                         {"kind", pc.kind},
                         {"boundaries", names},
                         {"range", {pc.lo, pc.hi}}});
      }
      json ranges = json::array();
      for (std::size_t k = 0; k < cloud.dims(); ++k)
        ranges.push_back({{"name", boundary_name(d, k)},
                          {"lo_bce", time_axis::to_bce(pcs.boundary_lo[k])},
                          {"hi_bce", time_axis::to_bce(pcs.boundary_hi[k])}});
      bj["ellipsoid"] = {{"coverage", e.coverage},
                         {"members", e.members},
                         {"radius2_cut", e.radius2_cut},
                         {"kept_boundaries", e.coords},
                         {"warnings", e.warnings},
                         {"components", comps},
                         {"member_ranges", ranges}};
      for (std::size_t k = 0; k + 1 < cloud.dims(); ++k) {
        svg::Series in{"inside 95%", {}, {}, true, "#1f4e79"}, outside{"outside", {}, {}, true, "#c0c0c0"};
        for (std::size_t r = 0; r < cloud.size(); ++r) {
          auto& s = e.member[r] ? in : outside;
          s.x.push_back(cloud.replicates[r].interior()[k]);
          s.y.push_back(cloud.replicates[r].interior()[k + 1]);
        }
        svg::Plot plot{"Bootstrap cloud", "tau" + std::to_string(k + 2), "tau" + std::to_string(k + 3), {outside, in}};
        run.write("bootstrap_" + std::to_string(k + 2) + "_" + std::to_string(k + 3) + ".svg", svg::render(plot));
      }
    } else {
      io::write_cloud_csv(oc, cloud);
      bj["ellipsoid"] = nullptr;
    }
    run.write("bootstrap_cloud.csv", oc.str());
    summary["bootstrap"] = bj;
    std::cout << "bootstrap: " << cloud.size() << " replicates (" << scheme_name(cloud.scheme)
              << "), repair rate " << fmt(cloud.repair_rate(), 4) << '\n';
  }

  // Posterior grid and HPD regions
  if (o.posterior) {
    const auto post = boundary_posterior(d, l.c, o.data.grid_step);
    run.write("posterior_marginals.csv", marginals_csv(post));
    run.write("posterior_marginals.svg", svg::render(marginal_plot(post, d, "Boundary posterior marginals")));
    json pj;
    json mode = json::array(), mean = json::array(), marg = json::array(), pairs = json::array();
    std::ostringstream oh;
    oh << "region,level,axis,lo_bce,hi_bce,mass,cells\n";
    for (std::size_t k = 0; k < nb; ++k) {
      mode.push_back(time_axis::to_bce(post.mode_value(k)));
      mean.push_back(time_axis::to_bce(post.mean[k]));
      const auto h = hpd_region(post.marginal(k), o.hpd);
      marg.push_back(hpd_json(h));
      oh << "marginal_tau" << k + 2 << ',' << fmt(o.hpd, 3) << ",tau" << k + 2 << ','
         << fmt(time_axis::to_bce(h.projections[0].first), 1) << ',' << fmt(time_axis::to_bce(h.projections[0].second), 1)
         << ',' << fmt(h.mass, 6) << ',' << h.count << '\n';
    }
    for (std::size_t k = 0; k < post.pairs.size(); ++k) {
      const auto& pg = post.pairs[k];
      const auto h = hpd_region(pg, o.hpd);
      const std::string tag = std::to_string(k + 2) + "_" + std::to_string(k + 3);
      run.write("posterior_pair_" + tag + ".csv", dense_csv(pg));
      run.write("posterior_pair_" + tag + ".svg",
                svg::heatmap(pg, "Posterior of (tau" + std::to_string(k + 2) + ", tau" + std::to_string(k + 3) + ")",
                             "tau" + std::to_string(k + 2), "tau" + std::to_string(k + 3), &h.member));
      pairs.push_back(hpd_json(h));
      for (std::size_t a = 0; a < 2; ++a)
        oh << "pair_" << tag << ',' << fmt(o.hpd, 3) << ",tau" << k + 2 + a << ','
           << fmt(time_axis::to_bce(h.projections[a].first), 1) << ','
           << fmt(time_axis::to_bce(h.projections[a].second), 1) << ',' << fmt(h.mass, 6) << ',' << h.count << '\n';
    }
    run.write("hpd_regions.csv", oh.str());
    pj["mode_bce"] = mode;
    pj["mean_bce"] = mean;
    pj["hpd_marginal"] = marg;
    pj["hpd_pairs"] = pairs;
    summary["posterior"] = pj;
    std::cout << "posterior mode (BCE):";
    for (std::size_t k = 0; k < nb; ++k) std::cout << ' ' << fmt(time_axis::to_bce(post.mode_value(k)), 0);
    std::cout << '\n';
  }

  run.write_json("summary.json", summary);
  const bool ok = run.finish();
  std::cout << "run directory: " << run.dir().string() << "\n";
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// study

struct StudyOptions {
  std::string id;
  bool fixed_data = false;
  std::string mode = "misspecified";
  std::optional<std::size_t> replications, steps, em_iterations;
  std::optional<int> K;
  std::optional<double> sigma2;
  std::string intcal;
  std::string bandwidths = "5,10,20,40";
};

const std::vector<std::string> study_ids{"two-period", "table1", "monotone", "four-layer",
                                         "eb-change",  "coverage", "concentration"};

// Overrides each study accepts; anything else given on the command line is rejected.
const std::map<std::string, std::set<std::string>> study_overrides{
    {"two-period", {"--K"}},
    {"table1", {"--fixed-data", "--steps"}},
    {"monotone", {"--replications", "--steps"}},
    {"four-layer", {"--replications", "--steps"}},
    {"eb-change", {"--replications", "--em-iterations"}},
    {"coverage", {"--replications", "--mode", "--sigma2"}},
    {"concentration", {"--intcal", "--bandwidths"}},
};

void check_overrides(const CLI::App* sub, const StudyOptions& o) {
  const auto& allowed = study_overrides.at(o.id);
  for (const char* name : {"--K", "--fixed-data", "--steps", "--replications", "--em-iterations", "--mode", "--sigma2",
                           "--intcal", "--bandwidths"})
    if (sub->count(name) && !allowed.count(name))
      throw UsageError(std::string("invalid override ") + name + " for study '" + o.id + "'");
}

int cmd_study(const Globals& g, const CLI::App* sub, const StudyOptions& o) {
  if (std::find(study_ids.begin(), study_ids.end(), o.id) == study_ids.end()) {
    std::string list;
    for (const auto& s : study_ids) list += (list.empty() ? "" : ", ") + s;
    throw UsageError("unknown study id '" + o.id + "'; valid ids: " + list);
  }
  check_overrides(sub, o);
  json cfg = {{"study", o.id}, {"seed", g.seed}};
  std::vector<std::string> inputs;
  if (!o.intcal.empty()) inputs.push_back(o.intcal);
  json summary;
  summary["schema_version"] = cli::schema_version;
  summary["study"] = o.id;

  // Each branch fills `files` and the summary; the bundle is created once the
  // effective config is known.
  std::vector<std::pair<std::string, std::string>> files;
  std::ostringstream raw, series;

  if (o.id == "two-period") {
    const int K = o.K.value_or(5);
    std::vector<int> M;
    for (int m = 1; m <= 20; ++m) M.push_back(m);
    const auto rows = studies::run_two_period_study(K, M);
    cfg["K"] = K;
    raw << "M,lo_bce,hi_bce,mid_bce\n";
    svg::Series lo{"lower", {}, {}}, hi{"upper", {}, {}, false, "#b03a2e"}, mid{"midpoint", {}, {}, true, "#1e8449"};
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      raw << r.M << ',' << fmt(time_axis::to_bce(r.interval.lo), 3) << ',' << fmt(time_axis::to_bce(r.interval.hi), 3)
          << ',' << fmt(time_axis::to_bce(r.interval.mid()), 3) << '\n';
      lo.x.push_back(r.M);
      lo.y.push_back(r.interval.lo);
      hi.x.push_back(r.M);
      hi.y.push_back(r.interval.hi);
      mid.x.push_back(r.M);
      mid.y.push_back(r.interval.mid());
      if (i && !(r.interval.mid() > rows[i - 1].interval.mid())) monotone = false;
    }
    series << raw.str();
    summary["midpoint_increasing_in_M"] = monotone;
    files.push_back({"two_period.svg", svg::render({"Credible interval for the transition", "M", "year", {lo, hi, mid}})});
  } else if (o.id == "table1") {
    studies::SequenceConfig sc;
    sc.fixed_data = o.fixed_data;
    sc.seed = g.seed;
    if (o.steps) sc.steps = *o.steps;
    cfg["fixed_data"] = sc.fixed_data;
    cfg["steps"] = sc.steps;
    const auto rep = studies::run_sequence_study(sc);
    raw << "truth_bp,y_bp,posterior_mean_bp,interval_old_bp,interval_young_bp,covers\n";
    svg::Series truth{"truth", {}, {}, true, "#000000"}, y{"Y", {}, {}, true, "#b03a2e"}, mean{"posterior mean", {}, {}};
    int covered = 0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const auto& r = rep.rows[i];
      raw << fmt(r.truth_bp, 1) << ',' << fmt(r.y_bp, 1) << ',' << fmt(r.mean_bp, 1) << ',' << fmt(r.upper_bp, 1) << ','
          << fmt(r.lower_bp, 1) << ',' << (r.covers() ? 1 : 0) << '\n';
      covered += r.covers();
      const double idx = static_cast<double>(i + 1);
      truth.x.push_back(idx);
      truth.y.push_back(r.truth_bp);
      y.x.push_back(idx);
      y.y.push_back(r.y_bp);
      mean.x.push_back(idx);
      mean.y.push_back(r.mean_bp);
    }
    series << raw.str();
    summary["acceptance_rate"] = rep.acceptance_rate;
    summary["intervals_covering_truth"] = covered;
    files.push_back({"table1.svg", svg::render({"Ordered sequence of events", "event", "BP", {truth, y, mean}})});
  } else if (o.id == "monotone") {
    studies::MonotoneBiasConfig mc;
    mc.seed = g.seed;
    mc.threads = g.threads;
    if (o.replications) mc.replications = *o.replications;
    if (o.steps) mc.steps = *o.steps;
    cfg["replications"] = mc.replications;
    cfg["steps"] = mc.steps;
    const auto rep = studies::run_monotone_bias_study(mc);
    raw << "replicate,late_excess\n";
    for (std::size_t r = 0; r < rep.replicates.size(); ++r) raw << r << ',' << fmt(rep.replicates[r].late_excess, 6) << '\n';
    series << "index,truth,mean_error_mle,mean_error_bayes\n";
    svg::Series em{"MLE", {}, {}}, eb{"Bayes", {}, {}, false, "#b03a2e"};
    for (std::size_t m = 0; m < rep.truth.size(); ++m) {
      series << m + 1 << ',' << fmt(rep.truth[m], 4) << ',' << fmt(rep.mean_error_mle[m], 4) << ','
             << fmt(rep.mean_error_bayes[m], 4) << '\n';
      em.x.push_back(rep.truth[m]);
      em.y.push_back(rep.mean_error_mle[m]);
      eb.x.push_back(rep.truth[m]);
      eb.y.push_back(rep.mean_error_bayes[m]);
    }
    summary["late_sign_test"] = {{"positive", rep.late_sign.positive},
                                 {"negative", rep.late_sign.negative},
                                 {"p_value", rep.late_sign.p_value}};
    files.push_back({"monotone.svg", svg::render({"Mean signed error by true time", "true time", "error", {em, eb}})});
  } else if (o.id == "four-layer") {
    studies::FourLayerConfig fc;
    fc.seed = g.seed;
    fc.threads = g.threads;
    if (o.replications) fc.replications = *o.replications;
    if (o.steps) fc.steps = *o.steps;
    cfg["replications"] = fc.replications;
    cfg["steps"] = fc.steps;
    const auto rep = studies::run_four_layer_study(fc);
    raw << "replicate,contraction_mle,contraction_prior_a,contraction_prior_b\n";
    for (std::size_t r = 0; r < rep.replicates.size(); ++r) {
      const auto& x = rep.replicates[r];
      raw << r << ',' << fmt(x.contraction_mle, 4) << ',' << fmt(x.contraction_a, 4) << ',' << fmt(x.contraction_b, 4)
          << '\n';
    }
    // First replicate: truth and the three estimates per event, for the figure.
    const auto& first = rep.replicates.front();
    series << "layer,event,truth,observed,mle,prior_a,prior_b\n";
    svg::Series t{"truth", {}, {}, true, "#000000"}, a{"prior A", {}, {}, true, "#1e8449"},
        b{"prior B", {}, {}, true, "#b03a2e"}, m{"MLE", {}, {}, true, "#1f4e79"};
    double idx = 0;
    for (std::size_t gi = 0; gi < first.truth.size(); ++gi) {
      auto obs = first.y[gi];
      std::sort(obs.begin(), obs.end());
      for (std::size_t e = 0; e < first.truth[gi].size(); ++e, ++idx) {
        series << gi + 1 << ',' << e + 1 << ',' << fmt(first.truth[gi][e], 3) << ',' << fmt(obs[e], 3) << ','
               << fmt(first.fit.mle[gi][e], 3) << ',' << fmt(first.fit.prior_a[gi][e], 3) << ','
               << fmt(first.fit.prior_b[gi][e], 3) << '\n';
        for (auto* s : {&t, &a, &b, &m}) s->x.push_back(idx);
        t.y.push_back(first.truth[gi][e]);
        a.y.push_back(first.fit.prior_a[gi][e]);
        b.y.push_back(first.fit.prior_b[gi][e]);
        m.y.push_back(first.fit.mle[gi][e]);
      }
    }
    auto sign = [](const stats::SignTest& s) {
      return json{{"positive", s.positive}, {"negative", s.negative}, {"p_value", s.p_value}};
    };
    summary["prior_b_sign_test"] = sign(rep.prior_b_sign);
    summary["prior_a_sign_test"] = sign(rep.prior_a_sign);
    summary["mean_contraction"] = {{"mle", rep.mean_contraction_mle},
                                   {"prior_a", rep.mean_contraction_a},
                                   {"prior_b", rep.mean_contraction_b}};
    files.push_back({"four_layer.svg", svg::render({"Four layers, first replicate", "event", "time", {t, m, a, b}})});
  } else if (o.id == "eb-change") {
    studies::EbChangeConfig ec;
    ec.seed = g.seed;
    ec.threads = g.threads;
    if (o.replications) ec.replications = *o.replications;
    if (o.em_iterations) ec.em_iterations = *o.em_iterations;
    cfg["replications"] = ec.replications;
    cfg["em_iterations"] = ec.em_iterations;
    const auto rep = studies::run_eb_change_study(ec);
    raw << "replicate,lo_bce,hi_bce,mean_bce,covers\n";
    for (std::size_t r = 0; r < rep.replicates.size(); ++r) {
      const auto& x = rep.replicates[r];
      raw << r << ',' << fmt(time_axis::to_bce(x.lo), 1) << ',' << fmt(time_axis::to_bce(x.hi), 1) << ','
          << fmt(time_axis::to_bce(x.mean), 3) << ',' << (x.covers ? 1 : 0) << '\n';
    }
    const auto& first = rep.replicates.front();
    series << "year,posterior\n";
    for (std::size_t k = 0; k < first.posterior.grid.size(); ++k)
      series << fmt(first.posterior.grid[k], 1) << ',' << fmt(first.posterior.density[k], 12) << '\n';
    summary["coverage"] = rep.coverage;
    summary["mean_width"] = rep.mean_width;
    files.push_back({"eb_change.svg", svg::render({"Empirical-Bayes posterior of the change time (replicate 1)",
                                                   "year", "mass", {{"posterior", first.posterior.grid, first.posterior.density}}})});
  } else if (o.id == "coverage") {
    studies::CoverageConfig cc;
    if (o.mode == "misspecified") cc.mode = studies::CoverageMode::misspecified;
    else if (o.mode == "prior-drawn") cc.mode = studies::CoverageMode::prior_drawn;
    else throw UsageError("--mode: expected misspecified or prior-drawn");
    cc.seed = g.seed;
    cc.threads = g.threads;
    if (o.replications) cc.replications = *o.replications;
    if (o.sigma2) {
      if (cc.mode == studies::CoverageMode::prior_drawn) cc.prior_sigma2 = *o.sigma2;
      else cc.fixed_sigma2 = *o.sigma2;
    }
    cfg["mode"] = o.mode;
    cfg["replications"] = cc.replications;
    if (o.sigma2) cfg["sigma2"] = *o.sigma2;
    const auto rep = studies::run_calibration_coverage_study(cc);
    raw << "year_bce,bayes_coverage,bayes_range,bayes_length,freq_coverage,freq_range,bayes_se,freq_se\n";
    svg::Series bc{"Bayes", {}, {}, true}, fcov{"frequentist", {}, {}, true, "#b03a2e"};
    json rows = json::array();
    for (const auto& r : rep.rows) {
      raw << fmt(r.year_bce, 0) << ',' << fmt(r.bayes_coverage, 4) << ',' << fmt(r.bayes_range, 1) << ','
          << fmt(r.bayes_length, 1) << ',' << fmt(r.freq_coverage, 4) << ',' << fmt(r.freq_range, 1) << ','
          << fmt(r.bayes_se, 4) << ',' << fmt(r.freq_se, 4) << '\n';
      bc.x.push_back(-r.year_bce);
      bc.y.push_back(r.bayes_coverage);
      fcov.x.push_back(-r.year_bce);
      fcov.y.push_back(r.freq_coverage);
      rows.push_back({{"year_bce", r.year_bce},
                      {"bayes_coverage", r.bayes_coverage},
                      {"bayes_range", r.bayes_range},
                      {"freq_coverage", r.freq_coverage},
                      {"freq_range", r.freq_range}});
    }
    series << "block,sigma2\n";
    for (std::size_t b = 0; b < rep.sigma2.size(); ++b) series << b << ',' << fmt(rep.sigma2[b], 6) << '\n';
    summary["rows"] = rows;
    summary["sigma2_median"] = stats::quantile(rep.sigma2, 0.5);
    summary["sigma2_warnings"] = rep.sigma2_warnings;
    files.push_back({"coverage.svg", svg::render({"Coverage by target year", "year", "coverage", {bc, fcov}})});
  } else if (o.id == "concentration") {
    if (o.intcal.empty()) throw UsageError("study concentration: --intcal FILE is required");
    const auto cal = io::read_intcal_file(o.intcal);
    const auto bw = parse_list(o.bandwidths, "--bandwidths");
    cfg["intcal"] = o.intcal;
    cfg["bandwidths"] = bw;
    const auto figs = studies::emit_concentration_figures(cal.points, bw);
    raw << "year";
    for (double b : bw) raw << ",bp_bw" << fmt(b, 0) << ",log_ratio_bw" << fmt(b, 0);
    raw << '\n';
    const auto& years = figs.series.front().years;
    for (std::size_t i = 0; i < years.size(); ++i) {
      raw << fmt(years[i], 1);
      for (const auto& s : figs.series) raw << ',' << fmt(s.smoothed_bp[i], 4) << ',' << fmt(s.log_ratio[i], 8);
      raw << '\n';
    }
    series << "anchor_bce,year,decay_reference\n";
    for (const auto& r : figs.references)
      for (double y : years) series << fmt(time_axis::to_bce(r.anchor_year), 0) << ',' << fmt(y, 1) << ',' << fmt(r.at(y), 8) << '\n';
    svg::Plot plot{"Smoothed log concentration", "year", "log C/C0", {}};
    for (const auto& s : figs.series) plot.series.push_back({"bw " + fmt(s.bandwidth, 0), s.years, s.log_ratio});
    for (const auto& r : figs.references) {
      std::vector<double> v;
      for (double y : years) v.push_back(r.at(y));
      plot.series.push_back({"decay from " + fmt(time_axis::to_bce(r.anchor_year), 0) + " BCE", years, v, false, "#808080"});
    }
    summary["points"] = cal.points.size();
    files.push_back({"concentration.svg", svg::render(plot)});
  }

  RunBundle run("study", cfg, inputs, g.out, g.run_dir);
  summary["config"] = cfg;
  const std::string stem = o.id;
  run.write(stem + "_raw.csv", raw.str());
  run.write(stem + "_series.csv", series.str());
  for (const auto& [name, content] : files) run.write(name, content);
  run.write_json("summary.json", summary);
  const bool ok = run.finish();
  std::cout << raw.str();
  std::cout << "run directory: " << run.dir().string() << "\n";
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// sensitivity

struct SensitivityOptions {
  DataOptions data;
  std::string mode = "duplicate";
  std::string samples;
  double hpd = 0.95;
};

int cmd_sensitivity(const Globals& g, const SensitivityOptions& o) {
  SensitivityMode mode;
  if (o.mode == "duplicate") mode = SensitivityMode::duplicate;
  else if (o.mode == "remove") mode = SensitivityMode::remove;
  else throw UsageError("--mode: expected duplicate or remove");
  const auto l = load(o.data);
  const auto& d = l.data;
  const auto ids = parse_ids(o.samples);
  json cfg = data_config(o.data, l);
  cfg["mode"] = o.mode;
  cfg["samples"] = ids;
  cfg["hpd"] = o.hpd;
  const auto res = remote_sample_sensitivity(d, l.c, o.data.grid_step, mode, ids);
  RunBundle run("sensitivity", cfg, {o.data.path}, g.out, g.run_dir);

  std::ostringstream t;
  t << "quantity,name,baseline_lo_bce,baseline_hi_bce,modified_lo_bce,modified_hi_bce,baseline_mean,modified_mean\n";
  json bl = json::array();
  for (std::size_t k = 0; k < res.baseline.boundaries; ++k) {
    const auto hb = hpd_region(res.baseline.marginal(k), o.hpd);
    const auto hm = hpd_region(res.modified.marginal(k), o.hpd);
    t << "boundary," << boundary_name(d, k) << ',' << fmt(time_axis::to_bce(hb.projections[0].first), 1) << ','
      << fmt(time_axis::to_bce(hb.projections[0].second), 1) << ',' << fmt(time_axis::to_bce(hm.projections[0].first), 1)
      << ',' << fmt(time_axis::to_bce(hm.projections[0].second), 1) << ','
      << fmt(time_axis::to_bce(res.baseline.mean[k]), 2) << ',' << fmt(time_axis::to_bce(res.modified.mean[k]), 2) << '\n';
  }
  for (std::size_t s = 0; s < d.strata.size(); ++s) {
    t << "length," << d.strata[s].name << ",,,,," << fmt(res.baseline_lengths[s], 3) << ','
      << fmt(res.modified_lengths[s], 3) << '\n';
    bl.push_back({{"stratum", d.strata[s].name},
                  {"baseline_mean_length", res.baseline_lengths[s]},
                  {"modified_mean_length", res.modified_lengths[s]}});
  }
  run.write("hpd_comparison.csv", t.str());
  run.write("baseline_marginals.csv", marginals_csv(res.baseline));
  run.write("modified_marginals.csv", marginals_csv(res.modified));
  run.write("baseline_marginals.svg", svg::render(marginal_plot(res.baseline, d, "Baseline posterior")));
  run.write("modified_marginals.svg", svg::render(marginal_plot(res.modified, d, o.mode + ": posterior")));

  double before = 0.0, after = 0.0;
  json affected = json::array();
  for (auto s : res.affected_strata) {
    before += res.baseline_lengths[s];
    after += res.modified_lengths[s];
    affected.push_back(d.strata[s].name);
  }
  json summary;
  summary["schema_version"] = cli::schema_version;
  summary["config"] = cfg;
  summary["affected_strata"] = affected;
  summary["strata"] = bl;
  summary["affected_mean_length"] = {{"baseline", before}, {"modified", after}};
  run.write_json("summary.json", summary);
  const bool ok = run.finish();
  std::cout << t.str();
  std::cout << "run directory: " << run.dir().string() << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  std::cout.imbue(std::locale::classic());

  CLI::App app{"Radiocarbon chronology of stratified sites: boundary MLE, posterior, bootstrap and studies"};
  app.require_subcommand(1);
  Globals g;
  try {
    g.seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  app.add_option("--threads", g.threads, "Worker cap (0 = hardware concurrency)");
  app.add_option("--out", g.out, "Base directory for run bundles")->default_str("runs");
  app.add_option("--run-dir", g.run_dir, "Write the bundle to exactly this directory");
  app.add_option("--seed", g.seed, "Master seed (default: $C14STRATA_SEED or 1)");

  IngestOptions ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Validate determination and calibration files");
  s_ingest->add_option("--determinations", ingest.determinations, "Determination CSV")->check(CLI::ExistingFile);
  s_ingest->add_option("--intcal", ingest.intcal, "Calibration data file(s)")->check(CLI::ExistingFile);

  AnalyzeOptions analyze;
  auto* s_analyze = app.add_subcommand("analyze", "Boundary MLE, bootstrap, posterior and HPD regions");
  add_data_options(s_analyze, analyze.data);
  s_analyze->add_option("--bootstrap", analyze.bootstrap, "Bootstrap replicates (0 disables)")->default_val(1000);
  s_analyze->add_flag("--parametric", analyze.parametric, "Parametric instead of nonparametric bootstrap");
  s_analyze->add_flag("--posterior,!--no-posterior", analyze.posterior, "Compute the boundary posterior (default on)");
  s_analyze->add_option("--hpd", analyze.hpd, "HPD level")->default_val(0.95)->check(CLI::Range(0.0, 1.0));

  StudyOptions study;
  auto* s_study = app.add_subcommand("study", "Run a simulation study");
  s_study->add_option("id", study.id, "two-period | table1 | monotone | four-layer | eb-change | coverage | concentration")
      ->required();
  s_study->add_flag("--fixed-data", study.fixed_data, "table1: use the fixed reference Y column");
  s_study->add_option("--mode", study.mode, "coverage: misspecified | prior-drawn");
  s_study->add_option("--replications", study.replications, "Replication count")->check(CLI::PositiveNumber);
  s_study->add_option("--steps", study.steps, "MCMC sweeps")->check(CLI::PositiveNumber);
  s_study->add_option("--em-iterations", study.em_iterations, "eb-change: EM iterations")->check(CLI::PositiveNumber);
  s_study->add_option("--K", study.K, "two-period: stratum-I observation count")->check(CLI::PositiveNumber);
  s_study->add_option("--sigma2", study.sigma2, "coverage: curve variance rate")->check(CLI::PositiveNumber);
  s_study->add_option("--intcal", study.intcal, "concentration: calibration data file")->check(CLI::ExistingFile);
  s_study->add_option("--bandwidths", study.bandwidths, "concentration: kernel bandwidths");

  SensitivityOptions sens;
  auto* s_sens = app.add_subcommand("sensitivity", "Posterior with listed samples duplicated or removed");
  add_data_options(s_sens, sens.data);
  s_sens->add_option("--mode", sens.mode, "duplicate | remove")->required();
  s_sens->add_option("--samples", sens.samples, "Comma-separated sample ids")->required();
  s_sens->add_option("--hpd", sens.hpd, "HPD level")->default_val(0.95)->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (s_ingest->parsed()) return cmd_ingest(g, ingest);
    if (s_analyze->parsed()) return cmd_analyze(g, analyze);
    if (s_study->parsed()) return cmd_study(g, s_study, study);
    if (s_sens->parsed()) return cmd_sensitivity(g, sens);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
