#pragma once

// Core data model shared by every estimator: determinations grouped into
// samples, samples grouped into ordered strata, and the boundary vector that
// separates the strata on the calendar axis.
//
// All order constraints live on a signed calendar axis whose values increase
// toward the present. A year BCE maps to its negation; radiocarbon (BP)
// values are converted once, at ingestion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace c14 {

namespace time_axis {

inline constexpr double present_year = 1950.0;

constexpr double from_bce(double bce) { return -bce; }
constexpr double to_bce(double year) { return -year; }
constexpr double from_cal_bp(double cal_bp) { return present_year - cal_bp; }
constexpr double to_cal_bp(double year) { return present_year - year; }

}  // namespace time_axis

// A value with its one-sigma error, on whichever axis the caller works in.
struct Observation {
  double value = 0.0;
  double sigma = 1.0;
};

struct Determination {
  double value = 0.0;  // BP age on the radiocarbon scale, year on the calendar scale
  double sigma = 0.0;
  std::string lab;
  std::string note;
};

struct Sample {
  std::string id;
  std::vector<Determination> determinations;

  std::vector<Observation> observations() const {
    std::vector<Observation> out;
    out.reserve(determinations.size());
    for (const auto& d : determinations) out.push_back({d.value, d.sigma});
    return out;
  }
};

struct Stratum {
  std::string name;
  std::vector<Sample> samples;
};

enum class TimeScale { radiocarbon_bp, calendar };

struct StratifiedDataset {
  std::vector<Stratum> strata;  // oldest first
  double t_start = 0.0;
  double t_end = 0.0;
  TimeScale scale = TimeScale::calendar;

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& s : strata) n += s.samples.size();
    return n;
  }

  std::size_t determination_count() const {
    std::size_t n = 0;
    for (const auto& s : strata)
      for (const auto& m : s.samples) n += m.determinations.size();
    return n;
  }

  // Returns (stratum index, sample index) or nullopt-like {npos, npos}.
  std::pair<std::size_t, std::size_t> locate(std::string_view id) const {
    for (std::size_t g = 0; g < strata.size(); ++g)
      for (std::size_t m = 0; m < strata[g].samples.size(); ++m)
        if (strata[g].samples[m].id == id) return {g, m};
    return {npos, npos};
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "invalid dataset (" << issues.size() << " issue"
       << (issues.size() == 1 ? "" : "s") << ")";
    for (const auto& i : issues) os << "\n  - " << i;
    return os.str();
  }

  std::vector<std::string> issues_;
};

// Every invariant violation in the dataset, in a stable order. Empty means valid.
inline std::vector<std::string> check_dataset(const StratifiedDataset& data) {
  std::vector<std::string> issues;
  if (!std::isfinite(data.t_start) || !std::isfinite(data.t_end) || data.t_start >= data.t_end) {
    std::ostringstream os;
    os << "window start " << data.t_start << " must be before window end " << data.t_end;
    issues.push_back(os.str());
  }
  if (data.strata.empty()) issues.emplace_back("dataset has no strata");

  std::set<std::string> seen;
  for (const auto& stratum : data.strata) {
    if (stratum.samples.empty()) issues.push_back("empty stratum '" + stratum.name + "'");
    for (const auto& sample : stratum.samples) {
      if (!seen.insert(sample.id).second)
        issues.push_back("duplicate sample id '" + sample.id + "'");
      if (sample.determinations.empty())
        issues.push_back("sample '" + sample.id + "' has no determinations");
      for (std::size_t i = 0; i < sample.determinations.size(); ++i) {
        const auto& d = sample.determinations[i];
        if (!std::isfinite(d.value)) {
          issues.push_back("sample '" + sample.id + "' determination " + std::to_string(i + 1) +
                           ": non-finite value");
        }
        if (!(d.sigma > 0.0) || !std::isfinite(d.sigma)) {
          issues.push_back("sample '" + sample.id + "' determination " + std::to_string(i + 1) +
                           ": nonpositive standard error");
        }
      }
    }
  }
  return issues;
}

inline StratifiedDataset validate_dataset(StratifiedDataset raw) {
  auto issues = check_dataset(raw);
  if (!issues.empty()) throw DatasetError(std::move(issues));
  return raw;
}

// Interior transition times tau_2..tau_G plus the fixed window ends. Zero-length
// strata (equal neighbours) are allowed.
class BoundaryVector {
 public:
  BoundaryVector() = default;

  BoundaryVector(double t_start, double t_end, std::vector<double> interior)
      : t_start_(t_start), t_end_(t_end), interior_(std::move(interior)) {
    if (!(t_start_ <= t_end_)) throw std::invalid_argument("BoundaryVector: t_start > t_end");
    double prev = t_start_;
    for (double t : interior_) {
      if (!(t >= prev)) throw std::invalid_argument("BoundaryVector: boundaries not monotone");
      prev = t;
    }
    if (!(t_end_ >= prev)) throw std::invalid_argument("BoundaryVector: boundary beyond t_end");
  }

  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  std::span<const double> interior() const noexcept { return interior_; }
  std::size_t strata() const noexcept { return interior_.size() + 1; }

  // Edge k in 0..strata(): 0 is t_start, strata() is t_end.
  double edge(std::size_t k) const {
    if (k == 0) return t_start_;
    if (k == strata()) return t_end_;
    return interior_.at(k - 1);
  }

  std::pair<double, double> interval(std::size_t g) const { return {edge(g), edge(g + 1)}; }
  double length(std::size_t g) const { return edge(g + 1) - edge(g); }

  void set(std::size_t i, double value) {
    const double lo = i == 0 ? t_start_ : interior_.at(i - 1);
    const double hi = i + 1 < interior_.size() ? interior_[i + 1] : t_end_;
    if (!(value >= lo && value <= hi))
      throw std::invalid_argument("BoundaryVector::set would break monotonicity");
    interior_.at(i) = value;
  }

  friend bool operator==(const BoundaryVector&, const BoundaryVector&) = default;

 private:
  double t_start_ = 0.0;
  double t_end_ = 0.0;
  std::vector<double> interior_;
};

// calendar = intercept + slope * bp. The forward pair (bp = fwd_intercept +
// fwd_slope * year) is kept when the map came from a regression.
struct AffineCalibration {
  double slope = -1.135;
  double intercept = 2221.8;
  double fwd_slope = 1.0 / -1.135;
  double fwd_intercept = 2221.8 / 1.135;
  double residual_sd = 0.0;
  std::pair<double, double> window{-1150.0, -800.0};
  std::vector<double> exclusions;
  std::size_t n_points = 0;

  // Linear approximation of the calibration curve around the 10th century BCE.
  static AffineCalibration iron_age_levant() { return {}; }

  static AffineCalibration from_coefficients(double intercept, double slope) {
    AffineCalibration a;
    a.intercept = intercept;
    a.slope = slope;
    a.fwd_slope = slope != 0.0 ? 1.0 / slope : 0.0;
    a.fwd_intercept = slope != 0.0 ? -intercept / slope : 0.0;
    return a;
  }
};

inline double bp_to_calendar(double bp, const AffineCalibration& model) {
  return model.intercept + model.slope * bp;
}

inline double sigma_to_calendar(double sigma_bp, const AffineCalibration& model) {
  return sigma_bp * std::abs(model.slope);
}

// Converts a radiocarbon-scale dataset to the calendar axis. Calendar input is
// returned unchanged.
inline StratifiedDataset to_calendar(StratifiedDataset data, const AffineCalibration& model) {
  if (data.scale == TimeScale::calendar) return data;
  for (auto& stratum : data.strata)
    for (auto& sample : stratum.samples)
      for (auto& d : sample.determinations) {
        d.value = bp_to_calendar(d.value, model);
        d.sigma = sigma_to_calendar(d.sigma, model);
      }
  data.scale = TimeScale::calendar;
  return data;
}

inline void require_calendar(const StratifiedDataset& data, const char* who) {
  if (data.scale != TimeScale::calendar)
    throw std::invalid_argument(std::string(who) + ": dataset must be on the calendar axis");
}

}  // namespace c14
