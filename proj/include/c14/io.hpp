#pragma once

// Text formats: determination CSV, IntCal-style calibration tables, and the
// numeric outputs (posterior grids, bootstrap clouds). All number formatting
// goes through to_chars, so output does not depend on the locale.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "boundary_bayes.hpp"
#include "calibration.hpp"
#include "model.hpp"
#include "resampling.hpp"

namespace c14::io {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Fixed-point formatting with `digits` decimals, trailing zeros kept.
inline std::string fmt(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  if (ec != std::errc{}) throw std::runtime_error("fmt: value out of range");
  return std::string(buf, p);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on `delim`; double quotes protect delimiters, "" is a literal quote.
inline std::vector<std::string> split_csv(std::string_view line, char delim = ',') {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  for (auto& f : out) f = std::string(trim(f));
  return out;
}

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Determinations: sample_id,stratum,bp,sigma,lab[,note]

struct DeterminationTable {
  StratifiedDataset dataset;  // radiocarbon scale, window unset
  std::size_t rows = 0;
};

inline DeterminationTable read_determinations(std::istream& in, const std::string& source = "<input>") {
  DeterminationTable t;
  t.dataset.scale = TimeScale::radiocarbon_bp;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::map<std::string, std::size_t> stratum_index;
  std::map<std::string, std::pair<std::size_t, std::size_t>> sample_index;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto f = detail::split_csv(body);
    if (!header) {
      if (f.size() < 4 || f[0] != "sample_id" || f[1] != "stratum" || f[2] != "bp" || f[3] != "sigma")
        throw ParseError(source, lineno, "expected header sample_id,stratum,bp,sigma,lab");
      header = true;
      continue;
    }
    if (f.size() < 4 || f.size() > 6) throw ParseError(source, lineno, "expected 4 to 6 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(source, lineno, "empty sample_id");
    if (f[1].empty()) throw ParseError(source, lineno, "empty stratum");
    Determination d;
    if (!detail::parse_double(f[2], d.value)) throw ParseError(source, lineno, "bad bp value '" + f[2] + "'");
    if (!detail::parse_double(f[3], d.sigma)) throw ParseError(source, lineno, "bad sigma value '" + f[3] + "'");
    if (!(d.sigma > 0.0)) throw ParseError(source, lineno, "nonpositive standard error");
    if (f.size() > 4) d.lab = f[4];
    if (f.size() > 5) d.note = f[5];

    auto [sit, new_stratum] = stratum_index.try_emplace(f[1], t.dataset.strata.size());
    if (new_stratum) t.dataset.strata.push_back({f[1], {}});
    const std::size_t g = sit->second;
    auto found = sample_index.find(f[0]);
    if (found == sample_index.end()) {
      sample_index[f[0]] = {g, t.dataset.strata[g].samples.size()};
      t.dataset.strata[g].samples.push_back({f[0], {d}});
    } else {
      if (found->second.first != g)
        throw ParseError(source, lineno, "sample '" + f[0] + "' appears in two strata");
      t.dataset.strata[g].samples[found->second.second].determinations.push_back(d);
    }
    ++t.rows;
  }
  if (!header) throw ParseError(source, lineno, "missing header");
  return t;
}

inline DeterminationTable read_determinations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_determinations(in, path);
}

inline void write_determinations(std::ostream& out, const StratifiedDataset& data) {
  out << "sample_id,stratum,bp,sigma,lab\n";
  const int digits = data.scale == TimeScale::calendar ? 4 : 2;
  for (const auto& s : data.strata)
    for (const auto& m : s.samples)
      for (const auto& d : m.determinations)
        out << m.id << ',' << s.name << ',' << fmt(d.value, digits) << ',' << fmt(d.sigma, digits) << ',' << d.lab
            << '\n';
}

// ---------------------------------------------------------------------------
// Calibration data: cal_age_BP, c14_age_BP, sigma, dataset_id; comma, tab or
// whitespace separated; '#' starts a comment line; an optional header.

struct CalibrationTable {
  std::vector<CalibPoint> points;  // cal_year on the signed calendar axis
  std::size_t comments = 0;
};

inline CalibrationTable read_intcal(std::istream& in, const std::string& source = "<input>") {
  CalibrationTable t;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      ++t.comments;
      continue;
    }
    auto f = body.find(',') != std::string_view::npos ? detail::split_csv(body) : detail::split_ws(body);
    double cal = 0.0, bp = 0.0, sig = 0.0;
    const bool numeric = f.size() >= 3 && detail::parse_double(f[0], cal);
    if (first && !numeric) {  // header
      first = false;
      continue;
    }
    first = false;
    if (f.size() < 3) throw ParseError(source, lineno, "expected at least 3 fields");
    if (!numeric) throw ParseError(source, lineno, "bad cal_age_BP '" + f[0] + "'");
    if (!detail::parse_double(f[1], bp)) throw ParseError(source, lineno, "bad c14_age_BP '" + f[1] + "'");
    if (!detail::parse_double(f[2], sig)) throw ParseError(source, lineno, "bad sigma '" + f[2] + "'");
    if (!(sig > 0.0)) throw ParseError(source, lineno, "nonpositive standard error");
    t.points.push_back({time_axis::from_cal_bp(cal), bp, sig, f.size() > 3 ? f[3] : std::string{}});
  }
  return t;
}

inline CalibrationTable read_intcal_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_intcal(in, path);
}

// ---------------------------------------------------------------------------
// Outputs

// Marginals: year, one column per boundary.
inline void write_marginals_csv(std::ostream& out, const PosteriorGrid& post) {
  out << "year";
  for (std::size_t k = 0; k < post.boundaries; ++k) out << ",tau" << k + 2;
  out << '\n';
  for (std::size_t i = 0; i < post.axis.size(); ++i) {
    out << fmt(post.axis[i], 3);
    for (std::size_t k = 0; k < post.boundaries; ++k) out << ',' << fmt(post.marginals[k][i], 12);
    out << '\n';
  }
}

// Dense 2-D grid: the header row holds the second axis, the first column the first.
inline void write_dense_csv(std::ostream& out, const GridDensity& g) {
  if (g.dims() != 2) throw std::invalid_argument("write_dense_csv: need a 2-D grid");
  const auto& a = g.axes[0];
  const auto& b = g.axes[1];
  out << "axis";
  for (double y : b) out << ',' << fmt(y, 3);
  out << '\n';
  for (std::size_t i = 0; i < a.size(); ++i) {
    out << fmt(a[i], 3);
    for (std::size_t j = 0; j < b.size(); ++j) out << ',' << fmt(g.mass[i * b.size() + j], 12);
    out << '\n';
  }
}

inline void write_cloud_csv(std::ostream& out, const BootstrapCloud& cloud, const PcaEllipsoid* e = nullptr) {
  out << "replicate";
  for (std::size_t k = 0; k < cloud.dims(); ++k) out << ",tau" << k + 2;
  out << ",member_95\n";
  for (std::size_t r = 0; r < cloud.size(); ++r) {
    out << r;
    for (double t : cloud.replicates[r].interior()) out << ',' << fmt(t, 4);
    out << ',' << (e ? int(e->member[r]) : 0) << '\n';
  }
}

}  // namespace c14::io
