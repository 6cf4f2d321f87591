#include <gtest/gtest.h>

#include <algorithm>

#include "c14/io.hpp"
#include "c14/model.hpp"
#include "fixtures.hpp"

using namespace c14;

namespace {

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  return std::any_of(issues.begin(), issues.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(BpToCalendar, AffineEvaluation) {
  const auto a = AffineCalibration::iron_age_levant();
  EXPECT_NEAR(bp_to_calendar(2800, a), -956.2, 1e-9);
  EXPECT_NEAR(bp_to_calendar(0, a), 2221.8, 1e-12);
  EXPECT_NEAR(bp_to_calendar(100, AffineCalibration::from_coefficients(0.0, -1.0)), -100.0, 1e-12);
}

TEST(BpToCalendar, StrictlyDecreasingForNegativeSlope) {
  const auto a = AffineCalibration::iron_age_levant();
  for (double bp = 2000; bp < 3500; bp += 7.3) EXPECT_GT(bp_to_calendar(bp, a), bp_to_calendar(bp + 0.5, a));
}

TEST(ToCalendar, ConvertsValuesAndSigmas) {
  auto d = fixture::simple_dataset({{2800}, {2700}}, 20, 0, 1);
  d.scale = TimeScale::radiocarbon_bp;
  const auto cal = to_calendar(d, AffineCalibration::iron_age_levant());
  EXPECT_EQ(cal.scale, TimeScale::calendar);
  EXPECT_NEAR(cal.strata[0].samples[0].determinations[0].value, -956.2, 1e-9);
  EXPECT_NEAR(cal.strata[0].samples[0].determinations[0].sigma, 22.7, 1e-9);
  // Already calendar: unchanged.
  EXPECT_NEAR(to_calendar(cal, AffineCalibration::iron_age_levant()).strata[1].samples[0].determinations[0].value,
              cal.strata[1].samples[0].determinations[0].value, 0.0);
}

TEST(ValidateDataset, ReportsEveryIssue) {
  auto d = fixture::simple_dataset({{-1000, -990}, {}}, 20, -1250, -650);
  d.strata[0].samples[1].determinations[0].sigma = 0.0;
  try {
    validate_dataset(d);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_TRUE(mentions(e.issues(), "nonpositive standard error"));
    EXPECT_TRUE(mentions(e.issues(), "empty stratum 'S2'"));
    EXPECT_EQ(e.issues().size(), 2u);
  }
}

TEST(ValidateDataset, WindowAndDuplicates) {
  auto d = fixture::simple_dataset({{-1000}, {-900}}, 20, -650, -1250);
  d.strata[1].samples[0].id = d.strata[0].samples[0].id;
  const auto issues = check_dataset(d);
  EXPECT_TRUE(mentions(issues, "window start"));
  EXPECT_TRUE(mentions(issues, "duplicate sample id"));
}

TEST(ValidateDataset, Idempotent) {
  const auto d = fixture::simple_dataset({{-1000, -990}, {-900}}, 20, -1250, -650);
  const auto once = validate_dataset(d);
  const auto twice = validate_dataset(once);
  EXPECT_EQ(io::fmt(once.t_start), io::fmt(twice.t_start));
  std::ostringstream a, b;
  io::write_determinations(a, once);
  io::write_determinations(b, twice);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_TRUE(check_dataset(twice).empty());
}

TEST(ValidateDataset, AcceptsDemoData) {
  auto t = io::read_determinations_file(std::string(C14_DEMO_DATA) + "/rehov_shaped.csv");
  EXPECT_EQ(t.rows, 86u);
  EXPECT_EQ(t.dataset.sample_count(), 32u);
  EXPECT_EQ(t.dataset.determination_count(), 86u);
  EXPECT_EQ(t.dataset.strata.size(), 4u);
  auto cal = to_calendar(t.dataset, AffineCalibration::iron_age_levant());
  cal.t_start = -1250;
  cal.t_end = -650;
  EXPECT_NO_THROW(validate_dataset(cal));
}

TEST(BoundaryVector, RejectsNonMonotone) {
  EXPECT_THROW(BoundaryVector(0, 10, {5, 3}), std::invalid_argument);
  EXPECT_THROW(BoundaryVector(0, 10, {11}), std::invalid_argument);
  EXPECT_THROW(BoundaryVector(0, 10, {-1}), std::invalid_argument);
  EXPECT_THROW(BoundaryVector(10, 0, {}), std::invalid_argument);
}

TEST(BoundaryVector, ZeroLengthStrataAllowed) {
  BoundaryVector b(0, 10, {4, 4, 7});
  EXPECT_EQ(b.strata(), 4u);
  EXPECT_DOUBLE_EQ(b.length(1), 0.0);
  EXPECT_DOUBLE_EQ(b.edge(0), 0.0);
  EXPECT_DOUBLE_EQ(b.edge(4), 10.0);
}

TEST(BoundaryVector, SetPreservesMonotonicity) {
  BoundaryVector b(0, 10, {3, 6});
  EXPECT_THROW(b.set(0, 7), std::invalid_argument);
  EXPECT_THROW(b.set(1, 2), std::invalid_argument);
  EXPECT_THROW(b.set(1, 11), std::invalid_argument);
  b.set(0, 6);
  EXPECT_DOUBLE_EQ(b.interior()[0], 6.0);
  for (std::size_t k = 0; k < b.strata(); ++k) EXPECT_GE(b.length(k), 0.0);
}
