#include <doctest.h>

#include <cmath>
#include <random>

#include "regime_mef/error.hpp"
#include "regime_mef/ingest.hpp"
#include "regime_mef/linalg.hpp"
#include "support.hpp"

using namespace regime_mef;
using namespace regime_mef::ingest;
using test_support::write_text;

namespace {

ColumnMap fixture_map() {
  ColumnMap m;
  m.timestamp = "Timestamp (UTC)";
  m.coal = {"Coal"};
  m.natural_gas = {"Natural Gas"};
  m.renewables = {"Wind", "Solar"};
  m.other = {"Other"};
  m.load = "Demand";
  m.emissions = "CO2";
  return m;
}

const char* kHeader = "Timestamp (UTC),Coal,Natural Gas,Wind,Solar,Other,Demand,CO2\n";

std::string hour_row(int h, double coal, double gas = 200.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "2019-01-01T%02d:00:00Z,%g,%g,30,5,10,%g,%g\n", h, coal, gas, coal + gas + 45.0,
                2.0 * coal + gas);
  return buf;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("well-formed three-hour file") {
  const auto dir = test_support::scratch("ingest_basic");
  write_text(dir / "eia.csv", std::string(kHeader) + hour_row(0, 100) + hour_row(1, 110) + hour_row(2, 120));
  const auto res = parse_eia_hourly(dir / "eia.csv", fixture_map());
  CHECK(res.table.size() == 3);
  CHECK(res.report.empty());
  CHECK(res.report.duplicates_dropped == 0);
  CHECK(res.table.coal[1] == 110.0);
  CHECK(res.table.renewables_total[0] == 35.0);
  CHECK(res.table.fossil_total()[2] == 320.0);
  CHECK(res.table.total()[0] == 100.0 + 200.0 + 35.0 + 10.0);
  REQUIRE(res.table.load.has_value());
  CHECK((*res.table.load)[0] == 345.0);
  REQUIRE(res.emissions.has_value());
  CHECK((*res.emissions)[0] == 400.0);
  CHECK(res.table.coal.start() == make_utc(2019, 1, 1));
}

TEST_CASE("duplicated hour keeps the first row and is logged") {
  const auto dir = test_support::scratch("ingest_dup");
  write_text(dir / "eia.csv", std::string(kHeader) + hour_row(0, 100) + hour_row(1, 110) + hour_row(1, 999) + hour_row(2, 120));
  test_support::WarningCapture warnings;
  const auto res = parse_eia_hourly(dir / "eia.csv", fixture_map());
  CHECK(res.table.size() == 3);
  CHECK(res.report.duplicates_dropped == 1);
  CHECK(res.table.coal[1] == 110.0);
  CHECK(warnings.contains("dropped 1 duplicated"));
}

TEST_CASE("negative generation is clamped and counted") {
  const auto dir = test_support::scratch("ingest_neg");
  write_text(dir / "eia.csv", std::string(kHeader) + hour_row(0, -5) + hour_row(1, 110) + hour_row(2, -1));
  test_support::WarningCapture warnings;
  const auto res = parse_eia_hourly(dir / "eia.csv", fixture_map());
  CHECK(res.report.negatives_clamped == 2);
  CHECK(res.table.coal[0] == 0.0);
  CHECK(res.table.coal[2] == 0.0);
  std::size_t negatives = 0;
  for (double v : res.table.coal.values()) negatives += v < 0.0;
  CHECK(negatives == 0);
  CHECK(warnings.contains("clamped 2"));
}

TEST_CASE("timestamp conventions") {
  const auto dir = test_support::scratch("ingest_ts");
  write_text(dir / "us.csv",
             "Date,Coal,Natural Gas\n1/1/2019 1:00:00 AM,1,2\n1/1/2019 2:00:00 AM,3,4\n1/1/2019 3:00:00 AM,5,6\n");
  ColumnMap m;
  m.timestamp = "Date";
  m.timestamp_format = TimestampFormat::us;
  m.utc_offset_hours = -5;
  m.coal = {"Coal"};
  m.natural_gas = {"Natural Gas"};
  const auto res = parse_eia_hourly(dir / "us.csv", m);
  CHECK(res.table.coal.start() == make_utc(2019, 1, 1, 6));
  CHECK(!res.emissions.has_value());
  CHECK(!res.table.load.has_value());

  write_text(dir / "bad.csv", "Date,Coal,Natural Gas\n1/1/2019 1:00:00 AM,1,2\nnot a date,3,4\n");
  try {
    parse_eia_hourly(dir / "bad.csv", m);
    FAIL("expected a parse error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("mapping errors name the problem") {
  const auto dir = test_support::scratch("ingest_map");
  write_text(dir / "eia.csv", std::string(kHeader) + hour_row(0, 1) + hour_row(1, 2));
  auto m = fixture_map();
  m.coal = {"Lignite"};
  CHECK_THROWS_WITH_AS(parse_eia_hourly(dir / "eia.csv", m), doctest::Contains("Lignite"), InputError);
  CHECK_THROWS_AS(parse_eia_hourly(dir / "missing.csv", fixture_map()), InputError);
  write_text(dir / "num.csv", std::string(kHeader) + hour_row(0, 1) + "2019-01-01T01:00:00Z,abc,1,1,1,1,1,1\n");
  CHECK_THROWS_WITH_AS(parse_eia_hourly(dir / "num.csv", fixture_map()), doctest::Contains("line 3"), InputError);
}

TEST_CASE("gap policy: short runs interpolated, long runs fatal unless allowed") {
  const auto dir = test_support::scratch("ingest_gap");
  // 400 hours with hours 100-101 missing (2 of 400 = 0.5%)
  std::string text = kHeader;
  auto row_at = [](int i, double coal) {
    const auto ts = make_utc(2019, 1, 1) + i * kHour;
    return format_rfc3339(ts) + "," + std::to_string(coal) + ",200,30,5,10,500,400\n";
  };
  for (int i = 0; i < 400; ++i) {
    if (i == 100 || i == 101) continue;
    text += row_at(i, 100.0 + i);
  }
  write_text(dir / "short.csv", text);
  const auto res = parse_eia_hourly(dir / "short.csv", fixture_map());
  CHECK(res.table.size() == 400);
  REQUIRE(res.report.gaps.size() == 1);
  CHECK(res.report.gaps[0].start == make_utc(2019, 1, 1) + 100 * kHour);
  CHECK(res.report.gaps[0].length_hours == 2);
  CHECK(res.report.interpolated_points == 2);
  CHECK(res.table.coal[100] == doctest::Approx(200.0));
  CHECK(res.table.coal[101] == doctest::Approx(201.0));

  // a 4-hour hole: within the 1% budget but longer than the interpolation limit
  std::string text4 = kHeader;
  for (int i = 0; i < 500; ++i) {
    if (i >= 300 && i < 304) continue;
    text4 += row_at(i, 100.0);
  }
  write_text(dir / "long.csv", text4);
  CHECK_THROWS_WITH_AS(parse_eia_hourly(dir / "long.csv", fixture_map()), doctest::Contains("interpolation limit"), InputError);
  IngestOptions allow;
  allow.allow_gaps = true;
  const auto kept = parse_eia_hourly(dir / "long.csv", fixture_map(), allow);
  CHECK(kept.table.size() == 300);
  CHECK(kept.table.coal.start() == make_utc(2019, 1, 1));
  CHECK(kept.report.dropped_windows.size() == 1);

  // more than 1% missing
  std::string sparse = kHeader;
  for (int i = 0; i < 100; ++i) {
    if (i % 10 == 5) continue;
    sparse += row_at(i, 1.0);
  }
  write_text(dir / "sparse.csv", sparse);
  CHECK_THROWS_WITH_AS(parse_eia_hourly(dir / "sparse.csv", fixture_map()), doctest::Contains("--allow-gaps"), InputError);
  CHECK_NOTHROW(parse_eia_hourly(dir / "sparse.csv", fixture_map(), allow));
}

TEST_CASE("Henry Hub: weekends forward-filled, non-positive prices flagged") {
  const auto dir = test_support::scratch("ingest_hh");
  write_text(dir / "week.csv", "Day,Price\n01/07/2019,3.0\n01/08/2019,3.1\n01/09/2019,3.2\n01/10/2019,3.3\n01/11/2019,3.4\n");
  const auto week = parse_henry_hub(dir / "week.csv");
  CHECK(week.prices.size() == 5);
  CHECK(week.report.forward_fills == 0);
  CHECK(week.prices.frequency() == Frequency::daily);

  write_text(dir / "weekend.csv",
             "Henry Hub Natural Gas Spot Price\nSource: test\n\nDay,Price\n01/11/2019,3.4\n01/14/2019,-0.5\n01/15/2019,3.6\n");
  const auto wk = parse_henry_hub(dir / "weekend.csv");
  CHECK(wk.prices.size() == 5);
  CHECK(wk.report.forward_fills == 2);
  CHECK(wk.prices[1] == 3.4);
  CHECK(wk.prices[2] == 3.4);
  CHECK(wk.prices[3] == -0.5);
  REQUIRE(wk.report.outlier_lines.size() == 1);
  CHECK(wk.report.outlier_lines[0] == 6);
  CHECK(validate_continuity(wk.prices).empty());
}

TEST_CASE("compute_emissions is the weighted fuel sum") {
  const auto t0 = make_utc(2020, 1, 1);
  FuelGenerationTable t{HourlySeries(t0, {100.0, 0.0, 50.0}, Unit::MWh), HourlySeries(t0, {200.0, 0.0, 10.0}, Unit::MWh),
                        HourlySeries(t0, {5.0, 5.0, 5.0}, Unit::MWh), HourlySeries(t0, {0.0, 0.0, 0.0}, Unit::MWh),
                        std::nullopt};
  const EmissionFactorSet f{{"coal", 2.0}, {"natural_gas", 1.0}};
  const auto e = compute_emissions(t, f);
  CHECK(e[0] == 400.0);
  CHECK(e[1] == 0.0);
  CHECK(e[2] == 110.0);
  // linearity
  FuelGenerationTable t2{HourlySeries(t0, {200.0, 0.0, 100.0}, Unit::MWh), HourlySeries(t0, {400.0, 0.0, 20.0}, Unit::MWh),
                         t.renewables_total, t.other, std::nullopt};
  const auto e2 = compute_emissions(t2, f);
  for (std::size_t i = 0; i < 3; ++i) CHECK(e2[i] == 2.0 * e[i]);
  CHECK_THROWS_AS(compute_emissions(t, {{"coal", 2.0}}), InputError);
  CHECK_THROWS_AS(compute_emissions(t, {{"coal", 2.0}, {"natural_gas", 0.0}}), InputError);
}

TEST_CASE("least-squares factors reproduce an emissions column built from them") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(50.0, 500.0);
  std::normal_distribution<double> noise(0.0, 5.0);
  const std::size_t n = 24 * 30;
  std::vector<double> coal(n), gas(n), rep(n);
  for (std::size_t i = 0; i < n; ++i) {
    coal[i] = u(rng);
    gas[i] = u(rng);
    rep[i] = 2.2 * coal[i] + 0.9 * gas[i] + noise(rng);
  }
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = coal[i];
    X(static_cast<Eigen::Index>(i), 1) = gas[i];
    y(static_cast<Eigen::Index>(i)) = rep[i];
  }
  const auto fit = linalg::ols(X, y);
  const auto t0 = make_utc(2020, 1, 1);
  FuelGenerationTable t{HourlySeries(t0, coal, Unit::MWh), HourlySeries(t0, gas, Unit::MWh),
                        HourlySeries(t0, std::vector<double>(n, 0.0), Unit::MWh),
                        HourlySeries(t0, std::vector<double>(n, 0.0), Unit::MWh), std::nullopt};
  const auto e = compute_emissions(t, {{"coal", fit.coef(0)}, {"natural_gas", fit.coef(1)}});
  const Eigen::VectorXd resid = y - e.as_vector();
  const double r2 = 1.0 - resid.squaredNorm() / (y.array() - y.mean()).square().sum();
  CHECK(r2 > 0.95);
}

TEST_CASE("validate_continuity lists missing steps") {
  const auto t0 = make_utc(2019, 1, 1);
  std::vector<Timestamp> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(t0 + i * kHour);
  CHECK(validate_continuity(ten).empty());
  std::vector<Timestamp> holes;
  for (int i : {0, 1, 2, 3, 4, 7, 8, 9}) holes.push_back(t0 + i * kHour);
  const auto r = validate_continuity(holes);
  REQUIRE(r.gaps.size() == 1);
  CHECK(r.gaps[0].start == t0 + 5 * kHour);
  CHECK(r.gaps[0].length_hours == 2);
  std::vector<Timestamp> back{t0, t0 - kHour};
  CHECK_THROWS_AS(validate_continuity(back), InputError);
}

TEST_CASE("normalized CSV round trip is exact and idempotent") {
  std::mt19937_64 rng(9);
  const auto s = test_support::hourly(test_support::normals(300, rng) * 1e5, make_utc(2021, 3, 14), Unit::lbs_CO2);
  const std::string text = series_to_csv(s, "config_hash=abc seed=1 version=x");
  CHECK(text.rfind("# config_hash=abc", 0) == 0);
  const auto back = series_from_csv(text, Unit::lbs_CO2);
  CHECK(back.start() == s.start());
  CHECK(back.values() == s.values());
  CHECK(series_to_csv(back, "config_hash=abc seed=1 version=x") == text);
  CHECK_THROWS_AS(series_from_csv("time,value\n", Unit::MWh), InputError);
  CHECK_THROWS_AS(series_from_csv("timestamp_utc,value\n2019-01-01T00:00:00Z,1\n2019-01-01T02:00:00Z,2\n", Unit::MWh),
                  InputError);

  const auto dir = test_support::scratch("ingest_roundtrip");
  write_series(dir / "s.csv", s);
  CHECK(read_series(dir / "s.csv", Unit::lbs_CO2).values() == s.values());
}

TEST_CASE("re-parsing an exported table reproduces it") {
  const auto dir = test_support::scratch("ingest_reparse");
  std::string text = kHeader;
  for (int h = 0; h < 24; ++h) text += hour_row(h, 100.0 + 3.5 * h, 150.0 + h);
  write_text(dir / "a.csv", text);
  const auto first = parse_eia_hourly(dir / "a.csv", fixture_map());
  std::string again = kHeader;
  for (std::size_t t = 0; t < first.table.size(); ++t) {
    again += format_rfc3339(first.table.coal.time_at(t)) + "," + io::format_double(first.table.coal[t]) + "," +
             io::format_double(first.table.natural_gas[t]) + ",30,5,10," + io::format_double((*first.table.load)[t]) + "," +
             io::format_double((*first.emissions)[t]) + "\n";
  }
  write_text(dir / "b.csv", again);
  const auto second = parse_eia_hourly(dir / "b.csv", fixture_map());
  CHECK(second.table.coal.values() == first.table.coal.values());
  CHECK(second.table.natural_gas.values() == first.table.natural_gas.values());
  CHECK(second.emissions->values() == first.emissions->values());
}

TEST_CASE("column map JSON round trip") {
  auto m = fixture_map();
  m.utc_offset_hours = -6;
  m.emissions_scale = 2000.0;
  const auto back = ColumnMap::from_json(m.to_json());
  CHECK(back.renewables == m.renewables);
  CHECK(back.utc_offset_hours == -6);
  CHECK(back.emissions_scale == 2000.0);
  CHECK_THROWS_AS(ColumnMap::from_json({{"timestamp_format", "epoch"}}), InputError);
}

}
