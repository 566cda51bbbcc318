#include "regime_mef/core_data.hpp"

#include <cmath>
#include <map>

#include "regime_mef/error.hpp"
#include "regime_mef/linalg.hpp"

namespace regime_mef {

std::string to_string(Unit u) {
  switch (u) {
    case Unit::lbs_CO2: return "lbs_CO2";
    case Unit::MWh: return "MWh";
    case Unit::USD_per_MMBtu: return "USD_per_MMBtu";
    case Unit::dimensionless: return "dimensionless";
  }
  return "?";
}

std::string to_string(Frequency f) { return f == Frequency::hourly ? "hourly" : "daily"; }

std::chrono::seconds step_of(Frequency f) { return f == Frequency::hourly ? kHour : kDay; }

HourlySeries::HourlySeries(Timestamp start, std::vector<double> values, Unit unit, Frequency frequency)
    : start_(start), values_(std::move(values)), unit_(unit), frequency_(frequency) {
  if (values_.size() < 2) throw InputError("series needs at least 2 points");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InputError("non-finite value at index " + std::to_string(i) + " (" +
                       format_rfc3339(time_at(i)) + ")");
    }
  }
  if (start_ != floor<std::chrono::hours>(start_)) throw InputError("series start is not hour-aligned");
}

HourlySeries HourlySeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw InputError("slice out of range");
  return {time_at(first),
          std::vector<double>(values_.begin() + static_cast<long>(first),
                              values_.begin() + static_cast<long>(first + count)),
          unit_, frequency_};
}

CalendarDesign build_calendar_design(const HourlySeries& series, const CalendarFlags& include) {
  if (series.frequency() != Frequency::hourly) throw InputError("calendar design requires hourly data");
  const std::size_t T = series.size();
  std::vector<CivilFields> cf(T);
  std::map<unsigned, int> hours, dows, months;
  for (std::size_t t = 0; t < T; ++t) {
    cf[t] = civil_fields(series.time_at(t));
    hours[cf[t].hour] = 0;
    dows[cf[t].weekday] = 0;
    months[cf[t].month] = 0;
  }
  if (include.month && months.size() < 2) {
    throw RankDeficiencyError("calendar design: month indicators need at least 2 distinct months in the span",
                              {"month"});
  }

  CalendarDesign d;
  auto assign = [&](std::map<unsigned, int>& cats, const std::string& prefix) {
    bool first = true;
    for (auto& [cat, col] : cats) {
      if (first) {
        col = -1;  // reference
        first = false;
        continue;
      }
      col = static_cast<int>(d.column_labels.size());
      d.column_labels.push_back(prefix + std::to_string(cat));
    }
  };
  int intercept_col = -1, trend_col = -1;
  if (include.intercept) {
    intercept_col = static_cast<int>(d.column_labels.size());
    d.column_labels.push_back("intercept");
  }
  if (include.hour_of_day) assign(hours, "hour_");
  if (include.day_of_week) assign(dows, "dow_");
  if (include.month) assign(months, "month_");
  if (include.trend) {
    trend_col = static_cast<int>(d.column_labels.size());
    d.column_labels.push_back("trend");
  }

  d.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(d.column_labels.size()));
  const double denom = T > 1 ? static_cast<double>(T - 1) : 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    if (intercept_col >= 0) d.matrix(r, intercept_col) = 1.0;
    if (include.hour_of_day && hours[cf[t].hour] >= 0) d.matrix(r, hours[cf[t].hour]) = 1.0;
    if (include.day_of_week && dows[cf[t].weekday] >= 0) d.matrix(r, dows[cf[t].weekday]) = 1.0;
    if (include.month && months[cf[t].month] >= 0) d.matrix(r, months[cf[t].month]) = 1.0;
    if (trend_col >= 0) d.matrix(r, trend_col) = static_cast<double>(t) / denom;
  }
  linalg::require_full_rank(d.matrix, d.column_labels, "calendar design");
  return d;
}

namespace {

linalg::LeastSquares project(const HourlySeries& series, const CalendarDesign& design) {
  if (design.matrix.rows() != static_cast<Eigen::Index>(series.size())) {
    throw InputError("deseasonalize: design rows do not match series length");
  }
  return linalg::ols(design.matrix, series.as_vector(), design.column_labels);
}

}  // namespace

HourlySeries deseasonalize(const HourlySeries& series, const CalendarDesign& design) {
  const auto fit = project(series, design);
  return {series.start(), std::vector<double>(fit.residuals.data(), fit.residuals.data() + fit.residuals.size()),
          series.unit(), series.frequency()};
}

Eigen::VectorXd seasonal_fit(const HourlySeries& series, const CalendarDesign& design) {
  const auto fit = project(series, design);
  return series.as_vector() - fit.residuals;
}

HourlySeries difference(const HourlySeries& series, std::size_t lag) {
  if (lag == 0 || lag >= series.size()) {
    throw InputError("difference: lag must be in [1, length)");
  }
  std::vector<double> out(series.size() - lag);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = series[t + lag] - series[t];
  if (out.size() < 2) throw InputError("difference: result shorter than 2 points");
  return {series.time_at(lag), std::move(out), series.unit(), series.frequency()};
}

HourlySeries undifference(const HourlySeries& diffs, double initial) {
  std::vector<double> out(diffs.size() + 1);
  out[0] = initial;
  for (std::size_t t = 0; t < diffs.size(); ++t) out[t + 1] = out[t] + diffs[t];
  return {diffs.start() - step_of(diffs.frequency()), std::move(out), diffs.unit(), diffs.frequency()};
}

std::pair<HourlySeries, HourlySeries> split_at(const HourlySeries& series, Timestamp at) {
  if (at <= series.start() || at > series.end()) {
    throw InputError("split_at: " + format_rfc3339(at) + " is outside (" + format_rfc3339(series.start()) +
                     ", " + format_rfc3339(series.end()) + "]");
  }
  const auto step = step_of(series.frequency());
  const auto offset = at - series.start();
  const auto n_before = static_cast<std::size_t>((offset + step - std::chrono::seconds{1}) / step);
  const std::size_t n_after = series.size() - n_before;
  // HourlySeries needs >= 2 points; single-point parts are represented by
  // construction failure, which we report as a span error.
  auto part = [&](std::size_t first, std::size_t count) {
    std::vector<double> v(series.values().begin() + static_cast<long>(first),
                          series.values().begin() + static_cast<long>(first + count));
    return HourlySeries(series.time_at(first), std::move(v), series.unit(), series.frequency());
  };
  if (n_before < 2 || n_after < 2) {
    throw InputError("split_at: split leaves a part shorter than 2 points");
  }
  return {part(0, n_before), part(n_before, n_after)};
}

HourlySeries standardize(const HourlySeries& series) {
  const auto v = series.as_vector();
  const double m = v.mean();
  const double sd = std::sqrt(linalg::variance(v));
  if (!(sd > 0.0)) throw InputError("standardize: zero variance");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (series[i] - m) / sd;
  return {series.start(), std::move(out), Unit::dimensionless, series.frequency()};
}

std::pair<std::size_t, std::size_t> year_range(const HourlySeries& series, int year) {
  std::size_t first = series.size(), last = series.size();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int y = civil_fields(series.time_at(i)).year;
    if (y == year && first == series.size()) first = i;
    if (y > year) {
      last = i;
      break;
    }
  }
  if (first == series.size()) return {0, 0};
  return {first, last};
}

void require_aligned(const HourlySeries& a, const HourlySeries& b, const char* context) {
  if (a.start() != b.start() || a.size() != b.size() || a.frequency() != b.frequency()) {
    throw InputError(std::string(context) + ": series are not aligned (start/length/frequency differ)");
  }
}

}  // namespace regime_mef
