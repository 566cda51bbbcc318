#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "regime_mef/timeutil.hpp"

namespace regime_mef {

enum class Unit { lbs_CO2, MWh, USD_per_MMBtu, dimensionless };
enum class Frequency { hourly, daily };

std::string to_string(Unit u);
std::string to_string(Frequency f);
std::chrono::seconds step_of(Frequency f);

/// Regularly spaced, gap-free series. Immutable once built; the constructor
/// rejects non-finite values and series shorter than two points.
class HourlySeries {
 public:
  HourlySeries(Timestamp start, std::vector<double> values, Unit unit,
               Frequency frequency = Frequency::hourly);

  Timestamp start() const noexcept { return start_; }
  Timestamp end() const noexcept { return time_at(size() - 1); }
  Timestamp time_at(std::size_t i) const noexcept {
    return start_ + static_cast<long>(i) * step_of(frequency_);
  }
  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  Unit unit() const noexcept { return unit_; }
  Frequency frequency() const noexcept { return frequency_; }

  Eigen::Map<const Eigen::VectorXd> as_vector() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  /// Sub-range [first, first+count).
  HourlySeries slice(std::size_t first, std::size_t count) const;

 private:
  Timestamp start_;
  std::vector<double> values_;
  Unit unit_;
  Frequency frequency_;
};

struct CalendarFlags {
  bool hour_of_day = true;
  bool day_of_week = true;
  bool month = true;
  bool trend = true;
  bool intercept = true;
};

/// Deterministic calendar regressors. Dummy blocks are built only for
/// categories that occur in the span, with the first occurring category
/// dropped as reference. Trend is (t - 0)/(T - 1), i.e. scaled to [0, 1].
struct CalendarDesign {
  Eigen::MatrixXd matrix;
  std::vector<std::string> column_labels;
};

CalendarDesign build_calendar_design(const HourlySeries& series, const CalendarFlags& include = {});

/// Residuals of the least-squares projection of `series` on `design`.
HourlySeries deseasonalize(const HourlySeries& series, const CalendarDesign& design);

/// Fitted values of the same projection (series = fitted + residual).
Eigen::VectorXd seasonal_fit(const HourlySeries& series, const CalendarDesign& design);

/// out[t] = in[t+lag] - in[t]; the output starts at the input's time `lag`.
HourlySeries difference(const HourlySeries& series, std::size_t lag = 1);

/// Inverse of difference(·, 1) given the first original value.
HourlySeries undifference(const HourlySeries& diffs, double initial);

/// Splits so that the first part holds every point strictly before `at`.
std::pair<HourlySeries, HourlySeries> split_at(const HourlySeries& series, Timestamp at);

/// (x - mean) / sd with ddof = 1.
HourlySeries standardize(const HourlySeries& series);

/// Index range [first, last) of points whose timestamp lies in calendar
/// year `year` (UTC).
std::pair<std::size_t, std::size_t> year_range(const HourlySeries& series, int year);

/// Throws InputError unless both series share start, length and frequency.
void require_aligned(const HourlySeries& a, const HourlySeries& b, const char* context);

}  // namespace regime_mef
