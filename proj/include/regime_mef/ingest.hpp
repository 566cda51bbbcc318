#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regime_mef/core_data.hpp"

namespace regime_mef::ingest {

enum class TimestampFormat { iso, us };

/// Maps the columns of an hourly grid export onto the fuel table. Each fuel
/// may be the sum of several source columns (e.g. wind + solar + hydro).
struct ColumnMap {
  std::string timestamp = "timestamp";
  TimestampFormat timestamp_format = TimestampFormat::iso;
  int utc_offset_hours = 0;  // local = UTC + offset; applied when the text has no offset
  std::vector<std::string> coal;
  std::vector<std::string> natural_gas;
  std::vector<std::string> renewables;
  std::vector<std::string> other;
  std::string load;       // optional
  std::string emissions;  // optional reported CO2 column
  double emissions_scale = 1.0;

  static ColumnMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct IngestOptions {
  bool allow_gaps = false;
  std::size_t max_interpolated_run = 3;
  double max_missing_fraction = 0.01;
};

struct Gap {
  Timestamp start;
  std::size_t length_hours;
};

struct GapReport {
  std::vector<Gap> gaps;  // sorted, non-overlapping
  std::string fill_policy;
  std::size_t duplicates_dropped = 0;
  std::size_t negatives_clamped = 0;
  std::size_t interpolated_points = 0;
  std::size_t forward_fills = 0;
  std::vector<std::size_t> outlier_lines;  // 1-based file lines flagged but retained
  std::vector<Gap> dropped_windows;        // only with allow_gaps

  bool empty() const noexcept { return gaps.empty(); }
  nlohmann::json to_json() const;
};

/// Hourly generation by fuel. All members share start and length.
struct FuelGenerationTable {
  HourlySeries coal;
  HourlySeries natural_gas;
  HourlySeries renewables_total;
  HourlySeries other;
  std::optional<HourlySeries> load;

  HourlySeries fossil_total() const;
  HourlySeries total() const;
  std::size_t size() const noexcept { return coal.size(); }
};

struct HourlyIngest {
  FuelGenerationTable table;
  std::optional<HourlySeries> emissions;  // reported, scaled to lbs
  GapReport report;
};

/// Parses an hourly grid export. Rows are normalized to UTC, sorted and
/// de-duplicated (first occurrence wins). Missing hours: runs of at most
/// `max_interpolated_run` are linearly interpolated; longer runs or more
/// than `max_missing_fraction` missing are fatal unless `allow_gaps`, in
/// which case only the longest gap-free window is kept.
HourlyIngest parse_eia_hourly(const std::filesystem::path& path, const ColumnMap& columns,
                              const IngestOptions& options = {});

/// Daily `date,price` file. Missing calendar days are forward-filled.
/// Non-positive prices are kept and their lines listed as outliers.
struct PriceIngest {
  HourlySeries prices;
  GapReport report;
};
PriceIngest parse_henry_hub(const std::filesystem::path& path);

using EmissionFactorSet = std::map<std::string, double>;  // fuel -> lbs CO2 / MWh

/// E_t = sum_f G_{f,t} * theta_f over coal, natural_gas and (when a factor
/// is supplied) other.
HourlySeries compute_emissions(const FuelGenerationTable& table, const EmissionFactorSet& factors);

/// Missing steps between the first and last timestamp of a sorted list.
GapReport validate_continuity(std::span<const Timestamp> stamps, std::chrono::seconds step = kHour);
GapReport validate_continuity(const HourlySeries& series);

/// Normalized interchange format: header `timestamp_utc,value`, RFC3339
/// stamps, shortest round-trip numbers. Lines starting with '#' are
/// provenance comments and are skipped on read.
std::string series_to_csv(const HourlySeries& series, const std::string& comment = {});
HourlySeries series_from_csv(std::string_view text, Unit unit, Frequency frequency = Frequency::hourly);
void write_series(const std::filesystem::path& path, const HourlySeries& series, const std::string& comment = {});
HourlySeries read_series(const std::filesystem::path& path, Unit unit, Frequency frequency = Frequency::hourly);

}  // namespace regime_mef::ingest
