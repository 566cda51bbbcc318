#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace regime_mef {

using Timestamp = std::chrono::sys_seconds;
inline constexpr std::chrono::seconds kHour{3600};
inline constexpr std::chrono::seconds kDay{86400};

/// Parses RFC3339-ish timestamps: "2019-01-01T05:00:00Z", "2019-01-01 05:00",
/// "2019-01-01T00:00:00-05:00", or a bare date "2019-01-01". Offsets are
/// applied so the result is UTC. Throws InputError on malformed text.
Timestamp parse_iso_timestamp(std::string_view text);

/// US export style "1/31/2019 11:00:00 PM" or "01/31/2019 23:00". No offset.
Timestamp parse_us_timestamp(std::string_view text);

/// Dates as they appear in daily price files: "2019-01-02", "01/02/2019",
/// "Jan 02, 2019". Returns midnight UTC.
Timestamp parse_date(std::string_view text);

/// "2019-01-01T05:00:00Z"
std::string format_rfc3339(Timestamp ts);

/// "2019-01-01"
std::string format_date(Timestamp ts);

struct CivilFields {
  int year;
  unsigned month;    // 1..12
  unsigned day;      // 1..31
  unsigned hour;     // 0..23
  unsigned weekday;  // 0 = Sunday
};

CivilFields civil_fields(Timestamp ts);

/// Floors to the containing UTC hour.
Timestamp floor_hour(Timestamp ts);

Timestamp make_utc(int year, unsigned month, unsigned day, unsigned hour = 0);

}  // namespace regime_mef
