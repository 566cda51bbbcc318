#include "regime_mef/timeutil.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "regime_mef/error.hpp"

namespace regime_mef {
namespace {

using namespace std::chrono;

bool read_int(std::string_view s, std::size_t& pos, std::size_t max_digits, int& out) {
  std::size_t start = pos;
  while (pos < s.size() && pos - start < max_digits && std::isdigit(static_cast<unsigned char>(s[pos]))) {
    ++pos;
  }
  if (pos == start) return false;
  std::from_chars(s.data() + start, s.data() + pos, out);
  return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

Timestamp checked(int y, int mo, int d, int h, int mi, int sec, std::string_view text) {
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 60) {
    throw InputError("invalid calendar timestamp '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

[[noreturn]] void fail(std::string_view text) {
  throw InputError("unparseable timestamp '" + std::string(text) + "'");
}

constexpr std::array<std::string_view, 12> kMonthNames = {"jan", "feb", "mar", "apr", "may", "jun",
                                                           "jul", "aug", "sep", "oct", "nov", "dec"};

}  // namespace

Timestamp parse_iso_timestamp(std::string_view raw) {
  std::string_view s = trim(raw);
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, pos, 4, y) || !expect(s, pos, '-') || !read_int(s, pos, 2, mo) ||
      !expect(s, pos, '-') || !read_int(s, pos, 2, d)) {
    fail(raw);
  }
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    ++pos;
    if (!read_int(s, pos, 2, h)) fail(raw);
    if (expect(s, pos, ':')) {
      if (!read_int(s, pos, 2, mi)) fail(raw);
      if (expect(s, pos, ':')) {
        if (!read_int(s, pos, 2, sec)) fail(raw);
        if (expect(s, pos, '.')) {
          int frac = 0;
          read_int(s, pos, 9, frac);
        }
      }
    }
  }
  Timestamp ts = checked(y, mo, d, h, mi, sec, raw);
  if (pos == s.size()) return ts;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    if (pos + 1 != s.size()) fail(raw);
    return ts;
  }
  if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '+' ? 1 : -1;
    ++pos;
    int oh = 0, om = 0;
    if (!read_int(s, pos, 2, oh)) fail(raw);
    if (expect(s, pos, ':') || (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))) {
      if (!read_int(s, pos, 2, om)) fail(raw);
    }
    if (pos != s.size()) fail(raw);
    // local = utc + offset  =>  utc = local - offset
    return ts - sign * (hours{oh} + minutes{om});
  }
  fail(raw);
}

Timestamp parse_us_timestamp(std::string_view raw) {
  std::string_view s = trim(raw);
  std::size_t pos = 0;
  int mo = 0, d = 0, y = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, pos, 2, mo) || !expect(s, pos, '/') || !read_int(s, pos, 2, d) ||
      !expect(s, pos, '/') || !read_int(s, pos, 4, y)) {
    fail(raw);
  }
  while (pos < s.size() && s[pos] == ' ') ++pos;
  if (pos < s.size()) {
    if (!read_int(s, pos, 2, h)) fail(raw);
    if (expect(s, pos, ':')) {
      if (!read_int(s, pos, 2, mi)) fail(raw);
      if (expect(s, pos, ':') && !read_int(s, pos, 2, sec)) fail(raw);
    }
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos < s.size()) {
      std::string ampm;
      for (; pos < s.size(); ++pos) ampm += static_cast<char>(std::toupper(static_cast<unsigned char>(s[pos])));
      if (h < 1 || h > 12) fail(raw);
      if (ampm == "AM") {
        if (h == 12) h = 0;
      } else if (ampm == "PM") {
        if (h != 12) h += 12;
      } else {
        fail(raw);
      }
    }
  }
  return checked(y, mo, d, h, mi, sec, raw);
}

Timestamp parse_date(std::string_view raw) {
  std::string_view s = trim(raw);
  if (s.size() >= 10 && s[4] == '-') return parse_iso_timestamp(s.substr(0, 10));
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) return parse_us_timestamp(s);
  // "Jan 02, 2019"
  if (s.size() < 3) fail(raw);
  std::string mon;
  for (char c : s.substr(0, 3)) mon += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  int mo = 0;
  for (std::size_t i = 0; i < kMonthNames.size(); ++i) {
    if (kMonthNames[i] == mon) mo = static_cast<int>(i) + 1;
  }
  if (mo == 0) fail(raw);
  std::size_t pos = 3;
  while (pos < s.size() && s[pos] == ' ') ++pos;
  int d = 0, y = 0;
  if (!read_int(s, pos, 2, d)) fail(raw);
  expect(s, pos, ',');
  while (pos < s.size() && s[pos] == ' ') ++pos;
  if (!read_int(s, pos, 4, y) || pos != s.size()) fail(raw);
  return checked(y, mo, d, 0, 0, 0, raw);
}

std::string format_rfc3339(Timestamp ts) {
  const auto dp = floor<days>(ts);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{ts - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_date(Timestamp ts) {
  const year_month_day ymd{floor<days>(ts)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

CivilFields civil_fields(Timestamp ts) {
  const auto dp = floor<days>(ts);
  const year_month_day ymd{dp};
  const auto h = duration_cast<hours>(ts - dp).count();
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day()), static_cast<unsigned>(h), weekday{dp}.c_encoding()};
}

Timestamp floor_hour(Timestamp ts) { return floor<hours>(ts); }

Timestamp make_utc(int y, unsigned mo, unsigned d, unsigned h) {
  return checked(y, static_cast<int>(mo), static_cast<int>(d), static_cast<int>(h), 0, 0, "make_utc");
}

}  // namespace regime_mef
