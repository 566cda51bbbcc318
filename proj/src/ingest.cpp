#include "regime_mef/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "regime_mef/error.hpp"
#include "regime_mef/io.hpp"
#include "regime_mef/log.hpp"

namespace regime_mef::ingest {
namespace {

using std::chrono::hours;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> as_list(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

std::string strip(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
  s.erase(0, i);
  if (s.rfind("\xEF\xBB\xBF", 0) == 0) s.erase(0, 3);
  return s;
}

/// Numeric cell: thousands separators allowed, empty -> NaN.
double parse_number(const std::string& raw, std::size_t line) {
  std::string s;
  for (char c : raw) {
    if (c != ',' && c != ' ' && c != '"') s += c;
  }
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return kNaN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError("line " + std::to_string(line) + ": unparseable number '" + raw + "'");
  }
  return v;
}

struct Row {
  Timestamp ts;
  std::size_t line;
  std::vector<double> values;
};

/// Puts rows on a regular grid. Returns the gridded columns (NaN = missing)
/// and fills `report.gaps` and `report.duplicates_dropped`.
std::vector<std::vector<double>> grid_rows(std::vector<Row> rows, std::size_t n_cols, std::chrono::seconds step,
                                           Timestamp& start, GapReport& report) {
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  std::vector<Row> uniq;
  uniq.reserve(rows.size());
  for (auto& r : rows) {
    if (!uniq.empty() && uniq.back().ts == r.ts) {
      ++report.duplicates_dropped;
      continue;
    }
    uniq.push_back(std::move(r));
  }
  if (uniq.size() < 2) throw InputError("fewer than 2 distinct rows");
  start = uniq.front().ts;
  const auto n = static_cast<std::size_t>((uniq.back().ts - start) / step) + 1;
  std::vector<std::vector<double>> cols(n_cols, std::vector<double>(n, kNaN));
  std::vector<Timestamp> stamps;
  stamps.reserve(uniq.size());
  for (const auto& r : uniq) {
    const auto off = r.ts - start;
    if (off % step != std::chrono::seconds{0}) {
      throw InputError("line " + std::to_string(r.line) + ": timestamp not aligned to the series step");
    }
    const auto i = static_cast<std::size_t>(off / step);
    for (std::size_t c = 0; c < n_cols; ++c) cols[c][i] = r.values[c];
    stamps.push_back(r.ts);
  }
  report.gaps = validate_continuity(stamps, step).gaps;
  return cols;
}

/// Linear interpolation over interior NaN runs of length <= max_run. Returns
/// the longest remaining run of NaNs (0 when everything was filled).
std::size_t interpolate_short_runs(std::vector<double>& v, std::size_t max_run, std::size_t& filled) {
  std::size_t longest = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    if (!std::isnan(v[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < v.size() && std::isnan(v[j])) ++j;
    const std::size_t len = j - i;
    if (i > 0 && j < v.size() && len <= max_run) {
      const double a = v[i - 1], b = v[j];
      for (std::size_t k = i; k < j; ++k) {
        v[k] = a + (b - a) * static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
      }
      filled += len;
    } else {
      longest = std::max(longest, len);
    }
    i = j;
  }
  return longest;
}

HourlySeries make_series(Timestamp start, std::vector<double> v, Unit unit, Frequency f = Frequency::hourly) {
  return {start, std::move(v), unit, f};
}

}  // namespace

ColumnMap ColumnMap::from_json(const nlohmann::json& j) {
  ColumnMap m;
  m.timestamp = j.value("timestamp", m.timestamp);
  const std::string fmt = j.value("timestamp_format", std::string("iso"));
  if (fmt == "iso") {
    m.timestamp_format = TimestampFormat::iso;
  } else if (fmt == "us") {
    m.timestamp_format = TimestampFormat::us;
  } else {
    throw InputError("column_map.timestamp_format must be 'iso' or 'us'");
  }
  m.utc_offset_hours = j.value("utc_offset_hours", 0);
  m.coal = as_list(j.value("coal", nlohmann::json()));
  m.natural_gas = as_list(j.value("natural_gas", nlohmann::json()));
  m.renewables = as_list(j.value("renewables", nlohmann::json()));
  m.other = as_list(j.value("other", nlohmann::json()));
  m.load = j.value("load", std::string());
  m.emissions = j.value("emissions", std::string());
  m.emissions_scale = j.value("emissions_scale", 1.0);
  return m;
}

nlohmann::json ColumnMap::to_json() const {
  return {{"timestamp", timestamp},
          {"timestamp_format", timestamp_format == TimestampFormat::iso ? "iso" : "us"},
          {"utc_offset_hours", utc_offset_hours},
          {"coal", coal},
          {"natural_gas", natural_gas},
          {"renewables", renewables},
          {"other", other},
          {"load", load},
          {"emissions", emissions},
          {"emissions_scale", emissions_scale}};
}

nlohmann::json GapReport::to_json() const {
  auto gaps_json = [](const std::vector<Gap>& g) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : g) a.push_back({{"start", format_rfc3339(x.start)}, {"length_hours", x.length_hours}});
    return a;
  };
  return {{"gaps", gaps_json(gaps)},
          {"fill_policy", fill_policy},
          {"duplicates_dropped", duplicates_dropped},
          {"negatives_clamped", negatives_clamped},
          {"interpolated_points", interpolated_points},
          {"forward_fills", forward_fills},
          {"outlier_lines", outlier_lines},
          {"dropped_windows", gaps_json(dropped_windows)}};
}

HourlySeries FuelGenerationTable::fossil_total() const {
  std::vector<double> v(size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = coal[t] + natural_gas[t];
  return make_series(coal.start(), std::move(v), Unit::MWh);
}

HourlySeries FuelGenerationTable::total() const {
  std::vector<double> v(size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = coal[t] + natural_gas[t] + renewables_total[t] + other[t];
  return make_series(coal.start(), std::move(v), Unit::MWh);
}

HourlyIngest parse_eia_hourly(const std::filesystem::path& path, const ColumnMap& cm, const IngestOptions& opt) {
  if (!std::filesystem::exists(path)) throw InputError("input file not found: " + path.string());
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    header = io::split_csv_line(line);
    for (auto& h : header) h = strip(h);
    break;
  }
  if (header.empty()) throw InputError(path.string() + ": no header row");

  auto col_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(path.string() + ": header lacks mapped column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  // Value layout per row: coal, gas, renewables, other, load, emissions
  // (each a sum of its mapped source columns).
  std::vector<std::vector<std::size_t>> groups(6);
  for (const auto& c : cm.coal) groups[0].push_back(col_index(c));
  for (const auto& c : cm.natural_gas) groups[1].push_back(col_index(c));
  for (const auto& c : cm.renewables) groups[2].push_back(col_index(c));
  for (const auto& c : cm.other) groups[3].push_back(col_index(c));
  if (!cm.load.empty()) groups[4].push_back(col_index(cm.load));
  if (!cm.emissions.empty()) groups[5].push_back(col_index(cm.emissions));
  if (groups[0].empty() && groups[1].empty()) throw InputError("column map names no coal or natural_gas column");
  const std::size_t ts_col = col_index(cm.timestamp);

  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() < header.size()) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " fields, header has " + std::to_string(header.size()));
    }
    Row r;
    r.line = line_no;
    try {
      const std::string& ts_text = cells[ts_col];
      if (cm.timestamp_format == TimestampFormat::us) {
        r.ts = parse_us_timestamp(ts_text) - hours{cm.utc_offset_hours};
      } else {
        const bool has_zone = ts_text.find('Z') != std::string::npos ||
                              ts_text.find('+', 10) != std::string::npos ||
                              ts_text.find('-', 10) != std::string::npos;
        r.ts = parse_iso_timestamp(ts_text) - (has_zone ? hours{0} : hours{cm.utc_offset_hours});
      }
    } catch (const InputError& e) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (r.ts != floor_hour(r.ts)) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": timestamp not on the hour");
    }
    r.values.assign(6, 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].empty()) {
        r.values[g] = (g >= 4) ? kNaN : 0.0;
        continue;
      }
      double sum = 0.0;
      for (auto idx : groups[g]) sum += parse_number(cells[idx], line_no);
      r.values[g] = sum;
    }
    rows.push_back(std::move(r));
  }

  GapReport report;
  report.fill_policy = "linear interpolation up to " + std::to_string(opt.max_interpolated_run) +
                       " consecutive hours; duplicates keep first; negatives clamped to 0";
  Timestamp start;
  auto cols = grid_rows(std::move(rows), 6, kHour, start, report);
  const std::size_t n = cols[0].size();

  std::size_t missing = 0;
  for (const auto& g : report.gaps) missing += g.length_hours;
  if (!opt.allow_gaps && static_cast<double>(missing) > opt.max_missing_fraction * static_cast<double>(n)) {
    throw InputError(path.string() + ": " + std::to_string(missing) + " of " + std::to_string(n) +
                     " hours missing (> " + io::fixed(100.0 * opt.max_missing_fraction, 1) +
                     "%); rerun with --allow-gaps to keep the longest complete window");
  }

  const bool has_load = !groups[4].empty();
  const bool has_emis = !groups[5].empty();
  std::size_t longest = 0;
  for (std::size_t c = 0; c < 6; ++c) {
    if ((c == 4 && !has_load) || (c == 5 && !has_emis)) continue;
    std::size_t filled = 0;
    longest = std::max(longest, interpolate_short_runs(cols[c], opt.max_interpolated_run, filled));
    if (c == 0) report.interpolated_points = filled;
  }

  std::size_t first = 0, count = n;
  if (longest > 0) {
    if (!opt.allow_gaps) {
      throw InputError(path.string() + ": gap of " + std::to_string(longest) + " hours exceeds the " +
                       std::to_string(opt.max_interpolated_run) + "-hour interpolation limit");
    }
    // keep the longest window where every used column is finite
    std::size_t best_first = 0, best_len = 0, run_first = 0, run_len = 0;
    for (std::size_t t = 0; t < n; ++t) {
      bool ok = true;
      for (std::size_t c = 0; c < 6; ++c) {
        if ((c == 4 && !has_load) || (c == 5 && !has_emis)) continue;
        if (std::isnan(cols[c][t])) ok = false;
      }
      if (ok) {
        if (run_len == 0) run_first = t;
        ++run_len;
        if (run_len > best_len) {
          best_len = run_len;
          best_first = run_first;
        }
      } else {
        run_len = 0;
      }
    }
    first = best_first;
    count = best_len;
    if (count < 2) throw InputError(path.string() + ": no complete window of at least 2 hours");
    if (first > 0) report.dropped_windows.push_back({start, first});
    if (first + count < n) report.dropped_windows.push_back({start + static_cast<long>(first + count) * kHour, n - first - count});
    report.fill_policy += "; --allow-gaps kept the longest complete window";
  }

  for (std::size_t c = 0; c < 5; ++c) {
    for (double& v : cols[c]) {
      if (v < 0.0) {
        v = 0.0;
        ++report.negatives_clamped;
      }
    }
  }

  if (report.duplicates_dropped > 0) {
    log::warn(path.string() + ": dropped " + std::to_string(report.duplicates_dropped) + " duplicated hour(s), kept the first");
  }
  if (report.negatives_clamped > 0) {
    log::warn(path.string() + ": clamped " + std::to_string(report.negatives_clamped) + " negative generation value(s) to 0");
  }

  auto take = [&](std::size_t c, Unit u) {
    std::vector<double> v(cols[c].begin() + static_cast<long>(first), cols[c].begin() + static_cast<long>(first + count));
    return make_series(start + static_cast<long>(first) * kHour, std::move(v), u);
  };
  HourlyIngest out{FuelGenerationTable{take(0, Unit::MWh), take(1, Unit::MWh), take(2, Unit::MWh), take(3, Unit::MWh),
                                       has_load ? std::optional(take(4, Unit::MWh)) : std::nullopt},
                   std::nullopt, std::move(report)};
  if (has_emis) {
    auto e = take(5, Unit::lbs_CO2);
    std::vector<double> v = e.values();
    for (double& x : v) x *= cm.emissions_scale;
    out.emissions = make_series(e.start(), std::move(v), Unit::lbs_CO2);
  }
  return out;
}

PriceIngest parse_henry_hub(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("input file not found: " + path.string());
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<Row> rows;
  GapReport report;
  report.fill_policy = "forward-fill of missing calendar days";
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() < 2) {
      if (rows.empty()) continue;
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": expected date,price");
    }
    Timestamp ts;
    try {
      ts = parse_date(cells[0]);
    } catch (const InputError&) {
      if (rows.empty()) continue;  // preamble / header lines
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": unparseable date '" + cells[0] + "'");
    }
    const double price = parse_number(cells[1], line_no);
    if (!std::isnan(price) && price <= 0.0) report.outlier_lines.push_back(line_no);
    rows.push_back({ts, line_no, {price}});
  }
  if (rows.size() < 2) throw InputError(path.string() + ": fewer than 2 price rows");
  Timestamp start;
  auto cols = grid_rows(std::move(rows), 1, kDay, start, report);
  auto& v = cols[0];
  // express gap lengths in hours as the report type documents
  for (auto& g : report.gaps) g.length_hours *= 24;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::isnan(v[i])) {
      v[i] = v[i - 1];
      ++report.forward_fills;
    }
  }
  if (std::isnan(v[0])) throw InputError(path.string() + ": first price row is empty");
  return {make_series(start, std::move(v), Unit::USD_per_MMBtu, Frequency::daily), std::move(report)};
}

HourlySeries compute_emissions(const FuelGenerationTable& table, const EmissionFactorSet& factors) {
  for (const auto& [fuel, theta] : factors) {
    if (!(theta > 0.0)) throw InputError("emission factor for '" + fuel + "' must be positive");
  }
  struct Term {
    const HourlySeries* gen;
    const char* name;
    bool required;
  };
  const Term terms[] = {{&table.coal, "coal", true}, {&table.natural_gas, "natural_gas", true}, {&table.other, "other", false}};
  std::vector<double> e(table.size(), 0.0);
  for (const auto& term : terms) {
    auto it = factors.find(term.name);
    if (it == factors.end()) {
      const bool nonzero = std::any_of(term.gen->values().begin(), term.gen->values().end(), [](double g) { return g != 0.0; });
      if (term.required && nonzero) throw InputError(std::string("missing emission factor for '") + term.name + "'");
      continue;
    }
    for (std::size_t t = 0; t < e.size(); ++t) e[t] += (*term.gen)[t] * it->second;
  }
  return make_series(table.coal.start(), std::move(e), Unit::lbs_CO2);
}

GapReport validate_continuity(std::span<const Timestamp> stamps, std::chrono::seconds step) {
  GapReport r;
  r.fill_policy = "none";
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    const auto diff = stamps[i] - stamps[i - 1];
    if (diff <= std::chrono::seconds{0}) throw InputError("validate_continuity: timestamps not strictly increasing");
    const auto steps = static_cast<std::size_t>(diff / step);
    if (steps > 1) {
      const std::size_t missing = steps - 1;
      r.gaps.push_back({stamps[i - 1] + step, missing * static_cast<std::size_t>(step / kHour)});
    }
  }
  return r;
}

GapReport validate_continuity(const HourlySeries& series) {
  std::vector<Timestamp> stamps(series.size());
  for (std::size_t i = 0; i < stamps.size(); ++i) stamps[i] = series.time_at(i);
  return validate_continuity(stamps, step_of(series.frequency()));
}

std::string series_to_csv(const HourlySeries& series, const std::string& comment) {
  std::string out;
  out.reserve(series.size() * 40);
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "timestamp_utc,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += format_rfc3339(series.time_at(i));
    out += ',';
    out += io::format_double(series[i]);
    out += '\n';
  }
  return out;
}

HourlySeries series_from_csv(std::string_view text, Unit unit, Frequency frequency) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<Timestamp> stamps;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "timestamp_utc,value") throw InputError("normalized series: bad header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("normalized series: line " + std::to_string(line_no) + " malformed");
    stamps.push_back(parse_iso_timestamp(std::string_view(line).substr(0, comma)));
    values.push_back(parse_number(line.substr(comma + 1), line_no));
  }
  if (stamps.size() < 2) throw InputError("normalized series: fewer than 2 rows");
  const auto step = step_of(frequency);
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i] - stamps[i - 1] != step) {
      throw InputError("normalized series: irregular step at " + format_rfc3339(stamps[i]));
    }
  }
  return {stamps.front(), std::move(values), unit, frequency};
}

void write_series(const std::filesystem::path& path, const HourlySeries& series, const std::string& comment) {
  io::write_file_atomic(path, series_to_csv(series, comment));
}

HourlySeries read_series(const std::filesystem::path& path, Unit unit, Frequency frequency) {
  return series_from_csv(io::read_file(path), unit, frequency);
}

}  // namespace regime_mef::ingest
