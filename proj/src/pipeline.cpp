#include "regime_mef/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "regime_mef/breakdetect.hpp"
#include "regime_mef/core_data.hpp"
#include "regime_mef/diagnostics.hpp"
#include "regime_mef/error.hpp"
#include "regime_mef/ingest.hpp"
#include "regime_mef/io.hpp"
#include "regime_mef/linmodels.hpp"
#include "regime_mef/log.hpp"
#include "regime_mef/msarx.hpp"

namespace regime_mef::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// ---------------------------------------------------------------------------
// config helpers

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

const json& section(const RunConfig& cfg, const char* key) {
  static const json empty = json::object();
  return cfg.doc.contains(key) ? cfg.doc.at(key) : empty;
}

CalendarFlags calendar_flags(const RunConfig& cfg) {
  const json& s = section(cfg, "deseasonalize");
  CalendarFlags f;
  f.hour_of_day = get_or(s, "hour_of_day", true);
  f.day_of_week = get_or(s, "day_of_week", true);
  f.month = get_or(s, "month", true);
  f.trend = get_or(s, "trend", true);
  return f;
}

Timestamp break_date(const RunConfig& cfg) {
  // a completed break scan takes precedence over the configured date
  const fs::path scan = cfg.fits_dir() / "break_scan.json";
  if (fs::exists(scan)) {
    const json j = json::parse(io::read_file(scan));
    if (j.contains("tau_date")) return parse_iso_timestamp(j.at("tau_date").get<std::string>());
  }
  return parse_iso_timestamp(get_or<std::string>(cfg.doc, "break_date", "2022-05-31"));
}

msarx::EmOptions em_options(const RunConfig& cfg, bool hourly = false) {
  const json& s = section(cfg, "msarx");
  msarx::EmOptions o;
  o.n_restarts = hourly ? get_or(s, "hourly_restarts", 3) : get_or(s, "n_restarts", 10);
  o.tol = get_or(s, "tol", 1e-6);
  o.max_iter = get_or(s, "max_iter", 500);
  o.seed = cfg.seed;
  return o;
}

msarx::MsArxSpec msarx_spec(const RunConfig& cfg) {
  msarx::MsArxSpec spec;
  spec.n_states = get_or(section(cfg, "msarx"), "n_states", 2);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// output helpers

std::string csv_text(const RunConfig& cfg, const std::string& header, const std::vector<std::string>& rows) {
  std::string out = cfg.provenance_comment() + "\n" + header + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

void write_json(const RunConfig& cfg, const fs::path& path, json j) {
  j["provenance"] = cfg.provenance();
  io::write_file_atomic(path, j.dump(2) + "\n");
}

std::string num(double v) { return std::isfinite(v) ? io::format_double(v) : "NA"; }
std::string fx(double v, int d) { return std::isfinite(v) ? io::fixed(v, d) : "NA"; }

// ---------------------------------------------------------------------------
// data

struct Dataset {
  std::map<std::string, HourlySeries> series;
  const HourlySeries& at(const std::string& name) const {
    auto it = series.find(name);
    if (it == series.end()) throw InputError("normalized series '" + name + "' missing; run `regime-mef ingest` first");
    return it->second;
  }
  bool has(const std::string& name) const { return series.count(name) != 0; }
};

const std::vector<std::pair<std::string, Unit>> kHourlyFiles = {
    {"emissions", Unit::lbs_CO2}, {"coal", Unit::MWh},   {"natural_gas", Unit::MWh}, {"renewables", Unit::MWh},
    {"other", Unit::MWh},         {"fossil", Unit::MWh}, {"total", Unit::MWh},       {"load", Unit::MWh}};

Dataset load_dataset(const RunConfig& cfg) {
  Dataset d;
  if (!fs::exists(cfg.data_dir())) {
    throw InputError("no normalized data in " + cfg.data_dir().string() + "; run `regime-mef ingest` first");
  }
  for (const auto& [name, unit] : kHourlyFiles) {
    const fs::path p = cfg.data_dir() / (name + ".csv");
    if (fs::exists(p)) d.series.emplace(name, ingest::read_series(p, unit));
  }
  d.at("emissions");
  return d;
}

const HourlySeries& generation(const RunConfig& cfg, const Dataset& d) {
  const std::string g = get_or<std::string>(cfg.doc, "generation", "fossil");
  if (g != "fossil" && g != "total") throw InputError("config: generation must be 'fossil' or 'total'");
  return d.at(g);
}

const HourlySeries& load_or_total(const Dataset& d) {
  if (d.has("load")) return d.at("load");
  log::warn("no load series ingested; using total generation as load");
  return d.at("total");
}

struct Window {
  std::string name;
  std::size_t first, count;
};

std::vector<Window> year_windows(const RunConfig& cfg, const HourlySeries& s, std::vector<std::string>* notes = nullptr) {
  const auto min_hours = static_cast<std::size_t>(get_or(cfg.doc, "min_year_hours", 1000));
  std::vector<Window> out;
  const int y0 = civil_fields(s.start()).year, y1 = civil_fields(s.end()).year;
  for (int y = y0; y <= y1; ++y) {
    const auto [a, b] = year_range(s, y);
    if (b - a < min_hours) {
      if (notes) notes->push_back(std::to_string(y) + ": skipped, only " + std::to_string(b - a) + " hours");
      continue;
    }
    out.push_back({std::to_string(y), a, b - a});
  }
  return out;
}

std::pair<Window, Window> pre_post_windows(const RunConfig& cfg, const HourlySeries& s) {
  const Timestamp at = break_date(cfg);
  if (at <= s.start() || at > s.end()) throw InputError("break date " + format_rfc3339(at) + " is outside the sample");
  const auto [pre, post] = split_at(s, at);
  return {{"pre", 0, pre.size()}, {"post", pre.size(), post.size()}};
}

HourlySeries cut(const HourlySeries& s, const Window& w) { return s.slice(w.first, w.count); }

HourlySeries standardized(const HourlySeries& s) {
  auto z = standardize(s);
  return {z.start(), z.values(), Unit::dimensionless, z.frequency()};
}

json regression_json(const linmodels::RegressionFit& f) {
  json coefs = json::object();
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    json c{{"estimate", f.coefficients(k)}, {"se", f.standard_errors(k)}};
    if (f.hac_standard_errors.size() > 0) c["se_hac"] = f.hac_standard_errors(k);
    coefs[f.labels[i]] = c;
  }
  return {{"coefficients", coefs},   {"sigma2", f.sigma2},    {"loglik", f.loglik},
          {"n_params", f.n_params},  {"n_obs", f.n_obs},      {"hac_bandwidth", f.hac_bandwidth}};
}

json ic_json(const linmodels::InfoCriteria& ic) {
  return {{"loglik", ic.loglik}, {"k", ic.k}, {"n", ic.n}, {"aic", ic.aic}, {"bic", ic.bic}, {"hqic", ic.hqic}};
}

json params_json(const msarx::MsArxParams& p, const std::vector<std::string>& labels, int n_cov) {
  json states = json::array();
  const int n = p.n_states();
  for (int k = 0; k < n; ++k) {
    json beta = json::object(), delta = json::object();
    for (int j = 0; j < n_cov; ++j) beta[labels[static_cast<std::size_t>(j)]] = p.beta(k, j);
    for (Eigen::Index j = 0; j < p.delta.cols(); ++j) delta[labels[static_cast<std::size_t>(n_cov + j)]] = p.delta(k, j);
    states.push_back({{"name", msarx::state_name(k, n)}, {"alpha", p.alpha(k)}, {"phi", p.phi(k)}, {"beta", beta}, {"delta", delta}});
  }
  json trans = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int j = 0; j < n; ++j) row.push_back(p.trans(i, j));
    trans.push_back(row);
  }
  return {{"states", states}, {"sigma2", p.sigma2}, {"trans", trans}};
}

json trace_json(const msarx::EmTrace& t) {
  return {{"loglik", t.loglik}, {"converged", t.converged}, {"iterations", t.iterations}, {"restart", t.restart}};
}

struct MsArxOutcome {
  msarx::MsArxFit fit;
  msarx::StandardErrors se;
  msarx::MsArxData data;
};

/// Fits MS-ARX; on non-convergence writes the trace file, then rethrows.
MsArxOutcome run_msarx(const RunConfig& cfg, const msarx::MsArxSpec& spec, msarx::MsArxData data,
                       const msarx::EmOptions& opt, const std::string& tag) {
  try {
    auto fit = spec.break_date ? msarx::fit_with_break_dummy(spec, data, opt) : msarx::fit_em(spec, data, opt);
    auto se = msarx::standard_errors(fit.params, data);
    return {std::move(fit), std::move(se), std::move(data)};
  } catch (const msarx::EmConvergenceError& e) {
    json tr = json::array();
    for (const auto& r : e.best().restarts) tr.push_back(trace_json(r));
    write_json(cfg, cfg.fits_dir() / ("msarx_" + tag + "_trace.json"),
               {{"error", e.what()},
                {"best_params", params_json(e.best().params, data.covariate_labels, data.n_covariates())},
                {"restarts", tr}});
    throw;
  }
}

double se_of(const msarx::StandardErrors& se, const std::string& label) {
  for (std::size_t i = 0; i < se.labels.size(); ++i) {
    if (se.labels[i] == label) return se.se(static_cast<Eigen::Index>(i));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

json msarx_json(const MsArxOutcome& o, const std::string& window) {
  const auto cls = msarx::classify_regimes(o.fit.smoothed);
  json se = json::object();
  for (std::size_t i = 0; i < o.se.labels.size(); ++i) se[o.se.labels[i]] = o.se.se(static_cast<Eigen::Index>(i));
  return {{"model", o.fit.spec.break_date ? "msarx-dummy" : "msarx"},
          {"window", window},
          {"n_states", o.fit.spec.n_states},
          {"covariates", o.data.covariate_labels},
          {"params", params_json(o.fit.params, o.data.covariate_labels, o.data.n_covariates())},
          {"standard_errors", se},
          {"se_method", o.se.method == msarx::SeMethod::opg ? "opg" : "numerical_hessian"},
          {"ic", ic_json(o.fit.ic)},
          {"trace", trace_json(o.fit.trace)},
          {"occupancy", cls.shares},
          {"n_obs", o.data.size()}};
}

void write_smoothed(const RunConfig& cfg, const MsArxOutcome& o, const std::string& tag) {
  std::vector<std::string> rows;
  rows.reserve(static_cast<std::size_t>(o.data.size()));
  for (Eigen::Index t = 0; t < o.data.size(); ++t) {
    rows.push_back(format_rfc3339(o.data.timestamps[static_cast<std::size_t>(t)]) + "," +
                   num(o.fit.smoothed.xi_smooth(t, 0)));
  }
  io::write_file_atomic(cfg.fits_dir() / ("msarx_" + tag + "_smoothed.csv"), csv_text(cfg, "timestamp_utc,p_high", rows));
}

msarx::MsArxData msarx_data(const Dataset& d, const Window* w, bool standardize_all, const msarx::MsArxSpec& spec) {
  auto pick = [&](const std::string& name) {
    HourlySeries s = w ? cut(d.at(name), *w) : d.at(name);
    return standardize_all ? standardized(s) : s;
  };
  return msarx::build_data(pick("emissions"), {pick("renewables"), pick("fossil")}, spec);
}

// ---------------------------------------------------------------------------
// fit commands

void fit_linear_annual(const RunConfig& cfg, const Dataset& d, const std::string& model) {
  const auto& E = d.at("emissions");
  const auto& G = generation(cfg, d);
  std::vector<std::string> notes;
  json records = json::array();
  std::vector<std::string> rows;
  for (const auto& w : year_windows(cfg, E, &notes)) {
    const auto Ey = cut(E, w), Gy = cut(G, w);
    const linmodels::SeOptions se{linmodels::SeType::both, -1};
    const auto f = model == "usfe" ? linmodels::fit_us_fe(Ey, Gy, calendar_flags(cfg), se) : linmodels::fit_hawkes(Ey, Gy, true, se);
    records.push_back({{"window", w.name}, {"fit", regression_json(f)}});
    rows.push_back(w.name + "," + fx(f.coef("MEF"), 6) + "," + fx(f.se("MEF"), 6) + "," +
                   fx(f.hac_standard_errors(0), 6) + "," + std::to_string(f.n_obs));
  }
  write_json(cfg, cfg.fits_dir() / (model + "_year.json"), {{"model", model}, {"window", "year"}, {"fits", records}, {"notes", notes}});
  io::write_file_atomic(cfg.tables_dir() / ("annual_" + model + ".csv"), csv_text(cfg, "year,mef,se,se_hac,n_obs", rows));
}

void fit_linear_windows(const RunConfig& cfg, const Dataset& d, const std::string& model, const std::vector<Window>& windows,
                        const std::string& tag) {
  const auto& E = d.at("emissions");
  const auto& G = generation(cfg, d);
  json records = json::array();
  std::vector<std::string> rows;
  for (const auto& w : windows) {
    const linmodels::SeOptions se{linmodels::SeType::both, -1};
    const auto Ew = cut(E, w), Gw = cut(G, w);
    const auto f = model == "usfe" ? linmodels::fit_us_fe(Ew, Gw, calendar_flags(cfg), se) : linmodels::fit_hawkes(Ew, Gw, true, se);
    records.push_back({{"window", w.name}, {"fit", regression_json(f)}});
    rows.push_back(w.name + "," + fx(f.coef("MEF"), 6) + "," + fx(f.se("MEF"), 6) + "," + fx(f.hac_standard_errors(0), 6) +
                   "," + std::to_string(f.n_obs));
  }
  write_json(cfg, cfg.fits_dir() / (model + "_" + tag + ".json"), {{"model", model}, {"window", tag}, {"fits", records}});
  io::write_file_atomic(cfg.tables_dir() / (tag + "_" + model + ".csv"), csv_text(cfg, "window,mef,se,se_hac,n_obs", rows));
}

linmodels::ArmaxFit armax_for(const RunConfig& cfg, const VectorXd& y, const MatrixXd& X, json& extra) {
  const json& s = section(cfg, "armax");
  linmodels::ArmaxOptions opt;
  opt.n_restarts = get_or(s, "n_restarts", 5);
  opt.seed = cfg.seed;
  if (get_or(s, "select", false)) {
    const auto sel = linmodels::select_arma_order(y, X, get_or(s, "p_max", 4), get_or(s, "q_max", 4), opt);
    json grid = json::array();
    for (const auto& c : sel.grid) {
      json cell{{"p", c.p}, {"q", c.q}, {"ok", c.ok}};
      if (c.ok) cell["ic"] = ic_json(c.ic);
      else cell["error"] = c.error;
      grid.push_back(cell);
    }
    extra["selection"] = {{"by_loglik", {sel.p, sel.q}}, {"by_aic", {sel.p_aic, sel.q_aic}},
                          {"by_bic", {sel.p_bic, sel.q_bic}}, {"by_hqic", {sel.p_hqic, sel.q_hqic}}, {"grid", grid}};
    return sel.best().fit;
  }
  return linmodels::fit_armax(y, X, get_or(s, "p", 1), get_or(s, "q", 1), opt);
}

json armax_json(const linmodels::ArmaxFit& f) {
  std::vector<double> ar(f.ar.data(), f.ar.data() + f.ar.size()), ma(f.ma.data(), f.ma.data() + f.ma.size());
  return {{"p", f.p}, {"q", f.q}, {"ar", ar}, {"ma", ma}, {"mef", f.mef}, {"intercept", f.intercept},
          {"sigma2", f.sigma2}, {"loglik", f.loglik}, {"n_obs", f.n_obs}, {"restart", f.restart},
          {"ic", ic_json(linmodels::information_criteria(f.loglik, f.n_params(), f.n_obs))}};
}

void fit_armax_windows(const RunConfig& cfg, const Dataset& d, const std::vector<Window>& windows, const std::string& tag,
                       bool standardize_series) {
  const auto& E = d.at("emissions");
  const auto& G = generation(cfg, d);
  json records = json::array();
  std::vector<std::string> rows;
  for (const auto& w : windows) {
    HourlySeries Ew = cut(E, w), Gw = cut(G, w);
    if (standardize_series) {
      Ew = standardized(Ew);
      Gw = standardized(Gw);
    }
    json extra = json::object();
    const auto f = armax_for(cfg, VectorXd(Ew.as_vector()), MatrixXd(Gw.as_vector()), extra);
    json rec = armax_json(f);
    rec["window"] = w.name;
    rec.update(extra);
    records.push_back(rec);
    rows.push_back(w.name + "," + std::to_string(f.p) + "," + std::to_string(f.q) + "," + fx(f.mef, 6) + "," + fx(f.loglik, 2));
  }
  write_json(cfg, cfg.fits_dir() / ("armax_" + tag + ".json"),
             {{"model", "armax"}, {"window", tag}, {"standardized", standardize_series}, {"fits", records}});
  io::write_file_atomic(cfg.tables_dir() / (tag + "_armax.csv"), csv_text(cfg, "window,p,q,mef,loglik", rows));
}

std::string msarx_row(const MsArxOutcome& o, const std::string& name) {
  const auto& p = o.fit.params;
  const int mi = 1;  // fossil slope
  const auto cls = msarx::classify_regimes(o.fit.smoothed);
  return name + "," + fx(p.beta(0, mi), 6) + "," + fx(se_of(o.se, "beta_fossil[High]"), 6) + "," +
         fx(p.beta(p.n_states() - 1, mi), 6) + "," +
         fx(se_of(o.se, "beta_fossil[" + msarx::state_name(p.n_states() - 1, p.n_states()) + "]"), 6) + "," +
         fx(p.trans(0, 0), 6) + "," + fx(p.trans(p.n_states() - 1, p.n_states() - 1), 6) + "," + fx(cls.shares[0], 3) + "," +
         fx(o.fit.smoothed.loglik, 4) + "," + std::to_string(o.fit.trace.converged ? 1 : 0);
}

const char* kMsArxHeader = "window,beta_high,se_high,beta_low,se_low,p_high_high,p_low_low,share_high,loglik,converged";

/// Hour-of-day MS-ARX profile for one period; each hour is fitted on its own
/// subsequence, so the AR lag is the same hour on the previous day.
std::vector<std::string> hourly_profile(const RunConfig& cfg, const Dataset& d, const Window& w, const msarx::MsArxSpec& spec) {
  const auto E = cut(d.at("emissions"), w), R = cut(d.at("renewables"), w), F = cut(d.at("fossil"), w);
  const auto L = cut(load_or_total(d), w);
  const int offset = get_or(section(cfg, "msarx"), "profile_utc_offset_hours", 0);
  std::vector<std::string> rows;
  for (int hour = 0; hour < 24; ++hour) {
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < E.size(); ++t) {
      const int local = (static_cast<int>(civil_fields(E.time_at(t)).hour) + offset + 24) % 24;
      if (local == hour) idx.push_back(t);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    VectorXd y(n);
    MatrixXd X(n, 2);
    double load_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto t = idx[static_cast<std::size_t>(i)];
      y(i) = E[t];
      X(i, 0) = R[t];
      X(i, 1) = F[t];
      load_sum += L[t];
    }
    std::string row = w.name + "," + std::to_string(hour);
    try {
      auto data = msarx::MsArxData::from_raw(y, X, spec.covariate_labels);
      auto fit = msarx::fit_em(spec, data, em_options(cfg, true));
      auto se = msarx::standard_errors(fit.params, data);
      const int lo = fit.params.n_states() - 1;
      row += "," + fx(fit.params.beta(lo, 1), 6) + "," + fx(se_of(se, "beta_fossil[" + msarx::state_name(lo, fit.params.n_states()) + "]"), 6) +
             "," + fx(fit.params.beta(0, 1), 6) + "," + fx(se_of(se, "beta_fossil[High]"), 6);
    } catch (const Error& e) {
      log::warn("hourly profile " + w.name + " hour " + std::to_string(hour) + ": " + e.what());
      row += ",NA,NA,NA,NA";
    }
    row += "," + fx(n > 0 ? load_sum / static_cast<double>(n) : 0.0, 1);
    rows.push_back(row);
  }
  return rows;
}

void fit_msarx(const RunConfig& cfg, const Dataset& d, const std::string& window) {
  const auto spec = msarx_spec(cfg);
  const auto opt = em_options(cfg);
  const auto& E = d.at("emissions");
  if (window == "year") {
    std::vector<std::string> notes, rows;
    json records = json::array();
    for (const auto& w : year_windows(cfg, E, &notes)) {
      auto o = run_msarx(cfg, spec, msarx_data(d, &w, false, spec), opt, w.name);
      records.push_back(msarx_json(o, w.name));
      write_smoothed(cfg, o, w.name);
      rows.push_back(msarx_row(o, w.name));
    }
    write_json(cfg, cfg.fits_dir() / "msarx_year.json", {{"model", "msarx"}, {"window", "year"}, {"fits", records}, {"notes", notes}});
    io::write_file_atomic(cfg.tables_dir() / "annual_msarx.csv", csv_text(cfg, kMsArxHeader, rows));
  } else if (window == "full") {
    auto o = run_msarx(cfg, spec, msarx_data(d, nullptr, true, spec), opt, "full");
    json j = msarx_json(o, "full");
    j["standardized"] = true;
    write_json(cfg, cfg.fits_dir() / "msarx_full.json", j);
    write_smoothed(cfg, o, "full");
    io::write_file_atomic(cfg.tables_dir() / "full_msarx.csv", csv_text(cfg, kMsArxHeader, {msarx_row(o, "full")}));
  } else {
    const auto [pre, post] = pre_post_windows(cfg, E);
    std::vector<std::string> rows, hourly;
    json records = json::array();
    for (const auto& w : {pre, post}) {
      auto o = run_msarx(cfg, spec, msarx_data(d, &w, false, spec), opt, w.name);
      records.push_back(msarx_json(o, w.name));
      write_smoothed(cfg, o, w.name);
      rows.push_back(msarx_row(o, w.name));
      if (get_or(section(cfg, "msarx"), "hourly_profiles", true)) {
        auto h = hourly_profile(cfg, d, w, spec);
        hourly.insert(hourly.end(), h.begin(), h.end());
      }
    }
    write_json(cfg, cfg.fits_dir() / "msarx_pre-post.json",
               {{"model", "msarx"}, {"window", "pre-post"}, {"break_date", format_rfc3339(break_date(cfg))}, {"fits", records}});
    io::write_file_atomic(cfg.tables_dir() / "pre-post_msarx.csv", csv_text(cfg, kMsArxHeader, rows));
    if (!hourly.empty()) {
      io::write_file_atomic(cfg.tables_dir() / "table_s7_hourly.csv",
                            csv_text(cfg, "period,hour,beta_low,se_low,beta_high,se_high,avg_load", hourly));
    }
  }
}

void fit_msarx_dummy(const RunConfig& cfg, const Dataset& d) {
  auto spec = msarx_spec(cfg);
  const auto opt = em_options(cfg);
  auto base = run_msarx(cfg, spec, msarx_data(d, nullptr, false, spec), opt, "baseline");
  spec.break_date = break_date(cfg);
  auto dummy = run_msarx(cfg, spec, msarx_data(d, nullptr, false, spec), opt, "dummy");
  const int lo = spec.n_states - 1;
  const std::string L = msarx::state_name(lo, spec.n_states), H = msarx::state_name(0, spec.n_states);
  std::vector<std::string> rows;
  auto add = [&](const std::string& name, double b, double bse, double m, double mse) {
    rows.push_back(name + "," + fx(b, 4) + "," + fx(bse, 4) + "," + fx(m, 4) + "," + fx(mse, 4));
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  add("Beta_" + L, base.fit.params.beta(lo, 1), se_of(base.se, "beta_fossil[" + L + "]"), dummy.fit.params.beta(lo, 1),
      se_of(dummy.se, "beta_fossil[" + L + "]"));
  add("Beta_" + H, base.fit.params.beta(0, 1), se_of(base.se, "beta_fossil[" + H + "]"), dummy.fit.params.beta(0, 1),
      se_of(dummy.se, "beta_fossil[" + H + "]"));
  add("Dummy_" + L, nan, nan, dummy.fit.params.delta(lo, 1), se_of(dummy.se, "beta_D*fossil[" + L + "]"));
  add("Dummy_" + H, nan, nan, dummy.fit.params.delta(0, 1), se_of(dummy.se, "beta_D*fossil[" + H + "]"));
  add("LogLik", base.fit.smoothed.loglik, nan, dummy.fit.smoothed.loglik, nan);
  write_json(cfg, cfg.fits_dir() / "msarx-dummy_full.json",
             {{"break_date", format_rfc3339(*spec.break_date)}, {"baseline", msarx_json(base, "full")}, {"dummy", msarx_json(dummy, "full")}});
  io::write_file_atomic(cfg.tables_dir() / "table_s8_dummy.csv",
                        csv_text(cfg, "parameter,baseline,baseline_se,dummy_model,dummy_model_se", rows));
}

// ---------------------------------------------------------------------------
// simulate

double clamp_pos(double v, double lo) { return std::max(v, lo); }

}  // namespace

// ---------------------------------------------------------------------------

fs::path RunConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::string RunConfig::config_hash() const {
  json d = doc;
  d.erase("out");
  d["seed"] = seed;
  d["allow_gaps"] = allow_gaps;
  return io::sha256_hex(d.dump());
}

std::string RunConfig::provenance_comment() const {
  return "# config_hash=" + config_hash() + " seed=" + std::to_string(seed) + " version=" + kVersion;
}

json RunConfig::provenance() const { return {{"config_hash", config_hash()}, {"seed", seed}, {"version", kVersion}}; }

RunConfig load_config(const fs::path& path, const Overrides& ov) {
  if (!fs::exists(path)) throw InputError("config file not found: " + path.string());
  RunConfig cfg;
  try {
    cfg.doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!cfg.doc.is_object()) throw InputError("config must be a JSON object");
  cfg.base_dir = fs::absolute(path).parent_path();
  cfg.seed = ov.seed ? *ov.seed : get_or<std::uint64_t>(cfg.doc, "seed", 1);
  cfg.allow_gaps = ov.allow_gaps || get_or(cfg.doc, "allow_gaps", false);
  cfg.out_dir = ov.out ? fs::absolute(*ov.out) : cfg.resolve(get_or<std::string>(cfg.doc, "out", "out"));
  return cfg;
}

void cmd_ingest(const RunConfig& cfg) {
  const json& in = section(cfg, "inputs");
  const std::string hourly = get_or<std::string>(in, "hourly", "");
  const std::string hh = get_or<std::string>(in, "henry_hub", "");
  if (hourly.empty() && hh.empty()) throw InputError("config.inputs names neither an hourly nor a henry_hub file");
  const std::string comment = cfg.provenance_comment().substr(2);
  if (!hourly.empty()) {
    const auto cm = ingest::ColumnMap::from_json(section(cfg, "column_map"));
    ingest::IngestOptions opt;
    opt.allow_gaps = cfg.allow_gaps;
    auto res = ingest::parse_eia_hourly(cfg.resolve(hourly), cm, opt);
    HourlySeries emissions = [&] {
      const json& ef = section(cfg, "emission_factors");
      if (!ef.empty()) return ingest::compute_emissions(res.table, ef.get<ingest::EmissionFactorSet>());
      if (!res.emissions) throw InputError("no emission_factors in config and no emissions column mapped");
      return *res.emissions;
    }();
    const auto& t = res.table;
    ingest::write_series(cfg.data_dir() / "emissions.csv", emissions, comment);
    ingest::write_series(cfg.data_dir() / "coal.csv", t.coal, comment);
    ingest::write_series(cfg.data_dir() / "natural_gas.csv", t.natural_gas, comment);
    ingest::write_series(cfg.data_dir() / "renewables.csv", t.renewables_total, comment);
    ingest::write_series(cfg.data_dir() / "other.csv", t.other, comment);
    ingest::write_series(cfg.data_dir() / "fossil.csv", t.fossil_total(), comment);
    ingest::write_series(cfg.data_dir() / "total.csv", t.total(), comment);
    if (t.load) ingest::write_series(cfg.data_dir() / "load.csv", *t.load, comment);
    write_json(cfg, cfg.data_dir() / "gap_report.json", res.report.to_json());
  }
  if (!hh.empty()) {
    auto res = ingest::parse_henry_hub(cfg.resolve(hh));
    ingest::write_series(cfg.data_dir() / "henry_hub.csv", res.prices, comment);
    write_json(cfg, cfg.data_dir() / "henry_hub_report.json", res.report.to_json());
  }
}

void cmd_diagnose(const RunConfig& cfg) {
  const auto d = load_dataset(cfg);
  const auto& E = d.at("emissions");
  const json& s = section(cfg, "diagnostics");
  diagnostics::BatteryOptions opt;
  opt.ar_order_max = get_or(s, "ar_order_max", 24);
  opt.adf_max_lag = get_or(s, "adf_max_lag", -1);
  opt.bds_m = get_or(s, "bds_m", 6);
  opt.bds_eps_sd = get_or(s, "bds_eps_sd", 1.5);
  opt.pr_lags = get_or(s, "pr_lags", 10);
  std::vector<std::string> notes, rows;
  json records = json::array();
  auto cell = [](const diagnostics::TestResult& t, int digits) { return fx(t.statistic, digits) + t.stars(); };
  for (const auto& w : year_windows(cfg, E, &notes)) {
    try {
      const auto Ey = cut(E, w);
      const auto resid = deseasonalize(Ey, build_calendar_design(Ey, calendar_flags(cfg)));
      const auto b = diagnostics::run_battery(resid.as_vector(), w.name, opt);
      rows.push_back(w.name + "," + cell(b.adf, 2) + "," + cell(b.pp, 2) + "," + cell(b.kpss, 3) + "," + cell(b.tsay, 2) +
                     "," + cell(b.bds, 2) + "," + cell(b.pr, 2) + "," + std::to_string(b.ar_order) + "," +
                     std::to_string(b.adf.lag_or_bandwidth) + "," + std::to_string(b.nw_bandwidth) + ",");
      json tests = json::object();
      for (const auto* t : {&b.adf, &b.pp, &b.kpss, &b.tsay, &b.bds, &b.pr}) {
        json r{{"statistic", t->statistic}, {"band", t->pvalue_band}, {"lag_or_bandwidth", t->lag_or_bandwidth},
               {"reject", t->reject}};
        if (std::isfinite(t->pvalue)) r["pvalue"] = t->pvalue;
        tests[t->test_name] = r;
      }
      records.push_back({{"year", w.name}, {"ar_order", b.ar_order}, {"nw_bandwidth", b.nw_bandwidth}, {"tests", tests}});
    } catch (const InputError& e) {
      notes.push_back(w.name + ": skipped, " + e.what());
      rows.push_back(w.name + ",,,,,,,,,,skipped: " + e.what());
    }
  }
  for (const auto& n : notes) {
    if (n.find("only") != std::string::npos) rows.push_back(n.substr(0, 4) + ",,,,,,,,,," + n.substr(6));
  }
  write_json(cfg, cfg.fits_dir() / "diagnostics.json", {{"years", records}, {"notes", notes}});
  io::write_file_atomic(cfg.tables_dir() / "table2_diagnostics.csv",
                        csv_text(cfg, "year,ADF,PP,KPSS,TsayF,BDS,PR,ar_order,adf_lag,nw_bandwidth,note", rows));
}

void cmd_fit(const RunConfig& cfg, const std::string& model, const std::string& window) {
  static const std::vector<std::string> models{"usfe", "hawkes", "armax", "msarx", "msarx-dummy"};
  static const std::vector<std::string> windows{"year", "full", "pre-post"};
  if (std::find(models.begin(), models.end(), model) == models.end()) throw InputError("unknown model '" + model + "'");
  if (std::find(windows.begin(), windows.end(), window) == windows.end()) throw InputError("unknown window '" + window + "'");
  const auto d = load_dataset(cfg);
  const auto& E = d.at("emissions");
  if (model == "msarx") return fit_msarx(cfg, d, window);
  if (model == "msarx-dummy") {
    if (window != "full") throw InputError("msarx-dummy is fitted on the full window only");
    return fit_msarx_dummy(cfg, d);
  }
  if (model == "armax") {
    if (window == "year") return fit_armax_windows(cfg, d, year_windows(cfg, E), "year", false);
    if (window == "full") return fit_armax_windows(cfg, d, {{"full", 0, E.size()}}, "full", true);
    const auto [pre, post] = pre_post_windows(cfg, E);
    return fit_armax_windows(cfg, d, {pre, post}, "pre-post", false);
  }
  if (window == "year") return fit_linear_annual(cfg, d, model);
  if (window == "full") {
    // model-comparison fit on the standardized series
    const auto Ez = standardized(E), Gz = standardized(generation(cfg, d));
    const auto f = model == "usfe" ? linmodels::fit_us_fe(Ez, Gz, calendar_flags(cfg)) : linmodels::fit_hawkes(Ez, Gz);
    json j = regression_json(f);
    j["model"] = model;
    j["window"] = "full";
    j["standardized"] = true;
    j["ic"] = ic_json(linmodels::information_criteria(f.loglik, f.n_params, f.n_obs));
    write_json(cfg, cfg.fits_dir() / (model + "_full.json"), j);
    return;
  }
  const auto [pre, post] = pre_post_windows(cfg, E);
  fit_linear_windows(cfg, d, model, {pre, post}, "pre-post");
}

void cmd_break_scan(const RunConfig& cfg) {
  const fs::path p = cfg.data_dir() / "henry_hub.csv";
  if (!fs::exists(p)) throw InputError("no Henry Hub series in " + cfg.data_dir().string() + "; run `regime-mef ingest` first");
  const auto prices = ingest::read_series(p, Unit::USD_per_MMBtu, Frequency::daily);
  const json& s = section(cfg, "break_scan");
  breakdetect::BrokenTrendSpec spec;
  spec.baseline_degree = get_or(s, "baseline_degree", spec.baseline_degree);
  spec.trim_fraction = get_or(s, "trim_fraction", spec.trim_fraction);
  if (s.contains("window")) {
    const auto w = s.at("window").get<std::vector<double>>();
    if (w.size() != 2) throw InputError("break_scan.window must be [lower, upper]");
    spec.window_lower = w[0];
    spec.window_upper = w[1];
  }
  spec.weight_quantile = get_or(s, "weight_quantile", spec.weight_quantile);
  spec.n_starts = get_or(s, "n_starts", spec.n_starts);
  spec.seed = cfg.seed;
  const auto fit = breakdetect::scan_breaks(prices, spec);
  const auto kept = std::count(fit.weights.begin(), fit.weights.end(), 1);
  write_json(cfg, cfg.fits_dir() / "break_scan.json",
             {{"tau_index", fit.tau_hat},
              {"tau_date", format_date(*fit.tau_date)},
              {"delta_hat", fit.delta_hat},
              {"se_delta", fit.se_delta},
              {"t_delta", fit.t_delta},
              {"sigma_tilde", fit.sigma_tilde},
              {"h", fit.h},
              {"objective", fit.objective},
              {"kept_observations", kept},
              {"n_obs", prices.size()},
              {"decision", fit.break_declared ? "break" : "no break"},
              {"spec", {{"baseline_degree", spec.baseline_degree}, {"trim_fraction", spec.trim_fraction},
                        {"window", {spec.window_lower, spec.window_upper}}, {"weight_quantile", spec.weight_quantile},
                        {"n_starts", spec.n_starts}}}});
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < fit.candidates.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back(format_date(prices.time_at(static_cast<std::size_t>(fit.candidates[i]))) + "," +
                   num(fit.objective_path(k)) + "," + num(fit.tstat_path(k)));
  }
  io::write_file_atomic(cfg.tables_dir() / "break_scan_path.csv", csv_text(cfg, "date,objective,t_stat", rows));
}

void cmd_marginal(const RunConfig& cfg, const std::string& mode, const std::string& period) {
  const auto d = load_dataset(cfg);
  if (mode == "responsiveness_by_year") {
    const auto& L = load_or_total(d);
    std::vector<std::string> rows;
    for (const auto& w : year_windows(cfg, d.at("coal"))) {
      for (const std::string fuel : {"coal", "natural_gas"}) {
        const auto f = linmodels::fit_marginal_responsiveness(d.at(fuel), L, std::stoi(w.name));
        rows.push_back(w.name + "," + fuel + "," + fx(f.coefficients(0), 6) + "," + fx(f.standard_errors(0), 6) + "," +
                       fx(f.hac_standard_errors(0), 6) + "," + std::to_string(f.n_obs));
      }
    }
    io::write_file_atomic(cfg.tables_dir() / "marginal_responsiveness.csv",
                          csv_text(cfg, "year,fuel,beta,se,se_hac,n_obs", rows));
    return;
  }
  if (mode != "fuel_by_regime") throw InputError("unknown marginal mode '" + mode + "'");
  const std::string tag = period == "all" ? "full" : period;
  if (tag != "full" && tag != "pre" && tag != "post") throw InputError("period must be all, pre or post");
  const fs::path sp = cfg.fits_dir() / ("msarx_" + tag + "_smoothed.csv");
  if (!fs::exists(sp)) {
    throw InputError("regime labels " + sp.string() + " not found; run `regime-mef fit --model msarx --window " +
                     std::string(tag == "full" ? "full" : "pre-post") + "` first");
  }
  std::string text = io::read_file(sp);
  if (const auto at = text.find("timestamp_utc,p_high"); at != std::string::npos) text.replace(at, 20, "timestamp_utc,value");
  const auto probs = ingest::series_from_csv(text, Unit::dimensionless);
  const auto& coal = d.at("coal");
  if (probs.start() < coal.start() || probs.end() > coal.end()) throw InputError("regime labels do not lie inside the data span");
  const auto first = static_cast<std::size_t>((probs.start() - coal.start()) / kHour);
  std::vector<int> labels(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) labels[t] = probs[t] >= 0.5 ? 0 : 1;
  const auto L = load_or_total(d).slice(first, probs.size());
  std::vector<std::string> rows;
  for (const std::string fuel : {"coal", "natural_gas", "renewables", "other"}) {
    if (!d.has(fuel)) continue;
    const auto G = d.at(fuel).slice(first, probs.size());
    const auto mf = linmodels::fit_marginal_fuel(G, L, labels, 2);
    for (int k = 0; k < 2; ++k) {
      const auto& f = mf.by_regime[static_cast<std::size_t>(k)];
      rows.push_back(fuel + "," + msarx::state_name(k, 2) + "," + fx(f.coefficients(0), 6) + "," + fx(f.standard_errors(0), 6) +
                     "," + fx(f.hac_standard_errors(0), 6) + "," + fx(f.coefficients(1), 4) + "," +
                     std::to_string(mf.hours[static_cast<std::size_t>(k)]));
    }
  }
  io::write_file_atomic(cfg.tables_dir() / ("marginal_fuel_" + period + ".csv"),
                        csv_text(cfg, "fuel,regime,beta,se,se_hac,alpha,hours", rows));
}

void cmd_simulate(const RunConfig& cfg) {
  const json& s = section(cfg, "simulate");
  const Timestamp start = parse_iso_timestamp(get_or<std::string>(s, "start", "2021-01-01T00:00:00Z"));
  const auto hours = static_cast<Eigen::Index>(get_or(s, "hours", 24 * 120));
  if (hours < 48) throw InputError("simulate.hours must be at least 48");
  // by default the price series covers the hourly span so the detected break can split it
  const auto days = static_cast<Eigen::Index>(get_or(s, "henry_hub_days", std::max<int>(60, static_cast<int>(hours / 24))));
  const fs::path dir = cfg.out_dir / "fixture";

  // true MS-ARX parameters, state 0 = High
  msarx::MsArxParams p = msarx::MsArxParams::make(2, 2);
  p.alpha << 20.0, 10.0;
  p.phi << 0.5, 0.5;
  p.beta << -0.05, 0.75, -0.05, 0.25;
  p.sigma2 = get_or(s, "sigma2", 25.0);
  const double p11 = get_or(s, "p11", 0.98), p22 = get_or(s, "p22", 0.98);
  p.trans << p11, 1.0 - p11, 1.0 - p22, p22;

  // covariates: burn-in rows precede the first written hour
  constexpr Eigen::Index kBurn = 200;
  const Eigen::Index total = hours + kBurn;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd cov(total, 6);  // load, wind, solar, hydro, other, coal share
  double load_ar = 0.0, wind_ar = 0.0, share_ar = 0.0;
  for (Eigen::Index i = 0; i < total; ++i) {
    const Timestamp ts = start + (i - kBurn) * kHour;
    const auto c = civil_fields(ts);
    const double h = c.hour;
    const double doy = static_cast<double>((ts - make_utc(c.year, 1, 1)) / kDay);
    load_ar = 0.95 * load_ar + 20.0 * z(rng);
    wind_ar = 0.98 * wind_ar + 10.0 * z(rng);
    share_ar = 0.99 * share_ar + 0.01 * z(rng);
    const double load = 1000.0 + 150.0 * std::sin(2.0 * std::numbers::pi * (h - 6.0) / 24.0) +
                        100.0 * std::cos(2.0 * std::numbers::pi * doy / 365.0) + load_ar;
    const double solar = (h >= 6 && h <= 18) ? 150.0 * std::sin(std::numbers::pi * (h - 6.0) / 12.0) + 5.0 * z(rng) : 0.0;
    cov(i, 0) = load;
    cov(i, 1) = clamp_pos(120.0 + wind_ar, 0.0);
    cov(i, 2) = clamp_pos(solar, 0.0);
    cov(i, 3) = 60.0 + 3.0 * z(rng);
    cov(i, 4) = 80.0 + 2.0 * z(rng);
    cov(i, 5) = std::clamp(0.35 + share_ar, 0.05, 0.95);
  }
  MatrixXd X(total, 2);  // renewables, fossil
  for (Eigen::Index i = 0; i < total; ++i) {
    const double ren = cov(i, 1) + cov(i, 2) + cov(i, 3);
    X(i, 0) = ren;
    X(i, 1) = clamp_pos(cov(i, 0) - ren - cov(i, 4), 50.0);
  }
  const auto sim = msarx::simulate(p, hours - 1, [&](Eigen::Index rows, std::mt19937_64&) {
    if (rows != total) throw InputError("simulate: unexpected covariate request");
    return X;
  }, cfg.seed + 1);

  std::string csv = "Timestamp (UTC),Coal,Natural Gas,Wind,Solar,Hydro,Other,Demand,CO2 Emissions\n";
  for (Eigen::Index t = 0; t < hours; ++t) {
    const Eigen::Index i = t + kBurn;
    const double fossil = X(i, 1);
    const double coal = fossil * cov(i, 5);
    const double y = t == 0 ? sim.data.ylag(0) : sim.data.y(t - 1);
    csv += format_rfc3339(start + t * kHour) + "," + io::fixed(coal, 3) + "," + io::fixed(fossil - coal, 3) + "," +
           io::fixed(cov(i, 1), 3) + "," + io::fixed(cov(i, 2), 3) + "," + io::fixed(cov(i, 3), 3) + "," +
           io::fixed(cov(i, 4), 3) + "," + io::fixed(cov(i, 0), 3) + "," + io::fixed(y, 3) + "\n";
  }
  io::write_file_atomic(dir / "eia_hourly.csv", csv);

  // daily prices with a slope break at 60% of the span and 1% large outliers
  const Eigen::Index tau = static_cast<Eigen::Index>(0.6 * static_cast<double>(days));
  const double delta = get_or(s, "break_slope", -0.004);
  std::string hh = "Henry Hub Natural Gas Spot Price (synthetic)\n\nDay,Henry Hub Natural Gas Spot Price Dollars per Million Btu\n";
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Timestamp d0 = floor_hour(start) - (start - floor_hour(start));
  for (Eigen::Index t = 0; t < days; ++t) {
    const Timestamp day = d0 + t * kDay;
    const unsigned wd = civil_fields(day).weekday;
    const double sc = -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(days - 1);
    double price = 3.0 + 0.5 * sc + 0.3 * sc * sc + (t > tau ? delta * static_cast<double>(t - tau) : 0.0) + 0.1 * z(rng);
    if (u01(rng) < 0.01) price += 1.0;
    if (wd == 0 || wd == 6) continue;  // no trading on weekends
    const auto c = civil_fields(day);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", c.month, c.day, c.year);
    hh += std::string(buf) + "," + io::fixed(price, 3) + "\n";
  }
  io::write_file_atomic(dir / "henry_hub.csv", hh);

  json fixture_cfg = {
      {"inputs", {{"hourly", "eia_hourly.csv"}, {"henry_hub", "henry_hub.csv"}}},
      {"column_map",
       {{"timestamp", "Timestamp (UTC)"}, {"coal", {"Coal"}}, {"natural_gas", {"Natural Gas"}},
        {"renewables", {"Wind", "Solar", "Hydro"}}, {"other", {"Other"}}, {"load", "Demand"}, {"emissions", "CO2 Emissions"}}},
      {"break_date", format_date(d0 + tau * kDay)},
      {"seed", cfg.seed},
      {"out", "run"}};
  io::write_file_atomic(dir / "config.json", fixture_cfg.dump(2) + "\n");

  std::vector<double> freq(2, 0.0);
  for (int st : sim.states) freq[static_cast<std::size_t>(st)] += 1.0;
  write_json(cfg, dir / "manifest.json",
             {{"true_params", params_json(p, {"renewables", "fossil"}, 2)},
              {"hours", hours},
              {"start", format_rfc3339(start)},
              {"state_occupancy", {freq[0] / static_cast<double>(sim.states.size()), freq[1] / static_cast<double>(sim.states.size())}},
              {"henry_hub", {{"days", days}, {"break_index", tau}, {"break_date", format_date(d0 + tau * kDay)}, {"delta", delta}}},
              {"seed", cfg.seed}});
}

void cmd_report(const RunConfig& cfg) {
  const fs::path rdir = cfg.out_dir / "report";
  const std::vector<std::string> artifacts{
      "tables/table2_diagnostics.csv", "tables/annual_usfe.csv",   "tables/annual_hawkes.csv",
      "tables/annual_msarx.csv",       "tables/table_s7_hourly.csv", "tables/table_s8_dummy.csv",
      "tables/break_scan_path.csv",    "fits/break_scan.json",      "tables/marginal_fuel_all.csv",
      "tables/marginal_fuel_pre.csv",  "tables/marginal_fuel_post.csv", "tables/marginal_responsiveness.csv"};
  std::vector<std::string> index_rows;
  json art = json::object();
  for (const auto& a : artifacts) {
    const fs::path src = cfg.out_dir / a;
    if (fs::exists(src)) {
      const std::string content = io::read_file(src);
      io::write_file_atomic(rdir / fs::path(a).filename(), content);
      const std::string h = io::sha256_hex(content);
      index_rows.push_back(a + ",OK," + h);
      art[a] = h;
    } else {
      index_rows.push_back(a + ",MISSING,");
      art[a] = "MISSING";
    }
  }

  // annual MEF comparison
  auto read_rows = [&](const std::string& rel) {
    std::map<std::string, std::vector<std::string>> rows;
    const fs::path p = cfg.out_dir / rel;
    if (!fs::exists(p)) return rows;
    std::istringstream in(io::read_file(p));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (header) {
        header = false;
        continue;
      }
      auto cells = io::split_csv_line(line);
      rows[cells[0]] = cells;
    }
    return rows;
  };
  const auto us = read_rows("tables/annual_usfe.csv"), hw = read_rows("tables/annual_hawkes.csv"),
             ms = read_rows("tables/annual_msarx.csv");
  std::vector<std::string> years;
  for (const auto* m : {&us, &hw, &ms}) {
    for (const auto& [y, _] : *m) {
      if (std::find(years.begin(), years.end(), y) == years.end()) years.push_back(y);
    }
  }
  std::sort(years.begin(), years.end());
  auto cell = [](const std::map<std::string, std::vector<std::string>>& m, const std::string& y, std::size_t c) {
    auto it = m.find(y);
    return it == m.end() || it->second.size() <= c ? std::string("MISSING") : it->second[c];
  };
  std::vector<std::string> s6;
  for (const auto& y : years) {
    s6.push_back(y + "," + cell(us, y, 1) + "," + cell(us, y, 2) + "," + cell(hw, y, 1) + "," + cell(hw, y, 2) + "," +
                 cell(ms, y, 1) + "," + cell(ms, y, 2) + "," + cell(ms, y, 3) + "," + cell(ms, y, 4));
  }
  io::write_file_atomic(rdir / "table_s6_annual_mef.csv",
                        csv_text(cfg, "year,usfe,usfe_se,hawkes,hawkes_se,msarx_high,msarx_high_se,msarx_low,msarx_low_se", s6));

  // model comparison on the standardized full sample
  std::vector<std::string> s5;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [name, file] : std::vector<std::pair<std::string, std::string>>{
           {"ARIMA", "fits/armax_full.json"}, {"MS-ARX", "fits/msarx_full.json"}, {"US-FE", "fits/usfe_full.json"}}) {
    const fs::path p = cfg.out_dir / file;
    if (!fs::exists(p)) {
      s5.push_back(name + ",MISSING,MISSING,MISSING,MISSING,MISSING,MISSING,MISSING");
      continue;
    }
    const json j = json::parse(io::read_file(p));
    const json ic = j.contains("fits") ? j.at("fits").at(0).at("ic") : j.at("ic");
    std::string label = name;
    if (j.contains("fits")) label += "(" + std::to_string(j.at("fits").at(0).at("p").get<int>()) + ",0," +
                                      std::to_string(j.at("fits").at(0).at("q").get<int>()) + ")";
    s5.push_back(label + "," + fx(ic.at("loglik").get<double>(), 2) + "," + fx(ic.at("aic").get<double>(), 2) + "," +
                 fx(ic.at("bic").get<double>(), 2) + "," + fx(ic.at("hqic").get<double>(), 2) + "," +
                 std::to_string(ic.at("k").get<int>()) + "," + std::to_string(ic.at("n").get<std::int64_t>()) + ",");
    order.emplace_back(ic.at("loglik").get<double>(), label);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::string ranking;
  for (const auto& [ll, name] : order) ranking += (ranking.empty() ? "" : " > ") + name;
  for (auto& r : s5) {
    if (r.back() == ',') r += ranking;
  }
  io::write_file_atomic(rdir / "table_s5_model_comparison.csv",
                        csv_text(cfg, "model,loglik,aic,bic,hqic,k,n,loglik_ranking", s5));
  io::write_file_atomic(rdir / "index.csv", csv_text(cfg, "artifact,status,sha256", index_rows));

  json inputs = json::object();
  const json& in = section(cfg, "inputs");
  for (const char* key : {"hourly", "henry_hub"}) {
    const std::string v = get_or<std::string>(in, key, "");
    if (v.empty()) continue;
    const fs::path p = cfg.resolve(v);
    inputs[key] = {{"path", v}, {"sha256", fs::exists(p) ? io::sha256_file(p) : "MISSING"}};
  }
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  write_json(cfg, rdir / "manifest.json",
             {{"generated_at", format_rfc3339(Timestamp(now))},
              {"version", kVersion},
              {"seed", cfg.seed},
              {"config_hash", cfg.config_hash()},
              {"inputs", inputs},
              {"artifacts", art}});
}

}  // namespace regime_mef::pipeline
