#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "regime_mef/core_data.hpp"
#include "regime_mef/io.hpp"
#include "regime_mef/log.hpp"

namespace test_support {

inline std::filesystem::path data_dir() { return REGIME_MEF_TEST_DATA; }

/// Columns of tests/data/oracle_series.csv by header name.
inline const std::map<std::string, Eigen::VectorXd>& oracle_series() {
  static const auto cols = [] {
    std::map<std::string, std::vector<double>> raw;
    std::istringstream in(regime_mef::io::read_file(data_dir() / "oracle_series.csv"));
    std::string line;
    std::getline(in, line);
    const auto names = regime_mef::io::split_csv_line(line);
    while (std::getline(in, line)) {
      const auto cells = regime_mef::io::split_csv_line(line);
      for (std::size_t i = 0; i < names.size(); ++i) raw[names[i]].push_back(std::stod(cells[i]));
    }
    std::map<std::string, Eigen::VectorXd> out;
    for (auto& [k, v] : raw) out[k] = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return out;
  }();
  return cols;
}

inline const nlohmann::json& oracle_values() {
  static const auto j = nlohmann::json::parse(regime_mef::io::read_file(data_dir() / "oracle_values.json"));
  return j;
}

/// Collects warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  regime_mef::log::Sink previous;
  WarningCapture() {
    previous = regime_mef::log::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { regime_mef::log::set_warning_sink(previous); }
  bool contains(const std::string& needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }
};

inline regime_mef::HourlySeries hourly(const Eigen::VectorXd& v, regime_mef::Timestamp start,
                                       regime_mef::Unit unit = regime_mef::Unit::MWh) {
  return {start, std::vector<double>(v.data(), v.data() + v.size()), unit};
}

inline Eigen::VectorXd normals(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

inline Eigen::VectorXd ar1(Eigen::Index n, double phi, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::VectorXd v(n);
  double prev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) v(i) = prev = phi * prev + z(rng);
  return v;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::path(REGIME_MEF_TEST_SCRATCH) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

#ifdef REGIME_MEF_BIN
/// Runs the command-line tool with output captured in `log`; returns the exit code.
inline int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("\"") + REGIME_MEF_BIN + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Simulates a fixture under `dir` and runs every pipeline stage on it.
/// Returns the output directory of the run, or an empty path on failure.
inline std::filesystem::path run_fixture_pipeline(const std::filesystem::path& dir, int seed, int hours,
                                                  std::string* failed_step = nullptr) {
  namespace fs = std::filesystem;
  const fs::path log = dir / "pipeline.log";
  write_text(dir / "sim.json", nlohmann::json{{"simulate", {{"hours", hours}}}, {"seed", seed}, {"out", "."}}.dump());
  const std::string sim_cfg = "--config \"" + (dir / "sim.json").string() + "\"";
  if (run_cli("simulate " + sim_cfg, log) != 0) {
    if (failed_step) *failed_step = "simulate";
    return {};
  }
  const std::string cfg = "--config \"" + (dir / "fixture" / "config.json").string() + "\"";
  const std::vector<std::string> steps{
      "ingest",
      "diagnose",
      "break-scan",
      "fit --model usfe --window year",
      "fit --model usfe --window full",
      "fit --model hawkes --window year",
      "fit --model armax --window full",
      "fit --model msarx --window year",
      "fit --model msarx --window full",
      "fit --model msarx --window pre-post",
      "fit --model msarx-dummy --window full",
      "marginal --mode fuel_by_regime --period all",
      "marginal --mode responsiveness_by_year",
      "report",
  };
  for (const auto& step : steps) {
    if (run_cli(step + " " + cfg, log) != 0) {
      if (failed_step) *failed_step = step;
      return {};
    }
  }
  return dir / "fixture" / "run";
}
#endif

}  // namespace test_support
