#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace regime_mef::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool allow_gaps = false;
};

/// Parsed JSON run configuration. Relative paths resolve against the
/// directory holding the config file; command-line overrides win.
struct RunConfig {
  nlohmann::json doc;
  std::filesystem::path base_dir;
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
  bool allow_gaps = false;

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path data_dir() const { return out_dir / "data"; }
  std::filesystem::path fits_dir() const { return out_dir / "fits"; }
  std::filesystem::path tables_dir() const { return out_dir / "tables"; }
  /// SHA-256 of the config with output location removed, so moving the
  /// output directory does not change recorded provenance.
  std::string config_hash() const;
  /// "# config_hash=... seed=... version=..."
  std::string provenance_comment() const;
  nlohmann::json provenance() const;
};

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

void cmd_ingest(const RunConfig& cfg);
void cmd_diagnose(const RunConfig& cfg);
/// model: usfe | hawkes | armax | msarx | msarx-dummy; window: year | full | pre-post
void cmd_fit(const RunConfig& cfg, const std::string& model, const std::string& window);
void cmd_break_scan(const RunConfig& cfg);
/// mode: fuel_by_regime | responsiveness_by_year; period: all | pre | post
void cmd_marginal(const RunConfig& cfg, const std::string& mode, const std::string& period);
void cmd_simulate(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

}  // namespace regime_mef::pipeline
