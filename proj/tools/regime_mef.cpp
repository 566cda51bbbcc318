#include <CLI11.hpp>

#include <iostream>

#include "regime_mef/error.hpp"
#include "regime_mef/pipeline.hpp"

namespace pl = regime_mef::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching marginal emission factor pipeline", "regime-mef"};
  app.set_version_flag("--version", pl::kVersion);
  app.require_subcommand(1);

  std::string config;
  pl::Overrides ov;
  std::uint64_t seed = 0;
  std::string out;
  std::string model = "msarx", window = "year", mode = "fuel_by_regime", period = "all";

  auto add = [&](const std::string& name, const std::string& help) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--config", config, "JSON run configuration")->required();
    sc->add_option("--seed", seed, "override the configured seed");
    sc->add_option("--out", out, "override the output directory");
    sc->add_flag("--allow-gaps", ov.allow_gaps, "keep the longest gap-free window instead of failing");
    return sc;
  };
  auto* ingest = add("ingest", "normalize raw EIA and Henry Hub files");
  auto* diagnose = add("diagnose", "stationarity and nonlinearity battery per year");
  auto* fit = add("fit", "fit a benchmark or the MS-ARX model");
  fit->add_option("--model", model, "usfe | hawkes | armax | msarx | msarx-dummy")
      ->check(CLI::IsMember({"usfe", "hawkes", "armax", "msarx", "msarx-dummy"}));
  fit->add_option("--window", window, "year | full | pre-post")->check(CLI::IsMember({"year", "full", "pre-post"}));
  auto* scan = add("break-scan", "robust broken-trend scan of Henry Hub prices");
  auto* marginal = add("marginal", "marginal fuel regressions");
  marginal->add_option("--mode", mode, "fuel_by_regime | responsiveness_by_year")
      ->check(CLI::IsMember({"fuel_by_regime", "responsiveness_by_year"}));
  marginal->add_option("--period", period, "all | pre | post")->check(CLI::IsMember({"all", "pre", "post"}));
  auto* simulate = add("simulate", "write a synthetic fixture dataset");
  auto* report = add("report", "collect tables into a report bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (auto* sc : app.get_subcommands()) {
      if (sc->count("--seed")) ov.seed = seed;
      if (sc->count("--out")) ov.out = out;
    }
    const auto cfg = pl::load_config(config, ov);
    if (ingest->parsed()) pl::cmd_ingest(cfg);
    else if (diagnose->parsed()) pl::cmd_diagnose(cfg);
    else if (fit->parsed()) pl::cmd_fit(cfg, model, window);
    else if (scan->parsed()) pl::cmd_break_scan(cfg);
    else if (marginal->parsed()) pl::cmd_marginal(cfg, mode, period);
    else if (simulate->parsed()) pl::cmd_simulate(cfg);
    else if (report->parsed()) pl::cmd_report(cfg);
  } catch (const regime_mef::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const regime_mef::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
