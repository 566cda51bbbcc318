#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace regime_mef::diagnostics {

using Eigen::Ref;
using Eigen::VectorXd;

enum class Criterion { aic, bic };

inline constexpr std::array<double, 3> kLevels{0.01, 0.05, 0.10};

struct TestResult {
  std::string test_name;
  double statistic = 0.0;
  double pvalue = 0.0;  // NaN for table-based tests; see pvalue_band
  std::string pvalue_band;  // "<0.01", "0.01-0.05", "0.05-0.10", ">0.10"
  std::optional<std::array<double, 3>> critical_values;  // at 1%, 5%, 10%
  int lag_or_bandwidth = 0;
  std::array<bool, 3> reject{};  // at 1%, 5%, 10%
  double df1 = 0.0, df2 = 0.0;   // F-type tests only

  /// "***" / "**" / "*" / "" for rejection at 1/5/10%.
  std::string stars() const;
};

/// AR(p) with intercept fitted by OLS for p = 1..p_max on the common sample
/// x[p_max..]; returns the order minimizing the criterion.
int select_ar_order(const Ref<const VectorXd>& x, int p_max, Criterion criterion = Criterion::aic);

struct LongRunVariance {
  double value;
  int bandwidth;
};

/// Newey-West automatic bandwidth for the Bartlett kernel.
int newey_west_bandwidth(const Ref<const VectorXd>& x);

/// Bartlett-kernel long-run variance of the demeaned series. A negative
/// `bandwidth` selects it automatically.
LongRunVariance newey_west_lrv(const Ref<const VectorXd>& x, int bandwidth = -1);

/// As above but without demeaning (for regression residuals).
LongRunVariance newey_west_lrv_raw(const Ref<const VectorXd>& u, int bandwidth = -1);

/// Augmented Dickey-Fuller with a constant. Lag order by criterion over
/// 0..max_lag on a common sample, then refit on the longest sample. A
/// negative max_lag means floor(12 (T/100)^{1/4}).
TestResult adf_test(const Ref<const VectorXd>& x, int max_lag = -1, Criterion criterion = Criterion::bic);

/// Phillips-Perron Z-tau, constant only.
TestResult pp_test(const Ref<const VectorXd>& x, int bandwidth = -1);

/// KPSS level stationarity. bandwidth < 0 selects the Hobijn-Franses-Ooms lag.
TestResult kpss_test(const Ref<const VectorXd>& x, int bandwidth = -1);

/// Tsay's F test for nonlinearity in an AR(p).
TestResult tsay_f_test(const Ref<const VectorXd>& x, int p);

/// BDS independence test at embedding dimension m with eps = eps_sd * sd(x).
TestResult bds_test(const Ref<const VectorXd>& x, int m = 6, double eps_sd = 1.5);

/// Pena-Rodriguez determinant portmanteau on squared centered data:
/// D = n (1 - |R_m|^{1/m}), referred to its gamma approximation.
TestResult arch_portmanteau_test(const Ref<const VectorXd>& x, int lags = 10);

struct BatteryOptions {
  int ar_order_max = 24;
  int adf_max_lag = -1;
  int bds_m = 6;
  double bds_eps_sd = 1.5;
  int pr_lags = 10;
};

struct BatteryResult {
  std::string label;
  int ar_order = 0;
  int nw_bandwidth = 0;
  TestResult adf, pp, kpss, tsay, bds, pr;
};

BatteryResult run_battery(const Ref<const VectorXd>& x, const std::string& label, const BatteryOptions& opt = {});

/// label,ADF,PP,KPSS,TsayF,BDS,PR,... with significance stars.
std::string battery_to_csv(const std::vector<BatteryResult>& rows);

}  // namespace regime_mef::diagnostics
