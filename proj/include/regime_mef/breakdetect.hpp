#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "regime_mef/core_data.hpp"

namespace regime_mef::breakdetect {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BrokenTrendSpec {
  int baseline_degree = 3;       // polynomial in time scaled to [-1, 1]
  double trim_fraction = 0.99;   // h = floor(trim_fraction * T)
  double window_lower = 0.15;    // candidates floor(lower T) .. floor(upper T)
  double window_upper = 0.85;
  double weight_quantile = 0.995;
  double t_critical = 1.96;
  int n_starts = 20;             // random elemental starts per candidate
  std::uint64_t seed = 7;
  Index min_length = 60;

  void validate() const;
  Index h(Index T) const;
};

/// [1, s, ..., s^degree, (t - tau) 1{t > tau}] with s = -1 + 2t/(T-1) and t
/// the 0-based index.
MatrixXd broken_trend_design(Index T, Index tau, int degree);

struct ConditionalFit {
  VectorXd coefficients;  // delta last
  VectorXd residuals;
};

/// OLS of the broken-trend model at a fixed break index.
ConditionalFit fit_conditional(const VectorXd& prices, Index tau, const BrokenTrendSpec& spec = {});

/// Sum of the h smallest squared residuals.
double lts_objective(const VectorXd& residuals, Index h, int n_params = 1);

struct LtsFit {
  double objective = 0.0;
  VectorXd coefficients;
  VectorXd residuals;  // y - X b for every row
};

/// Least trimmed squares at a fixed break index by concentration steps from
/// the OLS fit and spec.n_starts random elemental subsets.
LtsFit lts_fit(const VectorXd& prices, Index tau, const BrokenTrendSpec& spec = {});

/// c_{h,T} = (1 - (2T/h) q phi(q))^{-1/2}, q = Phi^{-1}((h + T)/(2T)); 1 when h = T.
double consistency_factor(Index h, Index T);

/// sigma = c_{h,T} sqrt(S / h).
double robust_scale(double S, Index h, Index T, int n_params);

struct BrokenTrendFit {
  Index tau_hat = 0;
  std::optional<Timestamp> tau_date;
  Index h = 0;
  double objective = 0.0;
  double delta_hat = 0.0;  // slope change per step (per day for daily data)
  double se_delta = 0.0;
  double t_delta = 0.0;
  double sigma_tilde = 0.0;
  bool break_declared = false;
  VectorXd coefficients;   // WLS
  std::vector<int> weights;
  std::vector<Index> candidates;
  VectorXd objective_path;  // S(tau) per candidate
  VectorXd tstat_path;      // reweighted t per candidate
};

/// Scans every candidate in the window; tau_hat minimizes S(tau) with ties
/// to the earliest candidate. Fills the objective and t paths and runs the
/// reweighted inference at tau_hat.
BrokenTrendFit scan_breaks(const VectorXd& prices, const BrokenTrendSpec& spec = {});
BrokenTrendFit scan_breaks(const HourlySeries& daily_prices, const BrokenTrendSpec& spec = {});

/// Weights w_t = 1{|r_t / sigma| <= Phi^{-1}(weight_quantile)} from `residuals`,
/// then WLS and the classical t statistic of delta.
BrokenTrendFit reweight_and_infer(const VectorXd& prices, Index tau_hat, const VectorXd& residuals,
                                  double sigma_tilde, const BrokenTrendSpec& spec = {});

/// Reweighted t statistic at every candidate.
VectorXd tstat_path(const VectorXd& prices, const BrokenTrendSpec& spec = {});

}  // namespace regime_mef::breakdetect
