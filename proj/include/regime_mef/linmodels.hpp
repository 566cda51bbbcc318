#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regime_mef/core_data.hpp"
#include "regime_mef/error.hpp"

namespace regime_mef::linmodels {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SeType { classical, hac, both };

struct SeOptions {
  SeType type = SeType::classical;
  int hac_bandwidth = -1;  // negative: Newey-West automatic rule on the residuals
};

struct RegressionFit {
  VectorXd coefficients;
  VectorXd standard_errors;      // of the requested type (classical for `both`)
  VectorXd hac_standard_errors;  // filled for `hac` and `both`, else empty
  VectorXd residuals;
  double sigma2 = 0.0;  // ssr / (n - k - absorbed)
  double loglik = 0.0;  // Gaussian, at the MLE variance ssr / n
  int n_params = 0;
  int n_obs = 0;
  int hac_bandwidth = -1;
  std::vector<std::string> labels;

  double coef(const std::string& label) const;
  double se(const std::string& label) const;
};

/// OLS with classical and/or Newey-West HAC standard errors. `absorbed` is
/// the number of fixed effects already removed from X and y (degrees of
/// freedom correction for within estimators).
RegressionFit ols_fit(const MatrixXd& X, const VectorXd& y, std::vector<std::string> labels, SeOptions se = {},
                      int absorbed = 0);

/// E_t = MEF * G_t + calendar fixed effects.
RegressionFit fit_us_fe(const HourlySeries& E, const HourlySeries& G, const CalendarFlags& fe = {}, SeOptions se = {});

/// dE_t = MEF * dG_t (+ intercept).
RegressionFit fit_hawkes(const HourlySeries& E, const HourlySeries& G, bool intercept = true, SeOptions se = {});

/// Per-regime regression of dG_f on dLoad over hours t >= 1 with
/// labels[t] == k. Labels are 0-based state indices aligned with G_f.
struct MarginalFuelFit {
  std::vector<RegressionFit> by_regime;  // coefficients {beta, alpha}
  std::vector<std::size_t> hours;
};
MarginalFuelFit fit_marginal_fuel(const HourlySeries& G_f, const HourlySeries& load, const std::vector<int>& labels,
                                  int n_states = 2);

/// Gen_f = beta * Load + month-of-sample x hour-of-day fixed effects over
/// calendar year `year`, by within transformation. Classical and HAC SEs.
RegressionFit fit_marginal_responsiveness(const HourlySeries& G_f, const HourlySeries& load, int year);

/// Same regression with explicit fixed-effect groups (any integer ids).
RegressionFit fit_within(const VectorXd& y, const MatrixXd& X, const std::vector<int>& groups,
                         std::vector<std::string> labels, SeOptions se = {});

struct InfoCriteria {
  double aic = 0.0, bic = 0.0, hqic = 0.0;
  double loglik = 0.0;
  int k = 0;
  std::int64_t n = 0;
};

InfoCriteria information_criteria(double loglik, int k, std::int64_t n);

// ---------------------------------------------------------------------------
// ARMAX: Phi(L)(y_t - X_t b) = alpha + Theta(L) e_t

struct ArmaxFit {
  int p = 0, q = 0;
  VectorXd ar;    // phi_1..phi_p, polynomial 1 - sum phi_j L^j
  VectorXd ma;    // theta_1..theta_q, polynomial 1 + sum theta_j L^j
  VectorXd beta;  // exogenous slopes; beta(0) is the MEF
  double mef = 0.0;
  double intercept = 0.0;  // alpha
  double sigma2 = 0.0;
  double loglik = 0.0;
  std::int64_t n_obs = 0;
  bool converged = false;
  int restart = 0;
  int n_params() const { return p + q + static_cast<int>(beta.size()) + 2; }
};

/// Carries the best parameters found when no restart converged.
class ArmaxConvergenceError : public NumericalError {
 public:
  ArmaxConvergenceError(const std::string& what, ArmaxFit best) : NumericalError(what), best_(std::move(best)) {}
  const ArmaxFit& best() const noexcept { return best_; }

 private:
  ArmaxFit best_;
};

enum class Likelihood {
  exact,        // Kalman filter prediction-error decomposition, stationary start
  conditional,  // conditional on the first p observations, zero presample errors
};

double armax_loglik(const VectorXd& y, const MatrixXd& X, const VectorXd& beta, double intercept,
                    const VectorXd& ar, const VectorXd& ma, double sigma2, Likelihood kind = Likelihood::exact);

struct ArmaxOptions {
  int n_restarts = 5;
  std::uint64_t seed = 20240531;
  int max_iter = 500;
};

/// Exact Gaussian MLE. Stationarity and invertibility are enforced through a
/// partial-autocorrelation reparameterization; sigma2 is concentrated out.
ArmaxFit fit_armax(const VectorXd& y, const MatrixXd& X, int p, int q, const ArmaxOptions& opt = {});
ArmaxFit fit_armax(const HourlySeries& E, const HourlySeries& G, int p, int q, const ArmaxOptions& opt = {});

struct ArmaOrderCell {
  int p = 0, q = 0;
  bool ok = false;
  std::string error;
  ArmaxFit fit;
  InfoCriteria ic;
};

struct ArmaOrderSelection {
  int p = 0, q = 0;  // loglik maximizer
  int p_aic = 0, q_aic = 0, p_bic = 0, q_bic = 0, p_hqic = 0, q_hqic = 0;
  std::vector<ArmaOrderCell> grid;
  const ArmaOrderCell& best() const;
};

/// Fits every (p, q) with p <= p_max, q <= q_max, p + q >= 1. Failing cells
/// are recorded in the grid; it is an error only if every cell fails.
ArmaOrderSelection select_arma_order(const VectorXd& y, const MatrixXd& X, int p_max, int q_max,
                                     const ArmaxOptions& opt = {});

/// Roots of 1 - sum c_j z^j lie outside the unit circle.
bool polynomial_stable(const VectorXd& c);

}  // namespace regime_mef::linmodels
