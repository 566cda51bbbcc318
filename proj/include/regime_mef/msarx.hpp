#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "regime_mef/core_data.hpp"
#include "regime_mef/error.hpp"
#include "regime_mef/linmodels.hpp"

namespace regime_mef::msarx {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MsArxSpec {
  int n_states = 2;
  int ar_order = 1;
  std::vector<std::string> covariate_labels{"renewables", "fossil"};
  std::string mef_covariate = "fossil";  // slope that orders the states
  std::optional<Timestamp> break_date;   // adds D_t * x_t interactions

  void validate() const;
};

/// Modeled sample. The first raw observation only conditions the AR term,
/// so row t here is raw observation t + 1.
struct MsArxData {
  VectorXd y;
  VectorXd ylag;
  MatrixXd X;  // covariates, then interaction columns
  std::vector<std::string> covariate_labels;
  int n_interactions = 0;
  std::vector<Timestamp> timestamps;  // optional, one per modeled row

  Eigen::Index size() const noexcept { return y.size(); }
  int n_covariates() const noexcept { return static_cast<int>(X.cols()) - n_interactions; }
  int n_regressors() const noexcept { return 2 + static_cast<int>(X.cols()); }
  /// [1, y_{t-1}, X_t]
  MatrixXd regressors() const;

  /// From raw aligned arrays (length T + 1); drops the first row.
  static MsArxData from_raw(const VectorXd& y_raw, const MatrixXd& X_raw, std::vector<std::string> labels = {});
};

/// Builds the modeled sample from hourly series. With spec.break_date set,
/// appends D_t * x_t columns (D_t = 1 from the break onward); an all-zero or
/// all-one dummy leaves the interactions unidentified and is an error.
MsArxData build_data(const HourlySeries& y, const std::vector<HourlySeries>& covariates, const MsArxSpec& spec);

struct MsArxParams {
  VectorXd alpha;   // per state
  VectorXd phi;     // per state
  MatrixXd beta;    // n_states x n_covariates
  MatrixXd delta;   // n_states x n_interactions (zero columns without a break)
  double sigma2 = 1.0;  // shared across states
  MatrixXd trans;   // p_ij = P(S_t = j | S_{t-1} = i)

  int n_states() const noexcept { return static_cast<int>(alpha.size()); }
  /// [alpha_k, phi_k, beta_k..., delta_k...]
  VectorXd state_coefficients(int k) const;
  void set_state_coefficients(int k, const VectorXd& c);
  /// Throws InputError when shapes or probabilities are invalid.
  void validate(const MsArxData* data = nullptr) const;
  /// Reorders states: new state i is old state order[i].
  MsArxParams permuted(const std::vector<int>& order) const;

  static MsArxParams make(int n_states, int n_covariates, int n_interactions = 0);
};

/// Stationary distribution of a row-stochastic matrix.
VectorXd ergodic_distribution(const MatrixXd& trans);

struct FilterOutput {
  MatrixXd predicted;  // T x n, P(S_t | Y_{t-1})
  MatrixXd filtered;   // T x n, P(S_t | Y_t)
  VectorXd loglik_t;   // per-observation contributions
  double loglik = 0.0;
};

/// Scaled Hamilton filter. `init` is P(S_1) for the first modeled row and
/// defaults to the ergodic distribution of trans.
FilterOutput hamilton_filter(const MsArxParams& params, const MsArxData& data,
                             const std::optional<VectorXd>& init = std::nullopt);

struct SmoothedInference {
  MatrixXd xi_smooth;              // T x n, P(S_t | Y_T)
  std::vector<MatrixXd> xi_joint;  // T-1 items; [t](i, j) = P(S_t = i, S_{t+1} = j | Y_T)
  double loglik = 0.0;
};

/// Kim backward recursion. Predicted probabilities below 1e-300 are treated
/// as zero mass (their ratio term is dropped) with a warning.
SmoothedInference kim_smoother(const FilterOutput& filter, const MsArxParams& params);

struct BruteForce {
  double loglik = 0.0;
  MatrixXd marginals;  // T x n
};

/// Exact enumeration over every state path; T <= 15 and n^T <= 2^20.
BruteForce brute_force_loglik(const MsArxParams& params, const MsArxData& data,
                              const std::optional<VectorXd>& init = std::nullopt);

SmoothedInference em_e_step(const MsArxParams& params, const MsArxData& data);

/// A state whose smoothed weight is below the number of regressors.
class RegimeCollapseError : public NumericalError {
 public:
  RegimeCollapseError(const std::string& what, MsArxParams partial, std::vector<bool> collapsed)
      : NumericalError(what), partial_(std::move(partial)), collapsed_(std::move(collapsed)) {}
  const MsArxParams& partial() const noexcept { return partial_; }
  const std::vector<bool>& collapsed() const noexcept { return collapsed_; }

 private:
  MsArxParams partial_;
  std::vector<bool> collapsed_;
};

/// Per-state WLS with smoothed weights, shared sigma2, and transition
/// probabilities from smoothed joint counts. Because the filter starts from
/// the ergodic distribution of P, the P update also maximizes that initial
/// term of Q; the count-based solution, the refined one and `previous` (if
/// given) compete on Q so the update never decreases it.
MsArxParams em_m_step(const SmoothedInference& smoothed, const MsArxData& data, const MsArxParams* previous = nullptr);

struct EmOptions {
  int n_restarts = 10;
  double tol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 1;
};

struct EmTrace {
  std::vector<double> loglik;
  bool converged = false;
  int iterations = 0;
  int restart = 0;
};

struct MsArxFit {
  MsArxSpec spec;
  MsArxParams params;  // canonical: state 0 has the largest MEF slope
  SmoothedInference smoothed;
  EmTrace trace;
  std::vector<EmTrace> restarts;  // every restart, including failures
  linmodels::InfoCriteria ic;
};

/// Runs EM from a single starting point.
EmTrace run_em(MsArxParams& params, const MsArxData& data, const EmOptions& opt, SmoothedInference* last = nullptr);

/// Thrown when no restart converged; carries the best fit found.
class EmConvergenceError : public NumericalError {
 public:
  EmConvergenceError(const std::string& what, MsArxFit best) : NumericalError(what), best_(std::move(best)) {}
  const MsArxFit& best() const noexcept { return best_; }

 private:
  MsArxFit best_;
};

/// Multi-start EM; restart 0 is a deterministic quantile split, the rest
/// jitter it. Winner by observed loglik, ties to the lower restart id.
MsArxFit fit_em(const MsArxSpec& spec, const MsArxData& data, const EmOptions& opt = {});

/// fit_em on data that must carry interaction columns.
MsArxFit fit_with_break_dummy(const MsArxSpec& spec, const MsArxData& data, const EmOptions& opt = {});

/// Post-break slopes beta + delta (n_states x n_interactions).
MatrixXd post_break_slopes(const MsArxParams& params);

/// Number of free parameters: n (2 + covariates + interactions) + n (n - 1) + 1.
int parameter_count(int n_states, int n_covariates, int n_interactions);

/// Reorders states so the `mef_index` slope is descending.
std::vector<int> canonical_order(const MsArxParams& params, int mef_index);

struct Classification {
  std::vector<int> labels;     // argmax, ties to the lower index
  std::vector<double> shares;  // occupancy, rounded to 0.1%
};
Classification classify_regimes(const SmoothedInference& smoothed);

using CovariateGenerator = std::function<MatrixXd(Eigen::Index rows, std::mt19937_64& rng)>;

/// Independent AR(1) covariates with coefficient rho and unit innovations.
CovariateGenerator ar1_covariates(int n, double rho = 0.9, double scale = 1.0);

struct Simulation {
  MsArxData data;
  std::vector<int> states;  // per modeled row
};

/// States from the chain started at its ergodic distribution; a 200-step
/// burn-in precedes the returned T modeled rows.
Simulation simulate(const MsArxParams& params, Eigen::Index T, const CovariateGenerator& x_generator,
                    std::uint64_t seed);

enum class SeMethod { numerical_hessian, opg, sandwich };

struct StandardErrors {
  std::vector<std::string> labels;
  VectorXd values;  // parameter values in the same order
  VectorXd se;
  SeMethod method = SeMethod::numerical_hessian;  // method actually used
};

/// SEs for [per-state coefficients, sigma2, off-diagonal p_ij] from the
/// observed-data loglik (ergodic initial distribution).
StandardErrors standard_errors(const MsArxParams& params, const MsArxData& data,
                               SeMethod method = SeMethod::numerical_hessian);

std::string state_name(int k, int n_states);

}  // namespace regime_mef::msarx
