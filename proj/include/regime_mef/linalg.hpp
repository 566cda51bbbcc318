#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace regime_mef::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Ordinary least squares via column-pivoted Householder QR.
struct LeastSquares {
  VectorXd coef;
  VectorXd residuals;
  MatrixXd xtx_inv;  // (X'X)^{-1}, for covariance scaling
  double ssr = 0.0;
};

/// Columns of X that are numerically dependent on earlier-pivoted columns,
/// detected on the column-normalized matrix with relative tolerance `tol`.
std::vector<Eigen::Index> dependent_columns(const MatrixXd& X, double tol = 1e-10);

Eigen::Index numerical_rank(const MatrixXd& X, double tol = 1e-10);

/// Throws RankDeficiencyError naming the dependent columns (from `labels`
/// when given, otherwise "col<i>").
void require_full_rank(const MatrixXd& X, const std::vector<std::string>& labels = {},
                       const std::string& context = "design matrix");

LeastSquares ols(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& labels = {});

/// Weighted least squares with nonnegative weights; rows with zero weight
/// drop out. Residuals are returned for every row (unweighted y - Xb).
LeastSquares wls(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                 const std::vector<std::string>& labels = {});

double mean(const VectorXd& x);
double variance(const VectorXd& x);  // ddof = 1

}  // namespace regime_mef::linalg
