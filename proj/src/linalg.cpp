#include "regime_mef/linalg.hpp"

#include <algorithm>

#include "regime_mef/error.hpp"

namespace regime_mef::linalg {
namespace {

MatrixXd column_normalized(const MatrixXd& X) {
  MatrixXd Z = X;
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double n = Z.col(j).norm();
    if (n > 0.0) Z.col(j) /= n;
  }
  return Z;
}

}  // namespace

std::vector<Eigen::Index> dependent_columns(const MatrixXd& X, double tol) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(column_normalized(X));
  qr.setThreshold(tol);
  const Eigen::Index r = qr.rank();
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = r; i < X.cols(); ++i) out.push_back(qr.colsPermutation().indices()(i));
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::Index numerical_rank(const MatrixXd& X, double tol) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(column_normalized(X));
  qr.setThreshold(tol);
  return qr.rank();
}

void require_full_rank(const MatrixXd& X, const std::vector<std::string>& labels,
                       const std::string& context) {
  if (X.rows() < X.cols()) {
    throw RankDeficiencyError(context + ": fewer rows (" + std::to_string(X.rows()) +
                                  ") than columns (" + std::to_string(X.cols()) + ")",
                              {});
  }
  const auto dep = dependent_columns(X);
  if (dep.empty()) return;
  std::vector<std::string> names;
  std::string msg = context + " is rank deficient; collinear columns:";
  for (auto j : dep) {
    names.push_back(j < static_cast<Eigen::Index>(labels.size()) ? labels[j] : "col" + std::to_string(j));
    msg += " " + names.back();
  }
  throw RankDeficiencyError(msg, std::move(names));
}

LeastSquares ols(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& labels) {
  if (X.rows() != y.size()) throw InputError("ols: rows(X) != len(y)");
  require_full_rank(X, labels);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  LeastSquares out;
  out.coef = qr.solve(y);
  out.residuals = y - X * out.coef;
  out.ssr = out.residuals.squaredNorm();
  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::Index k = X.cols();
  MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  MatrixXd inner = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation();
  out.xtx_inv = perm * inner * perm.transpose();
  return out;
}

LeastSquares wls(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                 const std::vector<std::string>& labels) {
  if (X.rows() != y.size() || w.size() != y.size()) throw InputError("wls: dimension mismatch");
  if ((w.array() < 0.0).any()) throw InputError("wls: negative weight");
  const VectorXd sw = w.array().sqrt();
  LeastSquares fit = ols(sw.asDiagonal() * X, sw.asDiagonal() * y, labels);
  fit.residuals = y - X * fit.coef;
  fit.ssr = (w.array() * fit.residuals.array().square()).sum();
  return fit;
}

double mean(const VectorXd& x) { return x.size() ? x.mean() : 0.0; }

double variance(const VectorXd& x) {
  if (x.size() < 2) return 0.0;
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace regime_mef::linalg
