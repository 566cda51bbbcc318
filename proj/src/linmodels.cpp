#include "regime_mef/linmodels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "regime_mef/diagnostics.hpp"
#include "regime_mef/linalg.hpp"
#include "regime_mef/log.hpp"

namespace regime_mef::linmodels {
namespace {

std::size_t label_index(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw InputError("no coefficient labelled '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

VectorXd diff_of(const HourlySeries& s) {
  const auto v = s.as_vector();
  return v.tail(v.size() - 1) - v.head(v.size() - 1);
}

MatrixXd hac_covariance(const MatrixXd& X, const VectorXd& u, const MatrixXd& xtx_inv, int bandwidth) {
  const Eigen::Index n = X.rows();
  const MatrixXd Xu = X.array().colwise() * u.array();
  MatrixXd S = Xu.transpose() * Xu;
  for (int j = 1; j <= bandwidth && j < n; ++j) {
    const double w = 1.0 - j / (bandwidth + 1.0);
    const MatrixXd G = Xu.bottomRows(n - j).transpose() * Xu.topRows(n - j);
    S += w * (G + G.transpose());
  }
  return xtx_inv * S * xtx_inv;
}

VectorXd guarded_sqrt(const VectorXd& v) { return v.cwiseMax(0.0).cwiseSqrt(); }

}  // namespace

double RegressionFit::coef(const std::string& label) const { return coefficients(static_cast<Eigen::Index>(label_index(labels, label))); }

double RegressionFit::se(const std::string& label) const {
  return standard_errors(static_cast<Eigen::Index>(label_index(labels, label)));
}

RegressionFit ols_fit(const MatrixXd& X, const VectorXd& y, std::vector<std::string> labels, SeOptions se,
                      int absorbed) {
  if (X.rows() != y.size()) throw InputError("ols_fit: rows(X) != len(y)");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != X.cols()) {
    throw InputError("ols_fit: label count does not match columns");
  }
  const auto ls = linalg::ols(X, y, labels);
  RegressionFit f;
  const auto n = X.rows();
  const auto k = X.cols();
  const double dof = static_cast<double>(n - k - absorbed);
  if (dof <= 0.0) throw InputError("ols_fit: no residual degrees of freedom");
  f.coefficients = ls.coef;
  f.residuals = ls.residuals;
  f.sigma2 = ls.ssr / dof;
  const double nn = static_cast<double>(n);
  const double s2_mle = ls.ssr / nn;
  f.loglik = s2_mle > 0.0 ? -0.5 * nn * (std::log(2.0 * std::numbers::pi * s2_mle) + 1.0)
                          : std::numeric_limits<double>::infinity();
  f.n_params = static_cast<int>(k) + absorbed + 1;
  f.n_obs = static_cast<int>(n);
  f.labels = std::move(labels);
  if (f.labels.empty()) {
    for (Eigen::Index j = 0; j < k; ++j) f.labels.push_back("x" + std::to_string(j));
  }
  const VectorXd classical = guarded_sqrt(f.sigma2 * ls.xtx_inv.diagonal());
  if (se.type != SeType::classical) {
    int bw = se.hac_bandwidth;
    if (bw < 0) bw = n >= 20 ? diagnostics::newey_west_bandwidth(f.residuals) : 0;
    f.hac_bandwidth = bw;
    MatrixXd V = hac_covariance(X, f.residuals, ls.xtx_inv, bw);
    V *= nn / dof;
    f.hac_standard_errors = guarded_sqrt(V.diagonal());
  }
  f.standard_errors = se.type == SeType::hac ? f.hac_standard_errors : classical;
  return f;
}

RegressionFit fit_us_fe(const HourlySeries& E, const HourlySeries& G, const CalendarFlags& fe, SeOptions se) {
  require_aligned(E, G, "fit_us_fe");
  const auto cal = build_calendar_design(E, fe);
  MatrixXd X(static_cast<Eigen::Index>(E.size()), cal.matrix.cols() + 1);
  X.col(0) = G.as_vector();
  X.rightCols(cal.matrix.cols()) = cal.matrix;
  std::vector<std::string> labels{"MEF"};
  labels.insert(labels.end(), cal.column_labels.begin(), cal.column_labels.end());
  return ols_fit(X, E.as_vector(), std::move(labels), se);
}

RegressionFit fit_hawkes(const HourlySeries& E, const HourlySeries& G, bool intercept, SeOptions se) {
  require_aligned(E, G, "fit_hawkes");
  if (E.size() < 3) throw InputError("fit_hawkes: need at least 3 observations");
  const VectorXd dE = diff_of(E);
  MatrixXd X(dE.size(), intercept ? 2 : 1);
  X.col(0) = diff_of(G);
  std::vector<std::string> labels{"MEF"};
  if (intercept) {
    X.col(1).setOnes();
    labels.push_back("intercept");
  }
  return ols_fit(X, dE, std::move(labels), se);
}

MarginalFuelFit fit_marginal_fuel(const HourlySeries& G_f, const HourlySeries& load, const std::vector<int>& labels,
                                  int n_states) {
  require_aligned(G_f, load, "fit_marginal_fuel");
  if (labels.size() != G_f.size()) throw InputError("fit_marginal_fuel: labels not aligned with the series");
  const VectorXd dG = diff_of(G_f);
  const VectorXd dL = diff_of(load);
  MarginalFuelFit out;
  for (int k = 0; k < n_states; ++k) {
    std::vector<Eigen::Index> rows;
    for (std::size_t t = 1; t < labels.size(); ++t) {
      if (labels[t] < 0 || labels[t] >= n_states) throw InputError("fit_marginal_fuel: label out of range");
      if (labels[t] == k) rows.push_back(static_cast<Eigen::Index>(t - 1));
    }
    out.hours.push_back(rows.size());
    if (rows.size() < 100) {
      log::warn("marginal fuel: regime " + std::to_string(k) + " has only " + std::to_string(rows.size()) + " hours");
    }
    if (rows.size() < 3) throw InputError("fit_marginal_fuel: regime " + std::to_string(k) + " has fewer than 3 hours");
    const auto n = static_cast<Eigen::Index>(rows.size());
    MatrixXd X(n, 2);
    VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      X(r, 0) = dL(rows[static_cast<std::size_t>(r)]);
      X(r, 1) = 1.0;
      y(r) = dG(rows[static_cast<std::size_t>(r)]);
    }
    out.by_regime.push_back(ols_fit(X, y, {"beta", "alpha"}, {SeType::both, -1}));
  }
  return out;
}

RegressionFit fit_within(const VectorXd& y, const MatrixXd& X, const std::vector<int>& groups,
                         std::vector<std::string> labels, SeOptions se) {
  if (static_cast<Eigen::Index>(groups.size()) != y.size() || X.rows() != y.size()) {
    throw InputError("fit_within: dimension mismatch");
  }
  std::map<int, std::pair<double, VectorXd>> sums;  // group -> (count, sums of [y, X])
  const Eigen::Index k = X.cols();
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    auto& s = sums[groups[static_cast<std::size_t>(t)]];
    if (s.second.size() == 0) s.second = VectorXd::Zero(k + 1);
    s.first += 1.0;
    s.second(0) += y(t);
    s.second.tail(k) += X.row(t).transpose();
  }
  VectorXd yd = y;
  MatrixXd Xd = X;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const auto& s = sums[groups[static_cast<std::size_t>(t)]];
    yd(t) -= s.second(0) / s.first;
    Xd.row(t) -= (s.second.tail(k) / s.first).transpose();
  }
  return ols_fit(Xd, yd, std::move(labels), se, static_cast<int>(sums.size()));
}

RegressionFit fit_marginal_responsiveness(const HourlySeries& G_f, const HourlySeries& load, int year) {
  require_aligned(G_f, load, "fit_marginal_responsiveness");
  const auto [first, last] = year_range(G_f, year);
  if (last - first < 48) throw InputError("fit_marginal_responsiveness: year " + std::to_string(year) + " not covered");
  const auto n = static_cast<Eigen::Index>(last - first);
  VectorXd y(n);
  MatrixXd X(n, 1);
  std::vector<int> groups(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t t = first + static_cast<std::size_t>(r);
    y(r) = G_f[t];
    X(r, 0) = load[t];
    const auto c = civil_fields(G_f.time_at(t));
    groups[static_cast<std::size_t>(r)] = (c.year * 12 + static_cast<int>(c.month)) * 24 + static_cast<int>(c.hour);
  }
  return fit_within(y, X, groups, {"beta"}, {SeType::both, -1});
}

InfoCriteria information_criteria(double loglik, int k, std::int64_t n) {
  if (k < 1 || n <= k) throw InputError("information_criteria: need n > k >= 1");
  const double nn = static_cast<double>(n);
  InfoCriteria ic;
  ic.loglik = loglik;
  ic.k = k;
  ic.n = n;
  ic.aic = -2.0 * loglik + 2.0 * k;
  ic.bic = -2.0 * loglik + k * std::log(nn);
  ic.hqic = -2.0 * loglik + 2.0 * k * std::log(std::log(nn));
  return ic;
}

}  // namespace regime_mef::linmodels
