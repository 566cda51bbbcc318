#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unsupported/Eigen/KroneckerProduct>

#include "regime_mef/linalg.hpp"
#include "regime_mef/linmodels.hpp"
#include "regime_mef/log.hpp"
#include "regime_mef/optim.hpp"

namespace regime_mef::linmodels {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Partial autocorrelations (as unconstrained z, r = tanh z) to the
/// coefficients of a stable 1 - sum c_j L^j (Durbin-Levinson recursion).
VectorXd pacf_to_coef(const VectorXd& z) {
  const Eigen::Index p = z.size();
  VectorXd c = VectorXd::Zero(p);
  VectorXd prev(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double r = std::tanh(z(k));
    prev.head(k) = c.head(k);
    for (Eigen::Index j = 0; j < k; ++j) c(j) = prev(j) - r * prev(k - 1 - j);
    c(k) = r;
  }
  return c;
}

/// Inverse of pacf_to_coef for a stable polynomial; returns nullopt if the
/// polynomial is not stable.
std::optional<VectorXd> coef_to_pacf(VectorXd c) {
  const Eigen::Index p = c.size();
  VectorXd z(p);
  for (Eigen::Index k = p - 1; k >= 0; --k) {
    const double r = c(k);
    if (!(std::abs(r) < 1.0 - 1e-9)) return std::nullopt;
    z(k) = std::atanh(r);
    VectorXd prev = c.head(k);
    for (Eigen::Index j = 0; j < k; ++j) c(j) = (prev(j) + r * prev(k - 1 - j)) / (1.0 - r * r);
  }
  return z;
}

struct KalmanSums {
  double sum_log_f = 0.0;
  double sum_v2_f = 0.0;
  bool ok = true;
};

/// Prediction-error decomposition of a zero-mean ARMA(p, q) with unit
/// innovation variance, in Harvey's state-space form.
KalmanSums kalman_arma(const VectorXd& w, const VectorXd& ar, const VectorXd& ma) {
  const Eigen::Index p = ar.size(), q = ma.size();
  const Eigen::Index r = std::max(p, q + 1);
  MatrixXd Tm = MatrixXd::Zero(r, r);
  for (Eigen::Index i = 0; i < p; ++i) Tm(i, 0) = ar(i);
  for (Eigen::Index i = 0; i + 1 < r; ++i) Tm(i, i + 1) = 1.0;
  VectorXd R = VectorXd::Zero(r);
  R(0) = 1.0;
  for (Eigen::Index j = 0; j < q; ++j) R(j + 1) = ma(j);
  const MatrixXd Q = R * R.transpose();

  const MatrixXd I = MatrixXd::Identity(r * r, r * r);
  const MatrixXd A = I - Eigen::kroneckerProduct(Tm, Tm).eval();
  const VectorXd vecQ = Eigen::Map<const VectorXd>(Q.data(), r * r);
  const VectorXd vecP = A.partialPivLu().solve(vecQ);
  MatrixXd P = Eigen::Map<const MatrixXd>(vecP.data(), r, r);
  P = 0.5 * (P + P.transpose());

  KalmanSums s;
  VectorXd a = VectorXd::Zero(r);
  VectorXd K(r);
  bool steady = false;
  double F = 0.0;
  for (Eigen::Index t = 0; t < w.size(); ++t) {
    const double v = w(t) - a(0);
    if (!steady) {
      F = P(0, 0);
      if (!(F > 0.0) || !std::isfinite(F)) {
        s.ok = false;
        return s;
      }
      K = Tm * P.col(0) / F;
      MatrixXd Pn = Tm * P * Tm.transpose() - K * K.transpose() * F + Q;
      if ((Pn - P).cwiseAbs().maxCoeff() < 1e-13) steady = true;
      P = std::move(Pn);
    }
    s.sum_log_f += std::log(F);
    s.sum_v2_f += v * v / F;
    a = Tm * a + K * v;
  }
  return s;
}

/// Conditional sum of squares with zero presample innovations.
double css_loglik(const VectorXd& u, double alpha, const VectorXd& ar, const VectorXd& ma, double sigma2) {
  const Eigen::Index p = ar.size(), q = ma.size(), n = u.size();
  VectorXd e = VectorXd::Zero(n);
  double ssr = 0.0;
  for (Eigen::Index t = p; t < n; ++t) {
    double v = u(t) - alpha;
    for (Eigen::Index j = 0; j < p; ++j) v -= ar(j) * u(t - 1 - j);
    for (Eigen::Index j = 0; j < q && t - 1 - j >= p; ++j) v -= ma(j) * e(t - 1 - j);
    e(t) = v;
    ssr += v * v;
  }
  const double m = static_cast<double>(n - p);
  return -0.5 * (m * (kLog2Pi + std::log(sigma2)) + ssr / sigma2);
}

struct Standardizer {
  double y_mean, y_sd;
  VectorXd x_mean, x_sd;
};

}  // namespace

bool polynomial_stable(const VectorXd& c) {
  const Eigen::Index p = c.size();
  if (p == 0) return true;
  MatrixXd C = MatrixXd::Zero(p, p);
  C.row(0) = c.transpose();
  for (Eigen::Index i = 1; i < p; ++i) C(i, i - 1) = 1.0;
  const auto ev = C.eigenvalues();
  return ev.cwiseAbs().maxCoeff() < 1.0 - 1e-10;  // unit roots come out a few ulps inside
}

double armax_loglik(const VectorXd& y, const MatrixXd& X, const VectorXd& beta, double intercept, const VectorXd& ar,
                    const VectorXd& ma, double sigma2, Likelihood kind) {
  if (X.rows() != y.size() || X.cols() != beta.size()) throw InputError("armax_loglik: dimension mismatch");
  if (!(sigma2 > 0.0)) throw InputError("armax_loglik: sigma2 must be positive");
  const VectorXd u = y - X * beta;
  if (kind == Likelihood::conditional) return css_loglik(u, intercept, ar, ma, sigma2);
  if (!polynomial_stable(ar)) throw InputError("armax_loglik: AR polynomial not stationary");
  const double mu = intercept / (1.0 - ar.sum());
  const VectorXd w = u.array() - mu;
  const auto s = kalman_arma(w, ar, ma);
  if (!s.ok) throw NumericalError("armax_loglik: non-positive prediction variance");
  const double n = static_cast<double>(y.size());
  return -0.5 * (n * (kLog2Pi + std::log(sigma2)) + s.sum_log_f + s.sum_v2_f / sigma2);
}

ArmaxFit fit_armax(const VectorXd& y_raw, const MatrixXd& X_raw, int p, int q, const ArmaxOptions& opt) {
  if (p < 0 || q < 0 || p + q < 1) throw InputError("fit_armax: need p, q >= 0 and p + q >= 1");
  if (X_raw.rows() != y_raw.size()) throw InputError("fit_armax: dimension mismatch");
  const Eigen::Index n = y_raw.size();
  const Eigen::Index k = X_raw.cols();
  if (n < 10 * (p + q + k + 2)) throw InputError("fit_armax: series too short for the requested order");

  Standardizer st{linalg::mean(y_raw), std::sqrt(linalg::variance(y_raw)), VectorXd(k), VectorXd(k)};
  if (!(st.y_sd > 0.0)) throw InputError("fit_armax: constant response");
  MatrixXd X(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    st.x_mean(j) = linalg::mean(X_raw.col(j));
    st.x_sd(j) = std::sqrt(linalg::variance(X_raw.col(j)));
    if (!(st.x_sd(j) > 0.0)) throw InputError("fit_armax: constant exogenous column");
    X.col(j) = (X_raw.col(j).array() - st.x_mean(j)) / st.x_sd(j);
  }
  const VectorXd y = (y_raw.array() - st.y_mean) / st.y_sd;
  linalg::require_full_rank(X, {}, "fit_armax exogenous block");

  // theta = [beta (k), mu, z_ar (p), z_ma (q)]
  auto unpack = [&](const VectorXd& th, VectorXd& b, double& mu, VectorXd& ar, VectorXd& ma) {
    b = th.head(k);
    mu = th(k);
    ar = pacf_to_coef(th.segment(k + 1, p));
    // invertible 1 + sum theta_j L^j is 1 - sum c_j L^j with c stable
    ma = -pacf_to_coef(th.segment(k + 1 + p, q));
  };
  auto concentrated = [&](const VectorXd& th, double* sigma2_out) {
    VectorXd b, ar, ma;
    double mu = 0.0;
    unpack(th, b, mu, ar, ma);
    const VectorXd w = (y - X * b).array() - mu;
    const auto s = kalman_arma(w, ar, ma);
    if (!s.ok) return kNegInf;
    const double nn = static_cast<double>(n);
    const double s2 = s.sum_v2_f / nn;
    if (sigma2_out) *sigma2_out = s2;
    return -0.5 * (nn * (kLog2Pi + std::log(s2) + 1.0) + s.sum_log_f);
  };
  auto objective = [&](const VectorXd& th) { return -concentrated(th, nullptr) / static_cast<double>(n); };

  // Restart 0: OLS slopes, AR start from an OLS autoregression of the
  // regression residuals, MA at zero.
  VectorXd th0 = VectorXd::Zero(k + 1 + p + q);
  {
    MatrixXd Z(n, k + 1);
    Z.leftCols(k) = X;
    Z.col(k).setOnes();
    const auto ls = linalg::ols(Z, y);
    th0.head(k) = ls.coef.head(k);
    th0(k) = ls.coef(k);
    if (p > 0) {
      const VectorXd u = ls.residuals;
      MatrixXd L(n - p, p);
      for (int j = 0; j < p; ++j) L.col(j) = u.segment(p - 1 - j, n - p);
      const VectorXd c = L.colPivHouseholderQr().solve(u.tail(n - p));
      if (auto z = coef_to_pacf(c)) th0.segment(k + 1, p) = *z;
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> jitter(0.0, 0.5);
  optim::BfgsOptions bo;
  bo.max_iter = opt.max_iter;
  bo.grad_tol = 1e-7;
  bo.f_rel_tol = 1e-13;

  ArmaxFit best;
  best.loglik = kNegInf;
  ArmaxFit best_any;
  best_any.loglik = kNegInf;
  for (int rs = 0; rs < std::max(1, opt.n_restarts); ++rs) {
    VectorXd start = th0;
    if (rs > 0) {
      for (Eigen::Index i = k + 1; i < start.size(); ++i) start(i) += jitter(rng);
      for (Eigen::Index i = 0; i < k; ++i) start(i) += 0.1 * jitter(rng);
    }
    const auto res = optim::minimize_bfgs(objective, start, bo);
    if (!std::isfinite(res.f)) continue;
    double s2 = 0.0;
    const double ll_std = concentrated(res.x, &s2);
    VectorXd b, ar, ma;
    double mu = 0.0;
    unpack(res.x, b, mu, ar, ma);
    ArmaxFit f;
    f.p = p;
    f.q = q;
    f.ar = ar;
    f.ma = ma;
    f.beta = (st.y_sd * b.array() / st.x_sd.array()).matrix();
    f.mef = k > 0 ? f.beta(0) : 0.0;
    const double mu_raw = st.y_mean - f.beta.dot(st.x_mean) + st.y_sd * mu;
    f.intercept = mu_raw * (1.0 - ar.sum());
    f.sigma2 = s2 * st.y_sd * st.y_sd;
    f.loglik = ll_std - static_cast<double>(n) * std::log(st.y_sd);
    f.n_obs = n;
    f.converged = res.converged;
    f.restart = rs;
    if (f.loglik > best_any.loglik) best_any = f;
    if (f.converged && f.loglik > best.loglik) best = f;
  }
  if (!std::isfinite(best.loglik)) {
    throw ArmaxConvergenceError("fit_armax(" + std::to_string(p) + "," + std::to_string(q) +
                                    "): no restart converged",
                                best_any);
  }
  const auto near_unit = [](const VectorXd& c) {
    if (c.size() == 0) return false;
    MatrixXd C = MatrixXd::Zero(c.size(), c.size());
    C.row(0) = c.transpose();
    for (Eigen::Index i = 1; i < c.size(); ++i) C(i, i - 1) = 1.0;
    return C.eigenvalues().cwiseAbs().maxCoeff() > 1.0 - 1e-6;
  };
  if (near_unit(best.ar) || near_unit(-best.ma)) {
    throw ArmaxConvergenceError("fit_armax(" + std::to_string(p) + "," + std::to_string(q) +
                                    "): optimum has a root on or inside the unit circle",
                                best);
  }
  return best;
}

ArmaxFit fit_armax(const HourlySeries& E, const HourlySeries& G, int p, int q, const ArmaxOptions& opt) {
  require_aligned(E, G, "fit_armax");
  return fit_armax(VectorXd(E.as_vector()), MatrixXd(G.as_vector()), p, q, opt);
}

const ArmaOrderCell& ArmaOrderSelection::best() const {
  for (const auto& c : grid) {
    if (c.p == p && c.q == q) return c;
  }
  throw InputError("ArmaOrderSelection: empty grid");
}

ArmaOrderSelection select_arma_order(const VectorXd& y, const MatrixXd& X, int p_max, int q_max,
                                     const ArmaxOptions& opt) {
  if (p_max < 0 || q_max < 0 || p_max + q_max < 1) throw InputError("select_arma_order: grid has no order with p + q >= 1");
  if (p_max > 6 || q_max > 6) throw InputError("select_arma_order: p_max and q_max must be <= 6");
  ArmaOrderSelection sel;
  for (int p = 0; p <= p_max; ++p) {
    for (int q = 0; q <= q_max; ++q) {
      if (p + q == 0) continue;
      ArmaOrderCell cell;
      cell.p = p;
      cell.q = q;
      try {
        cell.fit = fit_armax(y, X, p, q, opt);
        cell.ic = information_criteria(cell.fit.loglik, cell.fit.n_params(), cell.fit.n_obs);
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();
        log::warn("ARMA(" + std::to_string(p) + "," + std::to_string(q) + ") failed: " + e.what());
      }
      sel.grid.push_back(std::move(cell));
    }
  }
  const ArmaOrderCell *by_ll = nullptr, *by_aic = nullptr, *by_bic = nullptr, *by_hq = nullptr;
  for (const auto& c : sel.grid) {
    if (!c.ok) continue;
    if (!by_ll || c.fit.loglik > by_ll->fit.loglik) by_ll = &c;
    if (!by_aic || c.ic.aic < by_aic->ic.aic) by_aic = &c;
    if (!by_bic || c.ic.bic < by_bic->ic.bic) by_bic = &c;
    if (!by_hq || c.ic.hqic < by_hq->ic.hqic) by_hq = &c;
  }
  if (!by_ll) throw NumericalError("select_arma_order: every cell failed");
  sel.p = by_ll->p;
  sel.q = by_ll->q;
  sel.p_aic = by_aic->p;
  sel.q_aic = by_aic->q;
  sel.p_bic = by_bic->p;
  sel.q_bic = by_bic->q;
  sel.p_hqic = by_hq->p;
  sel.q_hqic = by_hq->q;
  return sel;
}

}  // namespace regime_mef::linmodels
