#include "regime_mef/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "regime_mef/error.hpp"
#include "regime_mef/io.hpp"
#include "regime_mef/linalg.hpp"

namespace regime_mef::diagnostics {
namespace {

using Eigen::MatrixXd;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Dickey-Fuller tau, constant only, by sample size (Fuller 1976 table).
struct CvRow {
  double n;
  double cv1, cv5, cv10;
};
constexpr CvRow kDickeyFullerTau[] = {
    {25, -3.75, -3.00, -2.63},  {50, -3.58, -2.93, -2.60},  {100, -3.51, -2.89, -2.58},
    {250, -3.46, -2.88, -2.57}, {500, -3.44, -2.87, -2.57}, {std::numeric_limits<double>::infinity(), -3.43, -2.86, -2.57},
};

std::array<double, 3> dickey_fuller_cv(std::size_t n) {
  for (const auto& row : kDickeyFullerTau) {
    if (static_cast<double>(n) <= row.n) return {row.cv1, row.cv5, row.cv10};
  }
  return {-3.43, -2.86, -2.57};
}

std::string band_from_reject(const std::array<bool, 3>& r) {
  if (r[0]) return "<0.01";
  if (r[1]) return "0.01-0.05";
  if (r[2]) return "0.05-0.10";
  return ">0.10";
}

void fill_from_pvalue(TestResult& t) {
  for (int i = 0; i < 3; ++i) t.reject[i] = t.pvalue < kLevels[i];
  t.pvalue_band = band_from_reject(t.reject);
}

/// Left-tail test against critical values.
void fill_left_tail(TestResult& t, const std::array<double, 3>& cv) {
  t.critical_values = cv;
  t.pvalue = kNaN;
  for (int i = 0; i < 3; ++i) t.reject[i] = t.statistic < cv[i];
  t.pvalue_band = band_from_reject(t.reject);
}

double sample_sd(const Ref<const VectorXd>& x) {
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1));
}

/// Autocovariances (divisor n) of an already centered series for lags 0..L.
std::vector<double> autocov(const Ref<const VectorXd>& u, int L) {
  const auto n = u.size();
  std::vector<double> g(static_cast<std::size_t>(L) + 1, 0.0);
  for (int j = 0; j <= L && j < n; ++j) {
    g[static_cast<std::size_t>(j)] = u.tail(n - j).dot(u.head(n - j)) / static_cast<double>(n);
  }
  return g;
}

int auto_bandwidth_centered(const Ref<const VectorXd>& u) {
  const auto n = static_cast<double>(u.size());
  const int n_lag = static_cast<int>(std::floor(4.0 * std::pow(n / 100.0, 2.0 / 9.0)));
  const auto g = autocov(u, n_lag);
  double s0 = g[0], s1 = 0.0;
  for (int j = 1; j <= n_lag; ++j) {
    s0 += 2.0 * g[static_cast<std::size_t>(j)];
    s1 += 2.0 * j * g[static_cast<std::size_t>(j)];
  }
  if (s0 == 0.0) return 0;
  const double gamma = 1.1447 * std::cbrt((s1 / s0) * (s1 / s0));
  const int m = static_cast<int>(std::floor(gamma * std::cbrt(n)));
  return std::clamp(m, 0, static_cast<int>(n) - 1);
}

LongRunVariance bartlett_lrv(const Ref<const VectorXd>& u, int bandwidth) {
  if (u.size() < 20) throw InputError("long-run variance needs at least 20 observations");
  const int m = bandwidth < 0 ? auto_bandwidth_centered(u) : std::min<int>(bandwidth, static_cast<int>(u.size()) - 1);
  const auto g = autocov(u, m);
  double lrv = g[0];
  for (int j = 1; j <= m; ++j) lrv += 2.0 * (1.0 - j / (m + 1.0)) * g[static_cast<std::size_t>(j)];
  return {lrv, m};
}

VectorXd centered(const Ref<const VectorXd>& x) { return x.array() - x.mean(); }

/// Rows t = first..T-1 of [1, x_{t-1}, ..., x_{t-p}] and target x_t.
void ar_design(const Ref<const VectorXd>& x, int p, Eigen::Index first, MatrixXd& X, VectorXd& y) {
  const Eigen::Index n = x.size() - first;
  X.resize(n, p + 1);
  y = x.tail(n);
  X.col(0).setOnes();
  for (int k = 1; k <= p; ++k) X.col(k) = x.segment(first - k, n);
}

double info_value(double ssr, Eigen::Index n, Eigen::Index k, Criterion c) {
  const double nn = static_cast<double>(n);
  const double pen = c == Criterion::aic ? 2.0 : std::log(nn);
  return nn * std::log(ssr / nn) + pen * static_cast<double>(k);
}

double ssr_of(const MatrixXd& X, const VectorXd& y) {
  const VectorXd b = X.colPivHouseholderQr().solve(y);
  return (y - X * b).squaredNorm();
}

/// ADF regression with p lagged differences on rows t >= first.
struct AdfFit {
  double tau;
  double ssr;
  Eigen::Index n, k;
};

AdfFit adf_regression(const Ref<const VectorXd>& x, int p, Eigen::Index first, bool need_tau) {
  const Eigen::Index T = x.size();
  const Eigen::Index n = T - first;
  MatrixXd X(n, 2 + p);
  VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index t = first + r;
    y(r) = x(t) - x(t - 1);
    X(r, 0) = 1.0;
    X(r, 1) = x(t - 1);
    for (int j = 1; j <= p; ++j) X(r, 1 + j) = x(t - j) - x(t - j - 1);
  }
  if (!need_tau) return {kNaN, ssr_of(X, y), n, X.cols()};
  const auto fit = linalg::ols(X, y);
  const double s2 = fit.ssr / static_cast<double>(n - X.cols());
  return {fit.coef(1) / std::sqrt(s2 * fit.xtx_inv(1, 1)), fit.ssr, n, X.cols()};
}

}  // namespace

std::string TestResult::stars() const {
  if (reject[0]) return "***";
  if (reject[1]) return "**";
  if (reject[2]) return "*";
  return "";
}

int select_ar_order(const Ref<const VectorXd>& x, int p_max, Criterion criterion) {
  if (p_max < 1) throw InputError("select_ar_order: p_max must be >= 1");
  if (static_cast<double>(p_max) >= static_cast<double>(x.size()) / 10.0) {
    throw InputError("select_ar_order: p_max must be below length/10");
  }
  int best = 1;
  double best_ic = std::numeric_limits<double>::infinity();
  MatrixXd X;
  VectorXd y;
  for (int p = 1; p <= p_max; ++p) {
    ar_design(x, p, p_max, X, y);
    const double ic = info_value(ssr_of(X, y), X.rows(), X.cols(), criterion);
    if (ic < best_ic) {
      best_ic = ic;
      best = p;
    }
  }
  return best;
}

int newey_west_bandwidth(const Ref<const VectorXd>& x) { return auto_bandwidth_centered(centered(x)); }

LongRunVariance newey_west_lrv(const Ref<const VectorXd>& x, int bandwidth) {
  return bartlett_lrv(centered(x), bandwidth);
}

LongRunVariance newey_west_lrv_raw(const Ref<const VectorXd>& u, int bandwidth) { return bartlett_lrv(u, bandwidth); }

TestResult adf_test(const Ref<const VectorXd>& x, int max_lag, Criterion criterion) {
  const Eigen::Index T = x.size();
  if (max_lag < 0) max_lag = static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(T) / 100.0, 0.25)));
  if (T <= max_lag + 10) throw InputError("adf_test: series too short for max_lag " + std::to_string(max_lag));
  int best = 0;
  double best_ic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= max_lag; ++p) {
    const auto f = adf_regression(x, p, max_lag + 1, false);
    const double ic = info_value(f.ssr, f.n, f.k, criterion);
    if (ic < best_ic) {
      best_ic = ic;
      best = p;
    }
  }
  const auto fit = adf_regression(x, best, best + 1, true);
  TestResult r;
  r.test_name = "ADF";
  r.statistic = fit.tau;
  r.lag_or_bandwidth = best;
  fill_left_tail(r, dickey_fuller_cv(static_cast<std::size_t>(fit.n)));
  return r;
}

TestResult pp_test(const Ref<const VectorXd>& x, int bandwidth) {
  const Eigen::Index T = x.size();
  if (T < 21) throw InputError("pp_test: needs at least 21 observations");
  const Eigen::Index n = T - 1;
  MatrixXd X(n, 2);
  X.col(0) = x.head(n);
  X.col(1).setOnes();
  const VectorXd y = x.tail(n);
  const auto fit = linalg::ols(X, y);
  const double k = 2.0;
  const double nn = static_cast<double>(n);
  const double s2 = fit.ssr / (nn - k);
  const double s = std::sqrt(s2);
  const double gamma0 = s2 * (nn - k) / nn;
  const auto lrv = newey_west_lrv_raw(fit.residuals, bandwidth);
  const double lam2 = lrv.value;
  const double lam = std::sqrt(lam2);
  const double sigma = std::sqrt(s2 * fit.xtx_inv(0, 0));
  const double t = (fit.coef(0) - 1.0) / sigma;
  TestResult r;
  r.test_name = "PP";
  r.statistic = std::sqrt(gamma0 / lam2) * t - 0.5 * ((lam2 - gamma0) / lam) * (nn * sigma / s);
  r.lag_or_bandwidth = lrv.bandwidth;
  fill_left_tail(r, dickey_fuller_cv(static_cast<std::size_t>(n)));
  return r;
}

// Hobijn, Franses and Ooms automatic lag for the KPSS long-run variance.
static int kpss_auto_lag(const Ref<const VectorXd>& e) {
  const Eigen::Index n = e.size();
  const int cov_lags = static_cast<int>(std::pow(static_cast<double>(n), 2.0 / 9.0));
  double s0 = e.squaredNorm() / static_cast<double>(n);
  double s1 = 0.0;
  for (int i = 1; i <= cov_lags && i < n; ++i) {
    const double prod = e.tail(n - i).dot(e.head(n - i)) / (static_cast<double>(n) / 2.0);
    s0 += prod;
    s1 += i * prod;
  }
  const double gamma = 1.1447 * std::pow((s1 / s0) * (s1 / s0), 1.0 / 3.0);
  const int lag = static_cast<int>(gamma * std::pow(static_cast<double>(n), 1.0 / 3.0));
  return std::clamp(lag, 0, static_cast<int>(n) - 1);
}

TestResult kpss_test(const Ref<const VectorXd>& x, int bandwidth) {
  const VectorXd e = centered(x);
  const auto lrv = bartlett_lrv(e, bandwidth < 0 ? kpss_auto_lag(e) : bandwidth);
  double cum = 0.0, ss = 0.0;
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    cum += e(t);
    ss += cum * cum;
  }
  const double T = static_cast<double>(e.size());
  TestResult r;
  r.test_name = "KPSS";
  r.statistic = ss / (T * T * lrv.value);
  r.lag_or_bandwidth = lrv.bandwidth;
  r.critical_values = std::array<double, 3>{0.739, 0.463, 0.347};
  r.pvalue = kNaN;
  for (int i = 0; i < 3; ++i) r.reject[i] = r.statistic > (*r.critical_values)[i];
  r.pvalue_band = band_from_reject(r.reject);
  return r;
}

TestResult tsay_f_test(const Ref<const VectorXd>& x, int p) {
  if (p < 1) throw InputError("tsay_f_test: p must be >= 1");
  const Eigen::Index n = x.size() - p;
  const Eigen::Index M = static_cast<Eigen::Index>(p) * (p + 1) / 2;
  const double df2 = static_cast<double>(n - p - M - 1);
  if (df2 < 1.0) throw InputError("tsay_f_test: series too short for p = " + std::to_string(p));
  MatrixXd X;
  VectorXd y;
  ar_design(x, p, p, X, y);
  MatrixXd XZ(n, p + 1 + M);
  XZ.leftCols(p + 1) = X;
  Eigen::Index c = p + 1;
  for (int i = 1; i <= p; ++i) {
    for (int j = i; j <= p; ++j) XZ.col(c++) = X.col(i).cwiseProduct(X.col(j));
  }
  const double ssr0 = ssr_of(X, y);
  const double ssr1 = ssr_of(XZ, y);
  TestResult r;
  r.test_name = "TsayF";
  r.df1 = static_cast<double>(M);
  r.df2 = df2;
  r.statistic = ((ssr0 - ssr1) / r.df1) / (ssr1 / df2);
  r.lag_or_bandwidth = p;
  boost::math::fisher_f dist(r.df1, r.df2);
  r.pvalue = boost::math::cdf(boost::math::complement(dist, std::max(r.statistic, 0.0)));
  fill_from_pvalue(r);
  return r;
}

TestResult bds_test(const Ref<const VectorXd>& x, int m, double eps_sd) {
  const Eigen::Index n = x.size();
  if (m < 2) throw InputError("bds_test: embedding dimension must be >= 2");
  if (n < 500) throw InputError("bds_test: needs at least 500 observations");
  const double eps = eps_sd * sample_sd(x);
  // Sweep each diagonal (i, i+d) of the indicator matrix once, tracking the
  // run of consecutive close pairs to count m-histories.
  std::vector<double> rowsum(static_cast<std::size_t>(n), 1.0);
  double pairs_full = 0.0;  // close pairs i<j over all points
  double pairs_trim = 0.0;  // close pairs among points m-1..n-1
  double pairs_m = 0.0;     // close m-histories
  for (Eigen::Index d = 1; d < n; ++d) {
    int run = 0;
    for (Eigen::Index i = 0; i + d < n; ++i) {
      if (std::abs(x(i) - x(i + d)) < eps) {
        ++run;
        pairs_full += 1.0;
        rowsum[static_cast<std::size_t>(i)] += 1.0;
        rowsum[static_cast<std::size_t>(i + d)] += 1.0;
        if (i >= m - 1) pairs_trim += 1.0;
        if (run >= m) pairs_m += 1.0;
      } else {
        run = 0;
      }
    }
  }
  const double nn = static_cast<double>(n);
  const double c1 = pairs_full / (nn * (nn - 1.0) / 2.0);
  if (c1 < 0.001 || c1 > 0.999) {
    throw InputError("bds_test: correlation integral is degenerate (" + io::fixed(c1, 4) +
                     "); choose a different eps");
  }
  const double nm = nn - (m - 1);
  const double denom_m = nm * (nm - 1.0) / 2.0;
  const double cm = pairs_m / denom_m;
  const double c1_trim = pairs_trim / denom_m;
  double sum_sq = 0.0, sum_ind = 0.0;
  for (double rs : rowsum) {
    sum_sq += rs * rs;
    sum_ind += rs;
  }
  const double k = (sum_sq - 3.0 * sum_ind + 2.0 * nn) / (nn * (nn - 1.0) * (nn - 2.0));
  double tmp = 0.0;
  for (int j = 1; j < m; ++j) tmp += std::pow(k, m - j) * std::pow(c1, 2 * j);
  const double var = 4.0 * (std::pow(k, m) + 2.0 * tmp + (m - 1.0) * (m - 1.0) * std::pow(c1, 2 * m) -
                             static_cast<double>(m * m) * k * std::pow(c1, 2 * m - 2));
  if (!(var > 0.0)) throw NumericalError("bds_test: non-positive variance estimate");
  TestResult r;
  r.test_name = "BDS";
  r.statistic = std::sqrt(nm) * (cm - std::pow(c1_trim, m)) / std::sqrt(var);
  r.lag_or_bandwidth = m;
  boost::math::normal z;
  r.pvalue = 2.0 * boost::math::cdf(boost::math::complement(z, std::abs(r.statistic)));
  fill_from_pvalue(r);
  return r;
}

TestResult arch_portmanteau_test(const Ref<const VectorXd>& x, int lags) {
  if (lags < 1) throw InputError("arch_portmanteau_test: lags must be >= 1");
  const Eigen::Index n = x.size();
  if (n <= 2 * lags) throw InputError("arch_portmanteau_test: series too short");
  VectorXd z = centered(x).array().square().matrix();
  z = centered(z);
  const auto g = autocov(z, lags);
  if (!(g[0] > 0.0)) throw InputError("arch_portmanteau_test: squared series is constant");
  MatrixXd R(lags + 1, lags + 1);
  for (int i = 0; i <= lags; ++i) {
    for (int j = 0; j <= lags; ++j) R(i, j) = g[static_cast<std::size_t>(std::abs(i - j))] / g[0];
  }
  Eigen::LLT<MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw InputError("arch_portmanteau_test: autocorrelation matrix is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  if (logdet < std::log(1e-12)) throw InputError("arch_portmanteau_test: autocorrelation matrix is near singular");
  const double m = static_cast<double>(lags);
  TestResult r;
  r.test_name = "PR";
  r.statistic = static_cast<double>(n) * (1.0 - std::exp(logdet / m));
  r.lag_or_bandwidth = lags;
  const double mean = (m + 1.0) / 2.0;
  const double var = (m + 1.0) * (2.0 * m + 1.0) / (3.0 * m);
  boost::math::gamma_distribution<> dist(mean * mean / var, var / mean);
  r.pvalue = boost::math::cdf(boost::math::complement(dist, std::max(r.statistic, 0.0)));
  fill_from_pvalue(r);
  return r;
}

BatteryResult run_battery(const Ref<const VectorXd>& x, const std::string& label, const BatteryOptions& opt) {
  BatteryResult b;
  b.label = label;
  const int cap = static_cast<int>(std::ceil(static_cast<double>(x.size()) / 10.0)) - 1;
  b.ar_order = select_ar_order(x, std::min(opt.ar_order_max, cap));
  b.nw_bandwidth = newey_west_bandwidth(x);
  b.adf = adf_test(x, opt.adf_max_lag);
  b.pp = pp_test(x);
  b.kpss = kpss_test(x);
  b.tsay = tsay_f_test(x, b.ar_order);
  b.bds = bds_test(x, opt.bds_m, opt.bds_eps_sd);
  b.pr = arch_portmanteau_test(x, opt.pr_lags);
  return b;
}

std::string battery_to_csv(const std::vector<BatteryResult>& rows) {
  std::string out = "label,ADF,PP,KPSS,TsayF,BDS,PR,ar_order,adf_lag,nw_bandwidth\n";
  auto cell = [](const TestResult& t, int digits) { return io::fixed(t.statistic, digits) + t.stars(); };
  for (const auto& b : rows) {
    out += b.label + "," + cell(b.adf, 2) + "," + cell(b.pp, 2) + "," + cell(b.kpss, 3) + "," + cell(b.tsay, 2) + "," +
           cell(b.bds, 2) + "," + cell(b.pr, 2) + "," + std::to_string(b.ar_order) + "," +
           std::to_string(b.adf.lag_or_bandwidth) + "," + std::to_string(b.nw_bandwidth) + "\n";
  }
  return out;
}

}  // namespace regime_mef::diagnostics
