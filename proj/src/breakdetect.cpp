#include "regime_mef/breakdetect.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "regime_mef/error.hpp"
#include "regime_mef/linalg.hpp"
#include "regime_mef/parallel.hpp"

namespace regime_mef::breakdetect {
namespace {

using Eigen::LLT;

/// Indices of the h smallest squared residuals, ties to the lower index,
/// returned as a 0/1 mask; also returns their sum.
double select_h_smallest(const VectorXd& r, Index h, std::vector<char>& mask, std::vector<Index>& scratch) {
  const Index T = r.size();
  scratch.resize(static_cast<std::size_t>(T));
  std::iota(scratch.begin(), scratch.end(), Index{0});
  mask.assign(static_cast<std::size_t>(T), 0);
  if (h >= T) {
    std::fill(mask.begin(), mask.end(), 1);
    return r.squaredNorm();
  }
  auto less = [&](Index a, Index b) {
    const double ra = r(a) * r(a), rb = r(b) * r(b);
    return ra < rb || (ra == rb && a < b);
  };
  std::nth_element(scratch.begin(), scratch.begin() + h, scratch.end(), less);
  double s = 0.0;
  for (Index i = 0; i < h; ++i) {
    const Index idx = scratch[static_cast<std::size_t>(i)];
    mask[static_cast<std::size_t>(idx)] = 1;
    s += r(idx) * r(idx);
  }
  return s;
}

/// Normal equations for every row, adjusted for a subset by subtracting the
/// excluded rows (or summing the included ones when that is cheaper).
struct SubsetSolver {
  const MatrixXd& X;
  const VectorXd& y;
  MatrixXd A_full;
  VectorXd c_full;

  SubsetSolver(const MatrixXd& X_, const VectorXd& y_) : X(X_), y(y_) {
    A_full = X.transpose() * X;
    c_full = X.transpose() * y;
  }

  std::optional<VectorXd> solve(const std::vector<char>& mask, Index included) const {
    const Index T = X.rows();
    const Index p = X.cols();
    MatrixXd A;
    VectorXd c;
    if (T - included <= included) {
      A = A_full;
      c = c_full;
      for (Index t = 0; t < T; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) {
          A.noalias() -= X.row(t).transpose() * X.row(t);
          c -= X.row(t).transpose() * y(t);
        }
      }
    } else {
      A = MatrixXd::Zero(p, p);
      c = VectorXd::Zero(p);
      for (Index t = 0; t < T; ++t) {
        if (mask[static_cast<std::size_t>(t)]) {
          A.noalias() += X.row(t).transpose() * X.row(t);
          c += X.row(t).transpose() * y(t);
        }
      }
    }
    LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      VectorXd b = llt.solve(c);
      if (b.allFinite()) return b;
    }
    // fall back to QR on the included rows
    MatrixXd Xs(included, p);
    VectorXd ys(included);
    Index k = 0;
    for (Index t = 0; t < T; ++t) {
      if (mask[static_cast<std::size_t>(t)]) {
        Xs.row(k) = X.row(t);
        ys(k++) = y(t);
      }
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Xs);
    if (qr.rank() < p) return std::nullopt;
    return VectorXd(qr.solve(ys));
  }
};

struct CStepResult {
  double objective;
  VectorXd coef;
};

/// Concentration steps from coefficient vector b; at most max_steps refits.
CStepResult csteps(const SubsetSolver& S, VectorXd b, Index h, int max_steps, std::vector<char>& mask,
                   std::vector<Index>& scratch) {
  double obj = select_h_smallest(S.y - S.X * b, h, mask, scratch);
  std::vector<char> prev;
  for (int it = 0; it < max_steps; ++it) {
    prev = mask;
    auto nb = S.solve(mask, h);
    if (!nb) break;
    const double nobj = select_h_smallest(S.y - S.X * *nb, h, mask, scratch);
    if (nobj > obj) {  // cannot happen in exact arithmetic; keep the better fit
      mask = prev;
      break;
    }
    b = std::move(*nb);
    const bool same = mask == prev;
    obj = nobj;
    if (same) break;
  }
  return {obj, std::move(b)};
}

std::uint64_t tau_seed(std::uint64_t seed, Index tau) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tau)};
  std::uint32_t parts[2];
  seq.generate(parts, parts + 2);
  return (static_cast<std::uint64_t>(parts[0]) << 32) | parts[1];
}

Index window_first(const BrokenTrendSpec& spec, Index T) { return static_cast<Index>(std::floor(spec.window_lower * T)); }
Index window_last(const BrokenTrendSpec& spec, Index T) { return static_cast<Index>(std::floor(spec.window_upper * T)); }

void require_length(const VectorXd& prices, const BrokenTrendSpec& spec) {
  spec.validate();
  if (prices.size() < spec.min_length) {
    throw InputError("break scan needs at least " + std::to_string(spec.min_length) + " observations");
  }
  if (!prices.allFinite()) throw InputError("break scan: non-finite price");
}

}  // namespace

void BrokenTrendSpec::validate() const {
  if (!(trim_fraction > 0.5 && trim_fraction <= 1.0)) throw InputError("trim_fraction must lie in (0.5, 1]");
  if (!(window_lower > 0.0 && window_lower < window_upper && window_upper < 1.0)) {
    throw InputError("search window must satisfy 0 < lower < upper < 1");
  }
  if (baseline_degree < 1 || baseline_degree > 3) throw InputError("baseline_degree must be 1, 2 or 3");
  if (!(weight_quantile > 0.5 && weight_quantile < 1.0)) throw InputError("weight_quantile must lie in (0.5, 1)");
  if (n_starts < 0) throw InputError("n_starts must be >= 0");
}

Index BrokenTrendSpec::h(Index T) const {
  return static_cast<Index>(std::floor(trim_fraction * static_cast<double>(T) + 1e-9));
}

MatrixXd broken_trend_design(Index T, Index tau, int degree) {
  MatrixXd X(T, degree + 2);
  const double scale = T > 1 ? 2.0 / static_cast<double>(T - 1) : 0.0;
  for (Index t = 0; t < T; ++t) {
    const double s = -1.0 + scale * static_cast<double>(t);
    double pw = 1.0;
    for (int d = 0; d <= degree; ++d) {
      X(t, d) = pw;
      pw *= s;
    }
    X(t, degree + 1) = t > tau ? static_cast<double>(t - tau) : 0.0;
  }
  return X;
}

ConditionalFit fit_conditional(const VectorXd& prices, Index tau, const BrokenTrendSpec& spec) {
  spec.validate();
  const Index T = prices.size();
  if (tau < 0 || tau >= T - 1) throw InputError("fit_conditional: break index outside the sample");
  const MatrixXd X = broken_trend_design(T, tau, spec.baseline_degree);
  std::vector<std::string> labels{"intercept"};
  for (int d = 1; d <= spec.baseline_degree; ++d) labels.push_back("s^" + std::to_string(d));
  labels.push_back("delta");
  const auto fit = linalg::ols(X, prices, labels);
  return {fit.coef, fit.residuals};
}

double lts_objective(const VectorXd& residuals, Index h, int n_params) {
  if (h < n_params) throw InputError("lts_objective: h must be at least the number of parameters");
  if (h > residuals.size()) throw InputError("lts_objective: h exceeds the sample size");
  std::vector<double> sq(static_cast<std::size_t>(residuals.size()));
  for (Index i = 0; i < residuals.size(); ++i) sq[static_cast<std::size_t>(i)] = residuals(i) * residuals(i);
  if (h < residuals.size()) std::nth_element(sq.begin(), sq.begin() + h, sq.end());
  return std::accumulate(sq.begin(), sq.begin() + h, 0.0);
}

LtsFit lts_fit(const VectorXd& prices, Index tau, const BrokenTrendSpec& spec) {
  const Index T = prices.size();
  const MatrixXd X = broken_trend_design(T, tau, spec.baseline_degree);
  const Index p = X.cols();
  const Index h = spec.h(T);
  if (h < p) throw InputError("lts_fit: h is smaller than the number of parameters");
  const SubsetSolver S(X, prices);
  std::vector<char> all(static_cast<std::size_t>(T), 1);
  auto ols = S.solve(all, T);
  if (!ols) throw RankDeficiencyError("lts_fit: broken-trend design is rank deficient", {"delta"});

  std::vector<char> mask;
  std::vector<Index> scratch;
  LtsFit best;
  if (h >= T) {
    best.coefficients = *ols;
    best.residuals = prices - X * *ols;
    best.objective = best.residuals.squaredNorm();
    return best;
  }

  // short runs from every start, then full concentration from the best few
  struct Start {
    double obj;
    VectorXd coef;
    int id;
  };
  std::vector<Start> starts;
  {
    auto r = csteps(S, *ols, h, 2, mask, scratch);
    starts.push_back({r.objective, r.coef, 0});
  }
  std::mt19937_64 rng(tau_seed(spec.seed, tau));
  std::uniform_int_distribution<Index> pick(0, T - 1);
  std::vector<Index> rows(static_cast<std::size_t>(p));
  for (int s = 0; s < spec.n_starts; ++s) {
    std::optional<VectorXd> b;
    for (int attempt = 0; attempt < 20 && !b; ++attempt) {
      for (Index k = 0; k < p; ++k) {
        Index r;
        do {
          r = pick(rng);
        } while (std::find(rows.begin(), rows.begin() + k, r) != rows.begin() + k);
        rows[static_cast<std::size_t>(k)] = r;
      }
      MatrixXd Xe(p, p);
      VectorXd ye(p);
      for (Index k = 0; k < p; ++k) {
        Xe.row(k) = X.row(rows[static_cast<std::size_t>(k)]);
        ye(k) = prices(rows[static_cast<std::size_t>(k)]);
      }
      Eigen::FullPivLU<MatrixXd> lu(Xe);
      if (lu.rank() == p) b = lu.solve(ye);
    }
    if (!b) continue;
    auto r = csteps(S, *b, h, 2, mask, scratch);
    starts.push_back({r.objective, r.coef, s + 1});
  }
  std::stable_sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.obj < b.obj; });
  best.objective = std::numeric_limits<double>::infinity();
  const std::size_t finals = std::min<std::size_t>(starts.size(), 5);
  for (std::size_t i = 0; i < finals; ++i) {
    auto r = csteps(S, starts[i].coef, h, 100, mask, scratch);
    if (r.objective < best.objective) {
      best.objective = r.objective;
      best.coefficients = r.coef;
    }
  }
  best.residuals = prices - X * best.coefficients;
  return best;
}

double consistency_factor(Index h, Index T) {
  if (h <= 0 || h > T) throw InputError("consistency_factor: need 0 < h <= T");
  if (h == T) return 1.0;
  const double n = static_cast<double>(T), hh = static_cast<double>(h);
  boost::math::normal z;
  const double q = boost::math::quantile(z, (hh + n) / (2.0 * n));
  return std::sqrt(1.0 / (1.0 - (2.0 * n / hh) * q * boost::math::pdf(z, q)));
}

double robust_scale(double S, Index h, Index T, int n_params) {
  if (!(S > 0.0) || h <= 0 || T <= 0 || n_params <= 0) throw InputError("robust_scale: inputs must be positive");
  return consistency_factor(h, T) * std::sqrt(S / static_cast<double>(h));
}

BrokenTrendFit reweight_and_infer(const VectorXd& prices, Index tau_hat, const VectorXd& residuals, double sigma_tilde,
                                  const BrokenTrendSpec& spec) {
  const Index T = prices.size();
  if (residuals.size() != T) throw InputError("reweight_and_infer: residuals do not match the prices");
  if (!(sigma_tilde > 0.0)) throw InputError("reweight_and_infer: sigma must be positive");
  boost::math::normal z;
  const double cut = boost::math::quantile(z, spec.weight_quantile);
  BrokenTrendFit fit;
  fit.tau_hat = tau_hat;
  fit.sigma_tilde = sigma_tilde;
  fit.weights.resize(static_cast<std::size_t>(T));
  Index kept = 0;
  for (Index t = 0; t < T; ++t) {
    const int w = std::abs(residuals(t) / sigma_tilde) <= cut ? 1 : 0;
    fit.weights[static_cast<std::size_t>(t)] = w;
    kept += w;
  }
  const MatrixXd X = broken_trend_design(T, tau_hat, spec.baseline_degree);
  const Index p = X.cols();
  if (kept == 0) throw NumericalError("reweight_and_infer: every observation was flagged as an outlier");
  if (kept <= p) throw NumericalError("reweight_and_infer: too few observations kept for inference");
  MatrixXd Xs(kept, p);
  VectorXd ys(kept);
  Index k = 0;
  for (Index t = 0; t < T; ++t) {
    if (fit.weights[static_cast<std::size_t>(t)]) {
      Xs.row(k) = X.row(t);
      ys(k++) = prices(t);
    }
  }
  const auto ls = linalg::ols(Xs, ys);
  const double s2 = ls.ssr / static_cast<double>(kept - p);
  fit.coefficients = ls.coef;
  fit.delta_hat = ls.coef(p - 1);
  fit.se_delta = std::sqrt(s2 * ls.xtx_inv(p - 1, p - 1));
  fit.t_delta = fit.se_delta > 0.0 ? fit.delta_hat / fit.se_delta : 0.0;
  fit.break_declared = std::abs(fit.t_delta) > spec.t_critical;
  return fit;
}

BrokenTrendFit scan_breaks(const VectorXd& prices, const BrokenTrendSpec& spec) {
  require_length(prices, spec);
  const Index T = prices.size();
  const Index lo = window_first(spec, T), hi = std::min(window_last(spec, T), T - 2);
  if (hi < lo) throw InputError("break scan: empty search window");
  const Index h = spec.h(T);
  const int p = spec.baseline_degree + 2;
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  std::vector<LtsFit> fits(n);
  VectorXd tpath(static_cast<Index>(n));
  parallel_for(n, [&](std::size_t i) {
    const Index tau = lo + static_cast<Index>(i);
    fits[i] = lts_fit(prices, tau, spec);
    double t = 0.0;
    if (fits[i].objective > 0.0) {
      try {
        t = reweight_and_infer(prices, tau, fits[i].residuals, robust_scale(fits[i].objective, h, T, p), spec).t_delta;
      } catch (const NumericalError&) {
        t = std::numeric_limits<double>::quiet_NaN();
      }
    }
    tpath(static_cast<Index>(i)) = t;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (fits[i].objective < fits[best].objective) best = i;
  }
  const Index tau_hat = lo + static_cast<Index>(best);
  const double S = fits[best].objective;
  BrokenTrendFit out;
  if (S > 0.0) {
    out = reweight_and_infer(prices, tau_hat, fits[best].residuals, robust_scale(S, h, T, p), spec);
  } else {
    // exact fit: every point on the broken line
    out.tau_hat = tau_hat;
    out.coefficients = fits[best].coefficients;
    out.delta_hat = fits[best].coefficients(p - 1);
    out.weights.assign(static_cast<std::size_t>(T), 1);
    out.t_delta = out.delta_hat == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), out.delta_hat);
    out.break_declared = out.delta_hat != 0.0;
  }
  out.h = h;
  out.objective = S;
  out.candidates.resize(n);
  out.objective_path.resize(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.candidates[i] = lo + static_cast<Index>(i);
    out.objective_path(static_cast<Index>(i)) = fits[i].objective;
  }
  out.tstat_path = tpath;
  return out;
}

BrokenTrendFit scan_breaks(const HourlySeries& daily_prices, const BrokenTrendSpec& spec) {
  auto fit = scan_breaks(VectorXd(daily_prices.as_vector()), spec);
  fit.tau_date = daily_prices.time_at(static_cast<std::size_t>(fit.tau_hat));
  return fit;
}

VectorXd tstat_path(const VectorXd& prices, const BrokenTrendSpec& spec) { return scan_breaks(prices, spec).tstat_path; }

}  // namespace regime_mef::breakdetect
