#include "regime_mef/msarx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "regime_mef/log.hpp"

namespace regime_mef::msarx {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-state conditional means for every row: T x n.
MatrixXd state_means(const MsArxParams& p, const MsArxData& d) {
  const int n = p.n_states();
  MatrixXd mu(d.size(), n);
  for (int k = 0; k < n; ++k) {
    VectorXd m = VectorXd::Constant(d.size(), p.alpha(k)) + p.phi(k) * d.ylag;
    const int nc = d.n_covariates();
    if (nc > 0) m += d.X.leftCols(nc) * p.beta.row(k).transpose();
    if (d.n_interactions > 0) m += d.X.rightCols(d.n_interactions) * p.delta.row(k).transpose();
    mu.col(k) = m;
  }
  return mu;
}

VectorXd initial_distribution(const MsArxParams& p, const std::optional<VectorXd>& init) {
  if (!init) return ergodic_distribution(p.trans);
  if (init->size() != p.n_states() || (init->array() < 0.0).any() || std::abs(init->sum() - 1.0) > 1e-10) {
    throw InputError("initial state distribution must be a probability vector of length n_states");
  }
  return *init;
}

}  // namespace

void MsArxSpec::validate() const {
  if (n_states != 2 && n_states != 3) throw InputError("MS-ARX supports 2 or 3 states");
  if (ar_order != 1) throw InputError("MS-ARX supports AR order 1 only");
  if (std::find(covariate_labels.begin(), covariate_labels.end(), mef_covariate) == covariate_labels.end()) {
    throw InputError("mef_covariate '" + mef_covariate + "' is not a covariate");
  }
}

MatrixXd MsArxData::regressors() const {
  MatrixXd Z(size(), n_regressors());
  Z.col(0).setOnes();
  Z.col(1) = ylag;
  Z.rightCols(X.cols()) = X;
  return Z;
}

MsArxData MsArxData::from_raw(const VectorXd& y_raw, const MatrixXd& X_raw, std::vector<std::string> labels) {
  if (X_raw.rows() != y_raw.size()) throw InputError("MsArxData: covariate rows do not match y");
  if (y_raw.size() < 2) throw InputError("MsArxData: need at least 2 raw observations");
  const Eigen::Index T = y_raw.size() - 1;
  MsArxData d;
  d.y = y_raw.tail(T);
  d.ylag = y_raw.head(T);
  d.X = X_raw.bottomRows(T);
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < X_raw.cols(); ++j) labels.push_back("x" + std::to_string(j + 1));
  }
  d.covariate_labels = std::move(labels);
  return d;
}

MsArxData build_data(const HourlySeries& y, const std::vector<HourlySeries>& covariates, const MsArxSpec& spec) {
  spec.validate();
  if (covariates.size() != spec.covariate_labels.size()) {
    throw InputError("build_data: covariate count does not match the spec labels");
  }
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto nc = static_cast<Eigen::Index>(covariates.size());
  MatrixXd X(n, nc);
  for (Eigen::Index j = 0; j < nc; ++j) {
    require_aligned(y, covariates[static_cast<std::size_t>(j)], "MS-ARX covariate");
    X.col(j) = covariates[static_cast<std::size_t>(j)].as_vector();
  }
  std::vector<std::string> labels = spec.covariate_labels;
  if (spec.break_date) {
    VectorXd D(n);
    for (Eigen::Index t = 0; t < n; ++t) D(t) = y.time_at(static_cast<std::size_t>(t)) >= *spec.break_date ? 1.0 : 0.0;
    const double ones = D.tail(n - 1).sum();
    if (ones == 0.0 || ones == static_cast<double>(n - 1)) {
      throw InputError("break date " + format_rfc3339(*spec.break_date) +
                       " leaves the post-break dummy constant over the sample; interactions are unidentified");
    }
    MatrixXd Xi(n, 2 * nc);
    Xi.leftCols(nc) = X;
    for (Eigen::Index j = 0; j < nc; ++j) {
      Xi.col(nc + j) = X.col(j).cwiseProduct(D);
      labels.push_back("D*" + spec.covariate_labels[static_cast<std::size_t>(j)]);
    }
    X = std::move(Xi);
  }
  MsArxData d = MsArxData::from_raw(y.as_vector(), X, std::move(labels));
  d.n_interactions = spec.break_date ? static_cast<int>(nc) : 0;
  d.timestamps.resize(static_cast<std::size_t>(d.size()));
  for (std::size_t t = 0; t < d.timestamps.size(); ++t) d.timestamps[t] = y.time_at(t + 1);
  return d;
}

MsArxParams MsArxParams::make(int n_states, int n_covariates, int n_interactions) {
  MsArxParams p;
  p.alpha = VectorXd::Zero(n_states);
  p.phi = VectorXd::Zero(n_states);
  p.beta = MatrixXd::Zero(n_states, n_covariates);
  p.delta = MatrixXd::Zero(n_states, n_interactions);
  p.sigma2 = 1.0;
  p.trans = MatrixXd::Constant(n_states, n_states, 1.0 / n_states);
  return p;
}

VectorXd MsArxParams::state_coefficients(int k) const {
  VectorXd c(2 + beta.cols() + delta.cols());
  c(0) = alpha(k);
  c(1) = phi(k);
  c.segment(2, beta.cols()) = beta.row(k).transpose();
  c.tail(delta.cols()) = delta.row(k).transpose();
  return c;
}

void MsArxParams::set_state_coefficients(int k, const VectorXd& c) {
  alpha(k) = c(0);
  phi(k) = c(1);
  beta.row(k) = c.segment(2, beta.cols()).transpose();
  delta.row(k) = c.tail(delta.cols()).transpose();
}

void MsArxParams::validate(const MsArxData* data) const {
  const int n = n_states();
  if (n < 1 || phi.size() != n || beta.rows() != n || delta.rows() != n || trans.rows() != n || trans.cols() != n) {
    throw InputError("MsArxParams: inconsistent state dimensions");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("MsArxParams: sigma2 must be positive");
  for (int i = 0; i < n; ++i) {
    if ((trans.row(i).array() < 0.0).any() || (trans.row(i).array() > 1.0).any() ||
        std::abs(trans.row(i).sum() - 1.0) > 1e-12) {
      throw InputError("MsArxParams: transition matrix must be row-stochastic");
    }
  }
  if (data && (beta.cols() != data->n_covariates() || delta.cols() != data->n_interactions)) {
    throw InputError("MsArxParams: covariate count does not match the data");
  }
}

MsArxParams MsArxParams::permuted(const std::vector<int>& order) const {
  MsArxParams p = *this;
  const int n = n_states();
  for (int i = 0; i < n; ++i) {
    p.set_state_coefficients(i, state_coefficients(order[static_cast<std::size_t>(i)]));
    for (int j = 0; j < n; ++j) p.trans(i, j) = trans(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return p;
}

VectorXd ergodic_distribution(const MatrixXd& trans) {
  const Eigen::Index n = trans.rows();
  MatrixXd A = trans.transpose() - MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  VectorXd b = VectorXd::Zero(n);
  b(n - 1) = 1.0;
  VectorXd pi = A.fullPivLu().solve(b);
  pi = pi.cwiseMax(0.0);
  const double s = pi.sum();
  if (!(s > 0.0) || !pi.allFinite()) return VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return pi / s;
}

FilterOutput hamilton_filter(const MsArxParams& params, const MsArxData& data, const std::optional<VectorXd>& init) {
  params.validate(&data);
  const int n = params.n_states();
  const Eigen::Index T = data.size();
  if (T < 1) throw InputError("hamilton_filter: empty sample");
  const MatrixXd mu = state_means(params, data);
  const double log_norm = -0.5 * (kLog2Pi + std::log(params.sigma2));
  const double inv_s2 = 1.0 / params.sigma2;

  FilterOutput out;
  out.predicted.resize(T, n);
  out.filtered.resize(T, n);
  out.loglik_t.resize(T);
  VectorXd pred = initial_distribution(params, init);
  VectorXd lw(n);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) pred = params.trans.transpose() * out.filtered.row(t - 1).transpose();
    out.predicted.row(t) = pred.transpose();
    double m = kNegInf;
    for (int k = 0; k < n; ++k) {
      const double r = data.y(t) - mu(t, k);
      lw(k) = pred(k) > 0.0 ? std::log(pred(k)) + log_norm - 0.5 * r * r * inv_s2 : kNegInf;
      m = std::max(m, lw(k));
    }
    if (!std::isfinite(m)) throw NumericalError("hamilton_filter: zero likelihood at t = " + std::to_string(t));
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      lw(k) = std::exp(lw(k) - m);
      s += lw(k);
    }
    out.loglik_t(t) = m + std::log(s);
    out.filtered.row(t) = (lw / s).transpose();
  }
  out.loglik = out.loglik_t.sum();
  if (!std::isfinite(out.loglik)) throw NumericalError("hamilton_filter: non-finite log-likelihood");
  return out;
}

SmoothedInference kim_smoother(const FilterOutput& f, const MsArxParams& params) {
  const Eigen::Index T = f.filtered.rows();
  const int n = params.n_states();
  SmoothedInference s;
  s.loglik = f.loglik;
  s.xi_smooth.resize(T, n);
  s.xi_smooth.row(T - 1) = f.filtered.row(T - 1);
  s.xi_joint.assign(static_cast<std::size_t>(std::max<Eigen::Index>(T - 1, 0)), MatrixXd::Zero(n, n));
  bool warned = false;
  VectorXd ratio(n);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (int j = 0; j < n; ++j) {
      const double pr = f.predicted(t + 1, j);
      if (pr < 1e-300) {
        ratio(j) = 0.0;
        if (!warned && s.xi_smooth(t + 1, j) > 0.0) {
          log::warn("kim_smoother: predicted probability below 1e-300 at t = " + std::to_string(t + 1));
          warned = true;
        }
      } else {
        ratio(j) = s.xi_smooth(t + 1, j) / pr;
      }
    }
    MatrixXd& J = s.xi_joint[static_cast<std::size_t>(t)];
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) J(i, j) = f.filtered(t, i) * params.trans(i, j) * ratio(j);
    }
    const double tot = J.sum();
    if (tot > 0.0) J /= tot;
    s.xi_smooth.row(t) = J.rowwise().sum().transpose();
  }
  return s;
}

BruteForce brute_force_loglik(const MsArxParams& params, const MsArxData& data, const std::optional<VectorXd>& init) {
  params.validate(&data);
  const int n = params.n_states();
  const Eigen::Index T = data.size();
  if (T < 1 || T > 15) throw InputError("brute_force_loglik: T must be in 1..15");
  const double paths_d = std::pow(static_cast<double>(n), static_cast<double>(T));
  if (paths_d > static_cast<double>(1 << 20)) throw InputError("brute_force_loglik: too many state paths");
  const auto paths = static_cast<std::int64_t>(paths_d);
  const VectorXd pi0 = initial_distribution(params, init);
  const MatrixXd mu = state_means(params, data);
  const double log_norm = -0.5 * (kLog2Pi + std::log(params.sigma2));
  MatrixXd ld(T, n);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int k = 0; k < n; ++k) {
      const double r = data.y(t) - mu(t, k);
      ld(t, k) = log_norm - 0.5 * r * r / params.sigma2;
    }
  }
  const MatrixXd logP = params.trans.array().log();
  std::vector<double> lp(static_cast<std::size_t>(paths));
  std::vector<int> path(static_cast<std::size_t>(T));
  double m = kNegInf;
  for (std::int64_t code = 0; code < paths; ++code) {
    std::int64_t c = code;
    for (Eigen::Index t = 0; t < T; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % n);
      c /= n;
    }
    double v = std::log(pi0(path[0])) + ld(0, path[0]);
    for (Eigen::Index t = 1; t < T; ++t) {
      v += logP(path[static_cast<std::size_t>(t - 1)], path[static_cast<std::size_t>(t)]) + ld(t, path[static_cast<std::size_t>(t)]);
    }
    lp[static_cast<std::size_t>(code)] = v;
    m = std::max(m, v);
  }
  if (!std::isfinite(m)) throw NumericalError("brute_force_loglik: every path has zero probability");
  BruteForce out;
  out.marginals = MatrixXd::Zero(T, n);
  double total = 0.0;
  for (std::int64_t code = 0; code < paths; ++code) {
    const double w = std::exp(lp[static_cast<std::size_t>(code)] - m);
    total += w;
    std::int64_t c = code;
    for (Eigen::Index t = 0; t < T; ++t) {
      out.marginals(t, static_cast<Eigen::Index>(c % n)) += w;
      c /= n;
    }
  }
  out.marginals /= total;
  out.loglik = m + std::log(total);
  return out;
}

Classification classify_regimes(const SmoothedInference& smoothed) {
  const Eigen::Index T = smoothed.xi_smooth.rows();
  const Eigen::Index n = smoothed.xi_smooth.cols();
  Classification c;
  c.labels.resize(static_cast<std::size_t>(T));
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < n; ++k) {
      if (smoothed.xi_smooth(t, k) > smoothed.xi_smooth(t, best)) best = k;
    }
    c.labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
    counts[static_cast<std::size_t>(best)] += 1.0;
  }
  for (double v : counts) c.shares.push_back(std::round(1000.0 * v / static_cast<double>(T)) / 1000.0);
  return c;
}

CovariateGenerator ar1_covariates(int n, double rho, double scale) {
  return [n, rho, scale](Eigen::Index rows, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd X(rows, n);
    const double sd0 = 1.0 / std::sqrt(1.0 - rho * rho);
    for (int j = 0; j < n; ++j) {
      double x = sd0 * z(rng);
      for (Eigen::Index t = 0; t < rows; ++t) {
        x = rho * x + z(rng);
        X(t, j) = scale * x;
      }
    }
    return X;
  };
}

Simulation simulate(const MsArxParams& params, Eigen::Index T, const CovariateGenerator& x_generator,
                    std::uint64_t seed) {
  if (T < 2) throw InputError("simulate: T must be >= 2");
  params.validate();
  constexpr Eigen::Index kBurn = 200;
  const Eigen::Index total = T + kBurn + 1;
  std::mt19937_64 rng(seed);
  const int n = params.n_states();
  const MatrixXd Xall = x_generator(total, rng);
  if (Xall.rows() != total || Xall.cols() != params.beta.cols() + params.delta.cols()) {
    throw InputError("simulate: covariate generator returned the wrong shape");
  }
  const VectorXd pi0 = ergodic_distribution(params.trans);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  auto draw = [&](const VectorXd& probs) {
    const double u = u01(rng);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += probs(k);
      if (u < acc) return k;
    }
    return n - 1;
  };
  const double sd = std::sqrt(params.sigma2);
  const int nc = static_cast<int>(params.beta.cols());
  std::vector<int> states(static_cast<std::size_t>(total));
  VectorXd y(total);
  int s = draw(pi0);
  double prev = 0.0;
  for (Eigen::Index t = 0; t < total; ++t) {
    if (t > 0) s = draw(params.trans.row(s).transpose());
    states[static_cast<std::size_t>(t)] = s;
    double m = params.alpha(s) + params.phi(s) * prev;
    if (nc > 0) m += Xall.row(t).head(nc).dot(params.beta.row(s));
    if (params.delta.cols() > 0) m += Xall.row(t).tail(params.delta.cols()).dot(params.delta.row(s));
    y(t) = m + sd * z(rng);
    prev = y(t);
  }
  Simulation sim;
  sim.data = MsArxData::from_raw(y.tail(T + 1), Xall.bottomRows(T + 1));
  sim.data.n_interactions = static_cast<int>(params.delta.cols());
  sim.states.assign(states.end() - T, states.end());
  return sim;
}

std::string state_name(int k, int n_states) {
  if (n_states == 2) return k == 0 ? "High" : "Low";
  return "S" + std::to_string(k + 1);
}

// ---------------------------------------------------------------------------
// Standard errors

namespace {

struct Packing {
  int n_states;
  int n_coef;
  Eigen::Index size() const { return n_states * n_coef + 1 + n_states * (n_states - 1); }
};

VectorXd pack(const MsArxParams& p, const Packing& pk) {
  VectorXd th(pk.size());
  Eigen::Index o = 0;
  for (int k = 0; k < pk.n_states; ++k) {
    th.segment(o, pk.n_coef) = p.state_coefficients(k);
    o += pk.n_coef;
  }
  th(o++) = p.sigma2;
  for (int i = 0; i < pk.n_states; ++i) {
    for (int j = 0; j < pk.n_states; ++j) {
      if (i != j) th(o++) = p.trans(i, j);
    }
  }
  return th;
}

/// Returns false for points outside the parameter space.
bool unpack(const VectorXd& th, const Packing& pk, MsArxParams& p) {
  Eigen::Index o = 0;
  for (int k = 0; k < pk.n_states; ++k) {
    p.set_state_coefficients(k, th.segment(o, pk.n_coef));
    o += pk.n_coef;
  }
  p.sigma2 = th(o++);
  if (!(p.sigma2 > 0.0)) return false;
  for (int i = 0; i < pk.n_states; ++i) {
    double off = 0.0;
    for (int j = 0; j < pk.n_states; ++j) {
      if (i == j) continue;
      const double v = th(o++);
      if (v <= 0.0 || v >= 1.0) return false;
      p.trans(i, j) = v;
      off += v;
    }
    if (off >= 1.0) return false;
    p.trans(i, i) = 1.0 - off;
  }
  return true;
}

}  // namespace

StandardErrors standard_errors(const MsArxParams& params, const MsArxData& data, SeMethod method) {
  params.validate(&data);
  const int n = params.n_states();
  const Packing pk{n, static_cast<int>(params.state_coefficients(0).size())};
  const VectorXd th0 = pack(params, pk);
  const Eigen::Index m = th0.size();
  MsArxParams work = params;
  auto contributions = [&](const VectorXd& th) -> std::optional<VectorXd> {
    if (!unpack(th, pk, work)) return std::nullopt;
    try {
      return hamilton_filter(work, data).loglik_t;
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto total = [&](const VectorXd& th) {
    auto c = contributions(th);
    return c ? c->sum() : std::numeric_limits<double>::quiet_NaN();
  };

  VectorXd h(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double hi = 1e-4 * std::max(std::abs(th0(i)), 1e-2);
    // keep probabilities and sigma2 inside their domain
    const auto sigma_at = static_cast<Eigen::Index>(pk.n_states * pk.n_coef);
    if (i == sigma_at) hi = std::min(hi, 0.25 * th0(i));
    if (i > sigma_at) hi = std::min(hi, 0.25 * std::min(th0(i), 1.0 - th0(i)));
    h(i) = hi;
  }

  StandardErrors out;
  out.values = th0;
  for (int k = 0; k < n; ++k) {
    const std::string s = "[" + state_name(k, n) + "]";
    out.labels.push_back("alpha" + s);
    out.labels.push_back("phi" + s);
    for (const auto& lab : data.covariate_labels) out.labels.push_back("beta_" + lab + s);
  }
  out.labels.push_back("sigma2");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) out.labels.push_back("p" + std::to_string(i + 1) + std::to_string(j + 1));
    }
  }

  MatrixXd opg = MatrixXd::Zero(m, m);
  auto compute_opg = [&] {
    MatrixXd G(data.size(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
      VectorXd tp = th0, tm = th0;
      tp(i) += h(i);
      tm(i) -= h(i);
      auto cp = contributions(tp);
      auto cm = contributions(tm);
      if (!cp || !cm) throw NumericalError("standard_errors: score evaluation left the parameter space");
      G.col(i) = (*cp - *cm) / (2.0 * h(i));
    }
    opg = G.transpose() * G;
  };

  MatrixXd H(m, m);
  bool hessian_ok = method != SeMethod::opg;
  if (hessian_ok) {
    const double f0 = total(th0);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = i; j < m; ++j) {
        double v;
        if (i == j) {
          VectorXd tp = th0, tm = th0;
          tp(i) += h(i);
          tm(i) -= h(i);
          v = (total(tp) - 2.0 * f0 + total(tm)) / (h(i) * h(i));
        } else {
          VectorXd a = th0, b = th0, c = th0, d = th0;
          a(i) += h(i), a(j) += h(j);
          b(i) += h(i), b(j) -= h(j);
          c(i) -= h(i), c(j) += h(j);
          d(i) -= h(i), d(j) -= h(j);
          v = (total(a) - total(b) - total(c) + total(d)) / (4.0 * h(i) * h(j));
        }
        H(i, j) = H(j, i) = v;
      }
    }
    const MatrixXd negH = -H;
    Eigen::LLT<MatrixXd> llt(negH);
    if (!negH.allFinite() || llt.info() != Eigen::Success) {
      log::warn("standard_errors: Hessian is not negative definite; using outer product of gradients");
      hessian_ok = false;
    }
  }

  MatrixXd V;
  if (!hessian_ok) {
    compute_opg();
    V = opg.inverse();
    out.method = SeMethod::opg;
  } else {
    const MatrixXd Hinv = (-H).inverse();
    if (method == SeMethod::sandwich) {
      compute_opg();
      V = Hinv * opg * Hinv;
      out.method = SeMethod::sandwich;
    } else {
      V = Hinv;
      out.method = SeMethod::numerical_hessian;
    }
  }
  out.se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace regime_mef::msarx
