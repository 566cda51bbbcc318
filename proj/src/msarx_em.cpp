#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "regime_mef/linalg.hpp"
#include "regime_mef/log.hpp"
#include "regime_mef/msarx.hpp"
#include "regime_mef/optim.hpp"
#include "regime_mef/parallel.hpp"

namespace regime_mef::msarx {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Transition part of Q: sum N_ij log p_ij + sum xi_1(i) log pi(P)_i.
double transition_q(const MatrixXd& P, const MatrixXd& N, const VectorXd& xi0) {
  const VectorXd pi = ergodic_distribution(P);
  double q = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (N(i, j) > 0.0) q += N(i, j) * std::log(P(i, j));
    }
    if (xi0(i) > 0.0) q += xi0(i) * std::log(std::max(pi(i), 1e-300));
  }
  return q;
}

MatrixXd floored(MatrixXd P) {
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    P.row(i) = P.row(i).cwiseMax(kProbFloor);
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

/// Row-wise softmax with the last column as reference.
MatrixXd from_logits(const VectorXd& z, Eigen::Index n) {
  MatrixXd P(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = 0.0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) mx = std::max(mx, z(i * (n - 1) + j));
    double s = std::exp(-mx);
    P(i, n - 1) = s;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      P(i, j) = std::exp(z(i * (n - 1) + j) - mx);
      s += P(i, j);
    }
    P.row(i) /= s;
  }
  return floored(P);
}

VectorXd to_logits(const MatrixXd& P) {
  const Eigen::Index n = P.rows();
  VectorXd z(n * (n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j + 1 < n; ++j) z(i * (n - 1) + j) = std::log(P(i, j) / P(i, n - 1));
  }
  return z;
}

std::uint64_t restart_seed(std::uint64_t seed, int r) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(r)};
  std::uint64_t out[1];
  std::uint32_t parts[2];
  seq.generate(parts, parts + 2);
  out[0] = (static_cast<std::uint64_t>(parts[0]) << 32) | parts[1];
  return out[0];
}

MsArxParams initial_params(const MsArxData& data, int n_states) {
  const MatrixXd Z = data.regressors();
  const Eigen::Index T = data.size();
  const auto pooled = linalg::ols(Z, data.y);
  MsArxParams p = MsArxParams::make(n_states, data.n_covariates(), data.n_interactions);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(T));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return pooled.residuals(a) < pooled.residuals(b);
  });
  for (int g = 0; g < n_states; ++g) {
    VectorXd w = VectorXd::Zero(T);
    const auto lo = static_cast<std::size_t>(T * g / n_states);
    const auto hi = static_cast<std::size_t>(T * (g + 1) / n_states);
    double rsum = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      w(idx[r]) = 1.0;
      rsum += pooled.residuals(idx[r]);
    }
    VectorXd c = pooled.coef;
    try {
      c = linalg::wls(Z, data.y, w).coef;
    } catch (const Error&) {
      c(0) += rsum / static_cast<double>(std::max<std::size_t>(hi - lo, 1));
    }
    // high-residual group first
    p.set_state_coefficients(n_states - 1 - g, c);
  }
  p.sigma2 = pooled.ssr / static_cast<double>(T);
  const double stay = 0.95;
  for (int i = 0; i < n_states; ++i) {
    for (int j = 0; j < n_states; ++j) p.trans(i, j) = i == j ? stay : (1.0 - stay) / (n_states - 1);
  }
  return p;
}

MsArxParams jittered(const MsArxParams& base, const MsArxData& data, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> stay(0.7, 0.99);
  MsArxParams p = base;
  const auto pooled = linalg::ols(data.regressors(), data.y);
  for (int k = 0; k < p.n_states(); ++k) {
    VectorXd c = p.state_coefficients(k);
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) += 0.3 * z(rng) * (std::abs(pooled.coef(i)) + 0.1);
    c(1) = std::clamp(c(1), -0.99, 0.99);
    p.set_state_coefficients(k, c);
  }
  p.sigma2 *= std::exp(0.2 * z(rng));
  const int n = p.n_states();
  for (int i = 0; i < n; ++i) {
    const double s = stay(rng);
    for (int j = 0; j < n; ++j) p.trans(i, j) = i == j ? s : (1.0 - s) / (n - 1);
  }
  return p;
}

SmoothedInference permute_smoothed(const SmoothedInference& s, const std::vector<int>& order) {
  SmoothedInference out = s;
  const auto n = static_cast<Eigen::Index>(order.size());
  for (Eigen::Index i = 0; i < n; ++i) out.xi_smooth.col(i) = s.xi_smooth.col(order[static_cast<std::size_t>(i)]);
  for (std::size_t t = 0; t < s.xi_joint.size(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out.xi_joint[t](i, j) = s.xi_joint[t](order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

int mef_index_of(const MsArxSpec& spec) {
  const auto& l = spec.covariate_labels;
  return static_cast<int>(std::find(l.begin(), l.end(), spec.mef_covariate) - l.begin());
}

}  // namespace

SmoothedInference em_e_step(const MsArxParams& params, const MsArxData& data) {
  return kim_smoother(hamilton_filter(params, data), params);
}

MsArxParams em_m_step(const SmoothedInference& smoothed, const MsArxData& data, const MsArxParams* previous) {
  const Eigen::Index T = data.size();
  const int n = static_cast<int>(smoothed.xi_smooth.cols());
  if (smoothed.xi_smooth.rows() != T) throw InputError("em_m_step: smoothed probabilities do not match the data");
  const MatrixXd Z = data.regressors();
  const int K = data.n_regressors();
  MsArxParams p = previous ? *previous : MsArxParams::make(n, data.n_covariates(), data.n_interactions);

  std::vector<bool> collapsed(static_cast<std::size_t>(n), false);
  bool any_collapsed = false;
  double wssr = 0.0;
  for (int k = 0; k < n; ++k) {
    const VectorXd w = smoothed.xi_smooth.col(k);
    if (w.sum() < static_cast<double>(K)) {
      collapsed[static_cast<std::size_t>(k)] = true;
      any_collapsed = true;
      continue;
    }
    const MatrixXd ZtW = Z.transpose() * w.asDiagonal();
    const MatrixXd A = ZtW * Z;
    const VectorXd b = ZtW * data.y;
    Eigen::LDLT<MatrixXd> ldlt(A);
    VectorXd c = ldlt.solve(b);
    if (ldlt.info() != Eigen::Success || !c.allFinite() || (A * c - b).norm() > 1e-6 * (b.norm() + 1.0)) {
      c = linalg::wls(Z, data.y, w).coef;  // raises RankDeficiencyError if truly singular
    }
    p.set_state_coefficients(k, c);
    wssr += (w.array() * (data.y - Z * c).array().square()).sum();
  }

  // transition probabilities
  MatrixXd N = MatrixXd::Zero(n, n);
  for (const auto& J : smoothed.xi_joint) N += J;
  MatrixXd Pc = p.trans;
  for (int i = 0; i < n; ++i) {
    const double rs = N.row(i).sum();
    if (rs > 0.0) Pc.row(i) = N.row(i) / rs;
  }
  Pc = floored(Pc);
  const VectorXd xi0 = smoothed.xi_smooth.row(0).transpose();
  MatrixXd bestP = Pc;
  double bestQ = transition_q(Pc, N, xi0);
  {
    auto obj = [&](const VectorXd& z) { return -transition_q(from_logits(z, n), N, xi0); };
    optim::BfgsOptions bo;
    bo.max_iter = 100;
    bo.grad_tol = 1e-9;
    const auto r = optim::minimize_bfgs(obj, to_logits(Pc), bo);
    const MatrixXd Pr = from_logits(r.x, n);
    const double q = transition_q(Pr, N, xi0);
    if (q > bestQ) {
      bestQ = q;
      bestP = Pr;
    }
  }
  if (previous) {
    const double q = transition_q(previous->trans, N, xi0);
    if (q > bestQ) bestP = previous->trans;
  }
  p.trans = bestP;

  if (any_collapsed) {
    std::string which;
    for (int k = 0; k < n; ++k) {
      if (collapsed[static_cast<std::size_t>(k)]) which += (which.empty() ? "" : ", ") + std::to_string(k);
    }
    throw RegimeCollapseError("em_m_step: regime collapse (state " + which + " has weight below " +
                                  std::to_string(K) + ")",
                              p, collapsed);
  }
  p.sigma2 = wssr / static_cast<double>(T);
  if (!(p.sigma2 > 0.0)) throw NumericalError("em_m_step: zero residual variance");
  return p;
}

EmTrace run_em(MsArxParams& params, const MsArxData& data, const EmOptions& opt, SmoothedInference* last) {
  EmTrace trace;
  SmoothedInference s = em_e_step(params, data);
  trace.loglik.push_back(s.loglik);
  for (int it = 1; it <= opt.max_iter; ++it) {
    MsArxParams next = em_m_step(s, data, &params);
    SmoothedInference sn = em_e_step(next, data);
    const double delta = sn.loglik - s.loglik;
    params = std::move(next);
    s = std::move(sn);
    trace.loglik.push_back(s.loglik);
    trace.iterations = it;
    if (std::abs(delta) < opt.tol) {
      trace.converged = true;
      break;
    }
  }
  if (last) *last = std::move(s);
  return trace;
}

int parameter_count(int n_states, int n_covariates, int n_interactions) {
  return n_states * (2 + n_covariates + n_interactions) + n_states * (n_states - 1) + 1;
}

std::vector<int> canonical_order(const MsArxParams& params, int mef_index) {
  std::vector<int> order(static_cast<std::size_t>(params.n_states()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return params.beta(a, mef_index) > params.beta(b, mef_index); });
  return order;
}

MsArxFit fit_em(const MsArxSpec& spec, const MsArxData& data, const EmOptions& opt) {
  spec.validate();
  if (data.n_covariates() != static_cast<int>(spec.covariate_labels.size())) {
    throw InputError("fit_em: data covariates do not match the spec");
  }
  if (data.size() < 500) log::warn("fit_em: fewer than 500 observations; estimates may be unstable");
  const int n = spec.n_states;
  const int R = std::max(1, opt.n_restarts);
  const MsArxParams base = initial_params(data, n);

  struct Slot {
    bool ok = false;
    MsArxParams params;
    SmoothedInference smoothed;
    EmTrace trace;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(R));
  parallel_for(static_cast<std::size_t>(R), [&](std::size_t r) {
    Slot& slot = slots[r];
    slot.trace.restart = static_cast<int>(r);
    MsArxParams p = base;
    if (r > 0) {
      std::mt19937_64 rng(restart_seed(opt.seed, static_cast<int>(r)));
      p = jittered(base, data, rng);
    }
    try {
      slot.trace = run_em(p, data, opt, &slot.smoothed);
      slot.trace.restart = static_cast<int>(r);
      slot.params = std::move(p);
      slot.ok = true;
    } catch (const Error& e) {
      log::warn("fit_em: restart " + std::to_string(r) + " failed: " + e.what());
    }
  });

  const Slot* best = nullptr;
  const Slot* best_any = nullptr;
  for (const auto& s : slots) {
    if (!s.ok) continue;
    if (!best_any || s.smoothed.loglik > best_any->smoothed.loglik) best_any = &s;
    if (s.trace.converged && (!best || s.smoothed.loglik > best->smoothed.loglik)) best = &s;
  }
  if (!best_any) throw NumericalError("fit_em: every restart failed");

  auto package = [&](const Slot& s) {
    MsArxFit fit;
    fit.spec = spec;
    const auto order = canonical_order(s.params, mef_index_of(spec));
    fit.params = s.params.permuted(order);
    fit.smoothed = permute_smoothed(s.smoothed, order);
    fit.trace = s.trace;
    for (const auto& o : slots) fit.restarts.push_back(o.trace);
    fit.ic = linmodels::information_criteria(s.smoothed.loglik,
                                             parameter_count(n, data.n_covariates(), data.n_interactions), data.size());
    return fit;
  };
  if (!best) throw EmConvergenceError("fit_em: no restart converged within " + std::to_string(opt.max_iter) + " iterations", package(*best_any));
  return package(*best);
}

MsArxFit fit_with_break_dummy(const MsArxSpec& spec, const MsArxData& data, const EmOptions& opt) {
  if (!spec.break_date) throw InputError("fit_with_break_dummy: spec has no break date");
  if (data.n_interactions == 0) throw InputError("fit_with_break_dummy: data lacks interaction columns");
  return fit_em(spec, data, opt);
}

MatrixXd post_break_slopes(const MsArxParams& params) {
  if (params.delta.cols() != params.beta.cols()) throw InputError("post_break_slopes: model has no break interactions");
  return params.beta + params.delta;
}

}  // namespace regime_mef::msarx
