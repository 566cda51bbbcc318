#include "regime_mef/optim.hpp"

#include <cmath>
#include <limits>

namespace regime_mef::optim {
namespace {

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

Eigen::VectorXd numerical_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = safe(f(xp));
    xp(i) = x(i) - h;
    const double fm = safe(f(xp));
    xp(i) = x(i);
    if (std::isinf(fp) || std::isinf(fm)) {
      // one-sided fallback at the boundary of the feasible region
      const double f0 = safe(f(x));
      g(i) = std::isinf(fp) ? (f0 - fm) / h : (fp - f0) / h;
    } else {
      g(i) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

BfgsResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                         const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.f = safe(f(res.x));
  if (!std::isfinite(res.f)) return res;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = numerical_gradient(f, res.x, opts.fd_step);

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it + 1;
    if (g.cwiseAbs().maxCoeff() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd d = -H * g;
    double slope = g.dot(d);
    if (slope >= 0.0) {
      H.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    double f_new = 0.0;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * d;
      f_new = safe(f(x_new));
      if (f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // line search failed: restart from steepest descent once, else stop
      if (!H.isIdentity()) {
        H.setIdentity();
        continue;
      }
      res.converged = g.cwiseAbs().maxCoeff() < 1e3 * opts.grad_tol;
      break;
    }
    const Eigen::VectorXd g_new = numerical_gradient(f, x_new, opts.fd_step);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    const double f_old = res.f;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    if (std::abs(f_old - f_new) <= opts.f_rel_tol * std::max(1.0, std::abs(f_new))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace regime_mef::optim
