#pragma once

#include <Eigen/Dense>
#include <functional>

namespace regime_mef::optim {

struct BfgsOptions {
  int max_iter = 200;
  double grad_tol = 1e-6;    // on the max-abs gradient
  double f_rel_tol = 1e-11;  // relative objective change between iterations
  double fd_step = 1e-5;     // central-difference step, scaled by max(1,|x_i|)
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes `f` by BFGS with central-difference gradients and a
/// backtracking Armijo line search. Non-finite objective values are treated
/// as +inf, so `f` may signal infeasible points by returning NaN/inf.
BfgsResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                         Eigen::VectorXd x0, const BfgsOptions& opts = {});

Eigen::VectorXd numerical_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step);

}  // namespace regime_mef::optim
