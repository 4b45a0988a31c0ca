#pragma once

// Quasi-Newton maximization with finite-difference derivatives.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "glgmix/fit_result.hpp"

namespace glgmix::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences with step rel_step * max(1, |x_k|).
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-6);
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-4);

struct BfgsOptions {
  double gtol = 1e-5;     // max |gradient|
  double ftol = 1e-9;     // relative objective change
  int max_iter = 200;
  double grad_step = 1e-6;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRecord> trace;
};

// Maximizes f. Evaluations that throw or return non-finite values are
// treated as -inf during the line search.
BfgsResult maximize(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts = {});

}  // namespace glgmix::optim
