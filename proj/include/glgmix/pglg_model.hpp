#pragma once

// Random-intercept Poisson model with GLG random effects:
//   y_ij | b_i ~ Poisson(exp(x_ij' beta + offset_ij + b_i)),  b_i ~ GLG(0, sigma, lambda).
// The cluster marginal has no closed form in general and is integrated with
// mode-recentred Gauss-Hermite quadrature.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glgmix/data_io.hpp"
#include "glgmix/fit_result.hpp"
#include "glgmix/glg_dist.hpp"
#include "glgmix/quadrature.hpp"

namespace glgmix {

struct PglgParams {
  Eigen::VectorXd beta;
  double sigma = 0.5;
  double lambda = 0.1;

  void validate() const;
  GlgParams random_effect() const { return {0.0, sigma, lambda}; }
};

enum class PglgConstraint {
  None,               // beta, sigma, lambda all free
  LambdaZero,         // Poisson-normal random intercept
  SigmaEqualsLambda,  // gamma frailty; equivalent to the MNB model with phi = lambda^-2
};

struct PglgFitOptions {
  PglgConstraint constraint = PglgConstraint::None;
  int quadrature_order = kDefaultQuadratureOrder;
  double gtol = 1e-5;
  double ftol = 1e-9;
  int max_iter = 200;
};

struct MarginalMoments {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
  Eigen::MatrixXd covariance;
};

namespace pglg {

std::string model_label(PglgConstraint c);

double cluster_log_marginal(const ClusterData& c, const PglgParams& p, const QuadratureRule& rule);
double log_likelihood(const Dataset& d, const PglgParams& p, const QuadratureRule& rule);

FitResult fit(const Dataset& d, const std::optional<PglgParams>& init = std::nullopt,
              const PglgFitOptions& opts = {});
PglgParams params_of(const FitResult& r);

// Empirical Bayes E[b_i | y_i] for every cluster, in dataset order.
std::vector<std::pair<std::string, double>> predict_random_effects(const Dataset& d, const PglgParams& p,
                                                                   const QuadratureRule& rule);

// Unconditional moments of a cluster's counts. Throws MomentDoesNotExist
// when E[exp(2 b)] is infinite.
MarginalMoments marginal_moments(const ClusterData& c, const PglgParams& p);

}  // namespace pglg
}  // namespace glgmix
