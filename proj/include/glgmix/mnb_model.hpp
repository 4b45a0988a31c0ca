#pragma once

// Multivariate negative binomial regression: the closed-form marginal of the
// random-intercept Poisson model when exp(b_i) is gamma with shape = rate = phi.
//
//   log f(y_i) = log Gamma(phi + y_i+) - log Gamma(phi) - sum_j log y_ij!
//                + phi log phi + sum_j y_ij log mu_ij - (phi + y_i+) log(phi + mu_i+)
//
// with mu_ij = exp(x_ij' beta + offset_ij).

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glgmix/data_io.hpp"
#include "glgmix/fit_result.hpp"

namespace glgmix {

struct MnbParams {
  Eigen::VectorXd beta;
  double phi = 1.0;

  void validate() const;
};

struct ScoreInfo {
  Eigen::VectorXd u_beta;
  double u_phi = 0.0;
  Eigen::MatrixXd k_beta;
  double k_phi = 0.0;
};

struct MnbFitOptions {
  int max_iter = 200;
  double score_tol = 1e-6;
  int max_halvings = 50;
  // Hold phi at this value and fit beta only.
  std::optional<double> fixed_phi;
  std::string model_label = "mnb";
};

struct ResidualRow {
  std::string cluster;
  Eigen::Index index = 0;  // position within the cluster, 0-based
  double y = 0.0;
  double fitted = 0.0;
  double leverage = 0.0;
  double d2 = 0.0;                               // deviance component, may be negative
  std::optional<double> deviance_residual;       // absent when d2 < 0
  double pearson = 0.0;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  std::size_t n_negative_d2 = 0;
};

namespace mnb {

double log_pmf(const ClusterData& c, const MnbParams& p);
double log_likelihood(const Dataset& d, const MnbParams& p);

// U_beta and U_phi; information fields left empty.
ScoreInfo score(const Dataset& d, const MnbParams& p);
// Expected information K_beta_beta and K_phi_phi; score fields left empty.
ScoreInfo fisher_info(const Dataset& d, const MnbParams& p);

// -dU_beta/dbeta' at the observed counts.
Eigen::MatrixXd observed_info_beta(const Dataset& d, const MnbParams& p);
// d U_phi / d phi.
double d2_loglik_dphi(const Dataset& d, const MnbParams& p);

// Per-cluster contribution to K_phi_phi for a cluster with total mean mu_total.
double k_phi_cluster(double mu_total, double phi);

// Independence Poisson fit (the phi -> infinity limit) by IRLS.
Eigen::VectorXd fit_poisson_independence(const Dataset& d, int max_iter = 100);

// Method-of-moments phi from the Poisson residual variance.
double moment_phi(const Dataset& d, const Eigen::VectorXd& beta);

// Throws FitError naming collinear columns when the stacked design is rank deficient.
void check_full_rank(const Dataset& d);

FitResult fit(const Dataset& d, const std::optional<MnbParams>& init = std::nullopt,
              const MnbFitOptions& opts = {});
MnbParams params_of(const FitResult& r);

std::vector<Eigen::VectorXd> fitted_means(const Dataset& d, const MnbParams& fitted);

double deviance(const Dataset& d, const MnbParams& fitted);
double deviance(const Dataset& d, const std::vector<Eigen::VectorXd>& fitted_means, double phi);
// d^2_ij per cluster, in cluster order.
std::vector<Eigen::VectorXd> deviance_components(const Dataset& d, const MnbParams& fitted);
std::vector<Eigen::VectorXd> deviance_components(const Dataset& d, const std::vector<Eigen::VectorXd>& fitted_means,
                                                 double phi);

// Leverages use the global weighted information sum_i X_i' W_i X_i.
// Throws FitError if that matrix is singular.
ResidualReport residuals(const Dataset& d, const MnbParams& fitted);

double intraclass_corr(double mu_j, double mu_k, double phi);

// E[b_i | y_i] = psi(y_i+ + phi) - log(mu_i+ + phi), exact under the gamma frailty.
std::vector<std::pair<std::string, double>> predict_random_effects(const Dataset& d, const MnbParams& p);

}  // namespace mnb
}  // namespace glgmix
