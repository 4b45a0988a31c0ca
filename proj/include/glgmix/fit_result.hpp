#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace glgmix {

struct TraceRecord {
  int iteration = 0;
  double loglik = 0.0;
  double max_gradient = 0.0;
};

struct FitResult {
  std::string model;                // "pglg", "pglg-normal", "pglg-sigma-lambda", "mnb", "nb"
  std::vector<std::string> names;   // parameter names, in estimate order
  Eigen::VectorXd estimates;
  std::optional<Eigen::VectorXd> std_errors;  // absent when the information is singular
  std::vector<bool> wald_defined;   // false where a z-value is not reported (sigma, phi)
  double loglik = 0.0;
  double aic = 0.0;
  int n_iterations = 0;
  bool converged = false;
  std::vector<TraceRecord> trace;

  Eigen::Index n_parameters() const noexcept { return estimates.size(); }
  std::optional<double> z_value(Eigen::Index k) const;
  std::optional<double> estimate(const std::string& name) const;
};

inline double aic_of(double loglik, Eigen::Index n_parameters) {
  return -2.0 * loglik + 2.0 * static_cast<double>(n_parameters);
}

}  // namespace glgmix
