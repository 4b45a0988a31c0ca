#pragma once

// Gauss-Hermite rules (weight exp(-x^2)) and mode-recentred log-domain
// integration of one-dimensional integrands.

#include <functional>
#include <vector>

namespace glgmix {

// Default order used by the random-intercept likelihood.
inline constexpr int kDefaultQuadratureOrder = 200;
inline constexpr int kMaxQuadratureOrder = 200;

struct QuadratureRule {
  std::vector<double> nodes;        // strictly increasing, symmetric about 0
  std::vector<double> weights;      // positive, sum to sqrt(pi)
  std::vector<double> log_weights;  // log(weights), accurate in the far tails
  int order = 0;
};

namespace quadrature {

QuadratureRule gauss_hermite(int order);

// Rule cache shared across threads; construction happens once per order.
const QuadratureRule& cached_gauss_hermite(int order);

using LogIntegrand = std::function<double(double)>;

// Location and Gaussian scale of a log-integrand around its mode.
struct Recentring {
  double mode = 0.0;
  double scale = 1.0;  // (-g''(mode))^{-1/2}
};

Recentring find_recentring(const LogIntegrand& g, double init);

// log of the integral of exp(g(b)) db over the real line, evaluated by
// Gauss-Hermite after shifting to the mode of g and scaling by its curvature.
// Throws NonConvergence if the mode search fails.
double log_integrate_adaptive(const LogIntegrand& g, const QuadratureRule& rule, double init);

// Recentred nodes b_i and log(w_i) + x_i^2 + log(sqrt(2) * scale), so that
// log integral = logsumexp_i(g(b_i) + log_mass_i).
struct RecentredNodes {
  std::vector<double> points;
  std::vector<double> log_mass;
};

RecentredNodes recentre(const QuadratureRule& rule, const Recentring& r);

double log_sum_exp(const std::vector<double>& v);

}  // namespace quadrature
}  // namespace glgmix
