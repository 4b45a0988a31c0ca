#include "glgmix/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "glgmix/errors.hpp"

namespace glgmix::quadrature {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct HermiteValues {
  double p_n;
  double p_nm1;
};

// Orthonormal Hermite polynomials (weight exp(-x^2)) at x, degrees n and n-1.
HermiteValues orthonormal_hermite(int n, double x) {
  double p_prev = 0.0;
  double p = std::pow(std::numbers::pi, -0.25);
  for (int j = 0; j < n; ++j) {
    const double next = x * std::sqrt(2.0 / (j + 1)) * p - std::sqrt(static_cast<double>(j) / (j + 1)) * p_prev;
    p_prev = p;
    p = next;
  }
  return {p, p_prev};
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  if (order < 1 || order > kMaxQuadratureOrder) {
    throw DomainError("Gauss-Hermite order must lie in [1, " + std::to_string(kMaxQuadratureOrder) + "]");
  }
  const int n = order;
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.log_weights.resize(n);

  // Golub-Welsch: eigenvalues of the Jacobi matrix give starting nodes.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = eig.eigenvalues();

  // Newton polish on the orthonormal recurrence, then Christoffel weights
  // w = 1 / (n * p_{n-1}(x)^2) computed in log form.
  for (int i = 0; i < n; ++i) {
    double xi = x(i);
    for (int it = 0; it < 8; ++it) {
      const auto hv = orthonormal_hermite(n, xi);
      const double dx = hv.p_n / (std::sqrt(2.0 * n) * hv.p_nm1);
      xi -= dx;
      if (std::fabs(dx) <= 1e-15 * std::max(1.0, std::fabs(xi))) break;
    }
    x(i) = xi;
  }
  for (int i = 0; i < n / 2; ++i) {
    const double half = 0.5 * (x(n - 1 - i) - x(i));
    x(i) = -half;
    x(n - 1 - i) = half;
  }
  if (n % 2 == 1) x(n / 2) = 0.0;

  for (int i = 0; i < n; ++i) {
    const auto hv = orthonormal_hermite(n, x(i));
    rule.nodes[i] = x(i);
    rule.log_weights[i] = -std::log(static_cast<double>(n)) - 2.0 * std::log(std::fabs(hv.p_nm1));
  }
  for (int i = 0; i < n / 2; ++i) {
    const double lw = 0.5 * (rule.log_weights[i] + rule.log_weights[n - 1 - i]);
    rule.log_weights[i] = rule.log_weights[n - 1 - i] = lw;
  }
  for (int i = 0; i < n; ++i) rule.weights[i] = std::exp(rule.log_weights[i]);
  return rule;
}

const QuadratureRule& cached_gauss_hermite(int order) {
  if (order < 1 || order > kMaxQuadratureOrder) {
    throw DomainError("Gauss-Hermite order must lie in [1, " + std::to_string(kMaxQuadratureOrder) + "]");
  }
  static std::array<std::unique_ptr<QuadratureRule>, kMaxQuadratureOrder + 1> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<QuadratureRule>(gauss_hermite(order));
  return *slot;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

double safe_eval(const LogIntegrand& g, double b) {
  const double v = g(b);
  return std::isnan(v) ? kNegInf : v;
}

double second_difference(const LogIntegrand& g, double b, double gb, double h) {
  return (safe_eval(g, b + h) - 2.0 * gb + safe_eval(g, b - h)) / (h * h);
}

}  // namespace

Recentring find_recentring(const LogIntegrand& g, double init) {
  constexpr int kMaxIter = 200;
  constexpr double kMaxStep = 5.0;
  double b = init;
  double gb = safe_eval(g, b);
  if (!std::isfinite(gb)) {
    throw NonConvergence("mode search: log-integrand is not finite at the starting point", b);
  }
  double scale = 1.0;
  bool converged = false;
  for (int it = 0; it < kMaxIter && !converged; ++it) {
    const double h = std::min(1e-4 * std::max(1.0, std::fabs(b)), 1e-2 * scale);
    const double gp = safe_eval(g, b + h);
    const double gm = safe_eval(g, b - h);
    const double d1 = (gp - gm) / (2.0 * h);
    const double d2 = (gp - 2.0 * gb + gm) / (h * h);
    double step;
    if (std::isfinite(d2) && d2 < 0.0) {
      step = -d1 / d2;
      scale = 1.0 / std::sqrt(-d2);
    } else if (std::isfinite(d1)) {
      step = d1 > 0.0 ? 1.0 : -1.0;
    } else {
      throw NonConvergence("mode search: non-finite derivative", b);
    }
    step = std::clamp(step, -kMaxStep, kMaxStep);
    // predicted gain below rounding noise in g: the mode is as located as it gets
    const bool flat = std::isfinite(d2) && d2 < 0.0 && 0.5 * std::fabs(d1 * step) <= 1e-12 * std::max(1.0, std::fabs(gb));
    if (flat || std::fabs(step) <= 1e-10 * std::max(1.0, std::fabs(b)) || std::fabs(step) <= 1e-6 * scale) {
      converged = true;
      break;
    }
    double bn = b + step;
    double gn = safe_eval(g, bn);
    int halvings = 0;
    while (!(gn >= gb) && halvings < 60) {
      step *= 0.5;
      bn = b + step;
      gn = safe_eval(g, bn);
      ++halvings;
    }
    if (!(gn >= gb)) {
      converged = true;  // no ascent available at finite-difference resolution
      break;
    }
    b = bn;
    gb = gn;
  }
  if (!converged) throw NonConvergence("mode search did not converge", b);

  double h = 1e-4 * std::max(1.0, std::fabs(b));
  double d2 = second_difference(g, b, gb, h);
  for (int refine = 0; refine < 3 && std::isfinite(d2) && d2 < 0.0; ++refine) {
    const double s = 1.0 / std::sqrt(-d2);
    if (s >= 100.0 * h) break;
    h = 1e-2 * s;
    d2 = second_difference(g, b, gb, h);
  }
  if (!std::isfinite(d2) || !(d2 < 0.0)) {
    throw NonConvergence("mode search: log-integrand is not concave at the located mode", b);
  }
  return {b, 1.0 / std::sqrt(-d2)};
}

RecentredNodes recentre(const QuadratureRule& rule, const Recentring& r) {
  RecentredNodes out;
  out.points.resize(rule.nodes.size());
  out.log_mass.resize(rule.nodes.size());
  const double spread = std::numbers::sqrt2 * r.scale;
  const double log_spread = std::log(spread);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    out.points[i] = r.mode + spread * x;
    out.log_mass[i] = rule.log_weights[i] + x * x + log_spread;
  }
  return out;
}

double log_integrate_adaptive(const LogIntegrand& g, const QuadratureRule& rule, double init) {
  const auto centre = find_recentring(g, init);
  const auto nodes = recentre(rule, centre);
  std::vector<double> terms(nodes.points.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    terms[i] = safe_eval(g, nodes.points[i]) + nodes.log_mass[i];
  }
  return log_sum_exp(terms);
}

}  // namespace glgmix::quadrature
