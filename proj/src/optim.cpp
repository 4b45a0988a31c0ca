#include "glgmix/optim.hpp"

#include <cmath>
#include <limits>

#include "glgmix/errors.hpp"

namespace glgmix::optim {

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::fabs(x(k)));
    xp(k) = x(k) + h;
    const double fp = f(xp);
    xp(k) = x(k) - h;
    const double fm = f(xp);
    xp(k) = x(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index k = 0; k < n; ++k) h(k) = rel_step * std::max(1.0, std::fabs(x(k)));
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < n; ++k) {
    xp(k) = x(k) + h(k);
    const double fp = f(xp);
    xp(k) = x(k) - h(k);
    const double fm = f(xp);
    xp(k) = x(k);
    hess(k, k) = (fp - 2.0 * f0 + fm) / (h(k) * h(k));
    for (Eigen::Index l = 0; l < k; ++l) {
      auto at = [&](double sk, double sl) {
        xp(k) = x(k) + sk * h(k);
        xp(l) = x(l) + sl * h(l);
        const double v = f(xp);
        xp(k) = x(k);
        xp(l) = x(l);
        return v;
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h(k) * h(l));
      hess(k, l) = hess(l, k) = v;
    }
  }
  return hess;
}

namespace {

double guarded(const Objective& f, const Eigen::VectorXd& x) {
  try {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

BfgsResult maximize(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  BfgsResult r;
  r.x = x0;
  r.value = f(x0);
  if (!std::isfinite(r.value)) throw DomainError("objective is not finite at the starting point");

  // work with the minimization of -f
  Eigen::VectorXd g = -numerical_gradient(f, r.x, opts.grad_step);
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  {
    const Eigen::MatrixXd hess = -numerical_hessian(f, r.x);
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (hess.allFinite() && llt.info() == Eigen::Success) {
      inv_h = llt.solve(Eigen::MatrixXd::Identity(n, n));
    } else {
      inv_h /= std::max(1.0, g.cwiseAbs().maxCoeff());
    }
  }
  double rel_change = std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    const double max_grad = g.cwiseAbs().maxCoeff();
    r.trace.push_back({it, r.value, max_grad});
    // at large |f| the finite-difference gradient bottoms out above gtol; a
    // negligible predicted gain counts as stationary too
    const double predicted_gain = 0.5 * g.dot(inv_h * g);
    const bool flat = predicted_gain >= 0.0 && predicted_gain < 1e-9 * std::max(1.0, std::fabs(r.value));
    if ((max_grad < opts.gtol || flat) && rel_change < opts.ftol) {
      r.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;

    Eigen::VectorXd dir = -inv_h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      inv_h = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, max_grad);
      dir = -inv_h * g;
      slope = g.dot(dir);
    }
    double t = 1.0;
    Eigen::VectorXd x_new;
    double f_new = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      x_new = r.x + t * dir;
      f_new = guarded(f, x_new);
      // Armijo on -f
      if (f_new >= r.value - 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no sufficient ascent at this resolution; accept only a plain improvement
      if (f_new > r.value) {
        accepted = true;
      } else {
        rel_change = 0.0;
        if (max_grad < opts.gtol || flat) {
          r.converged = true;
          r.trace.push_back({it + 1, r.value, max_grad});
          ++it;
        }
        break;
      }
    }
    const Eigen::VectorXd g_new = -numerical_gradient(f, x_new, opts.grad_step);
    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      inv_h = (id - rho * s * y.transpose()) * inv_h * (id - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    rel_change = std::fabs(f_new - r.value) / std::max(1.0, std::fabs(f_new));
    r.x = x_new;
    r.value = f_new;
    g = g_new;
  }
  r.iterations = it;
  return r;
}

}  // namespace glgmix::optim
