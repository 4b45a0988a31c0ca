#include "glgmix/pglg_model.hpp"

#include <cmath>
#include <limits>

#include "glgmix/errors.hpp"
#include "glgmix/mnb_model.hpp"
#include "glgmix/optim.hpp"
#include "glgmix/parallel.hpp"

namespace glgmix {

void PglgParams::validate() const {
  if (!beta.allFinite()) throw DomainError("Poisson-GLG coefficients must be finite");
  random_effect().validate();
}

namespace pglg {

namespace {

constexpr std::size_t kMinParallelClusters = 64;

// Sufficient statistics of a cluster's Poisson kernel in b:
//   sum_j [y_j (lin_j + b) - exp(lin_j + b) - log y_j!] = constant + y_total b - mu_total e^b
struct Kernel {
  double constant = 0.0;
  double y_total = 0.0;
  double mu_total = 0.0;
};

Kernel kernel_of(const ClusterData& c, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd lin = c.X * beta + c.offset;
  Kernel k;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    k.constant += c.y(j) * lin(j) - std::lgamma(c.y(j) + 1.0);
    k.y_total += c.y(j);
    k.mu_total += std::exp(lin(j));
  }
  return k;
}

quadrature::LogIntegrand integrand(const Kernel& k, const GlgParams& re) {
  return [k, re](double b) {
    return k.constant + k.y_total * b - k.mu_total * std::exp(b) + glg::log_pdf(b, re);
  };
}

void check(const Dataset& d, const PglgParams& p) {
  p.validate();
  if (p.beta.size() != d.n_cols()) throw DomainError("coefficient length does not match the design");
}

}  // namespace

std::string model_label(PglgConstraint c) {
  switch (c) {
    case PglgConstraint::None: return "pglg";
    case PglgConstraint::LambdaZero: return "pglg-normal";
    case PglgConstraint::SigmaEqualsLambda: return "pglg-sigma-lambda";
  }
  return "pglg";
}

double cluster_log_marginal(const ClusterData& c, const PglgParams& p, const QuadratureRule& rule) {
  p.validate();
  const Kernel k = kernel_of(c, p.beta);
  try {
    return quadrature::log_integrate_adaptive(integrand(k, p.random_effect()), rule, 0.0);
  } catch (const NonConvergence& e) {
    throw NonConvergence("cluster '" + c.id + "': " + e.what(), e.last_iterate());
  }
}

double log_likelihood(const Dataset& d, const PglgParams& p, const QuadratureRule& rule) {
  check(d, p);
  std::vector<double> parts(d.clusters.size());
  parallel_for(
      d.clusters.size(), [&](std::size_t i) { parts[i] = cluster_log_marginal(d.clusters[i], p, rule); },
      kMinParallelClusters);
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

namespace {

// Unconstrained coordinates for each constraint.
struct Transform {
  PglgConstraint constraint;
  Eigen::Index p;

  Eigen::Index size() const { return p + (constraint == PglgConstraint::None ? 2 : 1); }

  Eigen::VectorXd to_theta(const PglgParams& q) const {
    Eigen::VectorXd t(size());
    t.head(p) = q.beta;
    switch (constraint) {
      case PglgConstraint::None:
        t(p) = std::log(q.sigma);
        t(p + 1) = q.lambda;
        break;
      case PglgConstraint::LambdaZero: t(p) = std::log(q.sigma); break;
      case PglgConstraint::SigmaEqualsLambda: t(p) = std::log(q.lambda); break;
    }
    return t;
  }

  PglgParams from_theta(const Eigen::VectorXd& t) const {
    PglgParams q;
    q.beta = t.head(p);
    switch (constraint) {
      case PglgConstraint::None:
        q.sigma = std::exp(t(p));
        q.lambda = t(p + 1);
        break;
      case PglgConstraint::LambdaZero:
        q.sigma = std::exp(t(p));
        q.lambda = 0.0;
        break;
      case PglgConstraint::SigmaEqualsLambda:
        q.lambda = std::exp(t(p));
        q.sigma = q.lambda;
        break;
    }
    return q;
  }
};

}  // namespace

FitResult fit(const Dataset& d, const std::optional<PglgParams>& init, const PglgFitOptions& opts) {
  d.validate();
  mnb::check_full_rank(d);
  const Eigen::Index p = d.n_cols();
  const QuadratureRule& rule = quadrature::cached_gauss_hermite(opts.quadrature_order);

  PglgParams start;
  if (init) {
    start = *init;
  } else {
    start.beta = mnb::fit_poisson_independence(d);
    start.sigma = 0.5;
    start.lambda = 0.1;
  }
  if (opts.constraint == PglgConstraint::LambdaZero) start.lambda = 0.0;
  if (opts.constraint == PglgConstraint::SigmaEqualsLambda) {
    if (!init) start.lambda = start.sigma;
    if (!(start.lambda > 0.0)) throw DomainError("sigma = lambda fit needs a positive starting lambda");
    start.sigma = start.lambda;
  }
  check(d, start);

  const Transform tr{opts.constraint, p};
  const optim::Objective objective = [&](const Eigen::VectorXd& theta) {
    return log_likelihood(d, tr.from_theta(theta), rule);
  };
  optim::BfgsOptions bo;
  bo.gtol = opts.gtol;
  bo.ftol = opts.ftol;
  bo.max_iter = opts.max_iter;
  const auto res = optim::maximize(objective, tr.to_theta(start), bo);

  const PglgParams est = tr.from_theta(res.x);
  FitResult r;
  r.model = model_label(opts.constraint);
  r.loglik = res.value;
  r.n_iterations = res.iterations;
  r.converged = res.converged;
  r.trace = res.trace;

  r.names = d.column_names;
  const Eigen::Index n_par = tr.size();
  r.estimates.resize(n_par);
  r.estimates.head(p) = est.beta;
  r.wald_defined.assign(static_cast<std::size_t>(n_par), true);
  switch (opts.constraint) {
    case PglgConstraint::None:
      r.names.emplace_back("sigma");
      r.names.emplace_back("lambda");
      r.estimates(p) = est.sigma;
      r.estimates(p + 1) = est.lambda;
      r.wald_defined[p] = false;
      break;
    case PglgConstraint::LambdaZero:
      r.names.emplace_back("sigma");
      r.estimates(p) = est.sigma;
      r.wald_defined[p] = false;
      break;
    case PglgConstraint::SigmaEqualsLambda:
      r.names.emplace_back("lambda");
      r.estimates(p) = est.lambda;
      break;
  }
  r.aic = aic_of(r.loglik, n_par);

  // observed information in the working coordinates, then the delta method
  // for the log-transformed scale
  const Eigen::MatrixXd hess = optim::numerical_hessian(objective, res.x);
  const Eigen::MatrixXd info = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (info.allFinite() && llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(n_par, n_par));
    Eigen::VectorXd se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    se(p) *= r.estimates(p);  // d exp(t)/dt = exp(t)
    if (se.allFinite() && (se.array() > 0.0).all()) r.std_errors = se;
  }
  return r;
}

PglgParams params_of(const FitResult& r) {
  PglgParams q;
  Eigen::Index nb = r.estimates.size();
  std::optional<double> sigma, lambda;
  for (Eigen::Index k = 0; k < r.estimates.size(); ++k) {
    if (r.names[k] == "sigma") sigma = r.estimates(k);
    if (r.names[k] == "lambda") lambda = r.estimates(k);
    if ((r.names[k] == "sigma" || r.names[k] == "lambda") && k < nb) nb = k;
  }
  q.beta = r.estimates.head(nb);
  if (r.model == "pglg-sigma-lambda") {
    q.lambda = lambda.value_or(1.0);
    q.sigma = q.lambda;
  } else {
    q.sigma = sigma.value_or(1.0);
    q.lambda = lambda.value_or(0.0);
  }
  return q;
}

std::vector<std::pair<std::string, double>> predict_random_effects(const Dataset& d, const PglgParams& p,
                                                                   const QuadratureRule& rule) {
  check(d, p);
  std::vector<std::pair<std::string, double>> out(d.clusters.size());
  parallel_for(
      d.clusters.size(),
      [&](std::size_t i) {
        const auto& c = d.clusters[i];
        const auto g = integrand(kernel_of(c, p.beta), p.random_effect());
        quadrature::Recentring centre;
        try {
          centre = quadrature::find_recentring(g, 0.0);
        } catch (const NonConvergence& e) {
          throw NonConvergence("cluster '" + c.id + "': " + e.what(), e.last_iterate());
        }
        const auto nodes = quadrature::recentre(rule, centre);
        std::vector<double> logw(nodes.points.size());
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < logw.size(); ++k) {
          const double v = g(nodes.points[k]);
          logw[k] = (std::isnan(v) ? -std::numeric_limits<double>::infinity() : v) + nodes.log_mass[k];
          top = std::max(top, logw[k]);
        }
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < logw.size(); ++k) {
          const double w = std::exp(logw[k] - top);
          num += w * (nodes.points[k] - centre.mode);
          den += w;
        }
        out[i] = {c.id, centre.mode + num / den};
      },
      kMinParallelClusters);
  return out;
}

MarginalMoments marginal_moments(const ClusterData& c, const PglgParams& p) {
  p.validate();
  const GlgParams re = p.random_effect();
  const double e1 = glg::exp_moment(re, 1);
  const double e2 = glg::exp_moment(re, 2);
  const double var_e = e2 - e1 * e1;
  const Eigen::VectorXd mu = c.mean(p.beta);
  MarginalMoments m;
  m.means = mu * e1;
  m.covariance = var_e * mu * mu.transpose();
  m.covariance.diagonal() += mu * e1;
  m.variances = m.covariance.diagonal();
  return m;
}

}  // namespace pglg
}  // namespace glgmix
