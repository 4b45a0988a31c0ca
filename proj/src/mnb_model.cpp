#include "glgmix/mnb_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "glgmix/errors.hpp"
#include "glgmix/parallel.hpp"
#include "glgmix/special.hpp"

namespace glgmix {

void MnbParams::validate() const {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("MNB dispersion phi must be positive and finite");
  if (!beta.allFinite()) throw DomainError("MNB coefficients must be finite");
}

namespace mnb {

namespace {

constexpr std::size_t kMinParallelClusters = 4096;
// Above this total count the rising sums switch to polygamma differences.
constexpr double kExplicitSumLimit = 1e4;

void check_dims(const Dataset& d, const MnbParams& p) {
  p.validate();
  if (p.beta.size() != d.n_cols()) throw DomainError("coefficient length does not match the design");
}

// sum_{j=0}^{n-1} 1/(j+phi)
double rising_harmonic(double phi, double n) {
  if (n <= 0.0) return 0.0;
  if (n > kExplicitSumLimit) return special::digamma(phi + n) - special::digamma(phi);
  double s = 0.0;
  for (long j = 0; j < static_cast<long>(n); ++j) s += 1.0 / (j + phi);
  return s;
}

// sum_{j=0}^{n-1} 1/(j+phi)^2
double rising_harmonic2(double phi, double n) {
  if (n <= 0.0) return 0.0;
  if (n > kExplicitSumLimit) return special::trigamma(phi) - special::trigamma(phi + n);
  double s = 0.0;
  for (long j = 0; j < static_cast<long>(n); ++j) s += 1.0 / ((j + phi) * (j + phi));
  return s;
}

template <typename F>
std::vector<double> per_cluster(const Dataset& d, F&& f) {
  std::vector<double> out(d.clusters.size());
  parallel_for(d.clusters.size(), [&](std::size_t i) { out[i] = f(d.clusters[i]); }, kMinParallelClusters);
  return out;
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double log_pmf(const ClusterData& c, const MnbParams& p) {
  p.validate();
  const double phi = p.phi;
  const Eigen::VectorXd eta = c.X * p.beta + c.offset;
  const double y_total = c.y.sum();
  const double mu_total = eta.array().exp().sum();
  double v = special::log_rising_factorial(phi, y_total) + phi * std::log(phi) -
             (phi + y_total) * std::log(phi + mu_total);
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    v += c.y(j) * eta(j) - std::lgamma(c.y(j) + 1.0);
  }
  return v;
}

double log_likelihood(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  return ordered_sum(per_cluster(d, [&](const ClusterData& c) { return log_pmf(c, p); }));
}

ScoreInfo score(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  const double phi = p.phi;
  ScoreInfo s;
  s.u_beta = Eigen::VectorXd::Zero(d.n_cols());
  for (const auto& c : d.clusters) {
    const Eigen::VectorXd mu = c.mean(p.beta);
    const double y_total = c.y.sum();
    const double mu_total = mu.sum();
    const double a = (phi + y_total) / (phi + mu_total);
    s.u_beta.noalias() += c.X.transpose() * (c.y - a * mu);
    s.u_phi += rising_harmonic(phi, y_total) - y_total / (phi + mu_total) - std::log1p(mu_total / phi) +
               mu_total / (phi + mu_total);
  }
  return s;
}

double k_phi_cluster(double mu_total, double phi) {
  // sum_j (j+phi)^-2 P(Y > j), Y ~ NB(mean mu_total, dispersion phi)
  constexpr double kTailTol = 1e-12;
  constexpr long kMaxTerms = 1000000;
  const double log_q = std::log(mu_total / (phi + mu_total));
  double log_pmf = phi * std::log(phi / (phi + mu_total));
  double cdf = 0.0;
  double series = 0.0;
  for (long j = 0; j < kMaxTerms; ++j) {
    cdf += std::exp(log_pmf);
    const double tail = std::max(0.0, 1.0 - cdf);
    series += tail / ((j + phi) * (j + phi));
    if (tail < kTailTol && j > mu_total) break;
    log_pmf += std::log((j + phi) / (j + 1.0)) + log_q;
  }
  return series - mu_total / (phi * (mu_total + phi));
}

ScoreInfo fisher_info(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  const double phi = p.phi;
  ScoreInfo s;
  s.k_beta = Eigen::MatrixXd::Zero(d.n_cols(), d.n_cols());
  for (const auto& c : d.clusters) {
    const Eigen::VectorXd mu = c.mean(p.beta);
    const double mu_total = mu.sum();
    Eigen::MatrixXd w = -mu * mu.transpose() / (phi + mu_total);
    w.diagonal() += mu;
    s.k_beta.noalias() += c.X.transpose() * w * c.X;
  }
  const auto k_phi = per_cluster(d, [&](const ClusterData& c) { return k_phi_cluster(c.mean(p.beta).sum(), phi); });
  s.k_phi = ordered_sum(k_phi);
  return s;
}

Eigen::MatrixXd observed_info_beta(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  const double phi = p.phi;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d.n_cols(), d.n_cols());
  for (const auto& c : d.clusters) {
    const Eigen::VectorXd mu = c.mean(p.beta);
    const double y_total = c.y.sum();
    const double mu_total = mu.sum();
    const double a = (phi + y_total) / (phi + mu_total);
    Eigen::MatrixXd w = -(phi + y_total) / ((phi + mu_total) * (phi + mu_total)) * mu * mu.transpose();
    w.diagonal() += a * mu;
    info.noalias() += c.X.transpose() * w * c.X;
  }
  return info;
}

double d2_loglik_dphi(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  const double phi = p.phi;
  double v = 0.0;
  for (const auto& c : d.clusters) {
    const double y_total = c.y.sum();
    const double mu_total = c.mean(p.beta).sum();
    const double s = phi + mu_total;
    v += -rising_harmonic2(phi, y_total) + y_total / (s * s) + mu_total / (phi * s) - mu_total / (s * s);
  }
  return v;
}

void check_full_rank(const Dataset& d) {
  const auto st = stack(d);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(st.X);
  const auto rank = qr.rank();
  if (rank >= st.X.cols()) return;
  // columns taking part in a linear dependency: nonzero entries of the null space
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(st.X, Eigen::ComputeFullV);
  const Eigen::MatrixXd null = svd.matrixV().rightCols(st.X.cols() - rank);
  std::ostringstream msg;
  msg << "design matrix is rank deficient (rank " << rank << " < " << st.X.cols() << "); collinear columns:";
  for (Eigen::Index k = 0; k < st.X.cols(); ++k) {
    if (null.row(k).cwiseAbs().maxCoeff() > 1e-8) msg << ' ' << d.column_names[static_cast<std::size_t>(k)];
  }
  throw FitError(msg.str());
}

Eigen::VectorXd fit_poisson_independence(const Dataset& d, int max_iter) {
  const auto st = stack(d);
  auto deviance_at = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd mu = (st.X * b + st.offset).array().exp().matrix();
    double dev = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      dev += (st.y(i) > 0 ? st.y(i) * std::log(st.y(i) / mu(i)) : 0.0) - (st.y(i) - mu(i));
    }
    return 2.0 * dev;
  };
  auto wls_step = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& eta) {
    const Eigen::VectorXd z = eta - st.offset + ((st.y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd xtw = st.X.transpose() * mu.asDiagonal();
    return Eigen::VectorXd((xtw * st.X).ldlt().solve(xtw * z));
  };

  // usual GLM start from mu = y + 0.1
  const Eigen::VectorXd mu0 = (st.y.array() + 0.1).matrix();
  Eigen::VectorXd beta = wls_step(mu0, mu0.array().log().matrix());
  double dev = deviance_at(beta);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = st.X * beta + st.offset;
    Eigen::VectorXd next = wls_step(eta.array().exp().matrix(), eta);
    double dev_next = deviance_at(next);
    for (int h = 0; h < 30 && !(dev_next <= dev); ++h) {
      next = 0.5 * (next + beta);
      dev_next = deviance_at(next);
    }
    const bool done = std::fabs(dev - dev_next) <= 1e-12 * (std::fabs(dev_next) + 0.1);
    beta = next;
    dev = dev_next;
    if (done) break;
  }
  return beta;
}

double moment_phi(const Dataset& d, const Eigen::VectorXd& beta) {
  double sum_mu2 = 0.0;
  double sum_excess = 0.0;
  for (const auto& c : d.clusters) {
    const Eigen::VectorXd mu = c.mean(beta);
    sum_mu2 += mu.squaredNorm();
    sum_excess += (c.y - mu).squaredNorm() - mu.sum();
  }
  const double eps = 1e-6 * sum_mu2;
  return std::clamp(sum_mu2 / std::max(eps, sum_excess), 0.1, 1e6);
}

FitResult fit(const Dataset& d, const std::optional<MnbParams>& init, const MnbFitOptions& opts) {
  d.validate();
  check_full_rank(d);
  const Eigen::Index p = d.n_cols();

  MnbParams cur;
  if (init) {
    cur = *init;
  } else {
    cur.beta = fit_poisson_independence(d);
    cur.phi = moment_phi(d, cur.beta);
  }
  if (opts.fixed_phi) cur.phi = *opts.fixed_phi;
  check_dims(d, cur);
  const bool estimate_phi = !opts.fixed_phi.has_value();

  FitResult r;
  r.model = opts.model_label;
  double ll = log_likelihood(d, cur);
  // Near the optimum the predicted gain of a step falls below the rounding
  // noise of the summed log-likelihood; such steps are taken if ll stays
  // within that floor, otherwise the loop stalls on noise.
  const auto noise_floor = [](double v) { return 1e-13 * std::max(1.0, std::fabs(v)); };
  const auto acceptable = [&](double ll_trial, double predicted_gain) {
    if (ll_trial >= ll) return true;
    return predicted_gain < noise_floor(ll) && ll_trial >= ll - noise_floor(ll);
  };
  int it = 0;
  for (;; ++it) {
    const ScoreInfo s = score(d, cur);
    double max_score = s.u_beta.cwiseAbs().maxCoeff();
    if (estimate_phi) max_score = std::max(max_score, std::fabs(s.u_phi));
    r.trace.push_back({it, ll, max_score});
    if (max_score < opts.score_tol) {
      r.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;

    bool moved = false;
    // Fisher scoring on beta
    {
      const ScoreInfo k = fisher_info(d, MnbParams{cur.beta, cur.phi});
      const Eigen::VectorXd delta = k.k_beta.ldlt().solve(s.u_beta);
      const double gain = 0.5 * s.u_beta.dot(delta);
      double t = 1.0;
      for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
        MnbParams trial{cur.beta + t * delta, cur.phi};
        if (!trial.beta.allFinite()) continue;
        const double ll_trial = log_likelihood(d, trial);
        if (acceptable(ll_trial, t * gain)) {
          moved = moved || t * delta.cwiseAbs().maxCoeff() > 0.0;
          cur = trial;
          ll = ll_trial;
          break;
        }
      }
    }
    // Newton-Raphson on phi
    if (estimate_phi) {
      const double u_phi = score(d, cur).u_phi;
      const double l2 = d2_loglik_dphi(d, cur);
      double delta = 0.0;
      if (l2 < 0.0) {
        delta = -u_phi / l2;
      } else {
        // outside the concave region fall back to a scoring step
        delta = u_phi / fisher_info(d, cur).k_phi;
      }
      const double gain = 0.5 * std::fabs(u_phi * delta);
      double t = 1.0;
      for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
        const double phi_trial = cur.phi + t * delta;
        if (!(phi_trial > 0.0) || !std::isfinite(phi_trial)) continue;
        MnbParams trial{cur.beta, phi_trial};
        const double ll_trial = log_likelihood(d, trial);
        if (acceptable(ll_trial, t * gain)) {
          moved = moved || phi_trial != cur.phi;
          cur = trial;
          ll = ll_trial;
          break;
        }
      }
    }
    if (!moved) {
      // neither block could improve; record the final state
      const ScoreInfo s2 = score(d, cur);
      double m2 = s2.u_beta.cwiseAbs().maxCoeff();
      if (estimate_phi) m2 = std::max(m2, std::fabs(s2.u_phi));
      r.trace.push_back({it + 1, ll, m2});
      r.converged = m2 < opts.score_tol;
      ++it;
      break;
    }
  }
  r.n_iterations = it;
  r.loglik = ll;

  const Eigen::Index n_par = p + (estimate_phi ? 1 : 0);
  r.names = d.column_names;
  r.estimates.resize(n_par);
  r.estimates.head(p) = cur.beta;
  r.wald_defined.assign(static_cast<std::size_t>(n_par), true);
  if (estimate_phi) {
    r.names.emplace_back("phi");
    r.estimates(p) = cur.phi;
    r.wald_defined.back() = false;
  }
  r.aic = aic_of(ll, n_par);

  const ScoreInfo k = fisher_info(d, cur);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(k.k_beta);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (!estimate_phi || k.k_phi > 0.0)) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::VectorXd se(n_par);
    se.head(p) = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    if (estimate_phi) se(p) = std::sqrt(1.0 / k.k_phi);
    if (se.allFinite() && (se.array() > 0.0).all()) r.std_errors = se;
  }
  return r;
}

MnbParams params_of(const FitResult& r) {
  MnbParams p;
  const bool has_phi = !r.names.empty() && r.names.back() == "phi";
  const Eigen::Index nb = r.estimates.size() - (has_phi ? 1 : 0);
  p.beta = r.estimates.head(nb);
  p.phi = has_phi ? r.estimates(nb) : std::numeric_limits<double>::infinity();
  return p;
}

namespace {

double cluster_deviance(const ClusterData& c, const Eigen::VectorXd& mu, double phi) {
  const double y_total = c.y.sum();
  const double mu_total = mu.sum();
  double v = phi * std::log((phi + mu_total) / (phi + y_total));
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (c.y(j) > 0.0) v += c.y(j) * std::log(c.y(j) * (phi + mu_total) / (mu(j) * (phi + y_total)));
  }
  return 2.0 * v;
}

}  // namespace

std::vector<Eigen::VectorXd> fitted_means(const Dataset& d, const MnbParams& fitted) {
  check_dims(d, fitted);
  std::vector<Eigen::VectorXd> mus;
  mus.reserve(d.clusters.size());
  for (const auto& c : d.clusters) mus.push_back(c.mean(fitted.beta));
  return mus;
}

namespace {

void check_means(const Dataset& d, const std::vector<Eigen::VectorXd>& mus, double phi) {
  if (!(phi > 0.0)) throw DomainError("phi must be positive");
  if (mus.size() != d.clusters.size()) throw DomainError("fitted means do not match the cluster count");
  for (std::size_t i = 0; i < mus.size(); ++i) {
    if (mus[i].size() != d.clusters[i].size() || !(mus[i].array() > 0.0).all()) {
      throw DomainError("fitted means for cluster '" + d.clusters[i].id + "' are invalid");
    }
  }
}

}  // namespace

double deviance(const Dataset& d, const std::vector<Eigen::VectorXd>& mus, double phi) {
  check_means(d, mus, phi);
  double total = 0.0;
  for (std::size_t i = 0; i < mus.size(); ++i) total += cluster_deviance(d.clusters[i], mus[i], phi);
  return total;
}

double deviance(const Dataset& d, const MnbParams& fitted) {
  return deviance(d, fitted_means(d, fitted), fitted.phi);
}

std::vector<Eigen::VectorXd> deviance_components(const Dataset& d, const std::vector<Eigen::VectorXd>& mus,
                                                 double phi) {
  check_means(d, mus, phi);
  std::vector<Eigen::VectorXd> out;
  out.reserve(d.clusters.size());
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const auto& c = d.clusters[i];
    const Eigen::VectorXd& mu = mus[i];
    const double y_total = c.y.sum();
    const double mu_total = mu.sum();
    const double m = static_cast<double>(c.size());
    const double shared = phi / m * std::log((phi + mu_total) / (phi + y_total));
    Eigen::VectorXd d2(c.size());
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double y = c.y(j);
      d2(j) = y == 0.0 ? 2.0 * shared
                       : 2.0 * (shared + y * std::log(y * (phi + mu_total) / (mu(j) * (phi + y_total))));
    }
    out.push_back(std::move(d2));
  }
  return out;
}

std::vector<Eigen::VectorXd> deviance_components(const Dataset& d, const MnbParams& fitted) {
  return deviance_components(d, fitted_means(d, fitted), fitted.phi);
}

namespace {

Eigen::MatrixXd weight_matrix(const Eigen::VectorXd& mu, double phi) {
  Eigen::MatrixXd w = -mu * mu.transpose() / (phi + mu.sum());
  w.diagonal() += mu;
  return w;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
  Eigen::VectorXd ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
    throw FitError("weight matrix is not positive semidefinite");
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ResidualReport residuals(const Dataset& d, const MnbParams& fitted) {
  check_dims(d, fitted);
  const double phi = fitted.phi;
  const Eigen::Index p = d.n_cols();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  std::vector<Eigen::VectorXd> mus;
  mus.reserve(d.clusters.size());
  for (const auto& c : d.clusters) {
    mus.push_back(c.mean(fitted.beta));
    info.noalias() += c.X.transpose() * weight_matrix(mus.back(), phi) * c.X;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    throw FitError("leverage: weighted information X'WX is singular");
  }
  const auto comps = deviance_components(d, fitted);

  ResidualReport rep;
  rep.rows.reserve(d.n_obs());
  for (std::size_t i = 0; i < d.clusters.size(); ++i) {
    const auto& c = d.clusters[i];
    const Eigen::VectorXd& mu = mus[i];
    const Eigen::MatrixXd root = symmetric_sqrt(weight_matrix(mu, phi));
    const Eigen::MatrixXd a = root * c.X;
    const Eigen::MatrixXd solved = ldlt.solve(a.transpose());
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      ResidualRow row;
      row.cluster = c.id;
      row.index = j;
      row.y = c.y(j);
      row.fitted = mu(j);
      row.leverage = std::clamp(a.row(j).dot(solved.col(j)), 0.0, 1.0);
      row.d2 = comps[i](j);
      const double diff = c.y(j) - mu(j);
      if (row.d2 >= 0.0) {
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        row.deviance_residual = sign * std::sqrt(2.0 * row.d2) / std::sqrt(1.0 - row.leverage);
      } else {
        ++rep.n_negative_d2;
      }
      const double var = std::isfinite(phi) ? mu(j) + mu(j) * mu(j) / phi : mu(j);
      row.pearson = diff / std::sqrt(var);
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

double intraclass_corr(double mu_j, double mu_k, double phi) {
  if (!(mu_j > 0.0) || !(mu_k > 0.0) || !(phi > 0.0)) {
    throw DomainError("intraclass_corr: means and phi must be positive");
  }
  if (std::isinf(phi)) return 0.0;
  return std::sqrt(mu_j * mu_k) / std::sqrt((phi + mu_j) * (phi + mu_k));
}

std::vector<std::pair<std::string, double>> predict_random_effects(const Dataset& d, const MnbParams& p) {
  check_dims(d, p);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(d.clusters.size());
  for (const auto& c : d.clusters) {
    out.emplace_back(c.id, special::digamma(c.y.sum() + p.phi) - std::log(c.mean(p.beta).sum() + p.phi));
  }
  return out;
}

}  // namespace mnb
}  // namespace glgmix
