// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <boost/math/special_functions/digamma.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "glgmix/data_io.hpp"
#include "glgmix/diagnostics.hpp"
#include "glgmix/errors.hpp"
#include "glgmix/mnb_model.hpp"
#include "glgmix/pglg_model.hpp"
#include "glgmix/simulate.hpp"
#include "helpers.hpp"

using namespace glgmix;
using testing::cluster_with_means;
using testing::single;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const QuadratureRule& rule() { return quadrature::cached_gauss_hermite(kDefaultQuadratureOrder); }

// 1 ------------------------------------------------------------------
Outcome closed_form_equivalence() {
  double worst = 0;
  int n = 0;
  for (double l : {0.25, 0.5, 1.0}) {
    const double phi = 1 / (l * l);
    for (double m1 : {0.5, 1.0, 5.0})
      for (double m2 : {0.5, 1.0, 5.0})
        for (int y1 = 0; y1 <= 10; ++y1)
          for (int y2 = 0; y2 <= 10; ++y2) {
            const auto c = cluster_with_means("c", {double(y1), double(y2)}, {m1, m2});
            const double quad = pglg::cluster_log_marginal(c, {testing::zero_beta(), l, l}, rule());
            const double closed = mnb::log_likelihood(single(c), {testing::zero_beta(), phi});
            worst = std::max(worst, std::fabs(quad - closed));
            ++n;
          }
  }
  return {worst < 1e-6, fmt("max |quadrature - closed form| = %.2e over %.0f clusters", worst, n)};
}

// 2 ------------------------------------------------------------------
Outcome analytic_derivatives() {
  double worst_u = 0, worst_k = 0, worst_l = 0, worst_e = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto d = testing::random_small(seed * 7919);
    const MnbParams p{testing::random_beta(seed, d.n_cols()), 0.4 + 0.25 * double(seed % 20)};
    const auto s = mnb::score(d, p);
    const Eigen::MatrixXd obs = mnb::observed_info_beta(d, p);
    for (Eigen::Index a = 0; a < d.n_cols(); ++a) {
      auto f = [&](double v) {
        MnbParams q = p;
        q.beta(a) = v;
        return mnb::log_likelihood(d, q);
      };
      worst_u = std::max(worst_u, testing::rel_err(s.u_beta(a), testing::central_diff(f, p.beta(a), 1e-3)));
      for (Eigen::Index b = 0; b < d.n_cols(); ++b) {
        auto g = [&](double v) {
          MnbParams q = p;
          q.beta(b) = v;
          return mnb::score(d, q).u_beta(a);
        };
        worst_k = std::max(worst_k, testing::rel_err(obs(a, b), -testing::central_diff(g, p.beta(b), 1e-3)));
      }
    }
    auto f = [&](double v) { return mnb::log_likelihood(d, {p.beta, v}); };
    worst_u = std::max(worst_u, testing::rel_err(s.u_phi, testing::central_diff(f, p.phi, 1e-3 * p.phi)));
    auto g = [&](double v) { return mnb::score(d, {p.beta, v}).u_phi; };
    worst_l = std::max(worst_l, testing::rel_err(mnb::d2_loglik_dphi(d, p), testing::central_diff(g, p.phi, 1e-3 * p.phi)));

    // the observed beta information is linear in y, so its expectation is itself at y = mu
    auto expected = d;
    for (auto& c : expected.clusters) c.y = c.mean(p.beta);
    const Eigen::MatrixXd e = mnb::observed_info_beta(expected, p);
    const Eigen::MatrixXd k = mnb::fisher_info(d, p).k_beta;
    worst_e = std::max(worst_e, (e - k).cwiseAbs().maxCoeff() / std::max(1.0, k.cwiseAbs().maxCoeff()));
  }
  const bool ok = worst_u < 1e-6 && worst_k < 1e-6 && worst_l < 1e-6 && worst_e < 1e-12;
  return {ok, fmt("max rel err: scores %.1e, -dU_beta/dbeta %.1e, d2l/dphi2 %.1e", worst_u, worst_k, worst_l) +
                  fmt("; E[observed] vs K_beta %.1e", worst_e)};
}

// 3 ------------------------------------------------------------------
struct PairMoments {
  testing::Moments a, b, ab;
};

PairMoments pair_moments(const Dataset& d) {
  std::vector<double> a, b, ab;
  for (const auto& c : d.clusters) {
    a.push_back(c.y(0));
    b.push_back(c.y(1));
  }
  PairMoments m{testing::moments(a), testing::moments(b), {}};
  for (std::size_t i = 0; i < a.size(); ++i) ab.push_back((a[i] - m.a.mean) * (b[i] - m.b.mean));
  m.ab = testing::moments(ab);
  return m;
}

Outcome normalization_and_moments() {
  double worst_norm = 0;
  const double phi = 1.5;
  const MnbParams p0{testing::zero_beta(), phi};
  {
    double s = 0;
    for (int a = 0; a <= 400; ++a) s += std::exp(mnb::log_pmf(cluster_with_means("c", {double(a)}, {0.7}), p0));
    worst_norm = std::max(worst_norm, std::fabs(s - 1));
    s = 0;
    for (int a = 0; a <= 60; ++a)
      for (int b = 0; b <= 60; ++b) s += std::exp(mnb::log_pmf(cluster_with_means("c", {double(a), double(b)}, {0.7, 1.2}), p0));
    worst_norm = std::max(worst_norm, std::fabs(s - 1));
    s = 0;
    for (int a = 0; a <= 60; ++a)
      for (int b = 0; b <= 60; ++b)
        for (int e = 0; e <= 60; ++e)
          s += std::exp(mnb::log_pmf(cluster_with_means("c", {double(a), double(b), double(e)}, {0.5, 0.3, 0.8}), p0));
    worst_norm = std::max(worst_norm, std::fabs(s - 1));
  }

  Dataset layout;
  layout.column_names = {kInterceptName};
  const double mu1 = 0.8, mu2 = 2.5;
  for (int i = 0; i < 100000; ++i) layout.clusters.push_back(cluster_with_means(std::to_string(i), {0, 0}, {mu1, mu2}));

  double worst_z = 0;
  auto z = [&](double est, double truth, double se) { worst_z = std::max(worst_z, std::fabs(est - truth) / se); };

  for (double ph : {0.7, 4.0}) {
    const auto m = pair_moments(simulate::simulate_mnb(layout, {testing::zero_beta(), ph}, 100 + std::uint64_t(ph * 10)));
    z(m.a.mean, mu1, m.a.se_mean());
    z(m.a.var, mu1 + mu1 * mu1 / ph, m.a.se_var());
    z(m.b.var, mu2 + mu2 * mu2 / ph, m.b.se_var());
    z(m.ab.mean, mu1 * mu2 / ph, m.ab.se_mean());
  }
  for (double l : {-0.5, 0.0, 0.8}) {
    const PglgParams p{testing::zero_beta(), 0.5, l};
    const auto mm = pglg::marginal_moments(layout.clusters[0], p);
    const auto m = pair_moments(simulate::simulate_pglg(layout, p, 200 + std::uint64_t(10 * (l + 1))));
    z(m.a.mean, mm.means(0), m.a.se_mean());
    z(m.b.mean, mm.means(1), m.b.se_mean());
    z(m.a.var, mm.variances(0), m.a.se_var());
    z(m.b.var, mm.variances(1), m.b.se_var());
    z(m.ab.mean, mm.covariance(0, 1), m.ab.se_mean());
  }
  return {worst_norm < 1e-8 && worst_z < 3,
          fmt("max |sum pmf - 1| = %.1e (m = 1, 2, 3); worst moment deviation %.2f MC SE at 1e5 clusters", worst_norm,
              worst_z)};
}

// 4 ------------------------------------------------------------------
Outcome parameter_recovery() {
  const auto d = simulate::simulate_mnb(testing::dubia_like(500, 2024), {testing::dubia_beta(), 11.6});
  const auto r = mnb::fit(d);
  if (!r.converged || !r.std_errors) return {false, "fit did not converge"};
  Eigen::VectorXd truth(5);
  truth << testing::dubia_beta(), 11.6;
  double worst = 0;
  for (Eigen::Index k = 0; k < 5; ++k) worst = std::max(worst, std::fabs(r.estimates(k) - truth(k)) / (*r.std_errors)(k));
  bool monotone = true;
  for (std::size_t t = 1; t < r.trace.size(); ++t) {
    // equal-within-rounding steps are taken only below the summation noise floor
    monotone = monotone && r.trace[t].loglik >= r.trace[t - 1].loglik - 1e-13 * std::fabs(r.trace[t - 1].loglik);
  }
  const auto s = mnb::score(d, mnb::params_of(r));
  const double max_score = std::max(s.u_beta.cwiseAbs().maxCoeff(), std::fabs(s.u_phi));
  return {worst < 3 && monotone && max_score < 1e-6,
          fmt("worst |estimate - truth| = %.2f SE; %.0f iterations; final max score %.1e", worst, r.n_iterations,
              max_score) +
              (monotone ? "; loglik monotone" : "; loglik NOT monotone")};
}

// 5 ------------------------------------------------------------------
Outcome empirical_bayes() {
  double worst = 0;
  for (double phi : {0.5, 1.0, 4.0}) {
    const double l = 1 / std::sqrt(phi);
    const PglgParams p{testing::zero_beta(), l, l};
    Dataset d;
    d.column_names = {kInterceptName};
    std::vector<double> expect;
    for (int yt = 0; yt <= 20; ++yt) {
      d.clusters.push_back(cluster_with_means("a" + std::to_string(yt), {double(yt)}, {1.0}));
      expect.push_back(boost::math::digamma(yt + phi) - std::log(1.0 + phi));
      const double y2 = std::floor(yt / 3.0);
      d.clusters.push_back(cluster_with_means("b" + std::to_string(yt), {yt - y2, y2}, {0.6, 2.3}));
      expect.push_back(boost::math::digamma(yt + phi) - std::log(2.9 + phi));
    }
    const auto eb = pglg::predict_random_effects(d, p, rule());
    for (std::size_t i = 0; i < eb.size(); ++i) worst = std::max(worst, std::fabs(eb[i].second - expect[i]));
  }
  return {worst < 1e-6, fmt("max |b_tilde - (digamma(y+ + phi) - log(mu+ + phi))| = %.2e", worst)};
}

// 6 ------------------------------------------------------------------
Outcome deviance() {
  Dataset sat;
  sat.column_names = {kInterceptName};
  sat.clusters = {cluster_with_means("a", {2, 1, 5}, {1, 1, 1}), cluster_with_means("b", {7, 3}, {1, 1}),
                  cluster_with_means("c", {12}, {1})};
  std::vector<Eigen::VectorXd> means;
  for (const auto& c : sat.clusters) means.push_back(c.y);
  const double at_saturation = mnb::deviance(sat, means, 2.0);

  const auto d = simulate::simulate_mnb(testing::dubia_like(150, 6), {testing::dubia_beta(), 5.0});
  const auto fit = mnb::fit(d);
  const auto p = mnb::params_of(fit);
  double sum = 0;
  for (const auto& comp : mnb::deviance_components(d, p)) sum += comp.sum();
  const double gap = std::fabs(sum - mnb::deviance(d, p));

  const auto neg = single(cluster_with_means("n", {1, 9}, {5, 5}));
  const auto rep = mnb::residuals(neg, {testing::zero_beta(), 1.0});
  const auto warning = diagnostics::negative_deviance_warning(rep);
  if (warning) std::printf("    warning: %s (y = (1, 9), mu_hat = (5, 5), phi = 1)\n", warning->c_str());
  const bool ok = at_saturation == 0.0 && gap < 1e-10 && rep.rows[0].d2 < 0 && warning.has_value();
  return {ok, fmt("saturated deviance = %g; |sum d2 - D| = %.1e; constructed d2 = %.4f", at_saturation, gap,
                  rep.rows[0].d2)};
}

// 7 ------------------------------------------------------------------
Outcome table_reproduction() {
  const PglgParams truth{Eigen::Vector2d(0.5, 0.48), 0.6, -1.2};
  int wins = 0, fitted = 0;
  for (std::uint64_t rep = 1; rep <= 20; ++rep) {
    SimDesign design = SimDesign::uniform(300, 5);
    CovariateRecipe x;
    x.name = "x";
    x.kind = CovariateRecipe::Kind::Bernoulli;
    x.a = 0.5;
    x.per_cluster = true;
    design.covariates.push_back(x);
    design.seed = 9000 + rep;
    const auto d = simulate::simulate_pglg(design, truth);
    PglgFitOptions normal;
    normal.constraint = PglgConstraint::LambdaZero;
    const auto rn = pglg::fit(d, std::nullopt, normal);
    const auto rg = pglg::fit(d);
    if (rn.converged && rg.converged) ++fitted;
    if (rg.aic < rn.aic) ++wins;
  }
  bool ok = wins >= 18;
  std::string detail = fmt("simulated skewed effects: GLG beats normal on AIC in %.0f/20 replications (%.0f both converged)",
                           wins, fitted);

  const char* path = std::getenv("GLGMIX_CDUBIA_CSV");
  if (!path || !*path) {
    std::printf("    notice: C. dubia check skipped; set GLGMIX_CDUBIA_CSV to the C. dubia brood counts\n");
    return {ok, detail + "; C. dubia check skipped (data unavailable)"};
  }
  ModelSpec spec;
  spec.response = "count";
  spec.cluster = "animal";
  spec.covariates = {"conc", "brood_day"};
  spec.interactions = {{"conc", "brood_day"}};
  const auto data = read_csv(path, spec);
  const auto mnb_fit = mnb::fit(data);
  MnbFitOptions nb_opts;
  nb_opts.model_label = "nb";
  const auto nb_fit = mnb::fit(regroup_each_row(data), std::nullopt, nb_opts);
  // published C. dubia estimates, MNB then NB; values are printed to 4 decimals, so a printed
  // digit's half-unit is allowed when it exceeds 0.5%.
  const double mnb_ref[6] = {2.5333, -0.0040, 0.2916, -0.0013, 11.5603, 829};
  const double nb_ref[6] = {2.5269, -0.0040, 0.3329, -0.0015, 7.4116, 830.3};
  const double half_unit[6] = {5e-5, 5e-5, 5e-5, 5e-5, 5e-5, 0.5};
  auto close = [&](const FitResult& r, const double* ref) {
    bool all = r.converged;
    for (int k = 0; k < 6; ++k) {
      const double v = k < 5 ? r.estimates(k) : r.aic;
      all = all && std::fabs(v - ref[k]) <= std::max(0.005 * std::fabs(ref[k]), half_unit[k]);
    }
    return all;
  };
  const bool t3 = close(mnb_fit, mnb_ref) && close(nb_fit, nb_ref);
  ok = ok && t3;
  return {ok, detail + fmt("; C. dubia: MNB AIC %.2f, NB AIC %.2f", mnb_fit.aic, nb_fit.aic) +
                  (t3 ? " (matches)" : " (MISMATCH)")};
}

// 8 ------------------------------------------------------------------
Outcome block_orthogonality() {
  const auto layout = simulate::layout(testing::dubia_like(50, 1));
  const MnbParams truth{testing::dubia_beta(), 11.6};
  const int reps = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sum_sq = Eigen::VectorXd::Zero(4);
  for (int r = 0; r < reps; ++r) {
    const auto d = simulate::simulate_mnb(layout, truth, 50000 + std::uint64_t(r));
    const auto s = mnb::score(d, truth);
    const Eigen::VectorXd c = s.u_beta * s.u_phi;
    sum += c;
    sum_sq += c.cwiseProduct(c);
  }
  double worst = 0;
  for (int k = 0; k < 4; ++k) {
    const double m = sum(k) / reps;
    const double se = std::sqrt((sum_sq(k) / reps - m * m) / reps);
    worst = std::max(worst, std::fabs(m) / se);
  }
  return {worst < 3, fmt("max |mean(U_beta U_phi)| = %.2f MC SE over %.0f replicates", worst, reps)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "closed-form equivalence", 30, closed_form_equivalence},
      {2, "analytic derivatives", 10, analytic_derivatives},
      {3, "normalization and moments", 120, normalization_and_moments},
      {4, "parameter recovery", 60, parameter_recovery},
      {5, "empirical Bayes oracle", 5, empirical_bayes},
      {6, "deviance", 0, deviance},
      {7, "table reproduction status", 0, table_reproduction},
      {8, "block orthogonality", 0, block_orthogonality},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s [%d] %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
