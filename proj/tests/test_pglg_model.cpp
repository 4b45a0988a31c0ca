#include <doctest.h>

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>

#include "glgmix/errors.hpp"
#include "glgmix/mnb_model.hpp"
#include "glgmix/pglg_model.hpp"
#include "glgmix/simulate.hpp"
#include "helpers.hpp"

using glgmix::PglgParams;
namespace pglg = glgmix::pglg;
using testing::cluster_with_means;
using testing::single;

namespace {

const glgmix::QuadratureRule& rule() { return glgmix::quadrature::cached_gauss_hermite(glgmix::kDefaultQuadratureOrder); }

PglgParams re(double sigma, double lambda) { return {testing::zero_beta(), sigma, lambda}; }

glgmix::SimDesign binary_design(std::size_t n, std::size_t m, std::uint64_t seed) {
  glgmix::SimDesign design = glgmix::SimDesign::uniform(n, m);
  glgmix::CovariateRecipe x;
  x.name = "x";
  x.kind = glgmix::CovariateRecipe::Kind::Bernoulli;
  x.a = 0.5;
  x.per_cluster = true;
  design.covariates.push_back(x);
  design.seed = seed;
  return design;
}

}  // namespace

TEST_SUITE("pglg_model") {

TEST_CASE("cluster marginal closed forms") {
  CHECK(std::fabs(pglg::cluster_log_marginal(cluster_with_means("a", {0}, {1}), re(1, 1), rule()) - std::log(0.5)) < 1e-8);
  CHECK(std::fabs(pglg::cluster_log_marginal(cluster_with_means("a", {1, 2}, {1, 1}), re(0.5, 0.5), rule()) -
                  (-2.902794277894721846)) < 1e-8);

  const auto c = cluster_with_means("a", {3, 0, 2}, {1.5, 0.4, 2.0});
  double pois = 0;
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mu = std::exp(c.offset(j));
    pois += c.y(j) * std::log(mu) - mu - std::lgamma(c.y(j) + 1);
  }
  CHECK(std::fabs(pglg::cluster_log_marginal(c, re(1e-8, 0), rule()) - pois) < 1e-5);
}

TEST_CASE("cluster marginal matches high-precision integration") {
  CHECK(std::fabs(pglg::cluster_log_marginal(cluster_with_means("a", {3, 0, 5}, {1, 2, 0.5}), re(0.6, -1.2), rule()) -
                  (-12.57190493700370017)) < 1e-8);
  CHECK(std::fabs(pglg::cluster_log_marginal(cluster_with_means("a", {2, 7}, {1.5, 3}), re(0.8, 0), rule()) -
                  (-4.702881436461653907)) < 1e-8);
  CHECK(std::fabs(pglg::cluster_log_marginal(cluster_with_means("a", {0, 1, 4}, {1, 1, 2}), re(0.4, 0.7), rule()) -
                  (-4.699604131949684643)) < 1e-8);
}

TEST_CASE("quadrature path equals the closed form when sigma = lambda") {
  double worst = 0;
  for (double l : {0.25, 0.5, 1.0}) {
    const double phi = 1 / (l * l);
    for (double m1 : {0.5, 1.0, 5.0})
      for (double m2 : {0.5, 1.0, 5.0})
        for (int y1 = 0; y1 <= 10; y1 += 2)
          for (int y2 = 0; y2 <= 10; y2 += 3) {
            const auto c = cluster_with_means("a", {double(y1), double(y2)}, {m1, m2});
            const double diff = pglg::cluster_log_marginal(c, re(l, l), rule()) -
                                glgmix::mnb::log_pmf(c, {testing::zero_beta(), phi});
            worst = std::max(worst, std::fabs(diff));
          }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("log_likelihood sums clusters in dataset order") {
  const auto d = glgmix::simulate::simulate_pglg(binary_design(40, 3, 2), {Eigen::Vector2d(0.5, 0.3), 0.6, -0.8});
  const PglgParams p{Eigen::Vector2d(0.4, 0.2), 0.7, -0.5};
  double sum = 0;
  for (const auto& c : d.clusters) sum += pglg::cluster_log_marginal(c, p, rule());
  CHECK(pglg::log_likelihood(d, p, rule()) == sum);
  auto one = d;
  one.clusters = {d.clusters[3]};
  CHECK(pglg::log_likelihood(one, p, rule()) == pglg::cluster_log_marginal(d.clusters[3], p, rule()));

  auto shuffled = d;
  std::reverse(shuffled.clusters.begin(), shuffled.clusters.end());
  CHECK(std::fabs(pglg::log_likelihood(shuffled, p, rule()) - sum) < 1e-12 * std::fabs(sum));
  CHECK_THROWS_AS(pglg::log_likelihood(d, {Eigen::Vector3d::Zero(), 1, 0}, rule()), glgmix::DomainError);
}

TEST_CASE("true parameters are favoured over perturbed ones") {
  const PglgParams truth{Eigen::Vector2d(0.5, 0.48), 0.6, -1.2};
  const PglgParams off{Eigen::Vector2d(0.7, 0.3), 0.9, 0.3};
  double margin = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = glgmix::simulate::simulate_pglg(binary_design(50, 4, seed), truth);
    margin += pglg::log_likelihood(d, truth, rule()) - pglg::log_likelihood(d, off, rule());
  }
  CHECK(margin > 0.0);
}

TEST_CASE("empirical Bayes predictions against the gamma posterior") {
  const auto d0 = single(cluster_with_means("a", {0}, {1}));
  CHECK(std::fabs(pglg::predict_random_effects(d0, re(1, 1), rule())[0].second -
                  (boost::math::digamma(1.0) - std::log(2.0))) < 1e-6);
  const auto d5 = single(cluster_with_means("a", {5}, {1}));
  CHECK(std::fabs(pglg::predict_random_effects(d5, re(1, 1), rule())[0].second -
                  (boost::math::digamma(6.0) - std::log(2.0))) < 1e-6);

  const auto d = single(cluster_with_means("a", {3, 0, 5}, {1, 2, 0.5}));
  CHECK(std::fabs(pglg::predict_random_effects(d, re(0.6, -1.2), rule())[0].second - 0.646588951481035665) < 1e-7);

  glgmix::Dataset many;
  many.column_names = {glgmix::kInterceptName};
  for (int i = 0; i < 5; ++i) many.clusters.push_back(cluster_with_means(std::to_string(i), {double(3 * i)}, {1.5}));
  for (const auto& [id, b] : pglg::predict_random_effects(many, re(1e-7, 0), rule())) CHECK(std::fabs(b) < 1e-6);
}

TEST_CASE("marginal moments") {
  const auto c = cluster_with_means("a", {0, 0}, {1, 1});
  auto m = pglg::marginal_moments(c, re(1, 0));
  CHECK(m.means(0) == doctest::Approx(std::exp(0.5)).epsilon(1e-13));
  CHECK(m.variances(0) == doctest::Approx(std::exp(2.0) - std::exp(1.0) + std::exp(0.5)).epsilon(1e-13));

  m = pglg::marginal_moments(c, re(1, 1));
  CHECK(m.covariance(0, 1) == doctest::Approx(1.0).epsilon(1e-13));

  const auto c2 = cluster_with_means("a", {0, 0, 0}, {0.5, 2, 3});
  for (double l : {-0.6, 0.0, 0.4, 1.3}) {
    const auto mm = pglg::marginal_moments(c2, re(0.7, l));
    const double e1 = glgmix::glg::exp_moment({0, 0.7, l}, 1);
    const double v = glgmix::glg::exp_moment({0, 0.7, l}, 2) - e1 * e1;
    for (int j = 0; j < 3; ++j) {
      CHECK(mm.variances(j) / mm.means(j) > 1.0);
      const double mu = std::exp(c2.offset(j));
      CHECK(mm.variances(j) / mm.means(j) == doctest::Approx(1 + mu * v / e1).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(pglg::marginal_moments(c2, re(3, -0.5)), glgmix::MomentDoesNotExist);
}

TEST_CASE("fit recovers parameters of a skewed random intercept") {
  const PglgParams truth{Eigen::Vector2d(0.5, 0.48), 0.6, -1.2};
  const auto d = glgmix::simulate::simulate_pglg(binary_design(500, 5, 77), truth);
  const auto r = pglg::fit(d);
  REQUIRE(r.converged);
  REQUIRE(r.std_errors);
  CHECK(r.names == std::vector<std::string>{"(Intercept)", "x", "sigma", "lambda"});
  const double t[4] = {0.5, 0.48, 0.6, -1.2};
  for (int k = 0; k < 4; ++k) {
    CAPTURE(r.names[k]);
    CHECK(std::fabs(r.estimates(k) - t[k]) < 3 * (*r.std_errors)(k));
  }
  CHECK(r.aic == -2 * r.loglik + 2 * 4);
  CHECK_FALSE(r.z_value(2).has_value());
  CHECK(r.z_value(3).has_value());

  glgmix::PglgFitOptions normal;
  normal.constraint = glgmix::PglgConstraint::LambdaZero;
  const auto rn = pglg::fit(d, std::nullopt, normal);
  CHECK(rn.model == "pglg-normal");
  CHECK(rn.n_parameters() == 3);
  CHECK(rn.loglik <= r.loglik + 1e-6);
  CHECK(rn.aic > r.aic);
}

TEST_CASE("sigma = lambda fit reproduces the MNB fit") {
  const auto d = glgmix::simulate::simulate_mnb(binary_design(150, 3, 9), {Eigen::Vector2d(0.8, -0.4), 4.0});
  glgmix::PglgFitOptions opts;
  opts.constraint = glgmix::PglgConstraint::SigmaEqualsLambda;
  const auto rp = pglg::fit(d, std::nullopt, opts);
  const auto rm = glgmix::mnb::fit(d);
  REQUIRE(rp.converged);
  REQUIRE(rm.converged);
  const auto pp = pglg::params_of(rp);
  const auto pm = glgmix::mnb::params_of(rm);
  CHECK((pp.beta - pm.beta).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(std::fabs(1 / (pp.lambda * pp.lambda) - pm.phi) < 1e-3);
  CHECK(std::fabs(rp.loglik - rm.loglik) < 1e-5);
}

TEST_CASE("fit is invariant to cluster order") {
  const auto d = glgmix::simulate::simulate_pglg(binary_design(120, 3, 15), {Eigen::Vector2d(0.2, 0.6), 0.5, 0.8});
  auto rev = d;
  std::reverse(rev.clusters.begin(), rev.clusters.end());
  const auto a = pglg::fit(d);
  const auto b = pglg::fit(rev);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK((a.estimates - b.estimates).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Monte-Carlo check of the marginal moments") {
  glgmix::Dataset layout;
  layout.column_names = {glgmix::kInterceptName};
  for (int i = 0; i < 100000; ++i) layout.clusters.push_back(cluster_with_means(std::to_string(i), {0, 0}, {0.8, 1.5}));
  for (double l : {-0.4, 0.0, 0.9}) {
    const PglgParams p = re(0.5, l);
    const auto d = glgmix::simulate::simulate_pglg(layout, p, 123);
    const auto mm = pglg::marginal_moments(layout.clusters[0], p);
    std::vector<double> a, b, ab;
    for (const auto& c : d.clusters) {
      a.push_back(c.y(0));
      b.push_back(c.y(1));
    }
    const auto ma = testing::moments(a);
    const auto mb = testing::moments(b);
    for (std::size_t i = 0; i < a.size(); ++i) ab.push_back((a[i] - ma.mean) * (b[i] - mb.mean));
    const auto mab = testing::moments(ab);
    CAPTURE(l);
    CHECK(std::fabs(ma.mean - mm.means(0)) < 3 * ma.se_mean());
    CHECK(std::fabs(mb.var - mm.variances(1)) < 3 * mb.se_var());
    CHECK(std::fabs(mab.mean - mm.covariance(0, 1)) < 3 * mab.se_mean());
  }
}

}  // TEST_SUITE
