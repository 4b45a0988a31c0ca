#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "glgmix/data_io.hpp"

namespace testing {

// Cluster with an intercept-only design whose means are exactly `mu`
// (through the offset), so closed forms can be evaluated by hand.
inline glgmix::ClusterData cluster_with_means(const std::string& id, const std::vector<double>& y,
                                              const std::vector<double>& mu) {
  glgmix::ClusterData c;
  c.id = id;
  const auto m = static_cast<Eigen::Index>(y.size());
  c.y.resize(m);
  c.X = Eigen::MatrixXd::Ones(m, 1);
  c.offset.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    c.y(j) = y[static_cast<std::size_t>(j)];
    c.offset(j) = std::log(mu[static_cast<std::size_t>(j)]);
  }
  return c;
}

inline glgmix::Dataset single(const glgmix::ClusterData& c) {
  glgmix::Dataset d;
  d.clusters.push_back(c);
  d.column_names = {glgmix::kInterceptName};
  return d;
}

inline Eigen::VectorXd zero_beta() { return Eigen::VectorXd::Zero(1); }

// Five-point central difference.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

struct Moments {
  double mean = 0, var = 0, m4 = 0;
  std::size_t n = 0;
  double se_mean() const { return std::sqrt(var / static_cast<double>(n)); }
  double se_var() const { return std::sqrt((m4 - var * var) / static_cast<double>(n)); }
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : v) {
    const double d = x - m.mean;
    m.var += d * d;
    m.m4 += d * d * d * d;
  }
  m.var /= static_cast<double>(m.n - 1);
  m.m4 /= static_cast<double>(m.n);
  return m;
}

}  // namespace testing

#include <random>

#include "glgmix/simulate.hpp"

namespace testing {

// Small random dataset: intercept plus one or two covariates, mixed cluster sizes.
inline glgmix::Dataset random_small(std::uint64_t seed, int n_clusters = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_int_distribution<int> ncov(1, 2);
  glgmix::SimDesign design;
  for (int i = 0; i < n_clusters; ++i) design.cluster_sizes.push_back(static_cast<std::size_t>(size(rng)));
  const int k = ncov(rng);
  for (int c = 0; c < k; ++c) {
    glgmix::CovariateRecipe r;
    r.name = "x" + std::to_string(c + 1);
    r.kind = glgmix::CovariateRecipe::Kind::Normal;
    r.a = 0.0;
    r.b = 0.6;
    design.covariates.push_back(r);
  }
  design.seed = seed;
  Eigen::VectorXd beta(k + 1);
  std::uniform_real_distribution<double> u(-0.5, 1.2);
  for (Eigen::Index j = 0; j <= k; ++j) beta(j) = u(rng);
  const double phi = std::uniform_real_distribution<double>(0.3, 8.0)(rng);
  return glgmix::simulate::simulate_mnb(design, glgmix::MnbParams{beta, phi});
}

inline Eigen::VectorXd random_beta(std::uint64_t seed, Eigen::Index p) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.4, 1.0);
  Eigen::VectorXd b(p);
  for (Eigen::Index j = 0; j < p; ++j) b(j) = u(rng);
  return b;
}

// Table-3-magnitude design: 5 concentration blocks, three broods per animal.
inline glgmix::SimDesign dubia_like(std::size_t n_clusters, std::uint64_t seed) {
  glgmix::SimDesign design = glgmix::SimDesign::uniform(n_clusters, 3);
  glgmix::CovariateRecipe conc;
  conc.name = "conc";
  conc.kind = glgmix::CovariateRecipe::Kind::ClusterLevels;
  conc.values = {0, 12.5, 25, 50, 100};
  glgmix::CovariateRecipe day;
  day.name = "brood_day";
  day.kind = glgmix::CovariateRecipe::Kind::Within;
  day.values = {1, 2, 3};
  design.covariates = {conc, day};
  design.interactions = {{"conc", "brood_day"}};
  design.seed = seed;
  return design;
}

inline Eigen::VectorXd dubia_beta() {
  Eigen::VectorXd b(4);
  b << 2.53, -0.004, 0.29, -0.0013;
  return b;
}

}  // namespace testing
