#pragma once

// Generalized log-gamma law GLG(mu, sigma, lambda).
//
// For lambda != 0, with z = (y - mu) / sigma and k = lambda^-2,
//   f(y) = c(lambda) / sigma * exp(z / lambda - k * exp(lambda * z)),
//   c(lambda) = |lambda| * k^k / Gamma(k),
// and for lambda == 0 the normal N(mu, sigma^2). lambda = 1 is the
// extreme-value law; lambda < 0 skews right, lambda > 0 skews left.

#include <cstdint>
#include <random>
#include <vector>

namespace glgmix {

// Below this |lambda| the normal branch is used.
inline constexpr double kLambdaEps = 1e-6;

struct GlgParams {
  double mu = 0.0;
  double sigma = 1.0;
  double lambda = 0.0;

  // Throws DomainError unless sigma > 0 and every field is finite.
  void validate() const;
  bool is_normal() const noexcept;
};

namespace glg {

double log_pdf(double y, const GlgParams& p);
double mean(const GlgParams& p);
double variance(const GlgParams& p);

// E[exp(k * b)] for b ~ GLG(0, sigma, lambda), k in {1, 2}.
// Throws MomentDoesNotExist when lambda < 0 and k * sigma * |lambda| >= 1.
double exp_moment(const GlgParams& p, int k);

// Same quantity, but the gamma integral of the lambda < 0 branch is done
// by direct numerical quadrature over (0, inf) instead of the closed form.
double exp_moment_by_quadrature(const GlgParams& p, int k);

// One draw using a caller-owned engine.
double draw(const GlgParams& p, std::mt19937_64& rng);

std::vector<double> sample(const GlgParams& p, std::uint64_t seed, std::size_t n);

}  // namespace glg
}  // namespace glgmix
