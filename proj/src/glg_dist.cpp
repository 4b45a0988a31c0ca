#include "glgmix/glg_dist.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "glgmix/errors.hpp"
#include "glgmix/special.hpp"

namespace glgmix {

void GlgParams::validate() const {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(lambda)) {
    throw DomainError("GLG parameters must be finite");
  }
  if (!(sigma > 0.0)) throw DomainError("GLG scale sigma must be positive");
}

bool GlgParams::is_normal() const noexcept { return std::fabs(lambda) < kLambdaEps; }

namespace glg {

double log_pdf(double y, const GlgParams& p) {
  p.validate();
  if (!std::isfinite(y)) throw DomainError("GLG log_pdf: non-finite argument");
  const double z = (y - p.mu) / p.sigma;
  if (p.is_normal()) {
    return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(p.sigma) - 0.5 * z * z;
  }
  // z/lambda - k e^{lambda z} = -k - k (e^q - 1 - q),  q = lambda z
  const double k = 1.0 / (p.lambda * p.lambda);
  const double q = p.lambda * z;
  return special::glg_log_norm(k) - std::log(p.sigma) - k * special::expm1mx(q);
}

double mean(const GlgParams& p) {
  p.validate();
  if (p.is_normal()) return p.mu;
  // b = mu + (sigma / lambda) log(lambda^2 w), w ~ Gamma(k), E log w = psi(k)
  const double k = 1.0 / (p.lambda * p.lambda);
  return p.mu + p.sigma * (special::digamma(k) - std::log(k)) / p.lambda;
}

double variance(const GlgParams& p) {
  p.validate();
  if (p.is_normal()) return p.sigma * p.sigma;
  const double k = 1.0 / (p.lambda * p.lambda);
  return p.sigma * p.sigma * special::trigamma(k) / (p.lambda * p.lambda);
}

namespace {

void check_moment_args(const GlgParams& p, int k) {
  p.validate();
  if (p.mu != 0.0) throw DomainError("exp_moment requires mu = 0");
  if (k != 1 && k != 2) throw DomainError("exp_moment order must be 1 or 2");
  if (!p.is_normal() && p.lambda < 0.0 && k * p.sigma * std::fabs(p.lambda) >= 1.0) {
    throw MomentDoesNotExist("E[exp(" + std::to_string(k) + " b)] is infinite: requires " +
                             std::to_string(k) + " * sigma * |lambda| < 1");
  }
}

}  // namespace

double exp_moment(const GlgParams& p, int k) {
  check_moment_args(p, k);
  if (p.is_normal()) return std::exp(0.5 * k * k * p.sigma * p.sigma);
  // e^{kb} = (lambda^2 w)^{k sigma / lambda} with w ~ Gamma(lambda^-2), so the
  // moment is (lambda^2)^{k sigma/lambda} Gamma(lambda^-2 (k lambda sigma + 1)) / Gamma(lambda^-2)
  const double shape = 1.0 / (p.lambda * p.lambda);
  const double power = k * p.sigma / p.lambda;
  return std::exp(power * std::log(p.lambda * p.lambda) +
                  special::log_gamma(shape + power) - special::log_gamma(shape));
}

double exp_moment_by_quadrature(const GlgParams& p, int k) {
  check_moment_args(p, k);
  if (p.is_normal() || p.lambda > 0.0) return exp_moment(p, k);
  const double shape = 1.0 / (p.lambda * p.lambda);
  const double a = shape * (k * p.lambda * p.sigma + 1.0);
  // integral of t^{a-1} e^{-t} over (0, inf)
  boost::math::quadrature::exp_sinh<double> integrator;
  const double lg_shape = special::log_gamma(shape);
  auto f = [a](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) - t);
  };
  const double integral = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
  const double power = k * p.sigma / p.lambda;
  return std::exp(power * std::log(p.lambda * p.lambda) - lg_shape) * integral;
}

double draw(const GlgParams& p, std::mt19937_64& rng) {
  if (p.is_normal()) {
    std::normal_distribution<double> normal(p.mu, p.sigma);
    return normal(rng);
  }
  const double shape = 1.0 / (p.lambda * p.lambda);
  std::gamma_distribution<double> gamma(shape, 1.0);
  double w = gamma(rng);
  while (!(w > 0.0)) w = gamma(rng);
  return p.mu + p.sigma / p.lambda * std::log(p.lambda * p.lambda * w);
}

std::vector<double> sample(const GlgParams& p, std::uint64_t seed, std::size_t n) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = draw(p, rng);
  return out;
}

}  // namespace glg
}  // namespace glgmix
