#include "glgmix/special.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/log1p.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>

#include "glgmix/errors.hpp"

namespace glgmix::special {

namespace {

using boost::math::policies::domain_error;
using boost::math::policies::pole_error;
using boost::math::policies::errno_on_error;
using NoThrow = boost::math::policies::policy<domain_error<errno_on_error>, pole_error<errno_on_error>>;

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_gamma: argument must be positive and finite");
  }
  return std::lgamma(x);
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("digamma: argument must be positive and finite");
  }
  return boost::math::digamma(x, NoThrow());
}

double trigamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("trigamma: argument must be positive and finite");
  }
  return boost::math::trigamma(x, NoThrow());
}

double log_rising_factorial(double x, double n) {
  if (n == 0.0) return 0.0;
  if (n <= 16.0) {
    double prod = 1.0;
    for (int j = 0; j < static_cast<int>(n); ++j) prod *= x + j;
    return std::log(prod);
  }
  return std::lgamma(x + n) - std::lgamma(x);
}

double glg_log_norm(double k) {
  if (k >= 100.0) {
    const double k2 = k * k;
    return -0.5 * std::log(2.0 * std::numbers::pi) -
           1.0 / (12.0 * k) * (1.0 - 1.0 / (30.0 * k2) * (1.0 - 2.0 / (7.0 * k2)));
  }
  return k * std::log(k) - k - std::lgamma(k) - 0.5 * std::log(k);
}

double log1pmx(double x) {
  if (std::fabs(x) < 0.1) {
    // alternating series -x^2/2 + x^3/3 - ...
    double term = x;
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
      term *= -x;
      const double add = term / n;
      sum += add;
      if (std::fabs(add) < 1e-18 * std::fabs(sum)) break;
    }
    return sum;
  }
  return boost::math::log1p(x) - x;
}

double expm1mx(double x) {
  if (std::fabs(x) < 0.1) {
    double term = x;
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
      term *= x / n;
      sum += term;
      if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
    }
    return sum;
  }
  return std::expm1(x) - x;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace glgmix::special
