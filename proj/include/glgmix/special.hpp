#pragma once

// Gamma-family special functions used throughout the models.

namespace glgmix::special {

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

// log Γ(x + n) - log Γ(x) for integer n >= 0. Uses the rising product
// for small n and log-gamma differences otherwise.
double log_rising_factorial(double x, double n);

// log(k) * k - k - log Γ(k) - 0.5 * log(k), stable for very large k.
// This is the normalizing constant of the GLG density with the -k of the
// exponent folded in; it tends to -0.5 * log(2π) as k grows.
double glg_log_norm(double k);

double log1pmx(double x);  // log(1 + x) - x
double expm1mx(double x);  // exp(x) - 1 - x

double normal_quantile(double p);

}  // namespace glgmix::special
