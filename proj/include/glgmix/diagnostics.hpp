#pragma once

// Normal probability plots with simulated envelopes, AIC tables and GLG
// density curves.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glgmix/data_io.hpp"
#include "glgmix/fit_result.hpp"
#include "glgmix/mnb_model.hpp"

namespace glgmix {

enum class ResidualKind { Deviance, Pearson };

struct QqPoint {
  double theoretical = 0.0;
  double observed = 0.0;
};

struct EnvelopeRow {
  std::size_t rank = 0;  // 1-based
  double theoretical = 0.0;
  double observed = 0.0;
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
};

struct Envelope {
  std::vector<EnvelopeRow> rows;
  std::size_t replicates_used = 0;
  std::size_t replicates_dropped = 0;
  std::vector<std::string> warnings;
};

struct EnvelopeOptions {
  ResidualKind kind = ResidualKind::Deviance;
  std::size_t replicates = 100;
  double level = 0.95;
  std::uint64_t seed = 1;
  MnbFitOptions refit;  // fixed_phi here means the fitted model held phi fixed
};

struct AicRow {
  std::string model;
  double loglik = 0.0;
  Eigen::Index n_parameters = 0;
  double aic = 0.0;
  double delta = 0.0;
};

struct CurvePoint {
  double lambda = 0.0;
  double y = 0.0;
  double pdf = 0.0;
};

namespace diagnostics {

// Blom plotting positions (k - 3/8) / (N + 1/4).
std::vector<QqPoint> qq_points(const std::vector<double>& residuals);

// Residual vector of the requested kind; deviance residuals whose d^2 is
// negative are left out.
std::vector<double> residual_values(const ResidualReport& report, ResidualKind kind);

// Type-7 quantile of an unsorted sample.
double quantile(std::vector<double> values, double prob);

// Simulate, refit and recompute residuals R times from the fitted MNB model
// and return per-rank bands. Throws Error if more than 20% of replicates fail.
Envelope simulated_envelope(const Dataset& d, const MnbParams& fitted, const EnvelopeOptions& opts);

std::vector<AicRow> compare_aic(const std::vector<FitResult>& fits);

// pdf grids of GLG(mu, sigma, lambda) for each lambda over [from, to].
std::vector<CurvePoint> glg_curve(double mu, double sigma, const std::vector<double>& lambdas, double from,
                                  double to, std::size_t points);
// Symmetric range wide enough that every curve has negligible mass outside.
std::pair<double, double> default_curve_range(double mu, double sigma, const std::vector<double>& lambdas);

// Warning text when some deviance components are negative, else nothing.
std::optional<std::string> negative_deviance_warning(const ResidualReport& report);

std::string envelope_csv(const Envelope& env);
std::string envelope_svg(const Envelope& env, const std::string& title);

}  // namespace diagnostics
}  // namespace glgmix
