#include "glgmix/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "glgmix/errors.hpp"
#include "glgmix/glg_dist.hpp"
#include "glgmix/parallel.hpp"
#include "glgmix/simulate.hpp"
#include "glgmix/special.hpp"

namespace glgmix::diagnostics {

namespace {

constexpr std::uint64_t kEnvelopeStream = 3;

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double blom(std::size_t k, std::size_t n) {
  return special::normal_quantile((static_cast<double>(k) - 0.375) / (static_cast<double>(n) + 0.25));
}

// Sorted sample read off at n evenly spaced plotting positions.
std::vector<double> resample_sorted(const std::vector<double>& sorted, std::size_t n) {
  if (sorted.size() == n) return sorted;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = n == 1 ? 0.0 : static_cast<double>(k) * (sorted.size() - 1) / (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    out[k] = sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  }
  return out;
}

}  // namespace

std::vector<QqPoint> qq_points(const std::vector<double>& residuals) {
  if (residuals.size() < 3) throw DomainError("qq_points needs at least 3 residuals");
  for (double r : residuals) {
    if (!std::isfinite(r)) throw DomainError("qq_points: residuals must be finite");
  }
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  std::vector<QqPoint> out(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) out[k] = {blom(k + 1, sorted.size()), sorted[k]};
  return out;
}

std::vector<double> residual_values(const ResidualReport& report, ResidualKind kind) {
  std::vector<double> out;
  out.reserve(report.rows.size());
  for (const auto& row : report.rows) {
    if (kind == ResidualKind::Pearson) {
      out.push_back(row.pearson);
    } else if (row.deviance_residual) {
      out.push_back(*row.deviance_residual);
    }
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

Envelope simulated_envelope(const Dataset& d, const MnbParams& fitted, const EnvelopeOptions& opts) {
  if (opts.replicates < 19) throw DomainError("envelope needs at least 19 replicates");
  if (!(opts.level > 0.0 && opts.level <= 1.0)) throw DomainError("envelope level must lie in (0, 1]");

  Envelope env;
  const auto observed_report = mnb::residuals(d, fitted);
  std::vector<double> observed = residual_values(observed_report, opts.kind);
  if (observed.size() < 3) throw DomainError("envelope needs at least 3 available residuals");
  if (observed.size() < observed_report.rows.size()) {
    env.warnings.push_back(std::to_string(observed_report.rows.size() - observed.size()) +
                           " deviance components are negative; their residuals are left out of the envelope");
  }
  std::sort(observed.begin(), observed.end());
  const std::size_t n = observed.size();

  std::vector<std::optional<std::vector<double>>> reps(opts.replicates);
  std::vector<std::string> failures(opts.replicates);
  parallel_for(
      opts.replicates,
      [&](std::size_t r) {
        try {
          const std::uint64_t rep_seed = simulate::substream(opts.seed, kEnvelopeStream, r)();
          const Dataset sim = simulate::simulate_mnb(d, fitted, rep_seed);
          const FitResult refit = mnb::fit(sim, fitted, opts.refit);
          if (!refit.converged) {
            failures[r] = "replicate " + std::to_string(r + 1) + " did not converge";
            return;
          }
          MnbParams refitted = mnb::params_of(refit);
          if (opts.refit.fixed_phi) refitted.phi = *opts.refit.fixed_phi;
          const auto rep = mnb::residuals(sim, refitted);
          auto values = residual_values(rep, opts.kind);
          if (values.size() < 2) {
            failures[r] = "replicate " + std::to_string(r + 1) + " has fewer than 2 residuals";
            return;
          }
          std::sort(values.begin(), values.end());
          reps[r] = resample_sorted(values, n);
        } catch (const Error& e) {
          failures[r] = "replicate " + std::to_string(r + 1) + ": " + e.what();
        }
      },
      1);

  std::vector<std::vector<double>> used;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (reps[r]) {
      used.push_back(std::move(*reps[r]));
    } else {
      ++env.replicates_dropped;
      env.warnings.push_back(failures[r] + "; dropped");
    }
  }
  env.replicates_used = used.size();
  if (env.replicates_dropped * 5 > opts.replicates) {
    throw Error("envelope: " + std::to_string(env.replicates_dropped) + " of " +
                std::to_string(opts.replicates) + " replicate fits failed (more than 20%)");
  }

  const double lo_p = 0.5 * (1.0 - opts.level);
  const double hi_p = 0.5 * (1.0 + opts.level);
  env.rows.resize(n);
  std::vector<double> column(used.size());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t r = 0; r < used.size(); ++r) column[r] = used[r][k];
    env.rows[k] = {k + 1, blom(k + 1, n), observed[k], quantile(column, lo_p), quantile(column, 0.5),
                   quantile(column, hi_p)};
  }
  return env;
}

std::vector<AicRow> compare_aic(const std::vector<FitResult>& fits) {
  if (fits.size() < 2) throw DomainError("compare_aic needs at least two fits");
  std::vector<AicRow> rows;
  rows.reserve(fits.size());
  for (const auto& f : fits) rows.push_back({f.model, f.loglik, f.n_parameters(), f.aic, 0.0});
  std::stable_sort(rows.begin(), rows.end(), [](const AicRow& a, const AicRow& b) { return a.aic < b.aic; });
  for (auto& r : rows) r.delta = r.aic - rows.front().aic;
  return rows;
}

std::vector<CurvePoint> glg_curve(double mu, double sigma, const std::vector<double>& lambdas, double from,
                                  double to, std::size_t points) {
  if (points < 2) throw DomainError("curve needs at least 2 points");
  if (!(to > from)) throw DomainError("curve range must be increasing");
  std::vector<CurvePoint> out;
  out.reserve(points * lambdas.size());
  for (double lambda : lambdas) {
    const GlgParams p{mu, sigma, lambda};
    p.validate();
    for (std::size_t k = 0; k < points; ++k) {
      const double y = from + (to - from) * static_cast<double>(k) / static_cast<double>(points - 1);
      out.push_back({lambda, y, std::exp(glg::log_pdf(y, p))});
    }
  }
  return out;
}

std::pair<double, double> default_curve_range(double mu, double sigma, const std::vector<double>& lambdas) {
  double widest = 0.0;
  for (double l : lambdas) widest = std::max(widest, std::fabs(l));
  const double half = sigma * (10.0 + 15.0 * widest);
  return {mu - half, mu + half};
}

std::optional<std::string> negative_deviance_warning(const ResidualReport& report) {
  if (report.n_negative_d2 == 0) return std::nullopt;
  return std::to_string(report.n_negative_d2) + " of " + std::to_string(report.rows.size()) +
         " deviance components d2 are negative; their deviance residuals are reported as NA";
}

std::string envelope_csv(const Envelope& env) {
  std::ostringstream out;
  out << "rank,theoretical,observed,lower,median,upper\n";
  for (const auto& r : env.rows) {
    out << r.rank << ',' << num(r.theoretical) << ',' << num(r.observed) << ',' << num(r.lower) << ','
        << num(r.median) << ',' << num(r.upper) << '\n';
  }
  return out.str();
}

std::string envelope_svg(const Envelope& env, const std::string& title) {
  constexpr double kW = 480, kH = 480, kPad = 50;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (const auto& r : env.rows) {
    xmin = std::min(xmin, r.theoretical);
    xmax = std::max(xmax, r.theoretical);
    ymin = std::min({ymin, r.observed, r.lower});
    ymax = std::max({ymax, r.observed, r.upper});
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return kPad + (x - xmin) / (xmax - xmin) * (kW - 2 * kPad); };
  auto sy = [&](double y) { return kH - kPad - (y - ymin) / (ymax - ymin) * (kH - 2 * kPad); };
  auto polyline = [&](auto pick, const char* dash) {
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\"" << dash << " points=\"";
    for (const auto& r : env.rows) s << num(sx(r.theoretical)) << ',' << num(sy(pick(r))) << ' ';
    s << "\"/>\n";
    return s.str();
  };
  std::string escaped;
  for (char ch : title) {
    if (ch == '<') escaped += "&lt;";
    else if (ch == '>') escaped += "&gt;";
    else if (ch == '&') escaped += "&amp;";
    else escaped += ch;
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escaped << "</text>\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
      << kH - 2 * kPad << "\" fill=\"none\" stroke=\"gray\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << "normal quantile</text>\n";
  out << polyline([](const EnvelopeRow& r) { return r.lower; }, "");
  out << polyline([](const EnvelopeRow& r) { return r.median; }, " stroke-dasharray=\"4,3\"");
  out << polyline([](const EnvelopeRow& r) { return r.upper; }, "");
  for (const auto& r : env.rows) {
    out << "<circle cx=\"" << num(sx(r.theoretical)) << "\" cy=\"" << num(sy(r.observed)) << "\" r=\"2\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace glgmix::diagnostics
