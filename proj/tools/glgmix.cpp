// Command-line front end: fit, simulate, diagnose, compare, glg-curve.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <json.hpp>

#include "glgmix/data_io.hpp"
#include "glgmix/diagnostics.hpp"
#include "glgmix/errors.hpp"
#include "glgmix/fit_report.hpp"
#include "glgmix/mnb_model.hpp"
#include "glgmix/pglg_model.hpp"
#include "glgmix/simulate.hpp"

namespace {

using glgmix::Dataset;
using glgmix::FitResult;
using glgmix::ModelSpec;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

struct SpecFlags {
  std::string spec_path;
  std::string response;
  std::string cluster;
  std::vector<std::string> covariates;
  std::vector<std::string> interactions;
  std::string offset;
  bool no_intercept = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "Model spec JSON file");
    cmd->add_option("--response", response, "Response (count) column");
    cmd->add_option("--cluster", cluster, "Cluster id column");
    cmd->add_option("--covariates", covariates, "Covariate columns")->delimiter(',');
    cmd->add_option("--interaction", interactions, "Interaction term a:b (repeatable)");
    cmd->add_option("--offset", offset, "Log-exposure offset column");
    cmd->add_flag("--no-intercept", no_intercept, "Omit the intercept column");
  }

  ModelSpec resolve() const {
    if (!spec_path.empty()) return glgmix::read_model_spec(spec_path);
    json j;
    j["response"] = response;
    j["cluster"] = cluster;
    j["covariates"] = covariates;
    j["interactions"] = interactions;
    j["offset"] = offset.empty() ? json(nullptr) : json(offset);
    j["intercept"] = !no_intercept;
    return glgmix::model_spec_from_json(j);
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw glgmix::ParseError(glgmix::ParseError::Kind::Io, 0, "", "cannot write " + path);
  out << text;
}

json read_json_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  try {
    if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[')) return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw glgmix::ParseError(glgmix::ParseError::Kind::Io, 0, "", "cannot open " + arg);
    return json::parse(in);
  } catch (const json::exception& e) {
    throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", arg + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string random_effects_csv(const std::vector<std::pair<std::string, double>>& re) {
  std::ostringstream out;
  out << "cluster,random_effect\n";
  for (const auto& [id, b] : re) out << id << ',' << fmt(b) << '\n';
  return out.str();
}

bool is_pglg(const std::string& model) { return model.rfind("pglg", 0) == 0; }

glgmix::PglgConstraint constraint_for(const std::string& model) {
  if (model == "pglg-normal") return glgmix::PglgConstraint::LambdaZero;
  if (model == "pglg-sigma-lambda") return glgmix::PglgConstraint::SigmaEqualsLambda;
  return glgmix::PglgConstraint::None;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string model = "mnb";
  std::string data;
  SpecFlags spec;
  std::string out;
  std::string random_effects;
  int quad_order = glgmix::kDefaultQuadratureOrder;
  int max_iter = 200;
};

int run_fit(const FitArgs& a) {
  const ModelSpec spec = a.spec.resolve();
  Dataset d = glgmix::read_csv(a.data, spec);
  d.validate();

  FitResult fit;
  json extra;
  if (a.model == "mnb" || a.model == "nb") {
    if (a.model == "nb") d = glgmix::regroup_each_row(d);
    glgmix::MnbFitOptions opts;
    opts.max_iter = a.max_iter;
    opts.model_label = a.model;
    fit = glgmix::mnb::fit(d, std::nullopt, opts);
    const auto params = glgmix::mnb::params_of(fit);
    extra["deviance"] = {{"value", glgmix::mnb::deviance(d, params)},
                         {"df", static_cast<double>(d.n_obs()) - static_cast<double>(d.n_cols())}};
    if (!a.random_effects.empty()) {
      write_text(a.random_effects, random_effects_csv(glgmix::mnb::predict_random_effects(d, params)));
    }
  } else {
    glgmix::PglgFitOptions opts;
    opts.constraint = constraint_for(a.model);
    opts.quadrature_order = a.quad_order;
    opts.max_iter = a.max_iter;
    fit = glgmix::pglg::fit(d, std::nullopt, opts);
    extra["quadrature_order"] = a.quad_order;
    if (!a.random_effects.empty()) {
      const auto& rule = glgmix::quadrature::cached_gauss_hermite(a.quad_order);
      write_text(a.random_effects,
                 random_effects_csv(glgmix::pglg::predict_random_effects(d, glgmix::pglg::params_of(fit), rule)));
    }
  }

  json report = glgmix::fit_to_json(fit);
  report["data"] = {{"path", a.data}, {"n_clusters", d.clusters.size()}, {"n_obs", d.n_obs()}};
  report["spec"] = glgmix::to_json(spec);
  for (auto& [k, v] : extra.items()) report[k] = v;
  write_text(a.out, report.dump(2) + "\n");
  if (!fit.converged) {
    std::cerr << "warning: " << a.model << " fit did not converge after " << fit.n_iterations << " iterations\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string model = "mnb";
  std::string params;
  std::string design;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string spec_out;
};

int run_simulate(const SimulateArgs& a) {
  glgmix::SimDesign design = glgmix::sim_design_from_json(read_json_arg(a.design));
  if (a.seed) design.seed = *a.seed;
  const json pj = read_json_arg(a.params);
  Dataset d;
  try {
    const auto beta_v = pj.at("beta").get<std::vector<double>>();
    const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(beta_v.data(), static_cast<Eigen::Index>(beta_v.size()));
    if (a.model == "mnb" || a.model == "nb") {
      d = glgmix::simulate::simulate_mnb(design, glgmix::MnbParams{beta, pj.at("phi").get<double>()});
    } else if (a.model == "pglg") {
      d = glgmix::simulate::simulate_pglg(
          design, glgmix::PglgParams{beta, pj.at("sigma").get<double>(), pj.value("lambda", 0.0)});
    } else {
      throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", "unknown model '" + a.model + "'");
    }
  } catch (const json::exception& e) {
    throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", std::string("params: ") + e.what());
  }
  write_text(a.out, glgmix::format_csv(d));
  if (!a.spec_out.empty()) write_text(a.spec_out, glgmix::to_json(glgmix::spec_for_written(d)).dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string fit;
  std::string data;
  std::string residual = "deviance";
  std::size_t envelope = 100;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::string out = "diagnose";
};

std::string residual_csv(const glgmix::ResidualReport& rep) {
  std::ostringstream out;
  out << "cluster,index,y,fitted,leverage,d2,deviance_residual,pearson\n";
  for (const auto& r : rep.rows) {
    out << r.cluster << ',' << r.index + 1 << ',' << fmt(r.y) << ',' << fmt(r.fitted) << ',' << fmt(r.leverage) << ','
        << fmt(r.d2) << ',' << (r.deviance_residual ? fmt(*r.deviance_residual) : std::string("NA")) << ','
        << fmt(r.pearson) << '\n';
  }
  return out.str();
}

int run_diagnose(const DiagnoseArgs& a) {
  const json report = read_json_arg(a.fit);
  const FitResult fit = glgmix::fit_from_json(report);
  if (is_pglg(fit.model)) {
    throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "",
                             "residual diagnostics are defined for mnb and nb fits, not " + fit.model);
  }
  ModelSpec spec;
  std::string data_path = a.data;
  try {
    spec = glgmix::model_spec_from_json(report.at("spec"));
    if (data_path.empty()) data_path = report.at("data").at("path").get<std::string>();
  } catch (const json::exception& e) {
    throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", std::string("fit report: ") + e.what());
  }
  Dataset d = glgmix::read_csv(data_path, spec);
  if (fit.model == "nb") d = glgmix::regroup_each_row(d);
  const glgmix::MnbParams params = glgmix::mnb::params_of(fit);
  if (params.beta.size() != d.n_cols()) {
    throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", "fit report does not match the data design");
  }

  const auto rep = glgmix::mnb::residuals(d, params);
  if (const auto w = glgmix::diagnostics::negative_deviance_warning(rep)) std::cerr << "warning: " << *w << '\n';
  write_text(a.out + ".residuals.csv", residual_csv(rep));

  if (a.envelope > 0) {
    glgmix::EnvelopeOptions eo;
    if (a.residual == "pearson") {
      eo.kind = glgmix::ResidualKind::Pearson;
    } else if (a.residual == "deviance") {
      eo.kind = glgmix::ResidualKind::Deviance;
    } else {
      throw glgmix::ParseError(glgmix::ParseError::Kind::BadSpec, 0, "", "unknown residual kind " + a.residual);
    }
    eo.replicates = a.envelope;
    eo.level = a.level;
    eo.seed = a.seed;
    eo.refit.model_label = fit.model;
    const auto env = glgmix::diagnostics::simulated_envelope(d, params, eo);
    for (const auto& w : env.warnings) std::cerr << "warning: " << w << '\n';
    write_text(a.out + ".envelope.csv", glgmix::diagnostics::envelope_csv(env));
    write_text(a.out + ".envelope.svg",
               glgmix::diagnostics::envelope_svg(env, fit.model + " " + a.residual + " residuals"));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- compare

int run_compare(const std::vector<std::string>& fits, const std::string& out) {
  std::vector<FitResult> results;
  for (const auto& f : fits) results.push_back(glgmix::fit_from_json(read_json_arg(f)));
  const auto rows = glgmix::diagnostics::compare_aic(results);
  std::ostringstream s;
  s << "rank,model,loglik,n_parameters,aic,delta_aic\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    s << k + 1 << ',' << rows[k].model << ',' << fmt(rows[k].loglik) << ',' << rows[k].n_parameters << ','
      << fmt(rows[k].aic) << ',' << fmt(rows[k].delta) << '\n';
  }
  write_text(out, s.str());
  return kExitOk;
}

// ---------------------------------------------------------------- glg-curve

struct CurveArgs {
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<double> lambdas{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::optional<double> from;
  std::optional<double> to;
  std::size_t points = 2001;
  std::string out;
};

int run_curve(const CurveArgs& a) {
  auto [lo, hi] = glgmix::diagnostics::default_curve_range(a.mu, a.sigma, a.lambdas);
  if (a.from) lo = *a.from;
  if (a.to) hi = *a.to;
  const auto pts = glgmix::diagnostics::glg_curve(a.mu, a.sigma, a.lambdas, lo, hi, a.points);
  std::ostringstream s;
  s << "lambda,y,pdf\n";
  for (const auto& p : pts) s << fmt(p.lambda) << ',' << fmt(p.y) << ',' << fmt(p.pdf) << '\n';
  write_text(a.out, s.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glgmix: Poisson mixed models with generalized log-gamma random intercepts"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write a JSON report");
  fit_cmd->add_option("--model", fit_args.model, "Model")
      ->check(CLI::IsMember({"pglg", "pglg-normal", "pglg-sigma-lambda", "mnb", "nb"}));
  fit_cmd->add_option("--data", fit_args.data, "Long-format CSV")->required();
  fit_args.spec.add_to(fit_cmd);
  fit_cmd->add_option("--out", fit_args.out, "Report path (stdout if omitted)");
  fit_cmd->add_option("--random-effects", fit_args.random_effects, "Write empirical Bayes predictions CSV");
  fit_cmd->add_option("--quad-order", fit_args.quad_order, "Gauss-Hermite order")->check(CLI::Range(1, 200));
  fit_cmd->add_option("--max-iter", fit_args.max_iter, "Iteration limit")->check(CLI::PositiveNumber);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a dataset in the CSV input format");
  sim_cmd->add_option("--model", sim_args.model, "Model")->check(CLI::IsMember({"pglg", "mnb", "nb"}));
  sim_cmd->add_option("--params", sim_args.params, "Parameters JSON (file or inline)")->required();
  sim_cmd->add_option("--design", sim_args.design, "Design JSON (file or inline)")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "Seed (overrides the design)");
  sim_cmd->add_option("--out", sim_args.out, "CSV path (stdout if omitted)");
  sim_cmd->add_option("--spec-out", sim_args.spec_out, "Write the model spec that re-reads the CSV");

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand("diagnose", "Residuals and simulated envelope for an MNB/NB fit");
  diag_cmd->add_option("--fit", diag_args.fit, "Fit report written by `fit`")->required();
  diag_cmd->add_option("--data", diag_args.data, "Data CSV (defaults to the report's path)");
  diag_cmd->add_option("--residual", diag_args.residual, "Residual kind")
      ->check(CLI::IsMember({"deviance", "pearson"}));
  diag_cmd->add_option("--envelope", diag_args.envelope, "Envelope replicates (0 disables)");
  diag_cmd->add_option("--level", diag_args.level, "Envelope band level");
  diag_cmd->add_option("--seed", diag_args.seed, "Envelope seed");
  diag_cmd->add_option("--out", diag_args.out, "Output prefix");

  std::vector<std::string> compare_fits;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Rank fit reports by AIC");
  cmp_cmd->add_option("--fits", compare_fits, "Fit reports")->required()->expected(2, -1);
  cmp_cmd->add_option("--out", compare_out, "CSV path (stdout if omitted)");

  CurveArgs curve_args;
  auto* curve_cmd = app.add_subcommand("glg-curve", "Emit GLG density grids");
  curve_cmd->add_option("--mu", curve_args.mu, "Position");
  curve_cmd->add_option("--sigma", curve_args.sigma, "Scale")->check(CLI::PositiveNumber);
  curve_cmd->add_option("--lambda", curve_args.lambdas, "Shape values, comma separated")->delimiter(',');
  curve_cmd->add_option("--from", curve_args.from, "Grid start");
  curve_cmd->add_option("--to", curve_args.to, "Grid end");
  curve_cmd->add_option("--points", curve_args.points, "Points per curve")->check(CLI::Range(2, 1000000));
  curve_cmd->add_option("--out", curve_args.out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit_cmd) return run_fit(fit_args);
    if (*sim_cmd) return run_simulate(sim_args);
    if (*diag_cmd) return run_diagnose(diag_args);
    if (*cmp_cmd) return run_compare(compare_fits, compare_out);
    if (*curve_cmd) return run_curve(curve_args);
  } catch (const glgmix::NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const glgmix::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
