#include "glgmix/fit_report.hpp"

#include "glgmix/errors.hpp"

namespace glgmix {

std::optional<double> FitResult::z_value(Eigen::Index k) const {
  if (!std_errors || k < 0 || k >= estimates.size()) return std::nullopt;
  if (static_cast<std::size_t>(k) < wald_defined.size() && !wald_defined[k]) return std::nullopt;
  return estimates(k) / (*std_errors)(k);
}

std::optional<double> FitResult::estimate(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return estimates(static_cast<Eigen::Index>(k));
  }
  return std::nullopt;
}

nlohmann::json fit_to_json(const FitResult& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["converged"] = r.converged;
  j["n_iterations"] = r.n_iterations;
  j["loglik"] = r.loglik;
  j["aic"] = r.aic;
  j["n_parameters"] = r.n_parameters();
  auto params = nlohmann::json::array();
  for (Eigen::Index k = 0; k < r.estimates.size(); ++k) {
    nlohmann::json p;
    p["name"] = r.names[k];
    p["estimate"] = r.estimates(k);
    p["std_error"] = r.std_errors ? nlohmann::json((*r.std_errors)(k)) : nlohmann::json(nullptr);
    const auto z = r.z_value(k);
    p["z_value"] = z ? nlohmann::json(*z) : nlohmann::json(nullptr);
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  auto trace = nlohmann::json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"iteration", t.iteration}, {"loglik", t.loglik}, {"max_gradient", t.max_gradient}});
  }
  j["trace"] = std::move(trace);
  return j;
}

FitResult fit_from_json(const nlohmann::json& j) {
  FitResult r;
  try {
    r.model = j.at("model").get<std::string>();
    r.converged = j.at("converged").get<bool>();
    r.n_iterations = j.at("n_iterations").get<int>();
    r.loglik = j.at("loglik").get<double>();
    r.aic = j.at("aic").get<double>();
    const auto& params = j.at("parameters");
    const auto n = static_cast<Eigen::Index>(params.size());
    r.estimates.resize(n);
    Eigen::VectorXd se(n);
    bool have_se = true;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& p = params[static_cast<std::size_t>(k)];
      r.names.push_back(p.at("name").get<std::string>());
      r.estimates(k) = p.at("estimate").get<double>();
      if (p.contains("std_error") && !p["std_error"].is_null()) {
        se(k) = p["std_error"].get<double>();
      } else {
        have_se = false;
      }
      r.wald_defined.push_back(p.contains("z_value") && !p["z_value"].is_null());
    }
    if (have_se) {
      r.std_errors = se;
    } else {
      // without standard errors z-values are absent; keep the parameter kinds
      for (std::size_t k = 0; k < r.names.size(); ++k) {
        r.wald_defined[k] = r.names[k] != "sigma" && r.names[k] != "phi";
      }
    }
    for (const auto& t : j.value("trace", nlohmann::json::array())) {
      r.trace.push_back({t.at("iteration").get<int>(), t.at("loglik").get<double>(),
                         t.at("max_gradient").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::BadSpec, 0, "", std::string("fit report: ") + e.what());
  }
  return r;
}

}  // namespace glgmix
