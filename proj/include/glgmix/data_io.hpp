#pragma once

// Long-format clustered count data: one row per observation, a cluster id
// column, a count response, numeric covariates and an optional log-exposure
// offset column.

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace glgmix {

inline constexpr const char* kInterceptName = "(Intercept)";

struct ClusterData {
  std::string id;
  Eigen::VectorXd y;       // nonnegative integer counts
  Eigen::MatrixXd X;       // m x p design rows
  Eigen::VectorXd offset;  // log exposure, zero when absent

  Eigen::Index size() const noexcept { return y.size(); }
  double y_total() const { return y.sum(); }
  // exp(X beta + offset)
  Eigen::VectorXd mean(const Eigen::VectorXd& beta) const;
};

struct Dataset {
  std::vector<ClusterData> clusters;
  std::vector<std::string> column_names;  // design columns, length p
  std::string response_name = "y";
  std::string cluster_name = "cluster";

  std::size_t n_obs() const;
  Eigen::Index n_cols() const noexcept { return static_cast<Eigen::Index>(column_names.size()); }
  // Throws DomainError on shape mismatch, negative or non-integer counts,
  // duplicate cluster ids or an empty dataset.
  void validate() const;
};

struct ModelSpec {
  std::string response;
  std::string cluster;
  std::vector<std::string> covariates;
  std::vector<std::pair<std::string, std::string>> interactions;
  std::optional<std::string> offset;
  bool add_intercept = true;

  std::vector<std::string> design_names() const;
  // Throws ParseError(BadSpec) on duplicate terms or empty names.
  void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
ModelSpec read_model_spec(const std::filesystem::path& path);

Dataset read_csv(const std::filesystem::path& path, const ModelSpec& spec);
Dataset parse_csv(const std::string& text, const ModelSpec& spec);

// Writes cluster, response, offset and every non-intercept design column;
// spec_for_written() re-reads it into an identical Dataset.
void write_csv(const Dataset& d, const std::filesystem::path& path);
std::string format_csv(const Dataset& d);
ModelSpec spec_for_written(const Dataset& d);

// Every observation becomes its own cluster (the univariate NB grouping).
Dataset regroup_each_row(const Dataset& d);

// All clusters stacked into one design/response/offset.
struct StackedData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd offset;
};
StackedData stack(const Dataset& d);

}  // namespace glgmix
