#pragma once

// Seeded generation of clustered count datasets from both models.
// Every cluster draws from its own engine seeded by (seed, cluster index),
// so results do not depend on thread scheduling.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glgmix/data_io.hpp"
#include "glgmix/mnb_model.hpp"
#include "glgmix/pglg_model.hpp"

namespace glgmix {

// How one covariate column is generated.
struct CovariateRecipe {
  enum class Kind {
    ClusterLevels,  // values[i * levels / n_clusters]: equal blocks of clusters per level
    Within,         // values[j]: by position inside the cluster (cycled)
    Normal,         // N(a, b^2)
    Uniform,        // U(a, b)
    Bernoulli,      // 1 with probability a
  };
  std::string name;
  Kind kind = Kind::Normal;
  std::vector<double> values;
  double a = 0.0;
  double b = 1.0;
  bool per_cluster = false;  // random kinds: one draw per cluster instead of per row
};

struct SimDesign {
  std::vector<std::size_t> cluster_sizes;
  std::vector<CovariateRecipe> covariates;
  std::vector<std::pair<std::string, std::string>> interactions;
  bool add_intercept = true;
  std::vector<double> offsets;  // by position within cluster (cycled); empty = 0
  std::uint64_t seed = 1;

  static SimDesign uniform(std::size_t n_clusters, std::size_t cluster_size);
};

SimDesign sim_design_from_json(const nlohmann::json& j);

namespace simulate {

// Design matrices and offsets with all counts zero.
Dataset layout(const SimDesign& design);

// Engine for (seed, stream, index); stream separates covariate and response draws.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

Dataset simulate_pglg(const Dataset& layout, const PglgParams& p, std::uint64_t seed);
Dataset simulate_mnb(const Dataset& layout, const MnbParams& p, std::uint64_t seed);

Dataset simulate_pglg(const SimDesign& design, const PglgParams& p);
Dataset simulate_mnb(const SimDesign& design, const MnbParams& p);

}  // namespace simulate
}  // namespace glgmix
