#include "glgmix/simulate.hpp"

#include <cmath>

#include "glgmix/errors.hpp"
#include "glgmix/parallel.hpp"

namespace glgmix {

SimDesign SimDesign::uniform(std::size_t n_clusters, std::size_t cluster_size) {
  SimDesign d;
  d.cluster_sizes.assign(n_clusters, cluster_size);
  return d;
}

namespace {

CovariateRecipe::Kind kind_from(const std::string& s) {
  using K = CovariateRecipe::Kind;
  if (s == "cluster_levels") return K::ClusterLevels;
  if (s == "within") return K::Within;
  if (s == "normal") return K::Normal;
  if (s == "uniform") return K::Uniform;
  if (s == "bernoulli") return K::Bernoulli;
  throw ParseError(ParseError::Kind::BadSpec, 0, "", "unknown covariate kind '" + s + "'");
}

}  // namespace

SimDesign sim_design_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& msg) { return ParseError(ParseError::Kind::BadSpec, 0, "", msg); };
  SimDesign d;
  try {
    if (j.contains("cluster_sizes")) {
      d.cluster_sizes = j["cluster_sizes"].get<std::vector<std::size_t>>();
    } else {
      d.cluster_sizes.assign(j.at("n_clusters").get<std::size_t>(), j.at("cluster_size").get<std::size_t>());
    }
    for (const auto& c : j.value("covariates", nlohmann::json::array())) {
      CovariateRecipe r;
      r.name = c.at("name").get<std::string>();
      r.kind = kind_from(c.at("kind").get<std::string>());
      if (c.contains("values")) r.values = c["values"].get<std::vector<double>>();
      using K = CovariateRecipe::Kind;
      switch (r.kind) {
        case K::Normal:
          r.a = c.value("mean", 0.0);
          r.b = c.value("sd", 1.0);
          break;
        case K::Uniform:
          r.a = c.value("min", 0.0);
          r.b = c.value("max", 1.0);
          break;
        case K::Bernoulli: r.a = c.value("p", 0.5); break;
        default: break;
      }
      r.per_cluster = c.value("level", std::string("observation")) == "cluster";
      d.covariates.push_back(std::move(r));
    }
    for (const auto& pair : j.value("interactions", nlohmann::json::array())) {
      d.interactions.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    d.add_intercept = j.value("intercept", true);
    if (j.contains("offsets")) d.offsets = j["offsets"].get<std::vector<double>>();
    d.seed = j.value("seed", std::uint64_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("design: ") + e.what());
  }
  if (d.cluster_sizes.empty()) throw bad("design: no clusters");
  for (auto m : d.cluster_sizes) {
    if (m == 0) throw bad("design: cluster sizes must be positive");
  }
  return d;
}

namespace simulate {

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

namespace {

constexpr std::uint64_t kCovariateStream = 1;
constexpr std::uint64_t kResponseStream = 2;

void validate_design(const SimDesign& design) {
  if (design.cluster_sizes.empty()) throw DomainError("simulation design has no clusters");
  for (auto m : design.cluster_sizes) {
    if (m == 0) throw DomainError("simulation cluster sizes must be positive");
  }
  using K = CovariateRecipe::Kind;
  for (const auto& r : design.covariates) {
    if ((r.kind == K::ClusterLevels || r.kind == K::Within) && r.values.empty()) {
      throw DomainError("covariate '" + r.name + "' needs a non-empty values list");
    }
    if (r.kind == K::Normal && !(r.b >= 0.0)) throw DomainError("covariate '" + r.name + "': sd must be >= 0");
    if (r.kind == K::Bernoulli && !(r.a >= 0.0 && r.a <= 1.0)) {
      throw DomainError("covariate '" + r.name + "': p must lie in [0, 1]");
    }
  }
}

double draw_covariate(const CovariateRecipe& r, std::mt19937_64& rng) {
  using K = CovariateRecipe::Kind;
  switch (r.kind) {
    case K::Normal: return std::normal_distribution<double>(r.a, r.b)(rng);
    case K::Uniform: return std::uniform_real_distribution<double>(r.a, r.b)(rng);
    case K::Bernoulli: return std::bernoulli_distribution(r.a)(rng) ? 1.0 : 0.0;
    default: return 0.0;
  }
}

}  // namespace

Dataset layout(const SimDesign& design) {
  validate_design(design);
  ModelSpec spec;
  spec.response = "y";
  spec.cluster = "cluster";
  for (const auto& r : design.covariates) spec.covariates.push_back(r.name);
  spec.interactions = design.interactions;
  spec.add_intercept = design.add_intercept;
  spec.validate();

  std::vector<std::size_t> index;
  for (const auto& [a, b] : design.interactions) {
    std::size_t ia = design.covariates.size(), ib = design.covariates.size();
    for (std::size_t k = 0; k < design.covariates.size(); ++k) {
      if (design.covariates[k].name == a) ia = k;
      if (design.covariates[k].name == b) ib = k;
    }
    if (ia == design.covariates.size() || ib == design.covariates.size()) {
      throw DomainError("interaction " + a + ":" + b + " refers to an unknown covariate");
    }
    index.push_back(ia);
    index.push_back(ib);
  }

  Dataset d;
  d.column_names = spec.design_names();
  d.response_name = spec.response;
  d.cluster_name = spec.cluster;
  const std::size_t n = design.cluster_sizes.size();
  const std::size_t n_cov = design.covariates.size();
  const auto p = static_cast<Eigen::Index>(d.column_names.size());
  d.clusters.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = substream(design.seed, kCovariateStream, i);
    const auto m = static_cast<Eigen::Index>(design.cluster_sizes[i]);
    ClusterData& c = d.clusters[i];
    c.id = std::to_string(i + 1);
    c.y = Eigen::VectorXd::Zero(m);
    c.offset = Eigen::VectorXd::Zero(m);
    if (!design.offsets.empty()) {
      for (Eigen::Index j = 0; j < m; ++j) c.offset(j) = design.offsets[j % design.offsets.size()];
    }
    Eigen::MatrixXd raw(m, static_cast<Eigen::Index>(n_cov));
    for (std::size_t k = 0; k < n_cov; ++k) {
      const auto& r = design.covariates[k];
      using K = CovariateRecipe::Kind;
      if (r.kind == K::ClusterLevels) {
        const double v = r.values[i * r.values.size() / n];
        raw.col(static_cast<Eigen::Index>(k)).setConstant(v);
      } else if (r.kind == K::Within) {
        for (Eigen::Index j = 0; j < m; ++j) raw(j, static_cast<Eigen::Index>(k)) = r.values[j % r.values.size()];
      } else if (r.per_cluster) {
        raw.col(static_cast<Eigen::Index>(k)).setConstant(draw_covariate(r, rng));
      } else {
        for (Eigen::Index j = 0; j < m; ++j) raw(j, static_cast<Eigen::Index>(k)) = draw_covariate(r, rng);
      }
    }
    c.X.resize(m, p);
    Eigen::Index col = 0;
    if (design.add_intercept) c.X.col(col++).setOnes();
    for (std::size_t k = 0; k < n_cov; ++k) c.X.col(col++) = raw.col(static_cast<Eigen::Index>(k));
    for (std::size_t t = 0; t < design.interactions.size(); ++t) {
      c.X.col(col++) = raw.col(static_cast<Eigen::Index>(index[2 * t])).cwiseProduct(
          raw.col(static_cast<Eigen::Index>(index[2 * t + 1])));
    }
  }
  return d;
}

namespace {

double draw_poisson(double mean, std::mt19937_64& rng) {
  if (!(mean > 0.0)) return 0.0;
  return static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
}

template <typename DrawCluster>
Dataset fill(const Dataset& layout_data, DrawCluster&& draw) {
  Dataset out = layout_data;
  parallel_for(out.clusters.size(), [&](std::size_t i) { draw(out.clusters[i], i); }, 256);
  return out;
}

}  // namespace

Dataset simulate_pglg(const Dataset& layout_data, const PglgParams& p, std::uint64_t seed) {
  p.validate();
  if (p.beta.size() != layout_data.n_cols()) throw DomainError("coefficient length does not match the design");
  const GlgParams re = p.random_effect();
  return fill(layout_data, [&](ClusterData& c, std::size_t i) {
    auto rng = substream(seed, kResponseStream, i);
    const double b = glg::draw(re, rng);
    const Eigen::VectorXd lin = c.X * p.beta + c.offset;
    for (Eigen::Index j = 0; j < c.size(); ++j) c.y(j) = draw_poisson(std::exp(lin(j) + b), rng);
  });
}

Dataset simulate_mnb(const Dataset& layout_data, const MnbParams& p, std::uint64_t seed) {
  p.validate();
  if (p.beta.size() != layout_data.n_cols()) throw DomainError("coefficient length does not match the design");
  return fill(layout_data, [&](ClusterData& c, std::size_t i) {
    auto rng = substream(seed, kResponseStream, i);
    // gamma frailty with shape phi and rate phi (mean 1)
    double w = std::gamma_distribution<double>(p.phi, 1.0 / p.phi)(rng);
    const Eigen::VectorXd mu = c.mean(p.beta);
    for (Eigen::Index j = 0; j < c.size(); ++j) c.y(j) = draw_poisson(mu(j) * w, rng);
  });
}

Dataset simulate_pglg(const SimDesign& design, const PglgParams& p) {
  return simulate_pglg(layout(design), p, design.seed);
}

Dataset simulate_mnb(const SimDesign& design, const MnbParams& p) {
  return simulate_mnb(layout(design), p, design.seed);
}

}  // namespace simulate
}  // namespace glgmix
