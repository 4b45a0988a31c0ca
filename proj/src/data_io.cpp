#include "glgmix/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "glgmix/errors.hpp"

namespace glgmix {

Eigen::VectorXd ClusterData::mean(const Eigen::VectorXd& beta) const {
  return (X * beta + offset).array().exp().matrix();
}

std::size_t Dataset::n_obs() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += static_cast<std::size_t>(c.size());
  return n;
}

void Dataset::validate() const {
  if (clusters.empty()) throw DomainError("dataset has no clusters");
  std::set<std::string> ids;
  for (const auto& c : clusters) {
    if (!ids.insert(c.id).second) throw DomainError("duplicate cluster id '" + c.id + "'");
    if (c.size() < 1) throw DomainError("cluster '" + c.id + "' is empty");
    if (c.X.rows() != c.size() || c.offset.size() != c.size()) {
      throw DomainError("cluster '" + c.id + "': design, response and offset lengths differ");
    }
    if (c.X.cols() != n_cols()) throw DomainError("cluster '" + c.id + "': wrong number of design columns");
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double v = c.y(j);
      if (!(v >= 0.0) || std::floor(v) != v || !std::isfinite(v)) {
        throw DomainError("cluster '" + c.id + "': counts must be nonnegative integers");
      }
    }
    if (!c.X.allFinite() || !c.offset.allFinite()) {
      throw DomainError("cluster '" + c.id + "': non-finite design or offset value");
    }
  }
}

std::vector<std::string> ModelSpec::design_names() const {
  std::vector<std::string> names;
  if (add_intercept) names.emplace_back(kInterceptName);
  for (const auto& c : covariates) names.push_back(c);
  for (const auto& [a, b] : interactions) names.push_back(a + ":" + b);
  return names;
}

void ModelSpec::validate() const {
  auto bad = [](const std::string& msg) { return ParseError(ParseError::Kind::BadSpec, 0, "", msg); };
  if (response.empty()) throw bad("model spec: response column is required");
  if (cluster.empty()) throw bad("model spec: cluster column is required");
  const auto names = design_names();
  if (names.empty()) throw bad("model spec: design has no columns");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty() || n == ":") throw bad("model spec: empty term name");
    if (!seen.insert(n).second) throw bad("model spec: duplicate term '" + n + "'");
  }
  for (const auto& [a, b] : interactions) {
    if (seen.count(b + ":" + a) && a != b) throw bad("model spec: duplicate term '" + a + ":" + b + "'");
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["response"] = spec.response;
  j["cluster"] = spec.cluster;
  j["covariates"] = spec.covariates;
  auto inter = nlohmann::json::array();
  for (const auto& [a, b] : spec.interactions) inter.push_back({a, b});
  j["interactions"] = inter;
  j["offset"] = spec.offset ? nlohmann::json(*spec.offset) : nlohmann::json(nullptr);
  j["intercept"] = spec.add_intercept;
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& msg) { return ParseError(ParseError::Kind::BadSpec, 0, "", msg); };
  if (!j.is_object()) throw bad("model spec must be a JSON object");
  ModelSpec spec;
  try {
    spec.response = j.at("response").get<std::string>();
    spec.cluster = j.at("cluster").get<std::string>();
    if (j.contains("covariates")) spec.covariates = j["covariates"].get<std::vector<std::string>>();
    if (j.contains("interactions")) {
      for (const auto& pair : j["interactions"]) {
        if (pair.is_string()) {
          const auto s = pair.get<std::string>();
          const auto colon = s.find(':');
          if (colon == std::string::npos) throw bad("interaction '" + s + "' must be written a:b");
          spec.interactions.emplace_back(s.substr(0, colon), s.substr(colon + 1));
        } else if (pair.is_array() && pair.size() == 2) {
          spec.interactions.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
        } else {
          throw bad("each interaction must be a two-element array or an \"a:b\" string");
        }
      }
    }
    if (j.contains("offset") && !j["offset"].is_null()) spec.offset = j["offset"].get<std::string>();
    if (j.contains("intercept")) spec.add_intercept = j["intercept"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("model spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ModelSpec read_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::Io, 0, "", "cannot open model spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::BadSpec, 0, "", "model spec " + path.string() + ": " + e.what());
  }
  return model_spec_from_json(j);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_csv(const std::string& text, const ModelSpec& spec) {
  spec.validate();
  using Kind = ParseError::Kind;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    header = split_line(line);
    break;
  }
  if (header.empty()) throw ParseError(Kind::EmptyFile, 0, "", "CSV input is empty");
  const std::size_t header_row = row;

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < header.size(); ++k) index.emplace(header[k], k);
  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw ParseError(Kind::MissingColumn, header_row, name, "row " + std::to_string(header_row) +
                                                                  ": missing column '" + name + "'");
    }
    return it->second;
  };

  const std::size_t response_col = column(spec.response);
  const std::size_t cluster_col = column(spec.cluster);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : spec.covariates) cov_cols.push_back(column(c));
  std::vector<std::pair<std::size_t, std::size_t>> inter_cols;
  for (const auto& [a, b] : spec.interactions) inter_cols.emplace_back(column(a), column(b));
  std::optional<std::size_t> offset_col;
  if (spec.offset) offset_col = column(*spec.offset);

  struct Rows {
    std::vector<double> y;
    std::vector<std::vector<double>> x;
    std::vector<double> offset;
  };
  std::vector<std::string> order;
  std::map<std::string, Rows> groups;
  const auto names = spec.design_names();
  const std::size_t p = names.size();

  auto number = [&](const std::vector<std::string>& f, std::size_t col) {
    double v = 0.0;
    if (!parse_double(f[col], v)) {
      throw ParseError(Kind::BadNumber, row, header[col],
                       "row " + std::to_string(row) + ", column '" + header[col] + "': '" + f[col] +
                           "' is not a finite number");
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto f = split_line(line);
    if (f.size() != header.size()) {
      throw ParseError(Kind::RaggedRow, row, "",
                       "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(f.size()));
    }
    double y = 0.0;
    if (!parse_double(f[response_col], y) || y < 0.0 || std::floor(y) != y) {
      throw ParseError(Kind::BadResponse, row, spec.response,
                       "row " + std::to_string(row) + ", column '" + spec.response + "': '" +
                           f[response_col] + "' is not a nonnegative integer count");
    }
    std::vector<double> x;
    x.reserve(p);
    if (spec.add_intercept) x.push_back(1.0);
    for (auto c : cov_cols) x.push_back(number(f, c));
    for (auto [a, b] : inter_cols) x.push_back(number(f, a) * number(f, b));
    const double off = offset_col ? number(f, *offset_col) : 0.0;

    const std::string& id = f[cluster_col];
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.y.push_back(y);
    it->second.x.push_back(std::move(x));
    it->second.offset.push_back(off);
  }
  if (order.empty()) throw ParseError(Kind::EmptyFile, row, "", "CSV input has a header but no data rows");

  Dataset d;
  d.column_names = names;
  d.response_name = spec.response;
  d.cluster_name = spec.cluster;
  d.clusters.reserve(order.size());
  for (const auto& id : order) {
    const Rows& r = groups.at(id);
    ClusterData c;
    c.id = id;
    const auto m = static_cast<Eigen::Index>(r.y.size());
    c.y = Eigen::Map<const Eigen::VectorXd>(r.y.data(), m);
    c.offset = Eigen::Map<const Eigen::VectorXd>(r.offset.data(), m);
    c.X.resize(m, static_cast<Eigen::Index>(p));
    for (Eigen::Index j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < p; ++k) c.X(j, static_cast<Eigen::Index>(k)) = r.x[j][k];
    }
    d.clusters.push_back(std::move(c));
  }
  return d;
}

Dataset read_csv(const std::filesystem::path& path, const ModelSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::Io, 0, "", "cannot open data file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), spec);
}

namespace {

bool is_intercept(const Dataset& d, Eigen::Index k) { return d.column_names[k] == kInterceptName; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::string format_csv(const Dataset& d) {
  std::ostringstream out;
  out << csv_field(d.cluster_name) << ',' << csv_field(d.response_name) << ",offset";
  for (Eigen::Index k = 0; k < d.n_cols(); ++k) {
    if (!is_intercept(d, k)) out << ',' << csv_field(d.column_names[k]);
  }
  out << '\n';
  for (const auto& c : d.clusters) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      out << csv_field(c.id) << ',' << format_double(c.y(j)) << ',' << format_double(c.offset(j));
      for (Eigen::Index k = 0; k < d.n_cols(); ++k) {
        if (!is_intercept(d, k)) out << ',' << format_double(c.X(j, k));
      }
      out << '\n';
    }
  }
  return out.str();
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(ParseError::Kind::Io, 0, "", "cannot write " + path.string());
  out << format_csv(d);
}

ModelSpec spec_for_written(const Dataset& d) {
  ModelSpec spec;
  spec.response = d.response_name;
  spec.cluster = d.cluster_name;
  spec.offset = "offset";
  spec.add_intercept = false;
  for (Eigen::Index k = 0; k < d.n_cols(); ++k) {
    if (is_intercept(d, k)) {
      if (k != 0) throw DomainError("intercept column must come first to be written");
      spec.add_intercept = true;
    } else {
      spec.covariates.push_back(d.column_names[k]);
    }
  }
  return spec;
}

Dataset regroup_each_row(const Dataset& d) {
  Dataset out;
  out.column_names = d.column_names;
  out.response_name = d.response_name;
  out.cluster_name = d.cluster_name;
  out.clusters.reserve(d.n_obs());
  for (const auto& c : d.clusters) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      ClusterData single;
      single.id = c.size() == 1 ? c.id : c.id + "#" + std::to_string(j + 1);
      single.y = c.y.segment(j, 1);
      single.X = c.X.row(j);
      single.offset = c.offset.segment(j, 1);
      out.clusters.push_back(std::move(single));
    }
  }
  return out;
}

StackedData stack(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.n_obs());
  StackedData s{Eigen::MatrixXd(n, d.n_cols()), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Eigen::Index row = 0;
  for (const auto& c : d.clusters) {
    s.X.middleRows(row, c.size()) = c.X;
    s.y.segment(row, c.size()) = c.y;
    s.offset.segment(row, c.size()) = c.offset;
    row += c.size();
  }
  return s;
}

}  // namespace glgmix
