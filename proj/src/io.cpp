#include "ardiff/io.hpp"

#include <cstdio>
#include <fstream>

namespace ardiff::io {

json to_json(const Vector& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

json to_json(const Matrix& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

Vector vector_from_json(const json& j) {
  require(j.is_array(), "expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), "expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j) {
  require(j.is_array() && !j.empty(), "expected a non-empty JSON array of rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[r]);
    require(static_cast<std::size_t>(row.size()) == cols, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

json to_json(const PatchLayout& layout) { return {{"dims", layout.dims()}}; }

PatchLayout layout_from_json(const json& j) {
  require(j.is_object() && j.contains("dims"), "layout needs a \"dims\" array");
  return PatchLayout(j.at("dims").get<std::vector<int>>());
}

json to_json(const Gaussian& g) { return {{"mean", to_json(g.mean())}, {"cov", to_json(g.cov())}}; }

json to_json(const GaussianMixture& gm) {
  json comps = json::array();
  for (const auto& c : gm.components()) comps.push_back(to_json(c));
  return {{"weights", to_json(gm.weights())}, {"components", std::move(comps)}};
}

namespace {

Gaussian gaussian_from_json(const json& j) {
  require(j.is_object() && j.contains("mean") && j.contains("cov"),
          "gaussian needs \"mean\" and \"cov\"");
  return Gaussian(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
}

}  // namespace

GaussianMixture mixture_from_json(const json& j) {
  if (j.is_object() && j.contains("mean")) return GaussianMixture(gaussian_from_json(j));
  require(j.is_object() && j.contains("weights") && j.contains("components"),
          "mixture needs \"weights\" and \"components\"");
  std::vector<Gaussian> comps;
  for (const auto& c : j.at("components")) comps.push_back(gaussian_from_json(c));
  require(!comps.empty(), "mixture needs at least one component");
  return GaussianMixture(vector_from_json(j.at("weights")), std::move(comps));
}

json to_json(const TimeSchedule& s) {
  return {{"T", s.T},         {"eta", s.eta}, {"delta", s.delta},
          {"delta_achieved", s.delta_achieved},
          {"M", s.M},         {"N", s.N},     {"R", s.R}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

json RunManifest::to_json() const {
  return {{"schema", kSchema},      {"command", command},
          {"config", config},       {"config_digest", digest(config)},
          {"seed", seed},           {"version", version},
          {"wall_time_s", wall_time_s}, {"outputs", outputs}};
}

}  // namespace ardiff::io
