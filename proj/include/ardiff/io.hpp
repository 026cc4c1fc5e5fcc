#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ardiff/gauss.hpp"
#include "ardiff/patches.hpp"
#include "ardiff/schedule.hpp"

namespace ardiff::io {

using nlohmann::json;

inline constexpr const char* kSchema = "ardiff/1";

json to_json(const Vector& v);
json to_json(const Matrix& m);
Vector vector_from_json(const json& j);
Matrix matrix_from_json(const json& j);

// {"dims": [...]}
json to_json(const PatchLayout& layout);
PatchLayout layout_from_json(const json& j);

// {"mean": [...], "cov": [[...], ...]}
json to_json(const Gaussian& g);
// {"weights": [...], "components": [gaussian, ...]}; a bare gaussian object
// is read as a one-component mixture.
json to_json(const GaussianMixture& gm);
GaussianMixture mixture_from_json(const json& j);

json to_json(const TimeSchedule& s);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
// Digest of the canonical serialization; object keys are sorted, so the
// digest does not depend on key order in the source text.
std::string digest(const json& config);

struct RunManifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::string version;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;

  json to_json() const;
};

}  // namespace ardiff::io
