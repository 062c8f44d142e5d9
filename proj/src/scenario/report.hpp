#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace qig::scenario {

using json = nlohmann::ordered_json;

struct Entry {
  std::string name;
  double value = 0.0;
  std::optional<double> tolerance;
  std::optional<bool> pass;
};

struct Report {
  std::string scenario;
  std::string engine_version;
  std::optional<std::uint64_t> seed;
  long dim = 0;
  std::vector<Entry> scalars;
  std::vector<Entry> residuals;
  json witnesses = json::object();
  std::optional<double> wall_time;

  Entry& add(const std::string& name, double value);
  Entry& check(const std::string& name, double value, double tolerance);  // residual, pass iff |value| ≤ tol
  Entry* find(const std::string& name);

  json to_json() const;
  std::string render_json() const;
  /// name,value,tolerance,pass with one row per scalar, then one per residual.
  std::string render_csv() const;
};

/// Inverse of to_json; used for round-trip checks.
Report report_from_json(const json& j);

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::string& path, const std::string& contents);

}  // namespace qig::scenario
