#pragma once

// Typed access into a scenario config. Every failure is ConfigInvalid and
// names the offending field path, e.g. "parameters.rho[1][0]".

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qig/matrix_core.hpp"

namespace qig::scenario {

using json = nlohmann::ordered_json;

class Field {
 public:
  Field(const json* node, std::string path) : node_(node), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool present() const { return node_ != nullptr && !node_->is_null(); }
  const json& raw() const;

  Field operator[](const std::string& key) const;  // missing keys give an absent field
  Field operator[](std::size_t i) const;
  std::size_t size() const;  // array length

  double number() const;
  double number_or(double fallback) const { return present() ? number() : fallback; }
  long integer() const;
  long integer_or(long fallback) const { return present() ? integer() : fallback; }
  bool boolean_or(bool fallback) const;
  std::string string() const;
  std::string string_or(const std::string& fallback) const { return present() ? string() : fallback; }
  std::vector<double> numbers() const;
  std::vector<long> integers() const;

  /// Rows of entries, each a real number or [re, im].
  Matrix matrix() const;
  Matrix square(Index dim) const;
  RealMatrix real_matrix() const;
  Vector vector() const;  // complex entries, same convention

  [[noreturn]] void invalid(const std::string& why) const;

 private:
  const json* node_;
  std::string path_;
};

}  // namespace qig::scenario
