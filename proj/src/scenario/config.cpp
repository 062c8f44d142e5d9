#include "config.hpp"

#include <cmath>

namespace qig::scenario {

namespace {

cplx entry(const Field& f) {
  const json& j = f.raw();
  if (j.is_number()) return cplx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return cplx(j[0].get<double>(), j[1].get<double>());
  f.invalid("expected a number or [re, im]");
}

}  // namespace

void Field::invalid(const std::string& why) const { fail(ErrorCode::ConfigInvalid, path_ + ": " + why); }

const json& Field::raw() const {
  if (!present()) invalid("required field is missing");
  return *node_;
}

Field Field::operator[](const std::string& key) const {
  const std::string p = path_.empty() ? key : path_ + "." + key;
  if (!present()) return Field(nullptr, p);
  if (!node_->is_object()) invalid("expected an object");
  auto it = node_->find(key);
  return Field(it == node_->end() ? nullptr : &*it, p);
}

Field Field::operator[](std::size_t i) const {
  const std::string p = path_ + "[" + std::to_string(i) + "]";
  const json& j = raw();
  if (!j.is_array()) invalid("expected an array");
  return Field(i < j.size() ? &j[i] : nullptr, p);
}

std::size_t Field::size() const {
  const json& j = raw();
  if (!j.is_array()) invalid("expected an array");
  return j.size();
}

double Field::number() const {
  const json& j = raw();
  if (!j.is_number()) invalid("expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid("expected a finite number");
  return v;
}

long Field::integer() const {
  const json& j = raw();
  if (j.is_number_integer()) return j.get<long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long>(v);
  }
  invalid("expected an integer");
}

bool Field::boolean_or(bool fallback) const {
  if (!present()) return fallback;
  if (!node_->is_boolean()) invalid("expected true or false");
  return node_->get<bool>();
}

std::string Field::string() const {
  const json& j = raw();
  if (!j.is_string()) invalid("expected a string");
  return j.get<std::string>();
}

std::vector<double> Field::numbers() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
  return out;
}

std::vector<long> Field::integers() const {
  std::vector<long> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].integer());
  return out;
}

Matrix Field::matrix() const {
  const std::size_t rows = size();
  if (rows == 0) invalid("matrix has no rows");
  const std::size_t cols = (*this)[0].size();
  if (cols == 0) invalid("matrix has no columns");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const Field row = (*this)[i];
    if (row.size() != cols) row.invalid("expected " + std::to_string(cols) + " entries");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = entry(row[k]);
  }
  return m;
}

Matrix Field::square(Index dim) const {
  Matrix m = matrix();
  if (m.rows() != dim || m.cols() != dim)
    invalid("expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  return m;
}

RealMatrix Field::real_matrix() const {
  const Matrix m = matrix();
  if (m.imag().cwiseAbs().maxCoeff() != 0.0) invalid("expected a real matrix");
  return m.real();
}

Vector Field::vector() const {
  const std::size_t n = size();
  if (n == 0) invalid("vector is empty");
  Vector v(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Index>(i)) = entry((*this)[i]);
  return v;
}

}  // namespace qig::scenario
