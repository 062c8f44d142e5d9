#include "report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "qig/errors.hpp"

namespace qig::scenario {

namespace {

json entry_json(const Entry& e) {
  json j;
  j["name"] = e.name;
  j["value"] = std::isfinite(e.value) ? json(e.value) : json(std::isnan(e.value) ? "nan" : (e.value > 0 ? "inf" : "-inf"));
  j["tolerance"] = e.tolerance ? json(*e.tolerance) : json(nullptr);
  j["pass"] = e.pass ? json(*e.pass) : json(nullptr);
  return j;
}

Entry entry_from(const json& j) {
  Entry e;
  e.name = j.at("name").get<std::string>();
  const auto& v = j.at("value");
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    e.value = s == "nan" ? NAN : (s == "inf" ? INFINITY : -INFINITY);
  } else {
    e.value = v.get<double>();
  }
  if (!j.at("tolerance").is_null()) e.tolerance = j.at("tolerance").get<double>();
  if (!j.at("pass").is_null()) e.pass = j.at("pass").get<bool>();
  return e;
}

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Entry& Report::add(const std::string& name, double value) {
  scalars.push_back(Entry{name, value, std::nullopt, std::nullopt});
  return scalars.back();
}

Entry& Report::check(const std::string& name, double value, double tolerance) {
  residuals.push_back(Entry{name, value, tolerance, std::abs(value) <= tolerance});
  return residuals.back();
}

Entry* Report::find(const std::string& name) {
  for (auto& e : scalars)
    if (e.name == name) return &e;
  for (auto& e : residuals)
    if (e.name == name) return &e;
  return nullptr;
}

json Report::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["engine_version"] = engine_version;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["dim"] = dim;
  j["scalars"] = json::array();
  for (const auto& e : scalars) j["scalars"].push_back(entry_json(e));
  j["residuals"] = json::array();
  for (const auto& e : residuals) j["residuals"].push_back(entry_json(e));
  j["witnesses"] = witnesses;
  if (wall_time) j["wall_time"] = *wall_time;
  return j;
}

std::string Report::render_json() const { return to_json().dump(2) + "\n"; }

std::string Report::render_csv() const {
  std::string out = "name,value,tolerance,pass\n";
  auto row = [&](const Entry& e) {
    out += csv_field(e.name) + "," + number(e.value) + "," + (e.tolerance ? number(*e.tolerance) : "") + "," +
           (e.pass ? (*e.pass ? "true" : "false") : "") + "\n";
  };
  for (const auto& e : scalars) row(e);
  for (const auto& e : residuals) row(e);
  return out;
}

Report report_from_json(const json& j) {
  Report r;
  r.scenario = j.at("scenario").get<std::string>();
  r.engine_version = j.at("engine_version").get<std::string>();
  if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
  r.dim = j.at("dim").get<long>();
  for (const auto& e : j.at("scalars")) r.scalars.push_back(entry_from(e));
  for (const auto& e : j.at("residuals")) r.residuals.push_back(entry_from(e));
  r.witnesses = j.at("witnesses");
  if (j.contains("wall_time")) r.wall_time = j.at("wall_time").get<double>();
  return r;
}

void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    f << contents;
    f.flush();
    if (!f) {
      f.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::IoError, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::IoError, "cannot move report into " + path);
  }
}

}  // namespace qig::scenario
