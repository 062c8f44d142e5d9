#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qig/qig.h"

namespace {

using json = nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string config(const std::string& name) { return slurp(std::string(QIG_CONFIG_DIR) + "/" + name + ".json"); }

std::string render(qig_report* r, qig_format f) {
  char* text = nullptr;
  size_t len = 0;
  REQUIRE(qig_report_render(r, f, &text, &len) == QIG_OK);
  std::string out(text, len);
  qig_string_free(text);
  return out;
}

struct Run {
  qig_status status;
  qig_report* report = nullptr;
  Run(const std::string& scenario, const std::string& cfg, int workers = 1) {
    status = qig_run_scenario(scenario.c_str(), cfg.c_str(), workers, 0, &report);
  }
  ~Run() { qig_report_destroy(report); }
};

}  // namespace

TEST_CASE("state handles and distances") {
  const double rho[] = {0.5, 0, 0, 0, 0, 0, 0.5, 0};
  const double sigma[] = {0.25, 0, 0, 0, 0, 0, 0.75, 0};
  qig_state *a = nullptr, *b = nullptr;
  REQUIRE(qig_state_create(2, rho, &a) == QIG_OK);
  REQUIRE(qig_state_create(2, sigma, &b) == QIG_OK);
  double d = 0.0;
  REQUIRE(qig_quasi_entropy(a, b, 1.0, &d) == QIG_OK);
  CHECK(d == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
  REQUIRE(qig_trace_distance(a, b, &d) == QIG_OK);
  CHECK(d == doctest::Approx(0.25));
  size_t dim = 0;
  REQUIRE(qig_state_dim(a, &dim) == QIG_OK);
  CHECK(dim == 2);
  double back[8];
  REQUIRE(qig_state_entries(b, back, 8) == QIG_OK);
  CHECK(back[6] == 0.75);
  CHECK(qig_state_entries(b, back, 4) == QIG_INVALID_ARGUMENT);

  const double bad[] = {0.5, 0, 0.3, 0, 0.1, 0, 0.5, 0};
  qig_state* c = nullptr;
  CHECK(qig_state_create(2, bad, &c) == QIG_NOT_HERMITIAN);
  CHECK(c == nullptr);
  CHECK(std::string(qig_last_error()).find("NotHermitian") != std::string::npos);
  const double neg[] = {1.5, 0, 0, 0, 0, 0, -0.5, 0};
  CHECK(qig_state_create(2, neg, &c) == QIG_NOT_POSITIVE);
  CHECK(qig_quasi_entropy(a, nullptr, 1.0, &d) == QIG_INVALID_ARGUMENT);
  qig_state_destroy(a);
  qig_state_destroy(b);
}

TEST_CASE("status names and exit codes") {
  CHECK(std::string(qig_status_name(QIG_OK)) == "Ok");
  CHECK(std::string(qig_status_name(QIG_CONFIG_INVALID)) == "ConfigInvalid");
  CHECK(std::string(qig_status_name(QIG_SINGULAR_CONTROL_BLOCK)) == "SingularControlBlock");
  CHECK(qig_exit_code(QIG_OK) == 0);
  CHECK(qig_exit_code(QIG_CONFIG_INVALID) == 2);
  CHECK(qig_exit_code(QIG_NON_CONVERGENCE) == 3);
  CHECK(qig_exit_code(QIG_INTERNAL_ERROR) == 3);
  CHECK(std::string(qig_version()).size() > 0);
}

TEST_CASE("divergence scenario reports the worked value") {
  Run run("divergence", config("divergence"));
  REQUIRE(run.status == QIG_OK);
  double v = 0.0;
  REQUIRE(qig_report_scalar(run.report, "quasi_entropy_gamma_1", &v) == QIG_OK);
  CHECK(std::abs(v - 0.143841036225890) < 1e-9);
  size_t failed = 99;
  REQUIRE(qig_report_failed_checks(run.report, &failed) == QIG_OK);
  CHECK(failed == 0);
  CHECK(qig_report_scalar(run.report, "nope", &v) == QIG_INVALID_ARGUMENT);
}

TEST_CASE("reports round-trip and keep a fixed key order") {
  Run run("renorm", config("renorm"));
  REQUIRE(run.status == QIG_OK);
  const std::string text = render(run.report, QIG_FORMAT_JSON);
  const json j = json::parse(text);
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"scenario", "engine_version", "seed", "dim", "scalars", "residuals", "witnesses"});
  CHECK(j.dump(2) + "\n" == text);

  const std::string csv = render(run.report, QIG_FORMAT_CSV);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + j["scalars"].size() + j["residuals"].size());
  CHECK(csv.rfind("name,value,tolerance,pass\n", 0) == 0);
}

TEST_CASE("config errors carry the field path") {
  struct Case {
    std::string scenario, cfg, needle;
  };
  const std::vector<Case> cases = {
      {"divergence", R"({"parameters": {}})", "dim"},
      {"divergence", R"({"dim": 2, "parameters": {"rho": [[1, 0], [0, 0]]}})", "parameters.sigma"},
      {"divergence", R"({"dim": 2, "parameters": {"rho": [[1, 0], [0, "x"]], "sigma": [[1, 0], [0, 0]]}})",
       "parameters.rho[1][1]"},
      {"divergence", R"({"dim": 2, "parameters": {"rho": [[1, 0.5], [0, 0]], "sigma": [[1, 0], [0, 0]]}})",
       "parameters.rho"},
      {"contract", R"({"dim": 2, "parameters": {"channel": {"kind": "identity"}}})", "seed"},
      {"prior", R"({"dim": 2, "parameters": {"reference": [[0.5, 0], [0, 0.5]], "states": []}})", "parameters.k"},
      {"histories", R"({"scenario": "prior", "dim": 2})", "scenario"},
      {"teleport", R"({"dim": 2})", "scenario"},
      {"divergence", "{not json", "config"},
  };
  for (const auto& c : cases) {
    Run run(c.scenario, c.cfg);
    CHECK(run.status == QIG_CONFIG_INVALID);
    CHECK(run.report == nullptr);
    INFO(qig_last_error());
    CHECK(std::string(qig_last_error()).find(c.needle) != std::string::npos);
  }
}

TEST_CASE("numerical failures are not config errors") {
  const std::string cfg = R"({"dim": 3, "parameters": {"k": [[1, 0, 0], [0, 1, 0], [0, 0, 0]], "a": [0], "b": [1], "c": [2]}})";
  Run run("renorm", cfg);
  CHECK(run.status == QIG_SINGULAR_CONTROL_BLOCK);
  CHECK(qig_exit_code(run.status) == 3);
}

TEST_CASE("stochastic scenarios are reproducible across runs and worker counts") {
  std::string cfg = config("contract");
  Run a("contract", cfg, 1), b("contract", cfg, 1), c("contract", cfg, 3);
  REQUIRE(a.status == QIG_OK);
  REQUIRE(c.status == QIG_OK);
  CHECK(render(a.report, QIG_FORMAT_JSON) == render(b.report, QIG_FORMAT_JSON));
  CHECK(render(a.report, QIG_FORMAT_JSON) == render(c.report, QIG_FORMAT_JSON));
  Run p1("propagator", config("propagator"), 1), p2("propagator", config("propagator"), 2);
  REQUIRE(p1.status == QIG_OK);
  CHECK(render(p1.report, QIG_FORMAT_CSV) == render(p2.report, QIG_FORMAT_CSV));
}

TEST_CASE("atomic report writes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "qig_capi_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Run run("histories", config("histories"));
  REQUIRE(run.status == QIG_OK);
  const fs::path target = dir / "report.json";
  {
    std::ofstream old(target);
    old << "stale";
  }
  REQUIRE(qig_report_write(run.report, QIG_FORMAT_JSON, target.c_str()) == QIG_OK);
  CHECK(slurp(target.string()) == render(run.report, QIG_FORMAT_JSON));
  std::size_t entries = 0;
  for (const auto& _ : fs::directory_iterator(dir)) {
    (void)_;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK(qig_report_write(run.report, QIG_FORMAT_JSON, (dir / "missing" / "r.json").c_str()) == QIG_IO_ERROR);
  CHECK(!fs::exists(dir / "missing"));
  fs::remove_all(dir);
}

TEST_CASE("every shipped config runs cleanly") {
  for (const char* s : {"divergence", "geometry", "project", "evolve", "modular", "renorm", "contract", "histories",
                        "prior", "propagator"}) {
    Run run(s, config(s));
    INFO(s, " ", qig_last_error());
    REQUIRE(run.status == QIG_OK);
    size_t failed = 1;
    qig_report_failed_checks(run.report, &failed);
    CHECK(failed == 0);
  }
}
