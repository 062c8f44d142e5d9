// qig <scenario> --config <path> [--format json|csv] [--workers N] [--out <path>]

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qig/qig.h"

namespace {

constexpr int kExitConfig = 2;

int complain(int code, const std::string& msg) {
  std::fprintf(stderr, "qig: %s\n", msg.c_str());
  return code;
}

bool parse_workers(const char* text, int& out) {
  if (!text || !*text) return false;
  char* end = nullptr;
  const long v = std::strtol(text, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) return false;
  out = static_cast<int>(v);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum information geometry scenarios"};
  std::string scenario, config_path, format = "json", out_path;
  int workers = 0;
  bool timing = false;
  app.add_option("scenario", scenario,
                 "divergence, geometry, project, evolve, modular, renorm, contract, histories, prior, propagator")
      ->required();
  app.add_option("--config", config_path, "scenario config (JSON)")->required();
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--workers", workers, "worker threads (default: QIG_WORKERS or 1)")->check(CLI::Range(1, 1024));
  app.add_option("--out", out_path, "report path (default: config output_path, else stdout)");
  app.add_flag("--timing", timing, "include wall_time in the report");
  app.set_version_flag("--version", std::string(qig_version()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (workers == 0) {
    workers = 1;
    if (const char* env = std::getenv("QIG_WORKERS"); env && *env) {
      if (!parse_workers(env, workers)) return complain(kExitConfig, "QIG_WORKERS must be an integer in [1, 1024]");
    }
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) return complain(kExitConfig, "config: cannot read " + config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string config = buf.str();

  qig_report* report = nullptr;
  qig_status st = qig_run_scenario(scenario.c_str(), config.c_str(), workers, timing ? 1 : 0, &report);
  if (st != QIG_OK) return complain(qig_exit_code(st), qig_last_error());

  const qig_format fmt = format == "csv" ? QIG_FORMAT_CSV : QIG_FORMAT_JSON;
  if (out_path.empty() && qig_report_config_output(report)) out_path = qig_report_config_output(report);
  int rc = 0;
  if (!out_path.empty()) {
    st = qig_report_write(report, fmt, out_path.c_str());
    if (st != QIG_OK) rc = complain(qig_exit_code(st), qig_last_error());
  } else {
    char* text = nullptr;
    size_t len = 0;
    st = qig_report_render(report, fmt, &text, &len);
    if (st != QIG_OK) {
      rc = complain(qig_exit_code(st), qig_last_error());
    } else {
      std::fwrite(text, 1, len, stdout);
      qig_string_free(text);
    }
  }
  qig_report_destroy(report);
  return rc;
}
