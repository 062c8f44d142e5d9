#include "qig/qig.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "qig/divergences.hpp"
#include "../scenario/runner.hpp"

struct qig_state {
  qig::DensityMatrix rep;
};

struct qig_report {
  qig::scenario::Report rep;
  std::string output_path;
};

namespace {

static_assert(QIG_IO_ERROR == static_cast<int>(qig::ErrorCode::IoError) + 1, "status codes out of sync");

thread_local std::string last_error;

qig_status status_of(qig::ErrorCode code) {
  // the C enum mirrors ErrorCode one past QIG_OK
  return static_cast<qig_status>(static_cast<int>(code) + 1);
}

template <class Fn>
qig_status wrap(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return QIG_OK;
  } catch (const qig::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return QIG_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return QIG_INTERNAL_ERROR;
  } catch (...) {
    last_error = "unknown failure";
    return QIG_INTERNAL_ERROR;
  }
}

void require(bool ok, const char* what) {
  if (!ok) qig::fail(qig::ErrorCode::InvalidArgument, what);
}

std::string render(const qig_report* report, qig_format format) {
  if (format == QIG_FORMAT_JSON) return report->rep.render_json();
  if (format == QIG_FORMAT_CSV) return report->rep.render_csv();
  qig::fail(qig::ErrorCode::InvalidArgument, "unknown report format");
}

}  // namespace

extern "C" {

const char* qig_version(void) { return qig::scenario::kEngineVersion; }

const char* qig_status_name(qig_status status) {
  if (status == QIG_OK) return "Ok";
  if (status == QIG_INTERNAL_ERROR) return "InternalError";
  if (status < QIG_OK || status > QIG_INTERNAL_ERROR) return "Unknown";
  return qig::to_string(static_cast<qig::ErrorCode>(static_cast<int>(status) - 1));
}

const char* qig_last_error(void) { return last_error.c_str(); }

int qig_exit_code(qig_status status) {
  if (status == QIG_OK) return 0;
  if (status == QIG_CONFIG_INVALID || status == QIG_IO_ERROR) return 2;
  return 3;
}

qig_status qig_state_create(size_t dim, const double* entries, qig_state** out) {
  return wrap([&] {
    require(out != nullptr && entries != nullptr, "null argument");
    require(dim >= 1 && dim <= 64, "dimension must lie in [1, 64]");
    const auto d = static_cast<qig::Index>(dim);
    qig::Matrix m(d, d);
    for (qig::Index i = 0; i < d; ++i)
      for (qig::Index j = 0; j < d; ++j) {
        const std::size_t k = 2 * static_cast<std::size_t>(i * d + j);
        m(i, j) = qig::cplx(entries[k], entries[k + 1]);
      }
    *out = new qig_state{qig::DensityMatrix::validate(m)};
  });
}

void qig_state_destroy(qig_state* state) { delete state; }

qig_status qig_state_dim(const qig_state* state, size_t* out) {
  return wrap([&] {
    require(state && out, "null argument");
    *out = static_cast<size_t>(state->rep.dim());
  });
}

qig_status qig_state_entries(const qig_state* state, double* entries, size_t capacity) {
  return wrap([&] {
    require(state && entries, "null argument");
    const auto d = state->rep.dim();
    require(capacity >= static_cast<size_t>(2 * d * d), "buffer too small");
    const auto& m = state->rep.matrix();
    for (qig::Index i = 0; i < d; ++i)
      for (qig::Index j = 0; j < d; ++j) {
        const std::size_t k = 2 * static_cast<std::size_t>(i * d + j);
        entries[k] = m(i, j).real();
        entries[k + 1] = m(i, j).imag();
      }
  });
}

qig_status qig_quasi_entropy(const qig_state* rho, const qig_state* sigma, double gamma, double* out) {
  return wrap([&] {
    require(rho && sigma && out, "null argument");
    if (rho->rep.dim() != sigma->rep.dim()) qig::fail(qig::ErrorCode::DimensionMismatch, "states differ in dimension");
    *out = qig::f_gamma_distance(gamma)(rho->rep, sigma->rep);
  });
}

qig_status qig_trace_distance(const qig_state* rho, const qig_state* sigma, double* out) {
  return wrap([&] {
    require(rho && sigma && out, "null argument");
    if (rho->rep.dim() != sigma->rep.dim()) qig::fail(qig::ErrorCode::DimensionMismatch, "states differ in dimension");
    *out = qig::trace_distance(rho->rep.matrix(), sigma->rep.matrix());
  });
}

qig_status qig_run_scenario(const char* scenario, const char* config_json, int workers, int timing,
                            qig_report** out) {
  return wrap([&] {
    require(scenario && config_json && out, "null argument");
    *out = nullptr;
    qig::scenario::RunOptions opts;
    opts.workers = workers;
    opts.timing = timing != 0;
    auto report = std::make_unique<qig_report>();
    report->output_path = qig::scenario::config_output_path(config_json);
    report->rep = qig::scenario::run_scenario(scenario, config_json, opts);
    *out = report.release();
  });
}

void qig_report_destroy(qig_report* report) { delete report; }

const char* qig_report_config_output(const qig_report* report) {
  if (!report || report->output_path.empty()) return nullptr;
  return report->output_path.c_str();
}

qig_status qig_report_render(const qig_report* report, qig_format format, char** out, size_t* length) {
  return wrap([&] {
    require(report && out, "null argument");
    const std::string s = render(report, format);
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
    if (length) *length = s.size();
  });
}

qig_status qig_report_write(const qig_report* report, qig_format format, const char* path) {
  return wrap([&] {
    require(report && path, "null argument");
    qig::scenario::write_atomic(path, render(report, format));
  });
}

qig_status qig_report_scalar(const qig_report* report, const char* name, double* out) {
  return wrap([&] {
    require(report && name && out, "null argument");
    for (const auto* list : {&report->rep.scalars, &report->rep.residuals})
      for (const auto& e : *list)
        if (e.name == name) {
          *out = e.value;
          return;
        }
    qig::fail(qig::ErrorCode::InvalidArgument, std::string("no scalar named ") + name);
  });
}

qig_status qig_report_failed_checks(const qig_report* report, size_t* out) {
  return wrap([&] {
    require(report && out, "null argument");
    size_t n = 0;
    for (const auto* list : {&report->rep.scalars, &report->rep.residuals})
      for (const auto& e : *list)
        if (e.pass && !*e.pass) ++n;
    *out = n;
  });
}

void qig_string_free(char* s) { std::free(s); }

}  // extern "C"
