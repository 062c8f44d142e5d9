#ifndef QIG_QIG_H
#define QIG_QIG_H

/* C interface of libqig. Handles are opaque, every call returns a status code and
 * the message of the last failure on the calling thread is kept for qig_last_error. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QIG_API __declspec(dllexport)
#else
#define QIG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qig_status {
  QIG_OK = 0,
  QIG_INVALID_ARGUMENT,
  QIG_NOT_HERMITIAN,
  QIG_NOT_POSITIVE,
  QIG_TRACE_MISMATCH,
  QIG_NOT_TRACE_PRESERVING,
  QIG_DIMENSION_MISMATCH,
  QIG_BAD_FACTORIZATION,
  QIG_DOMAIN_ERROR,
  QIG_NOT_PURE,
  QIG_NON_DIFFERENTIABLE_POINT,
  QIG_NOT_FAITHFUL,
  QIG_NUMERICAL_BREAKDOWN,
  QIG_NON_SMOOTH_DISTANCE,
  QIG_DEPENDENT_OBSERVABLES,
  QIG_NEWTON_DIVERGENCE,
  QIG_BLOW_UP,
  QIG_NOT_REPRESENTED,
  QIG_INFEASIBLE,
  QIG_NON_CONVERGENCE,
  QIG_STEP_REJECTED,
  QIG_SINGULAR_CONTROL_BLOCK,
  QIG_CONSTRAINT_SOLVE_FAILURE,
  QIG_ZERO_COEFFICIENT,
  QIG_BAD_TIMES,
  QIG_GRID_MISMATCH,
  QIG_ZERO_OVERLAP,
  QIG_QUADRATURE_TOO_COARSE,
  QIG_BRANCH_DOMAIN,
  QIG_INVALID_PERTURBED_STATE,
  QIG_CONFIG_INVALID,
  QIG_IO_ERROR,
  QIG_INTERNAL_ERROR
} qig_status;

typedef enum qig_format { QIG_FORMAT_JSON = 0, QIG_FORMAT_CSV = 1 } qig_format;

typedef struct qig_state qig_state;
typedef struct qig_report qig_report;

QIG_API const char* qig_version(void);
QIG_API const char* qig_status_name(qig_status status);
/* Message of the most recent failure on this thread, "" if none. */
QIG_API const char* qig_last_error(void);
/* 0 on success, 2 for invalid configs and unreadable input, 3 for everything else. */
QIG_API int qig_exit_code(qig_status status);

/* Density matrix from dim*dim complex entries, row-major, interleaved (re, im). */
QIG_API qig_status qig_state_create(size_t dim, const double* entries, qig_state** out);
QIG_API void qig_state_destroy(qig_state* state);
QIG_API qig_status qig_state_dim(const qig_state* state, size_t* out);
/* Copies 2*dim*dim doubles into entries. */
QIG_API qig_status qig_state_entries(const qig_state* state, double* entries, size_t capacity);

/* Quasi-entropy D_{f_gamma}(rho, sigma); gamma = 1 is the Umegaki relative entropy. */
QIG_API qig_status qig_quasi_entropy(const qig_state* rho, const qig_state* sigma, double gamma, double* out);
QIG_API qig_status qig_trace_distance(const qig_state* rho, const qig_state* sigma, double* out);

/* Runs a scenario on a JSON config text. workers >= 1; timing adds wall_time to the report. */
QIG_API qig_status qig_run_scenario(const char* scenario, const char* config_json, int workers, int timing,
                                    qig_report** out);
QIG_API void qig_report_destroy(qig_report* report);
/* Output path named by the config, or NULL. Valid while the report lives. */
QIG_API const char* qig_report_config_output(const qig_report* report);
/* Rendered report; free with qig_string_free. */
QIG_API qig_status qig_report_render(const qig_report* report, qig_format format, char** out, size_t* length);
/* Renders and atomically replaces the file at path. */
QIG_API qig_status qig_report_write(const qig_report* report, qig_format format, const char* path);
QIG_API qig_status qig_report_scalar(const qig_report* report, const char* name, double* out);
/* Number of scalars and residuals whose check failed. */
QIG_API qig_status qig_report_failed_checks(const qig_report* report, size_t* out);

QIG_API void qig_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
