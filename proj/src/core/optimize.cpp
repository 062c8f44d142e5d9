#include "optimize.hpp"

#include <cmath>
#include <limits>

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace qig::detail {

namespace {

constexpr double kPenalty = 1e30;

struct Bridge {
  const Objective* f;
  double fd_step;
};

RealVector to_eigen(const gsl_vector* v) {
  RealVector x(static_cast<Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x(static_cast<Index>(i)) = gsl_vector_get(v, i);
  return x;
}

double safe_eval(const Objective& f, const RealVector& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kPenalty;
}

double eval_f(const gsl_vector* v, void* params) {
  auto* b = static_cast<Bridge*>(params);
  return safe_eval(*b->f, to_eigen(v));
}

void eval_df(const gsl_vector* v, void* params, gsl_vector* g) {
  auto* b = static_cast<Bridge*>(params);
  RealVector x = to_eigen(v);
  for (Index i = 0; i < x.size(); ++i) {
    const double h = b->fd_step * std::max(1.0, std::abs(x(i)));
    const double keep = x(i);
    x(i) = keep + h;
    const double fp = safe_eval(*b->f, x);
    x(i) = keep - h;
    const double fm = safe_eval(*b->f, x);
    x(i) = keep;
    gsl_vector_set(g, static_cast<std::size_t>(i), (fp - fm) / (2.0 * h));
  }
}

void eval_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = eval_f(v, params);
  eval_df(v, params, g);
}

gsl_vector* from_eigen(const RealVector& x) {
  gsl_vector* v = gsl_vector_alloc(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) gsl_vector_set(v, static_cast<std::size_t>(i), x(i));
  return v;
}

// GSL's default handler aborts the process.
struct HandlerGuard {
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  ~HandlerGuard() { gsl_set_error_handler(previous); }
};

}  // namespace

MinimizeResult nelder_mead(const Objective& f, const RealVector& x0, double step, int max_iter, double size_tol) {
  HandlerGuard guard;
  MinimizeResult out{x0, safe_eval(f, x0), 0, false};
  if (x0.size() == 0) {
    out.converged = true;
    return out;
  }
  Bridge bridge{&f, 0.0};
  gsl_multimin_function fn{&eval_f, static_cast<std::size_t>(x0.size()), &bridge};
  gsl_vector* x = from_eigen(x0);
  gsl_vector* ss = gsl_vector_alloc(static_cast<std::size_t>(x0.size()));
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, x0.size());
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  int it = 0;
  while (it < max_iter) {
    ++it;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  out.x = to_eigen(gsl_multimin_fminimizer_x(s));
  out.value = gsl_multimin_fminimizer_minimum(s);
  out.iterations = it;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return out;
}

MinimizeResult bfgs(const Objective& f, const RealVector& x0, int max_iter, double grad_tol, double fd_step) {
  HandlerGuard guard;
  MinimizeResult out{x0, safe_eval(f, x0), 0, false};
  if (x0.size() == 0) {
    out.converged = true;
    return out;
  }
  Bridge bridge{&f, fd_step};
  gsl_multimin_function_fdf fn{&eval_f, &eval_df, &eval_fdf, static_cast<std::size_t>(x0.size()), &bridge};
  gsl_vector* x = from_eigen(x0);
  gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, x0.size());
  gsl_multimin_fdfminimizer_set(s, &fn, x, 1e-2, 0.1);
  int it = 0;
  while (it < max_iter) {
    ++it;
    const int status = gsl_multimin_fdfminimizer_iterate(s);
    if (gsl_multimin_test_gradient(s->gradient, grad_tol) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
    // no further progress possible in floating point
    if (status != GSL_SUCCESS) {
      out.converged = gsl_blas_dnrm2(s->gradient) < std::sqrt(grad_tol);
      break;
    }
  }
  out.x = to_eigen(s->x);
  out.value = s->f;
  out.iterations = it;
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);
  return out;
}

}  // namespace qig::detail
