#pragma once

// Thin wrappers over GSL multimin. Objectives may return +inf to mark
// infeasible points; the wrappers clamp those to a large finite penalty.

#include <functional>

#include "qig/matrix_core.hpp"

namespace qig::detail {

using Objective = std::function<double(const RealVector&)>;

struct MinimizeResult {
  RealVector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

MinimizeResult nelder_mead(const Objective& f, const RealVector& x0, double step, int max_iter, double size_tol = 1e-10);

/// BFGS with central-difference gradients.
MinimizeResult bfgs(const Objective& f, const RealVector& x0, int max_iter, double grad_tol = 1e-9,
                    double fd_step = 1e-6);

}  // namespace qig::detail
