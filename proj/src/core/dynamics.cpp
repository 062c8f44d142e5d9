#include "qig/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "optimize.hpp"

namespace qig {

namespace {

double expect(const Matrix& rho, const Matrix& x) { return (rho * x).trace().real(); }

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

// Orthonormal Hermitian basis of M_d under the HS inner product.
std::vector<Matrix> hermitian_basis(Index d) {
  std::vector<Matrix> out;
  const double r = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < d; ++j) {
    Matrix e = Matrix::Zero(d, d);
    e(j, j) = 1.0;
    out.push_back(e);
    for (Index k = j + 1; k < d; ++k) {
      Matrix s = Matrix::Zero(d, d), a = Matrix::Zero(d, d);
      s(j, k) = s(k, j) = r;
      a(j, k) = cplx(0, -r);
      a(k, j) = cplx(0, r);
      out.push_back(s);
      out.push_back(a);
    }
  }
  return out;
}

// Accepts matrices that are states up to the integrator tolerance.
DensityMatrix settle(const Matrix& m) {
  const Matrix herm = hermitian_part(m);
  const Spectrum s = Spectrum::of(herm);
  if (s.eigenvalues(0) < -1e-8) fail(ErrorCode::NotPositive, "state left the positive cone");
  Matrix out = s.map([](double e) { return std::max(0.0, e); });
  out /= out.trace().real();
  return DensityMatrix::validate(hermitian_part(out));
}

Matrix bona_field(const HamiltonianFunction& h, const Matrix& rho) {
  return cplx(0, -1) * commutator(h.gradient(rho), rho);
}

Matrix rk4_step(const HamiltonianFunction& h, const Matrix& rho, double dt) {
  const Matrix k1 = bona_field(h, rho);
  const Matrix k2 = bona_field(h, rho + 0.5 * dt * k1);
  const Matrix k3 = bona_field(h, rho + 0.5 * dt * k2);
  const Matrix k4 = bona_field(h, rho + dt * k3);
  return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double min_eig(const Matrix& m) { return Spectrum::of(hermitian_part(m)).eigenvalues(0); }

// One step of length dt, subdivided while positivity fails.
Matrix guarded_step(const HamiltonianFunction& h, const Matrix& rho, double dt, int& halvings) {
  for (int level = 0; level <= 20; ++level) {
    const int pieces = 1 << level;
    const double sub = dt / pieces;
    Matrix cur = rho;
    bool ok = true;
    for (int p = 0; p < pieces && ok; ++p) {
      cur = rk4_step(h, cur, sub);
      ok = cur.allFinite() && min_eig(cur) >= -1e-8;
    }
    if (ok) {
      halvings += level;
      return cur;
    }
  }
  fail(ErrorCode::StepRejected, "positivity lost after 20 step halvings");
}

void require_step(double dt) {
  if (!(dt > 0.0) || dt > 1e-2 + 1e-15) {
    std::ostringstream os;
    os << "time step must lie in (0, 1e-2], got " << dt;
    fail(ErrorCode::InvalidArgument, os.str());
  }
}

}  // namespace

HamiltonianFunction HamiltonianFunction::linear(const HermitianObservable& x) {
  const Matrix m = x.matrix();
  return {[m](const Matrix& rho) { return expect(rho, m); }, [m](const Matrix&) { return m; }, "linear"};
}

HamiltonianFunction HamiltonianFunction::mean_field(const HermitianObservable& h,
                                                    const std::vector<std::pair<double, HermitianObservable>>& squares) {
  const Matrix base = h.matrix();
  std::vector<std::pair<double, Matrix>> sq;
  for (const auto& [l, a] : squares) {
    if (a.dim() != h.dim()) fail(ErrorCode::DimensionMismatch, "mean-field observables differ in dimension");
    sq.emplace_back(l, a.matrix());
  }
  HamiltonianFunction f;
  f.label = "mean_field";
  f.value = [base, sq](const Matrix& rho) {
    double v = expect(rho, base);
    for (const auto& [l, a] : sq) {
      const double e = expect(rho, a);
      v += 0.5 * l * e * e;
    }
    return v;
  };
  f.gradient = [base, sq](const Matrix& rho) {
    Matrix g = base;
    for (const auto& [l, a] : sq) g += (l * expect(rho, a)) * a;
    return g;
  };
  return f;
}

HamiltonianFunction HamiltonianFunction::quadratic(const std::vector<HermitianObservable>& a, const RealMatrix& c) {
  const Index n = static_cast<Index>(a.size());
  if (c.rows() != n || c.cols() != n) fail(ErrorCode::DimensionMismatch, "coefficient matrix shape");
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) fail(ErrorCode::InvalidArgument, "coefficients not symmetric");
  std::vector<Matrix> obs;
  for (const auto& x : a) obs.push_back(x.matrix());
  HamiltonianFunction f;
  f.label = "quadratic";
  auto expectations = [obs, n](const Matrix& rho) {
    RealVector e(n);
    for (Index i = 0; i < n; ++i) e(i) = expect(rho, obs[static_cast<std::size_t>(i)]);
    return e;
  };
  f.value = [expectations, c](const Matrix& rho) {
    const RealVector e = expectations(rho);
    return 0.5 * e.dot(c * e);
  };
  f.gradient = [expectations, c, obs, n](const Matrix& rho) {
    const RealVector w = c * expectations(rho);
    Matrix g = Matrix::Zero(obs.front().rows(), obs.front().cols());
    for (Index i = 0; i < n; ++i) g += w(i) * obs[static_cast<std::size_t>(i)];
    return g;
  };
  return f;
}

double gradient_consistency(const HamiltonianFunction& h, const DensityMatrix& rho, const Matrix& v, double eps) {
  const Matrix& r = rho.matrix();
  const double fd = (h.value(r + eps * v) - h.value(r - eps * v)) / (2.0 * eps);
  return fd - (v * h.gradient(r)).trace().real();
}

double poisson_bracket(const HamiltonianFunction& f, const HamiltonianFunction& k, const DensityMatrix& rho) {
  const Matrix& r = rho.matrix();
  return (cplx(0, 1) * (r * commutator(f.gradient(r), k.gradient(r))).trace()).real();
}

HamiltonianFunction bracket_function(HamiltonianFunction f, HamiltonianFunction k, double step) {
  HamiltonianFunction out;
  out.label = "{" + f.label + "," + k.label + "}";
  auto value = [f, k](const Matrix& r) {
    return (cplx(0, 1) * (r * commutator(f.gradient(r), k.gradient(r))).trace()).real();
  };
  out.value = value;
  out.gradient = [value, step](const Matrix& r) {
    Matrix g = Matrix::Zero(r.rows(), r.cols());
    for (const Matrix& e : hermitian_basis(r.rows())) {
      const double c = (value(r + step * e) - value(r - step * e)) / (2.0 * step);
      g += c * e;
    }
    return g;
  };
  return out;
}

double jacobi_residual(const HamiltonianFunction& f, const HamiltonianFunction& g, const HamiltonianFunction& k,
                       const DensityMatrix& rho) {
  return std::abs(poisson_bracket(f, bracket_function(g, k), rho) + poisson_bracket(g, bracket_function(k, f), rho) +
                  poisson_bracket(k, bracket_function(f, g), rho));
}

Trajectory hamiltonian_flow(const HamiltonianFunction& h, const DensityMatrix& rho0, double t_final, double dt,
                            int record_every) {
  require_step(dt);
  if (t_final < 0.0) fail(ErrorCode::InvalidArgument, "negative final time");
  if (record_every < 1) fail(ErrorCode::InvalidArgument, "record_every must be positive");
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
  const double step = t_final / static_cast<double>(steps);
  Trajectory traj;
  traj.points.push_back({0.0, rho0});
  if (t_final == 0.0) return traj;
  Matrix cur = rho0.matrix();
  for (long n = 1; n <= steps; ++n) {
    cur = guarded_step(h, cur, step, traj.halvings);
    if (n % record_every == 0 || n == steps) traj.points.push_back({step * static_cast<double>(n), settle(cur)});
  }
  return traj;
}

DensityMatrix evolve(const HamiltonianFunction& h, const DensityMatrix& rho0, double t_final, double dt) {
  if (t_final == 0.0) return rho0;
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
  return hamiltonian_flow(h, rho0, t_final, dt, static_cast<int>(std::min<long>(steps, 1L << 30))).final_state();
}

// ---------------------------------------------------------------------------
// Constraint sets

ConstraintSet ConstraintSet::expectations(std::vector<HermitianObservable> obs, std::vector<double> targets) {
  if (obs.size() != targets.size()) fail(ErrorCode::InvalidArgument, "one target per observable");
  for (const auto& o : obs)
    if (o.dim() != obs.front().dim()) fail(ErrorCode::DimensionMismatch, "constraint observables differ in dimension");
  ConstraintSet q;
  q.kind = ConstraintKind::expectation_equalities;
  q.observables = std::move(obs);
  q.targets = std::move(targets);
  return q;
}

ConstraintSet ConstraintSet::commutant(std::vector<Matrix> projectors) {
  if (projectors.empty()) fail(ErrorCode::InvalidArgument, "commutant constraint needs projectors");
  const Index d = projectors.front().rows();
  Matrix sum = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    const Matrix& p = projectors[i];
    if (p.rows() != d || p.cols() != d) fail(ErrorCode::DimensionMismatch, "projectors differ in dimension");
    if (hermitian_residual(p) > 1e-9 || (p * p - p).cwiseAbs().maxCoeff() > 1e-9)
      fail(ErrorCode::InvalidArgument, "block is not an orthogonal projector");
    for (std::size_t j = i + 1; j < projectors.size(); ++j)
      if ((p * projectors[j]).cwiseAbs().maxCoeff() > 1e-9) fail(ErrorCode::InvalidArgument, "blocks overlap");
    sum += p;
  }
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9)
    fail(ErrorCode::InvalidArgument, "blocks do not sum to the identity");
  ConstraintSet q;
  q.kind = ConstraintKind::commutant_blocks;
  q.blocks = std::move(projectors);
  return q;
}

ConstraintSet ConstraintSet::product(Index dim_a, Index dim_b) {
  if (dim_a < 1 || dim_b < 1) fail(ErrorCode::InvalidArgument, "factor dimensions must be positive");
  ConstraintSet q;
  q.kind = ConstraintKind::product_marginal;
  q.dim_a = dim_a;
  q.dim_b = dim_b;
  return q;
}

Index ConstraintSet::dim() const {
  switch (kind) {
    case ConstraintKind::expectation_equalities:
      return observables.empty() ? 0 : observables.front().dim();
    case ConstraintKind::commutant_blocks:
      return blocks.front().rows();
    case ConstraintKind::product_marginal:
      return dim_a * dim_b;
  }
  return 0;
}

namespace {

Matrix pinch(const std::vector<Matrix>& blocks, const Matrix& x) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (const Matrix& p : blocks) out += p * x * p;
  return out;
}

Matrix marginal_product(const DensityMatrix& s, Index da, Index db) {
  return kron(partial_trace(s, da, db, 0).matrix(), partial_trace(s, da, db, 1).matrix());
}

}  // namespace

double ConstraintSet::violation(const DensityMatrix& sigma) const {
  if (dim() != 0 && sigma.dim() != dim()) fail(ErrorCode::DimensionMismatch, "state and constraint dimensions differ");
  switch (kind) {
    case ConstraintKind::expectation_equalities: {
      double worst = 0.0;
      for (std::size_t k = 0; k < observables.size(); ++k)
        worst = std::max(worst, std::abs(expect(sigma.matrix(), observables[k].matrix()) - targets[k]));
      return worst;
    }
    case ConstraintKind::commutant_blocks:
      return (sigma.matrix() - pinch(blocks, sigma.matrix())).cwiseAbs().maxCoeff();
    case ConstraintKind::product_marginal:
      return (sigma.matrix() - marginal_product(sigma, dim_a, dim_b)).cwiseAbs().maxCoeff();
  }
  return 0.0;
}

bool ConstraintSet::contains(const DensityMatrix& sigma) const { return violation(sigma) <= tolerance; }

// ---------------------------------------------------------------------------
// Entropic projections

namespace {

enum class Slot { first, second };

Slot resolve(ProjectionOrder order, ConstraintKind kind) {
  switch (order) {
    case ProjectionOrder::constrained_first:
      return Slot::first;
    case ProjectionOrder::constrained_second:
      return Slot::second;
    case ProjectionOrder::automatic:
      break;
  }
  return kind == ConstraintKind::expectation_equalities ? Slot::first : Slot::second;
}

double objective(const DistanceFunctional& d, Slot slot, const DensityMatrix& sigma, const DensityMatrix& omega) {
  return slot == Slot::first ? d(sigma, omega) : d(omega, sigma);
}

bool is_quasi(const DistanceFunctional& d, double gamma) {
  return d.kind == DistanceKind::quasi_entropy && d.gamma == gamma;
}

bool is_half(const DistanceFunctional& d) { return is_quasi(d, 0.5) || d.kind == DistanceKind::d_half; }

ProjectionReport make_report(const DistanceFunctional& d, Slot slot, const ConstraintSet& q,
                             const DensityMatrix& omega, DensityMatrix sigma, int iterations, std::string method) {
  const double obj = objective(d, slot, sigma, omega);
  const double res = q.violation(sigma);
  return ProjectionReport{std::move(sigma), obj, res, iterations, std::move(method)};
}

// D₁(σ, ω) over σ with tr(σ F_k) = c_k: σ ∝ exp(log ω + Σ θ_k F_k) on supp ω,
// θ from Newton on the convex dual log Z(θ) - θ·c.
struct TiltPoint {
  double log_z;
  RealVector eta;
  RealMatrix cov;
  Matrix state;  // on the support
};

TiltPoint tilt_point(const Matrix& log_base, const std::vector<Matrix>& obs, const RealVector& theta) {
  Matrix a = log_base;
  for (std::size_t k = 0; k < obs.size(); ++k) a += theta(static_cast<Index>(k)) * obs[k];
  const Spectrum s = Spectrum::of(hermitian_part(a));
  const RealVector& lam = s.eigenvalues;
  const double shift = lam.maxCoeff();
  const Index r = lam.size();
  const double z = (lam.array() - shift).exp().sum();
  RealMatrix dd(r, r);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j) {
      const double li = lam(i) - shift, lj = lam(j) - shift, diff = li - lj;
      dd(i, j) = std::abs(diff) < 1e-12 ? std::exp(0.5 * (li + lj)) : std::exp(lj) * std::expm1(diff) / diff;
    }
  dd /= z;
  const Index n = static_cast<Index>(obs.size());
  std::vector<Matrix> ft;
  TiltPoint p;
  p.log_z = shift + std::log(z);
  p.eta.resize(n);
  for (Index k = 0; k < n; ++k) {
    ft.push_back(s.eigenvectors.adjoint() * obs[static_cast<std::size_t>(k)] * s.eigenvectors);
    p.eta(k) = (ft.back().diagonal().real().array() * dd.diagonal().array()).sum();
  }
  p.cov.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      double acc = 0.0;
      for (Index a2 = 0; a2 < r; ++a2)
        for (Index b = 0; b < r; ++b) acc += (ft[i](a2, b) * ft[j](b, a2)).real() * dd(a2, b);
      p.cov(i, j) = p.cov(j, i) = acc - p.eta(i) * p.eta(j);
    }
  p.state = s.map([&](double l) { return std::exp(l - shift) / z; });
  return p;
}

ProjectionReport tilt_projection(const DistanceFunctional& d, const ConstraintSet& q, const DensityMatrix& omega) {
  const Spectrum& so = omega.spectrum();
  std::vector<Index> keep;
  for (Index i = 0; i < so.eigenvalues.size(); ++i)
    if (so.eigenvalues(i) > kFaithfulFloor) keep.push_back(i);
  const Index r = static_cast<Index>(keep.size());
  Matrix v(omega.dim(), r);
  RealVector logs(r);
  for (Index j = 0; j < r; ++j) {
    v.col(j) = so.eigenvectors.col(keep[static_cast<std::size_t>(j)]);
    logs(j) = std::log(so.eigenvalues(keep[static_cast<std::size_t>(j)]));
  }
  const Matrix log_base = logs.cast<cplx>().asDiagonal();
  std::vector<Matrix> obs;
  for (const auto& f : q.observables) obs.push_back(v.adjoint() * f.matrix() * v);
  const Index n = static_cast<Index>(obs.size());
  RealVector c(n);
  for (Index k = 0; k < n; ++k) c(k) = q.targets[static_cast<std::size_t>(k)];

  auto dual = [&](const TiltPoint& p, const RealVector& th) { return p.log_z - th.dot(c); };
  RealVector theta = RealVector::Zero(n);
  TiltPoint p = tilt_point(log_base, obs, theta);
  int it = 0;
  for (; it < 500; ++it) {
    const RealVector grad = p.eta - c;
    if (grad.norm() <= 1e-10) break;
    const RealVector dir = -p.cov.completeOrthogonalDecomposition().solve(grad);
    const double current = dual(p, theta);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      const RealVector trial = theta + step * dir;
      TiltPoint tp = tilt_point(log_base, obs, trial);
      if (dual(tp, trial) <= current + 1e-4 * step * grad.dot(dir) || (tp.eta - c).norm() < grad.norm()) {
        theta = trial;
        p = std::move(tp);
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (theta.norm() > 1e6) fail(ErrorCode::Infeasible, "expectation constraints lie outside the attainable range");
  }
  const double gnorm = (p.eta - c).norm();
  if (gnorm > 1e-8) {
    if (theta.norm() > 1e3) fail(ErrorCode::Infeasible, "expectation constraints lie outside the attainable range");
    fail(ErrorCode::NonConvergence, "dual Newton did not reach the constraint set within 500 iterations");
  }
  Matrix sigma = v * p.state * v.adjoint();
  return make_report(d, Slot::first, q, omega, DensityMatrix::validate(hermitian_part(sigma)), it, "dual_newton_tilt");
}

// D_{1/2} = 2‖√σ - √ω‖²: X = √σ solves M X + X M = √ω with M = ((1+μ) + Σλ_k F_k)/2,
// the multipliers fixed by tr X² = 1 and tr X² F_k = c_k.
Matrix lyapunov_solve(const Matrix& m, const Matrix& y) {
  const Spectrum s = Spectrum::of(m);
  Matrix yt = s.eigenvectors.adjoint() * y * s.eigenvectors;
  for (Index i = 0; i < yt.rows(); ++i)
    for (Index j = 0; j < yt.cols(); ++j) yt(i, j) /= (s.eigenvalues(i) + s.eigenvalues(j));
  return s.eigenvectors * yt * s.eigenvectors.adjoint();
}

std::optional<ProjectionReport> half_expectation_projection(const DistanceFunctional& d, Slot slot,
                                                            const ConstraintSet& q, const DensityMatrix& omega) {
  const Index dd = omega.dim();
  const Index n = static_cast<Index>(q.observables.size());
  const Matrix y = sqrt_psd(omega.matrix());
  auto m_of = [&](const RealVector& u) {
    Matrix m = (0.5 * (1.0 + u(0))) * Matrix::Identity(dd, dd);
    for (Index k = 0; k < n; ++k) m += (0.5 * u(k + 1)) * q.observables[static_cast<std::size_t>(k)].matrix();
    return m;
  };
  auto residual = [&](const RealVector& u, Matrix* x_out) -> std::optional<RealVector> {
    const Matrix m = m_of(u);
    if (Spectrum::of(m).eigenvalues(0) <= 1e-12) return std::nullopt;
    const Matrix x = lyapunov_solve(m, y);
    const Matrix x2 = x * x;
    RealVector r(n + 1);
    r(0) = x2.trace().real() - 1.0;
    for (Index k = 0; k < n; ++k)
      r(k + 1) = expect(x2, q.observables[static_cast<std::size_t>(k)].matrix()) - q.targets[static_cast<std::size_t>(k)];
    if (x_out) *x_out = x;
    return r;
  };
  RealVector u = RealVector::Zero(n + 1);
  auto r = residual(u, nullptr);
  int it = 0;
  for (; it < 200 && r && r->norm() > 1e-13; ++it) {
    RealMatrix jac(n + 1, n + 1);
    for (Index j = 0; j <= n; ++j) {
      RealVector up = u, um = u;
      const double h = 1e-7;
      up(j) += h;
      um(j) -= h;
      auto rp = residual(up, nullptr), rm = residual(um, nullptr);
      if (!rp || !rm) return std::nullopt;
      jac.col(j) = (*rp - *rm) / (2.0 * h);
    }
    const RealVector dir = -jac.completeOrthogonalDecomposition().solve(*r);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      auto rt = residual(u + step * dir, nullptr);
      if (rt && rt->norm() < r->norm()) {
        u += step * dir;
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  Matrix x;
  auto final_r = residual(u, &x);
  if (!final_r || final_r->norm() > 1e-10) return std::nullopt;
  Matrix sigma = x * x;
  sigma /= sigma.trace().real();
  return make_report(d, slot, q, omega, DensityMatrix::validate(hermitian_part(sigma)), it, "lyapunov_dual_newton");
}

// Generic path: exact parametrization of the constraint set where one exists,
// augmented Lagrangian for expectation constraints, GSL BFGS inside.
Matrix unpack(const RealVector& x, Index d, Index offset = 0) {
  Matrix g(d, d);
  for (Index i = 0; i < d * d; ++i) g(i % d, i / d) = cplx(x(offset + 2 * i), x(offset + 2 * i + 1));
  return g;
}

void pack(const Matrix& g, RealVector& x, Index offset = 0) {
  const Index d = g.rows();
  for (Index i = 0; i < d * d; ++i) {
    x(offset + 2 * i) = g(i % d, i / d).real();
    x(offset + 2 * i + 1) = g(i % d, i / d).imag();
  }
}

Matrix normalized_gram(const Matrix& g) {
  const Matrix s = g * g.adjoint();
  return s / s.trace().real();
}

std::optional<DensityMatrix> try_state(const Matrix& m) {
  try {
    return DensityMatrix::validate(hermitian_part(m));
  } catch (const Error&) {
    return std::nullopt;
  }
}

ProjectionReport generic_projection(const DistanceFunctional& d, Slot slot, const ConstraintSet& q,
                                    const DensityMatrix& omega) {
  const Index dim = omega.dim();
  const Matrix start = 0.9 * omega.matrix() + (0.1 / static_cast<double>(dim)) * Matrix::Identity(dim, dim);
  std::function<Matrix(const RealVector&)> state_of;
  RealVector x0;
  switch (q.kind) {
    case ConstraintKind::expectation_equalities:
      x0.resize(2 * dim * dim);
      pack(sqrt_psd(start), x0);
      state_of = [dim](const RealVector& x) { return normalized_gram(unpack(x, dim)); };
      break;
    case ConstraintKind::commutant_blocks:
      x0.resize(2 * dim * dim);
      pack(sqrt_psd(pinch(q.blocks, start)), x0);
      state_of = [dim, &q](const RealVector& x) {
        const Matrix g = unpack(x, dim);
        Matrix s = Matrix::Zero(dim, dim);
        for (const Matrix& p : q.blocks) {
          const Matrix b = p * g * p;
          s += b * b.adjoint();
        }
        return Matrix(s / s.trace().real());
      };
      break;
    case ConstraintKind::product_marginal: {
      const Index da = q.dim_a, db = q.dim_b;
      const DensityMatrix st = DensityMatrix::validate(hermitian_part(start));
      x0.resize(2 * (da * da + db * db));
      pack(sqrt_psd(partial_trace(st, da, db, 0).matrix()), x0, 0);
      pack(sqrt_psd(partial_trace(st, da, db, 1).matrix()), x0, 2 * da * da);
      state_of = [da, db](const RealVector& x) {
        return kron(normalized_gram(unpack(x, da, 0)), normalized_gram(unpack(x, db, 2 * da * da)));
      };
      break;
    }
  }
  auto distance = [&](const RealVector& x) {
    auto s = try_state(state_of(x));
    if (!s) return kInfinity;
    return objective(d, slot, *s, omega);
  };

  int iterations = 0;
  RealVector x = x0;
  if (q.kind == ConstraintKind::expectation_equalities) {
    const std::size_t n = q.observables.size();
    std::vector<double> lambda(n, 0.0);
    double mu = 10.0;
    double last = kInfinity;
    for (int outer = 0; outer < 40; ++outer) {
      auto lagrangian = [&](const RealVector& v) {
        const Matrix s = state_of(v);
        double val = distance(v);
        if (!std::isfinite(val)) return val;
        for (std::size_t k = 0; k < n; ++k) {
          const double r = expect(s, q.observables[k].matrix()) - q.targets[k];
          val += lambda[k] * r + 0.5 * mu * r * r;
        }
        return val;
      };
      const auto res = detail::bfgs(lagrangian, x, 500, 1e-10);
      iterations += res.iterations;
      x = res.x;
      const Matrix s = state_of(x);
      double worst = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double r = expect(s, q.observables[k].matrix()) - q.targets[k];
        lambda[k] += mu * r;
        worst = std::max(worst, std::abs(r));
      }
      if (worst <= q.tolerance) break;
      if (worst > 0.25 * last) mu = std::min(mu * 10.0, 1e10);
      last = worst;
    }
  } else {
    const auto res = detail::bfgs(distance, x, 500, 1e-11);
    iterations = res.iterations;
    x = res.x;
    if (!res.converged) {
      // polish from where BFGS stalled
      const auto nm = detail::nelder_mead(distance, x, 1e-3, 2000, 1e-12);
      iterations += nm.iterations;
      if (nm.value <= distance(x)) x = nm.x;
    }
  }
  auto sigma = try_state(state_of(x));
  if (!sigma) fail(ErrorCode::NumericalBreakdown, "projection left the state space");
  if (!std::isfinite(objective(d, slot, *sigma, omega)))
    fail(ErrorCode::Infeasible, "the distance is infinite on the whole constraint set");
  ProjectionReport rep = make_report(d, slot, q, omega, *sigma, iterations, "bfgs");
  if (q.kind == ConstraintKind::expectation_equalities && rep.constraint_residual > 1e-7)
    fail(ErrorCode::NonConvergence, "augmented Lagrangian did not reach the constraint set");
  return rep;
}

ProjectionReport hs_expectation_projection(const DistanceFunctional& d, const ConstraintSet& q,
                                           const DensityMatrix& omega, bool& ok) {
  const Index dim = omega.dim();
  std::vector<Matrix> basis{Matrix::Identity(dim, dim)};
  for (const auto& f : q.observables) basis.push_back(f.matrix());
  const Index m = static_cast<Index>(basis.size());
  RealMatrix gram(m, m);
  RealVector rhs(m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) gram(a, b) = hs_inner(basis[a], basis[b]);
    const double target = a == 0 ? 1.0 : q.targets[static_cast<std::size_t>(a - 1)];
    rhs(a) = target - expect(omega.matrix(), basis[a]);
  }
  const RealVector alpha = gram.completeOrthogonalDecomposition().solve(rhs);
  Matrix sigma = omega.matrix();
  for (Index a = 0; a < m; ++a) sigma += alpha(a) * basis[a];
  ok = min_eig(sigma) >= -kPositivityTol;
  if (!ok) return make_report(d, Slot::first, q, omega, omega, 0, "");
  return make_report(d, Slot::first, q, omega, DensityMatrix::validate(hermitian_part(sigma)), 1, "affine_projection");
}

}  // namespace

ProjectionReport entropic_projection_report(const DistanceFunctional& d, const ConstraintSet& q,
                                            const DensityMatrix& omega, ProjectionOrder order) {
  if (q.dim() != 0 && q.dim() != omega.dim())
    fail(ErrorCode::DimensionMismatch, "state and constraint dimensions differ");
  Slot slot = resolve(order, q.kind);
  const bool unconstrained = q.kind == ConstraintKind::expectation_equalities && q.observables.empty();
  if (unconstrained || q.contains(omega)) return make_report(d, slot, q, omega, omega, 0, "already_feasible");

  // D_{f_0}(σ, ω) = D₁(ω, σ): reuse the Umegaki closed forms with the slots exchanged.
  DistanceFunctional eff = d;
  if (is_quasi(d, 0.0)) {
    eff = umegaki_distance();
    slot = slot == Slot::first ? Slot::second : Slot::first;
  }
  auto finish = [&](ProjectionReport r) {
    r.objective = objective(d, resolve(order, q.kind), r.state, omega);
    return r;
  };

  if (eff.is_umegaki()) {
    switch (q.kind) {
      case ConstraintKind::expectation_equalities:
        if (slot == Slot::first) return finish(tilt_projection(eff, q, omega));
        break;
      case ConstraintKind::commutant_blocks:
        if (slot == Slot::second)
          return finish(make_report(eff, slot, q, omega, DensityMatrix::validate(pinch(q.blocks, omega.matrix())), 0,
                                    "luders"));
        if (omega.faithful()) {
          Matrix s = exp_hermitian(pinch(q.blocks, log_pd(omega.matrix())), 1.0);
          s /= s.trace().real();
          return finish(make_report(eff, slot, q, omega, DensityMatrix::validate(hermitian_part(s)), 0,
                                    "pinched_logarithm"));
        }
        break;
      case ConstraintKind::product_marginal:
        if (slot == Slot::second)
          return finish(make_report(eff, slot, q, omega,
                                    DensityMatrix::validate(marginal_product(omega, q.dim_a, q.dim_b)), 0,
                                    "marginal_product"));
        break;
    }
  } else if (is_half(eff)) {
    switch (q.kind) {
      case ConstraintKind::commutant_blocks: {
        const Matrix y = pinch(q.blocks, sqrt_psd(omega.matrix()));
        Matrix s = y * y;
        s /= s.trace().real();
        return finish(make_report(eff, slot, q, omega, DensityMatrix::validate(hermitian_part(s)), 0,
                                  "pinched_square_root"));
      }
      case ConstraintKind::expectation_equalities:
        if (auto r = half_expectation_projection(eff, slot, q, omega)) return finish(*r);
        break;
      case ConstraintKind::product_marginal:
        break;
    }
  } else if (eff.kind == DistanceKind::hilbert_schmidt) {
    if (q.kind == ConstraintKind::commutant_blocks)
      return finish(
          make_report(eff, slot, q, omega, DensityMatrix::validate(pinch(q.blocks, omega.matrix())), 0, "pinching"));
    if (q.kind == ConstraintKind::expectation_equalities) {
      bool ok = false;
      ProjectionReport r = hs_expectation_projection(eff, q, omega, ok);
      if (ok) return finish(r);
    }
  }
  return finish(generic_projection(eff, slot, q, omega));
}

DensityMatrix entropic_projection(const DistanceFunctional& d, const ConstraintSet& q, const DensityMatrix& omega,
                                  ProjectionOrder order) {
  return entropic_projection_report(d, q, omega, order).state;
}

double pythagorean_residual(const DistanceFunctional& d, const ConstraintSet& q, const DensityMatrix& omega,
                            const DensityMatrix& x) {
  if (q.kind == ConstraintKind::product_marginal)
    fail(ErrorCode::InvalidArgument, "the Pythagorean identity needs an affine constraint set");
  if (!q.contains(x)) fail(ErrorCode::InvalidArgument, "comparison point is not in the constraint set");
  const DensityMatrix p = entropic_projection(d, q, omega, ProjectionOrder::constrained_first);
  return std::abs(d(x, omega) - d(x, p) - d(p, omega));
}

AffineProjection bregman_affine_projection(const DuallyFlatChart& chart, const RealMatrix& a, const RealVector& c,
                                           const RealVector& theta_omega, const RealVector& x) {
  const Index n = chart.dim();
  if (a.cols() != n || a.rows() != c.size() || theta_omega.size() != n || x.size() != n)
    fail(ErrorCode::DimensionMismatch, "affine constraint shapes");
  if ((a * x - c).norm() > 1e-9) fail(ErrorCode::InvalidArgument, "comparison point is not in the affine set");
  const Index m = a.rows();
  const RealVector eta_w = chart.eta(theta_omega);
  RealVector theta = theta_omega + a.completeOrthogonalDecomposition().solve(c - a * theta_omega);
  RealVector lambda = RealVector::Zero(m);
  auto kkt = [&](const RealVector& th, const RealVector& la) {
    RealVector r(n + m);
    r.head(n) = chart.eta(th) - eta_w + a.transpose() * la;
    r.tail(m) = a * th - c;
    return r;
  };
  RealVector r = kkt(theta, lambda);
  for (int it = 0; it < 100 && r.norm() > 1e-13; ++it) {
    RealMatrix jac = RealMatrix::Zero(n + m, n + m);
    jac.topLeftCorner(n, n) = chart.hessian(theta);
    jac.topRightCorner(n, m) = a.transpose();
    jac.bottomLeftCorner(m, n) = a;
    const RealVector step = -jac.fullPivLu().solve(r);
    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, s *= 0.5) {
      const RealVector rt = kkt(theta + s * step.head(n), lambda + s * step.tail(m));
      if (rt.norm() < r.norm()) {
        theta += s * step.head(n);
        lambda += s * step.tail(m);
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (r.norm() > 1e-8) fail(ErrorCode::NonConvergence, "KKT Newton for the affine Bregman projection");
  const double residual =
      std::abs(chart.bregman(x, theta_omega) - chart.bregman(x, theta) - chart.bregman(theta, theta_omega));
  return {theta, residual};
}

DensityMatrix causal_inference_step(const HamiltonianFunction& h, double t, const DistanceFunctional& d,
                                    const ConstraintSet& q, const DensityMatrix& phi, double dt) {
  return entropic_projection(d, q, evolve(h, phi, t, dt));
}

// ---------------------------------------------------------------------------
// Effective local dynamics in square-root coordinates

namespace {

double hs_real(const Matrix& a, const Matrix& b) { return (a * b).trace().real(); }

Matrix unit(const Matrix& x) { return x / x.norm(); }

// Tangential D_{1/2} drift toward the projection, on the unit sphere of √ρ.
Matrix drift_field(const ConstraintSet& q, double rate, const Matrix& x) {
  const Matrix rho = hermitian_part(x * x / (x * x).trace().real());
  const DensityMatrix p = entropic_projection(f_gamma_distance(0.5), q, DensityMatrix::validate(rho));
  const Matrix v = rate * (sqrt_psd(p.matrix()) - x);
  return v - hs_real(x, v) * x;
}

Matrix square_root_state(const DensityMatrix& rho) { return sqrt_psd(rho.matrix()); }

DensityMatrix from_square_root(const Matrix& x) {
  Matrix rho = x * x;
  rho /= rho.trace().real();
  return settle(rho);
}

}  // namespace

DensityMatrix effective_local_step(const HamiltonianFunction& h, const DensityMatrix& rho, double dt,
                                   const std::optional<ConstraintSet>& constraint, double rate) {
  require_step(dt);
  if (!constraint) return evolve(h, rho, dt, dt);
  if (!(rate >= 0.0)) fail(ErrorCode::InvalidArgument, "drift rate must be nonnegative");
  int halvings = 0;
  const Matrix half = guarded_step(h, rho.matrix(), 0.5 * dt, halvings);
  Matrix x = square_root_state(settle(half));
  // projected midpoint rule for the drift
  const Matrix mid = unit(x + (0.5 * dt) * drift_field(*constraint, rate, x));
  x = unit(x + dt * drift_field(*constraint, rate, mid));
  const Matrix after = guarded_step(h, from_square_root(x).matrix(), 0.5 * dt, halvings);
  return settle(after);
}

DensityMatrix effective_local_reference(const HamiltonianFunction& h, const DensityMatrix& rho, double t_final,
                                        double dt, const ConstraintSet& constraint, double rate) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
  auto field = [&](const Matrix& x) -> Matrix {
    const Matrix r = x * x;
    return cplx(0, -1) * commutator(h.gradient(r), x) + drift_field(constraint, rate, x);
  };
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
  const double step = t_final / static_cast<double>(steps);
  Matrix x = square_root_state(rho);
  for (long n = 0; n < steps; ++n) {
    const Matrix k1 = field(x);
    const Matrix k2 = field(x + 0.5 * step * k1);
    const Matrix k3 = field(x + 0.5 * step * k2);
    const Matrix k4 = field(x + step * k3);
    x = unit(hermitian_part(x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
  }
  return from_square_root(x);
}

}  // namespace qig
