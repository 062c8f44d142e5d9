#include "qig/info_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qig {

namespace {

using SlotOp = std::pair<int, Index>;  // (0 = first argument u, 1 = second argument v), coordinate
using PairFunction = std::function<double(const RealVector&, const RealVector&)>;

// Nested central differences; repeated coordinates give wider stencils automatically.
double nested_difference(const PairFunction& f, RealVector& u, RealVector& v, const std::vector<SlotOp>& ops,
                         std::size_t pos, double h) {
  if (pos == ops.size()) return f(u, v);
  auto [slot, idx] = ops[pos];
  RealVector& x = slot == 0 ? u : v;
  const double saved = x(idx);
  x(idx) = saved + h;
  const double plus = nested_difference(f, u, v, ops, pos + 1, h);
  x(idx) = saved - h;
  const double minus = nested_difference(f, u, v, ops, pos + 1, h);
  x(idx) = saved;
  return (plus - minus) / (2.0 * h);
}

double richardson_derivative(const PairFunction& f, Index n, const std::vector<SlotOp>& ops, double h) {
  RealVector u = RealVector::Zero(n), v = RealVector::Zero(n);
  const double coarse = nested_difference(f, u, v, ops, 0, h);
  const double fine = nested_difference(f, u, v, ops, 0, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

PairFunction pair_function(const DistanceFunctional& d, const StateChart& chart, const RealVector& theta) {
  return [&d, &chart, theta](const RealVector& u, const RealVector& v) {
    const double value = d(chart(theta + u), chart(theta + v));
    if (!std::isfinite(value)) fail(ErrorCode::NumericalBreakdown, d.label + " is not finite near the diagonal");
    return value;
  };
}

void require_smooth(const DistanceFunctional& d) {
  if (!d.smooth) fail(ErrorCode::NonSmoothDistance, d.label + " is not smooth on the diagonal");
}

void require_positive_definite(const RealMatrix& g, const std::string& what) {
  if (!g.allFinite()) fail(ErrorCode::NumericalBreakdown, what + " has non-finite entries");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) fail(ErrorCode::NumericalBreakdown, what + " is not positive definite");
}

}  // namespace

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double Tensor3::torsion() const {
  double m = 0.0;
  for (Index i = 0; i < n_; ++i)
    for (Index j = 0; j < n_; ++j)
      for (Index k = 0; k < n_; ++k) m = std::max(m, std::abs((*this)(i, j, k) - (*this)(j, i, k)));
  return m;
}

StateChart bloch_chart(const DensityMatrix& base) {
  if (base.dim() != 2) fail(ErrorCode::DimensionMismatch, "bloch_chart needs a qubit state");
  const Matrix rho0 = base.matrix();
  StateChart chart;
  chart.param_dim = 3;
  chart.label = "bloch";
  chart.map = [rho0](const RealVector& t) {
    if (t.size() != 3) fail(ErrorCode::DimensionMismatch, "bloch chart takes three coordinates");
    return DensityMatrix::validate(rho0 + 0.5 * (t(0) * pauli::x() + t(1) * pauli::y() + t(2) * pauli::z()));
  };
  return chart;
}

StateChart simplex_chart(Index outcomes) {
  if (outcomes < 2) fail(ErrorCode::InvalidArgument, "simplex_chart needs at least two outcomes");
  StateChart chart;
  chart.param_dim = outcomes - 1;
  chart.label = "simplex";
  chart.map = [outcomes](const RealVector& t) {
    if (t.size() != outcomes - 1) fail(ErrorCode::DimensionMismatch, "simplex chart coordinate count");
    Matrix m = Matrix::Zero(outcomes, outcomes);
    for (Index i = 0; i < outcomes - 1; ++i) m(i, i) = t(i);
    m(outcomes - 1, outcomes - 1) = 1.0 - t.sum();
    return DensityMatrix::validate(m);
  };
  return chart;
}

MetricTensor eguchi_metric(const DistanceFunctional& d, const StateChart& chart, const RealVector& theta,
                           double step) {
  require_smooth(d);
  const Index n = chart.param_dim;
  const PairFunction f = pair_function(d, chart, theta);
  RealMatrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = -richardson_derivative(f, n, {{0, i}, {1, j}}, step);
  require_positive_definite(g, "Eguchi metric");
  return MetricTensor{g};
}

EguchiTriple eguchi_tensors(const DistanceFunctional& d, const StateChart& chart, const RealVector& theta,
                            FiniteDifferenceSteps steps) {
  EguchiTriple out;
  out.metric = eguchi_metric(d, chart, theta, steps.metric);
  const Index n = chart.param_dim;
  const PairFunction f = pair_function(d, chart, theta);
  Tensor3 gamma(n), dual(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      for (Index k = 0; k < n; ++k) {
        const double a = -richardson_derivative(f, n, {{0, i}, {0, j}, {1, k}}, steps.connection);
        const double b = -richardson_derivative(f, n, {{1, i}, {1, j}, {0, k}}, steps.connection);
        gamma(i, j, k) = gamma(j, i, k) = a;
        dual(i, j, k) = dual(j, i, k) = b;
      }
  if (gamma.max_abs() != gamma.max_abs() || dual.max_abs() != dual.max_abs())
    fail(ErrorCode::NumericalBreakdown, "Eguchi connection has NaN entries");
  out.gamma.coeffs = std::move(gamma);
  out.gamma_dual.coeffs = std::move(dual);
  return out;
}

MetricField eguchi_metric_field(DistanceFunctional d, StateChart chart, double step) {
  return [d = std::move(d), chart = std::move(chart), step](const RealVector& t) {
    return eguchi_metric(d, chart, t, step);
  };
}

OperatorMonotoneFunction OperatorMonotoneFunction::bkm() {
  return {[](double x) {
            if (std::abs(x - 1.0) < 1e-8) return 1.0 + 0.5 * (x - 1.0);
            return (x - 1.0) / std::log(x);
          },
          "bkm"};
}

OperatorMonotoneFunction OperatorMonotoneFunction::wigner_yanase() {
  return {[](double x) {
            const double s = 1.0 + std::sqrt(x);
            return 0.25 * s * s;
          },
          "wigner_yanase"};
}

OperatorMonotoneFunction OperatorMonotoneFunction::bures() {
  return {[](double x) { return 0.5 * (1.0 + x); }, "bures"};
}

OperatorMonotoneFunction OperatorMonotoneFunction::from_f_gamma(double gamma) {
  if (gamma == 0.0 || gamma == 1.0) return bkm();
  std::ostringstream os;
  os << "h[f_gamma(" << gamma << ")]";
  // f + λ f(1/λ) factors as (λ^γ - 1)(λ^{1-γ} - 1) / (γ(1-γ)) for this family.
  return {[gamma](double x) {
            const double l = std::log(x);
            if (std::abs(l) < 1e-8) return 1.0 + 0.5 * (x - 1.0);
            const double xm1 = std::expm1(l);
            return gamma * (1.0 - gamma) * xm1 * xm1 / (std::expm1(gamma * l) * std::expm1((1.0 - gamma) * l));
          },
          os.str()};
}

OperatorMonotoneFunction OperatorMonotoneFunction::from_f(const OperatorConvexFunction& f) {
  constexpr double kProbe = 1e-3;
  const double f2 = (f.eval(1.0 + kProbe) - 2.0 * f.eval(1.0) + f.eval(1.0 - kProbe)) / (kProbe * kProbe);
  if (!(f2 > 0.0)) fail(ErrorCode::DomainError, f.label + ": f''(1) must be positive");
  const double h1 = 1.0 / f2;
  auto eval = f.eval;
  return {[eval, h1](double x) {
            if (std::abs(x - 1.0) < 1e-4) return h1 * (1.0 + 0.5 * (x - 1.0));
            return (x - 1.0) * (x - 1.0) / (eval(x) + x * eval(1.0 / x));
          },
          "h[" + f.label + "]"};
}

double monotone_metric_eval(const OperatorMonotoneFunction& h, const DensityMatrix& rho, const Matrix& u,
                            const Matrix& v) {
  if (!rho.faithful()) fail(ErrorCode::NotFaithful, "monotone metric needs a faithful state");
  if (u.rows() != rho.dim() || v.rows() != rho.dim())
    fail(ErrorCode::DimensionMismatch, "tangent and state dimensions differ");
  const Spectrum& s = rho.spectrum();
  const Matrix ut = s.eigenvectors.adjoint() * u * s.eigenvectors;
  const Matrix vt = s.eigenvectors.adjoint() * v * s.eigenvectors;
  double total = 0.0;
  for (Index i = 0; i < ut.rows(); ++i)
    for (Index j = 0; j < ut.cols(); ++j) {
      const double li = s.eigenvalues(i), lj = s.eigenvalues(j);
      const double ratio = i == j ? 1.0 : li / lj;
      total += (std::conj(ut(i, j)) * vt(i, j)).real() / (lj * h.eval(ratio));
    }
  return total;
}

double monotone_metric_eval(const OperatorMonotoneFunction& h, const DensityMatrix& rho, const TangentDirection& u,
                            const TangentDirection& v) {
  return monotone_metric_eval(h, rho, u.matrix(), v.matrix());
}

MetricTensor monotone_metric_tensor(const OperatorMonotoneFunction& h, const StateChart& chart,
                                    const RealVector& theta) {
  constexpr double kStep = 1e-5;
  const Index n = chart.param_dim;
  const DensityMatrix rho = chart(theta);
  std::vector<Matrix> basis;
  for (Index i = 0; i < n; ++i) {
    RealVector e = RealVector::Zero(n);
    e(i) = kStep;
    basis.push_back((chart(theta + e).matrix() - chart(theta - e).matrix()) / (2.0 * kStep));
  }
  RealMatrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) g(i, j) = g(j, i) = monotone_metric_eval(h, rho, basis[i], basis[j]);
  return MetricTensor{g};
}

double norden_sen_residual(const MetricField& g, const ChristoffelField& gamma, const ChristoffelField& gamma_dual,
                           const RealVector& theta, const RealVector& u, const RealVector& v, const RealVector& w,
                           double step) {
  const Index n = theta.size();
  auto central = [&](double h) { return RealMatrix((g(theta + h * u).matrix - g(theta - h * u).matrix) / (2.0 * h)); };
  const RealMatrix dg = (4.0 * central(0.5 * step) - central(step)) / 3.0;
  if (!dg.allFinite()) fail(ErrorCode::NumericalBreakdown, "metric derivative is not finite");
  const double lhs_derivative = v.dot(dg * w);
  double nabla = 0.0, nabla_dual = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) {
        nabla += u(i) * v(j) * w(k) * gamma.coeffs(i, j, k);
        nabla_dual += u(i) * w(j) * v(k) * gamma_dual.coeffs(i, j, k);
      }
  return std::abs(nabla + nabla_dual - lhs_derivative);
}

DuallyFlatChart::DuallyFlatChart(Index dim, Potential psi, std::optional<StateChart> states,
                                 std::vector<Matrix> observables, std::string label)
    : dim_(dim),
      psi_(std::move(psi)),
      states_(std::move(states)),
      observables_(std::move(observables)),
      label_(std::move(label)) {}

DuallyFlatChart DuallyFlatChart::quadratic(const RealMatrix& k, const RealVector& b) {
  if (k.rows() != k.cols() || k.rows() != b.size()) fail(ErrorCode::DimensionMismatch, "quadratic potential shape");
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10) fail(ErrorCode::InvalidArgument, "K must be symmetric");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(k, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) fail(ErrorCode::InvalidArgument, "K must be positive definite");
  Potential p;
  p.value = [k, b](const RealVector& t) { return 0.5 * t.dot(k * t) + b.dot(t); };
  p.gradient = [k, b](const RealVector& t) -> RealVector { return k * t + b; };
  p.hessian = [k](const RealVector&) -> RealMatrix { return k; };
  return DuallyFlatChart(k.rows(), std::move(p), std::nullopt, {}, "quadratic");
}

RealVector DuallyFlatChart::theta_of(const RealVector& eta, const std::optional<RealVector>& start) const {
  if (eta.size() != dim_) fail(ErrorCode::DimensionMismatch, "dual coordinate size");
  RealVector theta = start.value_or(RealVector::Zero(dim_));
  auto objective = [&](const RealVector& t) { return psi_.value(t) - t.dot(eta); };
  double value = objective(theta);
  double grad_norm = kInfinity;
  for (int iter = 0; iter < 200; ++iter) {
    const RealVector grad = psi_.gradient(theta) - eta;
    grad_norm = grad.norm();
    if (grad_norm <= 1e-13 * std::max(1.0, eta.norm())) return theta;
    Eigen::LDLT<RealMatrix> ldlt(psi_.hessian(theta));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorCode::NewtonDivergence, "Hessian of the potential is not positive definite");
    const RealVector dir = -ldlt.solve(grad);
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const RealVector trial = theta + step * dir;
      const double tv = objective(trial);
      if (!std::isfinite(tv)) {
        step *= 0.5;
        continue;
      }
      // near the optimum the objective stalls at roundoff; the gradient norm still decides
      const bool armijo = tv <= value + 1e-4 * step * grad.dot(dir);
      if (armijo || (psi_.gradient(trial) - eta).norm() < grad_norm) {
        theta = trial;
        value = tv;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if ((psi_.gradient(theta) - eta).norm() <= 1e-9 * std::max(1.0, eta.norm())) return theta;
  std::ostringstream os;
  os << "Legendre inversion did not converge (gradient " << grad_norm << ")";
  fail(ErrorCode::NewtonDivergence, os.str());
}

double DuallyFlatChart::psi_dual(const RealVector& eta) const {
  const RealVector theta = theta_of(eta);
  return theta.dot(eta) - psi_.value(theta);
}

double DuallyFlatChart::entropy(const RealVector& theta) const { return psi_.value(theta) - theta.dot(eta(theta)); }

double DuallyFlatChart::bregman(const RealVector& theta_prime, const RealVector& theta) const {
  return psi_.value(theta_prime) - psi_.value(theta) - (theta_prime - theta).dot(eta(theta));
}

const StateChart& DuallyFlatChart::states() const {
  if (!states_) fail(ErrorCode::InvalidArgument, label_ + " has no state map");
  return *states_;
}

MetricField DuallyFlatChart::metric_field() const {
  auto h = psi_.hessian;
  return [h](const RealVector& t) { return MetricTensor{h(t)}; };
}

namespace {

struct FamilyPoint {
  Spectrum spectrum;
  double shift;       // largest eigenvalue of Σθ F
  double partition;   // Σ exp(λ - shift)
};

FamilyPoint family_point(const std::vector<Matrix>& obs, const RealVector& theta) {
  if (theta.size() != static_cast<Index>(obs.size())) fail(ErrorCode::DimensionMismatch, "natural parameter count");
  Matrix h = Matrix::Zero(obs.front().rows(), obs.front().cols());
  for (std::size_t k = 0; k < obs.size(); ++k) h += theta(static_cast<Index>(k)) * obs[k];
  FamilyPoint p{Spectrum::of(h), 0.0, 0.0};
  p.shift = p.spectrum.eigenvalues.maxCoeff();
  p.partition = (p.spectrum.eigenvalues.array() - p.shift).exp().sum();
  return p;
}

}  // namespace

DuallyFlatChart build_exponential_family(const std::vector<Matrix>& observables, FamilyKind kind) {
  if (observables.empty()) fail(ErrorCode::InvalidArgument, "exponential family needs observables");
  const Index d = observables.front().rows();
  for (const Matrix& f : observables) {
    if (f.rows() != d || f.cols() != d) fail(ErrorCode::DimensionMismatch, "observables must share one dimension");
    if (hermitian_residual(f) > kHermitianTol) fail(ErrorCode::NotHermitian, "observable is not Hermitian");
    if (kind == FamilyKind::classical) {
      Matrix off = f;
      off.diagonal().setZero();
      if (off.cwiseAbs().maxCoeff() > kHermitianTol)
        fail(ErrorCode::InvalidArgument, "classical family needs diagonal observables");
    }
  }
  // independence from each other and from the constant
  std::vector<Matrix> all{Matrix::Identity(d, d)};
  for (const Matrix& f : observables) all.push_back(hermitian_part(f));
  const Index m = static_cast<Index>(all.size());
  RealMatrix gram(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) {
      const double na = all[a].norm(), nb = all[b].norm();
      gram(a, b) = (na == 0.0 || nb == 0.0) ? 0.0 : hs_inner(all[a], all[b]) / (na * nb);
    }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(gram, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 1e-10)
    fail(ErrorCode::DependentObservables, "observables are linearly dependent (including the constant)");

  std::vector<Matrix> obs(all.begin() + 1, all.end());
  const Index n = static_cast<Index>(obs.size());
  DuallyFlatChart::Potential p;
  p.value = [obs](const RealVector& t) {
    const FamilyPoint fp = family_point(obs, t);
    return fp.shift + std::log(fp.partition);
  };
  p.gradient = [obs, n](const RealVector& t) {
    const FamilyPoint fp = family_point(obs, t);
    const RealVector w = (fp.spectrum.eigenvalues.array() - fp.shift).exp() / fp.partition;
    RealVector eta(n);
    for (Index k = 0; k < n; ++k) {
      const Matrix ft = fp.spectrum.eigenvectors.adjoint() * obs[k] * fp.spectrum.eigenvectors;
      eta(k) = (ft.diagonal().real().array() * w.array()).sum();
    }
    return eta;
  };
  p.hessian = [obs, n](const RealVector& t) {
    const FamilyPoint fp = family_point(obs, t);
    const RealVector& lam = fp.spectrum.eigenvalues;
    const Index dd = lam.size();
    // divided differences of exp, scaled by exp(-shift)/Z
    RealMatrix dd_exp(dd, dd);
    for (Index a = 0; a < dd; ++a)
      for (Index b = 0; b < dd; ++b) {
        const double la = lam(a) - fp.shift, lb = lam(b) - fp.shift;
        const double diff = la - lb;
        dd_exp(a, b) = std::abs(diff) < 1e-12 ? std::exp(0.5 * (la + lb)) : std::exp(lb) * std::expm1(diff) / diff;
      }
    dd_exp /= fp.partition;
    std::vector<Matrix> ft;
    RealVector eta(n);
    for (Index k = 0; k < n; ++k) {
      ft.push_back(fp.spectrum.eigenvectors.adjoint() * obs[k] * fp.spectrum.eigenvectors);
      eta(k) = (ft.back().diagonal().real().array() * dd_exp.diagonal().array()).sum();
    }
    RealMatrix hess(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i; j < n; ++j) {
        double s = 0.0;
        for (Index a = 0; a < dd; ++a)
          for (Index b = 0; b < dd; ++b) s += (ft[i](a, b) * ft[j](b, a)).real() * dd_exp(a, b);
        hess(i, j) = hess(j, i) = s - eta(i) * eta(j);
      }
    return hess;
  };
  StateChart chart;
  chart.param_dim = n;
  chart.label = kind == FamilyKind::classical ? "classical_exponential_family" : "quantum_exponential_family";
  chart.map = [obs](const RealVector& t) {
    const FamilyPoint fp = family_point(obs, t);
    const Matrix rho = fp.spectrum.map([&](double l) { return std::exp(l - fp.shift) / fp.partition; });
    return DensityMatrix::validate(hermitian_part(rho));
  };
  std::string label = chart.label;
  return DuallyFlatChart(n, std::move(p), std::move(chart), std::move(obs), std::move(label));
}

Tensor3 raise_index(const ChristoffelField& lower, const MetricTensor& g) {
  const Index n = g.dim();
  if (lower.coeffs.dim() != n) fail(ErrorCode::DimensionMismatch, "connection and metric sizes differ");
  const RealMatrix ginv = g.matrix.inverse();
  Tensor3 out(n);
  for (Index a = 0; a < n; ++a)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        double s = 0.0;
        for (Index k = 0; k < n; ++k) s += ginv(a, k) * lower.coeffs(i, j, k);
        out(a, i, j) = s;
      }
  return out;
}

std::vector<GeodesicPoint> geodesic_shoot(const ConnectionField& gamma, const RealVector& theta0,
                                          const RealVector& v0, double t_final, double dt,
                                          const std::function<bool(const RealVector&)>& domain, double max_norm) {
  if (!(dt > 0.0) || dt > 1e-2 + 1e-15) fail(ErrorCode::InvalidArgument, "geodesic step must lie in (0, 1e-2]");
  if (theta0.size() != v0.size()) fail(ErrorCode::DimensionMismatch, "position and velocity sizes differ");
  const Index n = theta0.size();
  auto accel = [&](const RealVector& x, const RealVector& v) {
    if (!x.allFinite() || x.norm() > max_norm || (domain && !domain(x)))
      fail(ErrorCode::BlowUp, "geodesic left the chart domain");
    const Tensor3 g = gamma(x);
    RealVector a = RealVector::Zero(n);
    for (Index i = 0; i < n; ++i)
      for (Index b = 0; b < n; ++b)
        for (Index c = 0; c < n; ++c) a(i) -= g(i, b, c) * v(b) * v(c);
    return a;
  };
  const int steps = std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-9)));
  const double h = t_final / steps;
  std::vector<GeodesicPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  RealVector x = theta0, v = v0;
  out.push_back({0.0, x, v});
  for (int s = 0; s < steps; ++s) {
    const RealVector k1x = v, k1v = accel(x, v);
    const RealVector k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, k2x);
    const RealVector k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, k3x);
    const RealVector k4x = v + h * k3v, k4v = accel(x + h * k3x, k4x);
    x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!x.allFinite() || x.norm() > max_norm || (domain && !domain(x)))
      fail(ErrorCode::BlowUp, "geodesic left the chart domain");
    out.push_back({(s + 1) * h, x, v});
  }
  return out;
}

namespace {

// ∂_c g at θ for every c, Richardson-extrapolated.
std::vector<RealMatrix> metric_derivatives(const MetricField& g, const RealVector& theta, double step) {
  const Index n = theta.size();
  std::vector<RealMatrix> dg;
  for (Index c = 0; c < n; ++c) {
    auto central = [&](double h) {
      RealVector e = RealVector::Zero(n);
      e(c) = h;
      return RealMatrix((g(theta + e).matrix - g(theta - e).matrix) / (2.0 * h));
    };
    dg.push_back((4.0 * central(0.5 * step) - central(step)) / 3.0);
  }
  return dg;
}

}  // namespace

Tensor3 levi_civita(const MetricField& g, const RealVector& theta, double step) {
  const Index n = theta.size();
  const RealMatrix g0 = g(theta).matrix;
  require_positive_definite(g0, "metric");
  const RealMatrix ginv = g0.inverse();
  const std::vector<RealMatrix> dg = metric_derivatives(g, theta, step);
  Tensor3 out(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index c = 0; c < n; ++c) {
        double s = 0.0;
        for (Index d = 0; d < n; ++d) s += ginv(a, d) * (dg[b](d, c) + dg[c](d, b) - dg[d](b, c));
        out(a, b, c) = 0.5 * s;
      }
  return out;
}

ConnectionField levi_civita_field(MetricField g, double step) {
  return [g = std::move(g), step](const RealVector& t) { return levi_civita(g, t, step); };
}

double scalar_curvature(const MetricField& g, const RealVector& theta, double step) {
  const Index n = theta.size();
  if (n < 2) fail(ErrorCode::InvalidArgument, "scalar curvature needs at least two dimensions");
  const Tensor3 gam = levi_civita(g, theta, step);
  // dgam[c](a, b, d) = ∂_c Γ^a_bd
  std::vector<Tensor3> dgam;
  for (Index c = 0; c < n; ++c) {
    auto central = [&](double h) {
      RealVector e = RealVector::Zero(n);
      e(c) = h;
      const Tensor3 p = levi_civita(g, theta + e, step), m = levi_civita(g, theta - e, step);
      Tensor3 out(n);
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b)
          for (Index d = 0; d < n; ++d) out(a, b, d) = (p(a, b, d) - m(a, b, d)) / (2.0 * h);
      return out;
    };
    const Tensor3 coarse = central(step), fine = central(0.5 * step);
    Tensor3 r(n);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        for (Index d = 0; d < n; ++d) r(a, b, d) = (4.0 * fine(a, b, d) - coarse(a, b, d)) / 3.0;
    dgam.push_back(std::move(r));
  }
  // Ricci R_bd = R^a_bad with R^a_bcd = ∂_c Γ^a_db - ∂_d Γ^a_cb + Γ^a_ce Γ^e_db - Γ^a_de Γ^e_cb
  RealMatrix ricci = RealMatrix::Zero(n, n);
  for (Index b = 0; b < n; ++b)
    for (Index d = 0; d < n; ++d) {
      double s = 0.0;
      for (Index a = 0; a < n; ++a) {
        s += dgam[a](a, d, b) - dgam[d](a, a, b);
        for (Index e = 0; e < n; ++e) s += gam(a, a, e) * gam(e, d, b) - gam(a, d, e) * gam(e, a, b);
      }
      ricci(b, d) = s;
    }
  const RealMatrix ginv = g(theta).matrix.inverse();
  const double kappa = (ginv.array() * ricci.array()).sum();
  if (!std::isfinite(kappa)) fail(ErrorCode::NumericalBreakdown, "scalar curvature is not finite");
  return kappa;
}

double geodesic_distance(const MetricField& g, const RealVector& a, const RealVector& b, int steps,
                         const std::function<bool(const RealVector&)>& domain) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "endpoint sizes differ");
  const Index n = a.size();
  if ((a - b).norm() == 0.0) return 0.0;
  const ConnectionField gamma = levi_civita_field(g);
  const double dt = 1.0 / std::max(steps, 100);
  auto endpoint = [&](const RealVector& v) { return geodesic_shoot(gamma, a, v, 1.0, dt, domain).back().theta; };
  RealVector v = b - a;
  bool converged = false;
  for (int iter = 0; iter < 50 && !converged; ++iter) {
    const RealVector r = endpoint(v) - b;
    if (r.norm() < 1e-11) {
      converged = true;
      break;
    }
    RealMatrix jac(n, n);
    const double h = 1e-6 * std::max(1.0, v.norm());
    for (Index j = 0; j < n; ++j) {
      RealVector e = RealVector::Zero(n);
      e(j) = h;
      jac.col(j) = (endpoint(v + e) - endpoint(v - e)) / (2.0 * h);
    }
    const RealVector dv = jac.fullPivLu().solve(-r);
    double scale = 1.0;
    bool improved = false;
    for (int k = 0; k < 30 && !improved; ++k, scale *= 0.5) {
      try {
        const RealVector trial = v + scale * dv;
        if ((endpoint(trial) - b).norm() < r.norm()) {
          v = trial;
          improved = true;
        }
      } catch (const Error&) {
      }
    }
    if (!improved) fail(ErrorCode::NonConvergence, "geodesic shooting stalled");
  }
  if (!converged && (endpoint(v) - b).norm() > 1e-9) fail(ErrorCode::NonConvergence, "geodesic shooting did not converge");
  return std::sqrt(v.dot(g(a).matrix * v));
}

MetricField fisher_simplex_metric(Index outcomes) {
  return [outcomes](const RealVector& t) {
    const Index n = outcomes - 1;
    if (t.size() != n) fail(ErrorCode::DimensionMismatch, "simplex chart coordinate count");
    const double last = 1.0 - t.sum();
    if (last <= 0.0 || t.minCoeff() <= 0.0) fail(ErrorCode::DomainError, "point outside the open simplex");
    RealMatrix g = RealMatrix::Constant(n, n, 1.0 / last);
    for (Index i = 0; i < n; ++i) g(i, i) += 1.0 / t(i);
    return MetricTensor{g};
  };
}

}  // namespace qig
