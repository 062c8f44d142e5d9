#include "qig/renorm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "optimize.hpp"
#include "parallel.hpp"

namespace qig {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RealMatrix pick(const RealMatrix& k, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  RealMatrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = k(rows[i], cols[j]);
  return out;
}

RealVector pick(const RealVector& v, const std::vector<Index>& idx) {
  RealVector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

void scatter(RealVector& v, const std::vector<Index>& idx, const RealVector& values) {
  for (std::size_t i = 0; i < idx.size(); ++i) v(idx[i]) = values(static_cast<Index>(i));
}

bool invertible(const RealMatrix& m) {
  if (m.rows() == 0) return true;
  Eigen::FullPivLU<RealMatrix> lu(m);
  return lu.rank() == m.rows() && lu.rcond() > 1e-13;
}

// x such that x m = rhs, i.e. rhs m⁻¹
RealMatrix right_solve(const RealMatrix& rhs, const RealMatrix& m) {
  if (m.rows() == 0) return RealMatrix::Zero(rhs.rows(), 0);
  return m.transpose().fullPivLu().solve(rhs.transpose()).transpose();
}

RealMatrix left_solve(const RealMatrix& m, const RealMatrix& rhs) {
  if (m.rows() == 0) return RealMatrix::Zero(0, rhs.cols());
  return m.fullPivLu().solve(rhs);
}

void check_partition(const BlockPartition& p, Index n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto* set : {&p.a, &p.b, &p.c})
    for (Index i : *set) {
      if (i < 0 || i >= n) fail(ErrorCode::InvalidArgument, "block index out of range");
      if (seen[static_cast<std::size_t>(i)]++) fail(ErrorCode::InvalidArgument, "blocks overlap");
    }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) fail(ErrorCode::InvalidArgument, "blocks do not cover all indices");
  if (p.a.empty()) fail(ErrorCode::InvalidArgument, "driving block A is empty");
}

double entropy_of(const DensityMatrix& rho) {
  double s = 0.0;
  for (Index i = 0; i < rho.dim(); ++i) {
    const double e = rho.spectrum().eigenvalues(i);
    if (e > 0.0) s -= e * std::log(e);
  }
  return s;
}

double expect(const Matrix& rho, const Matrix& x) { return (rho * x).trace().real(); }

DensityMatrix exp_family_state(const std::vector<Matrix>& f, const RealVector& theta) {
  if (static_cast<Index>(f.size()) != theta.size()) fail(ErrorCode::DimensionMismatch, "θ and observable count differ");
  if (f.empty()) fail(ErrorCode::InvalidArgument, "no observables");
  Matrix h = Matrix::Zero(f[0].rows(), f[0].cols());
  for (std::size_t k = 0; k < f.size(); ++k) h += theta(static_cast<Index>(k)) * f[k];
  h = hermitian_part(h);
  const Spectrum s = Spectrum::of(h);
  const double top = s.eigenvalues.maxCoeff();
  Matrix m = s.map([top](double e) { return std::exp(e - top); });
  m /= m.trace().real();
  return DensityMatrix::validate(hermitian_part(m));
}

}  // namespace

// ---------------------------------------------------------------------------
// Covariance models

BlockModel BlockModel::validate(const RealMatrix& k, BlockPartition blocks) {
  if (k.rows() != k.cols() || k.rows() == 0) fail(ErrorCode::DimensionMismatch, "K must be square and nonempty");
  if (!k.allFinite()) fail(ErrorCode::InvalidArgument, "K has non-finite entries");
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10) fail(ErrorCode::NotHermitian, "K is not symmetric");
  check_partition(blocks, k.rows());
  const RealMatrix sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(sym);
  // semidefinite is allowed: the degenerate R² = 1 models live on the boundary
  if (es.eigenvalues()(0) < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    fail(ErrorCode::NotPositive, "K is not positive semidefinite");
  return {sym, std::move(blocks)};
}

RealMatrix BlockModel::block(const std::vector<Index>& rows, const std::vector<Index>& cols) const {
  return pick(k, rows, cols);
}

RenormalizedBlocks block_renormalize(const BlockModel& model) {
  const auto& p = model.blocks;
  const RealMatrix kcc = model.block(p.c, p.c);
  if (!invertible(kcc)) fail(ErrorCode::SingularControlBlock, "K_CC is singular");
  const RealMatrix kaa = model.block(p.a, p.a);
  if (!invertible(kaa)) fail(ErrorCode::SingularControlBlock, "K_AA is singular");

  auto tilde = [&](const std::vector<Index>& x, const std::vector<Index>& y) -> RealMatrix {
    RealMatrix base = model.block(x, y);
    if (p.c.empty()) return base;
    return base - model.block(x, p.c) * left_solve(kcc, model.block(p.c, y));
  };

  RenormalizedBlocks r;
  r.k_aa = tilde(p.a, p.a);
  r.k_ab = tilde(p.a, p.b);
  r.k_ba = tilde(p.b, p.a);
  r.k_bb = tilde(p.b, p.b);
  const Index na = static_cast<Index>(p.a.size());
  if (p.c.empty()) {
    r.r2_ac = RealMatrix::Zero(na, na);
  } else {
    r.r2_ac = left_solve(kaa, model.block(p.a, p.c) * left_solve(kcc, model.block(p.c, p.a)));
  }
  const RealMatrix one_minus = RealMatrix::Identity(na, na) - r.r2_ac;
  if (invertible(one_minus)) {
    r.factor = one_minus.fullPivLu().solve(RealMatrix::Identity(na, na));
  } else {
    r.factor = RealMatrix::Constant(na, na, kNaN);
    r.factor_finite = false;
  }
  r.identity_residual = (r.k_aa - kaa * one_minus).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, kaa.cwiseAbs().maxCoeff());
  if (r.identity_residual > 1e-10 * scale)
    fail(ErrorCode::NumericalBreakdown, "K̃_AA = K_AA(1 - R²) identity failed");
  return r;
}

RealVector renormalized_source(const RenormalizedBlocks& r, const RealVector& delta_q_a) {
  if (delta_q_a.size() != r.factor.rows()) fail(ErrorCode::DimensionMismatch, "δQ_A has the wrong size");
  if (!delta_q_a.allFinite()) fail(ErrorCode::InvalidArgument, "δQ_A has non-finite entries");
  if (!r.factor_finite) fail(ErrorCode::NumericalBreakdown, "1 - R² is singular");
  return r.factor * delta_q_a;
}

PropagatorSeries propagator_series(const BlockModel& model, int order) {
  if (order < 0) fail(ErrorCode::InvalidArgument, "order must be nonnegative");
  const auto& p = model.blocks;
  const RealMatrix kaa = model.block(p.a, p.a), kcc = model.block(p.c, p.c);
  if (!invertible(kcc)) fail(ErrorCode::SingularControlBlock, "K_CC is singular");
  if (!invertible(kaa)) fail(ErrorCode::SingularControlBlock, "K_AA is singular");
  const Index na = static_cast<Index>(p.a.size()), nb = static_cast<Index>(p.b.size());

  const RealMatrix g_ba = right_solve(model.block(p.b, p.a), kaa);
  RealMatrix lead = g_ba;
  RealMatrix t = RealMatrix::Zero(na, na);
  if (!p.c.empty()) {
    const RealMatrix g_bc = right_solve(model.block(p.b, p.c), kcc);
    const RealMatrix g_ca = right_solve(model.block(p.c, p.a), kaa);
    const RealMatrix g_ac = right_solve(model.block(p.a, p.c), kcc);
    lead = g_ba - g_bc * g_ca;
    t = g_ac * g_ca;
  }

  PropagatorSeries out;
  // T = K_AA R² K_AA⁻¹ shares the spectrum of R²_AC
  out.spectral_radius = na == 0 ? 0.0 : t.eigenvalues().cwiseAbs().maxCoeff();
  out.convergent = out.spectral_radius < 1.0;
  RealMatrix power = RealMatrix::Identity(na, na);
  RealMatrix sum = RealMatrix::Zero(nb, na);
  out.partial_sums.reserve(static_cast<std::size_t>(order) + 1);
  for (int n = 0; n <= order; ++n) {
    sum += lead * power;
    out.partial_sums.push_back(sum);
    power = power * t;
  }
  if (out.convergent) {
    const RenormalizedBlocks r = block_renormalize(model);
    out.limit = right_solve(r.k_ba, r.k_aa);
  } else {
    out.limit = RealMatrix::Constant(nb, na, kNaN);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Favretti response in mixed coordinates

RealVector mixed_coordinate_solve(const DuallyFlatChart& chart, const BlockPartition& blocks,
                                  const RealVector& theta_b, const RealVector& eta_a, const RealVector& eta_c,
                                  const RealVector& start) {
  check_partition(blocks, chart.dim());
  if (start.size() != chart.dim()) fail(ErrorCode::DimensionMismatch, "start has the wrong size");
  std::vector<Index> free = blocks.a;
  free.insert(free.end(), blocks.c.begin(), blocks.c.end());
  RealVector target(static_cast<Index>(free.size()));
  target << eta_a, eta_c;

  RealVector theta = start;
  scatter(theta, blocks.b, theta_b);
  auto residual = [&](const RealVector& th) { return RealVector(pick(chart.eta(th), free) - target); };
  RealVector res = residual(theta);
  const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
  for (int it = 0; it < 100; ++it) {
    const double norm = res.norm();
    if (!std::isfinite(norm)) break;
    if (norm <= 1e-13 * scale) return theta;
    const RealMatrix jac = pick(chart.hessian(theta), free, free);
    Eigen::FullPivLU<RealMatrix> lu(jac);
    if (lu.rank() < jac.rows()) fail(ErrorCode::ConstraintSolveFailure, "Hessian block singular in mixed-coordinate solve");
    const RealVector step = lu.solve(res);
    double damp = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, damp *= 0.5) {
      RealVector trial = theta;
      scatter(trial, free, pick(theta, free) - damp * step);
      const RealVector r2 = residual(trial);
      if (r2.allFinite() && r2.norm() < norm) {
        theta = trial;
        res = r2;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (norm <= 1e-10 * scale) return theta;
      break;
    }
  }
  if (res.allFinite() && res.norm() <= 1e-10 * scale) return theta;
  fail(ErrorCode::ConstraintSolveFailure, "mixed-coordinate Newton did not converge");
}

FavrettiTrajectory favretti_response(const DuallyFlatChart& chart, const BlockPartition& blocks,
                                     const RealVector& theta_start,
                                     const std::function<RealVector(double)>& eta_a_path, int steps) {
  check_partition(blocks, chart.dim());
  if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be positive");
  if (theta_start.size() != chart.dim()) fail(ErrorCode::DimensionMismatch, "θ has the wrong size");
  const RealVector eta0 = chart.eta(theta_start);
  const RealVector theta_b = pick(theta_start, blocks.b);
  const RealVector eta_c = pick(eta0, blocks.c);
  const RealVector a0 = eta_a_path(0.0);
  if (a0.size() != static_cast<Index>(blocks.a.size())) fail(ErrorCode::DimensionMismatch, "η_A path has the wrong size");
  if ((a0 - pick(eta0, blocks.a)).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, a0.cwiseAbs().maxCoeff()))
    fail(ErrorCode::ConstraintSolveFailure, "η_A(0) does not match the starting point");

  std::vector<Index> free = blocks.a;
  free.insert(free.end(), blocks.c.begin(), blocks.c.end());
  const Index na = static_cast<Index>(blocks.a.size());

  RealVector warm = theta_start;
  auto theta_at = [&](double t) {
    warm = mixed_coordinate_solve(chart, blocks, theta_b, eta_a_path(t), eta_c, warm);
    return warm;
  };
  auto field = [&](double t) -> RealVector {
    const RealVector th = theta_at(t);
    const RealMatrix k = chart.hessian(th);
    // response kernel of the renormalized model at θ̄(t)
    const BlockModel local{0.5 * (k + k.transpose()), blocks};
    const RenormalizedBlocks r = block_renormalize(local);
    const double h = 1e-5;
    const double lo = std::max(0.0, t - h), hi = std::min(1.0, t + h);
    const RealVector rate = (eta_a_path(hi) - eta_a_path(lo)) / (hi - lo);
    if (r.k_aa.rows() != na) fail(ErrorCode::NumericalBreakdown, "block size mismatch");
    return r.k_ba * r.k_aa.fullPivLu().solve(rate);
  };

  FavrettiTrajectory out;
  RealVector eta_b = pick(eta0, blocks.b);
  out.t.push_back(0.0);
  out.eta_b.push_back(eta_b);
  out.theta.push_back(theta_start);
  const double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    // the field does not depend on η_B, so the RK4 stages reduce to Simpson weights
    const RealVector k1 = field(t);
    const RealVector k2 = field(t + 0.5 * dt);
    const RealVector k4 = field(t + dt);
    eta_b += (dt / 6.0) * (k1 + 4.0 * k2 + k4);
    out.t.push_back(t + dt);
    out.eta_b.push_back(eta_b);
    out.theta.push_back(warm);
  }
  const RealVector direct = mixed_coordinate_solve(chart, blocks, theta_b, eta_a_path(1.0), eta_c, theta_start);
  out.eta_b_direct = pick(chart.eta(direct), blocks.b);
  return out;
}

// ---------------------------------------------------------------------------
// First law

FirstLaw first_law_decompose(const DensityMatrix& p, const DensityMatrix& p_next, const std::vector<Matrix>& f,
                             const std::vector<Matrix>& f_next, const RealVector& lambda) {
  if (f.size() != f_next.size() || static_cast<Index>(f.size()) != lambda.size())
    fail(ErrorCode::DimensionMismatch, "observable lists and λ must agree in length");
  if (p.dim() != p_next.dim()) fail(ErrorCode::DimensionMismatch, "state dimensions differ");
  const Index n = lambda.size();
  FirstLaw out;
  out.d_expectation.resize(n);
  out.d_work.resize(n);
  for (Index k = 0; k < n; ++k) {
    const auto& a = f[static_cast<std::size_t>(k)];
    const auto& b = f_next[static_cast<std::size_t>(k)];
    if (a.rows() != p.dim() || b.rows() != p.dim()) fail(ErrorCode::DimensionMismatch, "observable dimension");
    out.d_expectation(k) = expect(p_next.matrix(), b) - expect(p.matrix(), a);
    out.d_work(k) = expect(p.matrix(), b - a);
  }
  out.d_heat = out.d_expectation - out.d_work;
  out.d_entropy = entropy_of(p_next) - entropy_of(p);
  out.lambda = lambda;
  out.entropy_residual = std::abs(out.d_entropy - lambda.dot(out.d_heat));
  return out;
}

FirstLaw first_law_decompose(const std::function<std::vector<Matrix>(const RealVector&)>& observables,
                             const RealVector& theta, const RealVector& delta_theta, const RealVector& r,
                             const RealVector& delta_r) {
  if (theta.size() != delta_theta.size() || r.size() != delta_r.size())
    fail(ErrorCode::DimensionMismatch, "perturbation sizes");
  const std::vector<Matrix> f = observables(r);
  const std::vector<Matrix> f_next = observables(r + delta_r);
  const DensityMatrix p = exp_family_state(f, theta);
  const DensityMatrix p_next = exp_family_state(f_next, theta + delta_theta);
  // ρ ∝ exp(θ·f) is exp(-λ·f) with λ = -θ
  return first_law_decompose(p, p_next, f, f_next, -theta);
}

// ---------------------------------------------------------------------------
// Qubit geodesics of monotone metrics

namespace {

// Plane coordinates y = u n with u = asin r: the radial part of every monotone
// metric is du², and the tangential coefficient stays bounded away from the center.
// g = p(u) 1 + q(u) y yᵀ; p and q are tabulated once and read back by cubic Hermite
// interpolation, since the shooting evaluates them millions of times.
class PlanarMetric {
 public:
  explicit PlanarMetric(const OperatorMonotoneFunction& h) : h_(h) {
    du_ = kTableEnd / kNodes;
    vp_.resize(kNodes + 1);
    vq_.resize(kNodes + 1);
    dp_.resize(kNodes + 1);
    dq_.resize(kNodes + 1);
    const double step = 1e-5;
    for (int i = 0; i <= kNodes; ++i) {
      const double u = i * du_;
      const double lo = std::max(u - step, 0.0), hi = u + step;
      vp_[i] = p_direct(u);
      vq_[i] = q_direct(u);
      dp_[i] = (p_direct(hi) - p_direct(lo)) / (hi - lo);
      dq_[i] = (q_direct(hi) - q_direct(lo)) / (hi - lo);
    }
  }

  Eigen::Matrix2d g(const Eigen::Vector2d& y) const {
    double p, q, dp, dq;
    eval(y.norm(), p, q, dp, dq);
    return p * Eigen::Matrix2d::Identity() + q * y * y.transpose();
  }

  Eigen::Vector2d accel(const Eigen::Vector2d& y, const Eigen::Vector2d& v) const {
    const double u = y.norm();
    double p, q, dp, dq;
    eval(u, p, q, dp, dq);
    double pr, qr;
    if (u >= kSmall) {
      pr = dp / u;
      qr = dq / u;
    } else {
      double p0, q0;
      eval(kSmall, p0, q0, pr, qr);
      pr /= kSmall;
      qr /= kSmall;
    }
    // ∂_k g = pr y_k 1 + qr y_k y yᵀ + q (e_k yᵀ + y e_kᵀ)
    std::array<Eigen::Matrix2d, 2> d;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d ek = Eigen::Vector2d::Zero();
      ek(k) = 1.0;
      d[static_cast<std::size_t>(k)] = pr * y(k) * Eigen::Matrix2d::Identity() + qr * y(k) * y * y.transpose() +
                                        q * (ek * y.transpose() + y * ek.transpose());
    }
    Eigen::Vector2d w = v(0) * (d[0] * v) + v(1) * (d[1] * v);
    w(0) -= 0.5 * v.dot(d[0] * v);
    w(1) -= 0.5 * v.dot(d[1] * v);
    const Eigen::Matrix2d gm = p * Eigen::Matrix2d::Identity() + q * y * y.transpose();
    return -gm.ldlt().solve(w);
  }

 private:
  static constexpr int kNodes = 4096;
  static constexpr double kSmall = 0.02;
  static constexpr double kTableEnd = 1.5665;  // asin(0.99999)

  double c(double r) const {
    const double lp = 0.5 * (1.0 + r), lm = 0.5 * (1.0 - r);
    return 0.25 * (1.0 / (lm * h_.eval(lp / lm)) + 1.0 / (lp * h_.eval(lm / lp)));
  }
  double p_direct(double u) const {
    if (u < 1e-8) return c(0.0);
    const double s = std::sin(u);
    return c(s) * s * s / (u * u);
  }
  double q_direct(double u) const {
    const double uu = std::max(u, 1e-3);
    return (1.0 - p_direct(uu)) / (uu * uu);
  }

  void eval(double u, double& p, double& q, double& dp, double& dq) const {
    if (u >= kTableEnd) {
      const double step = 1e-6;
      p = p_direct(u);
      q = q_direct(u);
      dp = (p_direct(u + step) - p_direct(u - step)) / (2 * step);
      dq = (q_direct(u + step) - q_direct(u - step)) / (2 * step);
      return;
    }
    const double x = u / du_;
    const int i = std::min(static_cast<int>(x), kNodes - 1);
    const double t = x - i;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    const double d00 = (6 * t2 - 6 * t) / du_, d10 = 3 * t2 - 4 * t + 1, d01 = (-6 * t2 + 6 * t) / du_, d11 = 3 * t2 - 2 * t;
    const std::size_t a = static_cast<std::size_t>(i), b = a + 1;
    p = h00 * vp_[a] + h10 * du_ * dp_[a] + h01 * vp_[b] + h11 * du_ * dp_[b];
    q = h00 * vq_[a] + h10 * du_ * dq_[a] + h01 * vq_[b] + h11 * du_ * dq_[b];
    dp = d00 * vp_[a] + d10 * dp_[a] + d01 * vp_[b] + d11 * dp_[b];
    dq = d00 * vq_[a] + d10 * dq_[a] + d01 * vq_[b] + d11 * dq_[b];
  }

  const OperatorMonotoneFunction& h_;
  double du_;
  std::vector<double> vp_, vq_, dp_, dq_;
};

constexpr double kEdge = 0.5 * M_PI - 1e-6;

using State4 = Eigen::Vector4d;

struct PlanarPath {
  std::vector<Eigen::Vector2d> x, v;
  bool inside = true;
};

PlanarPath shoot(const PlanarMetric& m, const Eigen::Vector2d& x0, const Eigen::Vector2d& v0, int n, bool keep) {
  auto f = [&](const State4& y) {
    State4 out;
    out.head<2>() = y.tail<2>();
    out.tail<2>() = m.accel(y.head<2>(), y.tail<2>());
    return out;
  };
  State4 y;
  y << x0, v0;
  PlanarPath p;
  if (keep) {
    p.x.push_back(x0);
    p.v.push_back(v0);
  }
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const State4 k1 = f(y);
    const State4 y2 = y + 0.5 * h * k1;
    if (y2.head<2>().norm() >= kEdge) { p.inside = false; break; }
    const State4 k2 = f(y2);
    const State4 y3 = y + 0.5 * h * k2;
    if (y3.head<2>().norm() >= kEdge) { p.inside = false; break; }
    const State4 k3 = f(y3);
    const State4 y4 = y + h * k3;
    if (y4.head<2>().norm() >= kEdge) { p.inside = false; break; }
    const State4 k4 = f(y4);
    y += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!y.allFinite() || y.head<2>().norm() >= kEdge) { p.inside = false; break; }
    if (keep) {
      p.x.push_back(y.head<2>());
      p.v.push_back(y.tail<2>());
    }
  }
  if (!keep) {
    p.x.push_back(y.head<2>());
    p.v.push_back(y.tail<2>());
  }
  return p;
}

Eigen::Vector3d bloch(const DensityMatrix& rho) {
  return {expect(rho.matrix(), pauli::x()), expect(rho.matrix(), pauli::y()), expect(rho.matrix(), pauli::z())};
}

Matrix from_bloch(const Eigen::Vector3d& r, double trace) {
  return 0.5 * (trace * pauli::identity() + r(0) * pauli::x() + r(1) * pauli::y() + r(2) * pauli::z());
}

struct QubitGeodesic {
  double length = 0.0;
  std::vector<DensityMatrix> points;
  std::vector<Matrix> tangents;
};

QubitGeodesic qubit_geodesic(const PlanarMetric& m, const DensityMatrix& a, const DensityMatrix& b,
                             bool keep_path, int steps = 64) {
  if (a.dim() != 2 || b.dim() != 2) fail(ErrorCode::DimensionMismatch, "qubit geodesics need 2 x 2 states");
  const Eigen::Vector3d ra = bloch(a), rb = bloch(b);
  if (ra.norm() >= 1.0 - 1e-9 || rb.norm() >= 1.0 - 1e-9)
    fail(ErrorCode::NotFaithful, "geodesic distance needs faithful states");
  QubitGeodesic out;
  if ((ra - rb).norm() < 1e-15) {
    if (keep_path) {
      out.points.push_back(a);
      out.tangents.push_back(Matrix::Zero(2, 2));
    }
    return out;
  }
  // orthonormal basis of a plane through the origin containing both vectors
  Eigen::Vector3d e1, e2;
  if (ra.norm() > 1e-12) e1 = ra.normalized();
  else e1 = rb.normalized();
  Eigen::Vector3d perp = rb - rb.dot(e1) * e1;
  if (perp.norm() > 1e-14) {
    e2 = perp.normalized();
  } else {
    const Eigen::Vector3d trial = std::abs(e1(0)) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    e2 = (trial - trial.dot(e1) * e1).normalized();
  }
  auto to_arc = [](const Eigen::Vector2d& x) -> Eigen::Vector2d {
    const double r = x.norm();
    return r < 1e-300 ? x : Eigen::Vector2d(x * (std::asin(r) / r));
  };
  const Eigen::Vector2d xa = to_arc({ra.dot(e1), ra.dot(e2)}), xb = to_arc({rb.dot(e1), rb.dot(e2)});

  Eigen::Vector2d v = xb - xa;
  auto miss = [&](const Eigen::Vector2d& vel, bool& ok) {
    const PlanarPath p = shoot(m, xa, vel, steps, false);
    ok = p.inside;
    return Eigen::Vector2d(p.x.back() - xb);
  };
  bool ok = true;
  Eigen::Vector2d res = miss(v, ok);
  for (int k = 0; k < 30 && !ok; ++k) {
    v *= 0.5;
    res = miss(v, ok);
  }
  if (!ok) fail(ErrorCode::NonConvergence, "initial geodesic guess leaves the Bloch ball");
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    if (res.norm() < 1e-13) { converged = true; break; }
    Eigen::Matrix2d jac;
    const double dv = 1e-7 * std::max(1.0, v.norm());
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d vp = v;
      vp(k) += dv;
      bool okp = true;
      const Eigen::Vector2d rp = miss(vp, okp);
      if (!okp) fail(ErrorCode::NonConvergence, "geodesic shooting left the Bloch ball");
      jac.col(k) = (rp - res) / dv;
    }
    const Eigen::Vector2d step = jac.fullPivLu().solve(res);
    double damp = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, damp *= 0.5) {
      bool okt = true;
      const Eigen::Vector2d trial = v - damp * step;
      const Eigen::Vector2d rt = miss(trial, okt);
      if (okt && rt.norm() < res.norm()) {
        v = trial;
        res = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      converged = res.norm() < 1e-10;
      break;
    }
  }
  if (!converged && res.norm() >= 1e-10) fail(ErrorCode::NonConvergence, "geodesic shooting did not converge");
  out.length = std::sqrt(v.dot(m.g(xa) * v));
  if (keep_path) {
    const PlanarPath p = shoot(m, xa, v, steps, true);
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      // back to Bloch coordinates: x = sin(u) y / u
      const Eigen::Vector2d y = p.x[i], dy = p.v[i];
      const double u = y.norm();
      Eigen::Vector2d x = y, dx = dy;
      if (u > 1e-12) {
        const Eigen::Vector2d n = y / u;
        const double su = std::sin(u) / u;
        x = su * y;
        dx = su * dy + (std::cos(u) - su) * n.dot(dy) * n;
      }
      const Eigen::Vector3d x3 = x(0) * e1 + x(1) * e2;
      const Eigen::Vector3d v3 = dx(0) * e1 + dx(1) * e2;
      out.points.push_back(DensityMatrix::validate(from_bloch(x3, 1.0)));
      out.tangents.push_back(from_bloch(v3, 0.0));
    }
  }
  return out;
}

}  // namespace

double qubit_geodesic_distance(const OperatorMonotoneFunction& h, const DensityMatrix& a, const DensityMatrix& b) {
  const PlanarMetric m(h);
  return qubit_geodesic(m, a, b, false).length;
}

// ---------------------------------------------------------------------------
// Contraction coefficients

ContractionModel ContractionModel::f_gamma(double gamma) {
  return {f_gamma_distance(gamma), OperatorMonotoneFunction::from_f_gamma(gamma)};
}

namespace {

constexpr double kRefineFloor = 0.02;  // refined states keep at least this much of 1/d mixed in

std::vector<Matrix> traceless_basis(Index d) {
  std::vector<Matrix> out;
  const double r = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < d; ++j)
    for (Index k = j + 1; k < d; ++k) {
      Matrix s = Matrix::Zero(d, d), a = Matrix::Zero(d, d);
      s(j, k) = s(k, j) = r;
      a(j, k) = cplx(0, -r);
      a(k, j) = cplx(0, r);
      out.push_back(s);
      out.push_back(a);
    }
  for (Index l = 1; l < d; ++l) {
    Matrix m = Matrix::Zero(d, d);
    for (Index i = 0; i < l; ++i) m(i, i) = 1.0;
    m(l, l) = -static_cast<double>(l);
    out.push_back(m / std::sqrt(static_cast<double>(l * (l + 1))));
  }
  return out;
}

struct Candidate {
  Matrix a, b;  // states (or point + direction for the metric kind)
};

class RatioProblem {
 public:
  RatioProblem(ContractionKind kind, const ContractionModel& model, const QuantumChannel& channel)
      : kind_(kind), model_(model), channel_(channel), d_(channel.input_dim()), basis_(traceless_basis(d_)) {
    if (kind_ == ContractionKind::geodesic) planar_ = std::make_shared<PlanarMetric>(model_.metric);
  }

  // ratio for a candidate; -inf when undefined
  double ratio(const Candidate& c) const {
    try {
      if (kind_ == ContractionKind::metric) {
        const DensityMatrix rho = DensityMatrix::validate(c.a);
        const double den = monotone_metric_eval(model_.metric, rho, c.b, c.b);
        if (!(den > 1e-300)) return -kInf;
        const DensityMatrix trho = apply_channel(channel_, rho);
        const Matrix tv = channel_.apply(c.b);
        if (tv.cwiseAbs().maxCoeff() < 1e-300) return 0.0;
        const double num = monotone_metric_eval(model_.metric, trho, tv, tv);
        return std::isfinite(num) ? num / den : -kInf;
      }
      const DensityMatrix a = DensityMatrix::validate(c.a), b = DensityMatrix::validate(c.b);
      const DensityMatrix ta = apply_channel(channel_, a), tb = apply_channel(channel_, b);
      if (kind_ == ContractionKind::divergence) {
        const double den = model_.distance(a, b);
        if (!(den > 1e-14)) return -kInf;
        const double num = model_.distance(ta, tb);
        return std::isfinite(num) ? num / den : -kInf;
      }
      const double den = qubit_geodesic(*planar_, a, b, false).length;
      if (!(den > 1e-7)) return -kInf;
      const double num = qubit_geodesic(*planar_, ta, tb, false).length;
      return (num * num) / (den * den);
    } catch (const Error&) {
      return -kInf;
    }
  }

  // parameters: one or two states as G with ρ ∝ GG†, or a state and a direction
  RealVector encode(const Candidate& c) const {
    RealVector out(param_count());
    encode_state(c.a, out.head(2 * d_ * d_));
    if (kind_ == ContractionKind::metric) {
      for (std::size_t k = 0; k < basis_.size(); ++k)
        out(2 * d_ * d_ + static_cast<Index>(k)) = hs_inner(basis_[k], c.b);
    } else {
      encode_state(c.b, out.tail(2 * d_ * d_));
    }
    return out;
  }

  Candidate decode(const RealVector& p) const {
    Candidate c;
    c.a = decode_state(p.head(2 * d_ * d_));
    if (kind_ == ContractionKind::metric) {
      c.b = Matrix::Zero(d_, d_);
      for (std::size_t k = 0; k < basis_.size(); ++k) c.b += p(2 * d_ * d_ + static_cast<Index>(k)) * basis_[k];
    } else {
      c.b = decode_state(p.tail(2 * d_ * d_));
    }
    return c;
  }

  Index param_count() const {
    return 2 * d_ * d_ + (kind_ == ContractionKind::metric ? static_cast<Index>(basis_.size()) : 2 * d_ * d_);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  void encode_state(const Matrix& rho, Eigen::Ref<RealVector> out) const {
    const Matrix id = Matrix::Identity(d_, d_);
    Matrix m = (rho - kRefineFloor * id / static_cast<double>(d_)) / (1.0 - kRefineFloor);
    const Spectrum s = Spectrum::of(hermitian_part(m));
    const Matrix g = s.map([](double e) { return std::sqrt(std::max(e, 1e-14)); });
    for (Index j = 0; j < d_; ++j)
      for (Index i = 0; i < d_; ++i) {
        out(2 * (j * d_ + i)) = g(i, j).real();
        out(2 * (j * d_ + i) + 1) = g(i, j).imag();
      }
  }

  Matrix decode_state(const Eigen::Ref<const RealVector>& p) const {
    Matrix g(d_, d_);
    for (Index j = 0; j < d_; ++j)
      for (Index i = 0; i < d_; ++i) g(i, j) = cplx(p(2 * (j * d_ + i)), p(2 * (j * d_ + i) + 1));
    Matrix m = g * g.adjoint();
    const double tr = m.trace().real();
    if (!(tr > 1e-300)) m = Matrix::Identity(d_, d_) / static_cast<double>(d_);
    else m /= tr;
    return hermitian_part((1.0 - kRefineFloor) * m + kRefineFloor * Matrix::Identity(d_, d_) / static_cast<double>(d_));
  }

  ContractionKind kind_;
  const ContractionModel& model_;
  const QuantumChannel& channel_;
  Index d_;
  std::vector<Matrix> basis_;
  std::shared_ptr<PlanarMetric> planar_;
};

ContractionReport estimate(ContractionKind kind, const ContractionModel& model, const QuantumChannel& channel,
                           const Sampler& sampler, const std::vector<Candidate>& seeds) {
  if (channel.input_dim() != channel.output_dim()) fail(ErrorCode::DimensionMismatch, "channel must be endomorphic");
  if (sampler.count < 1) fail(ErrorCode::InvalidArgument, "sample count must be positive");
  const Index d = channel.input_dim();
  if (kind == ContractionKind::geodesic && d != 2)
    fail(ErrorCode::InvalidArgument, "geodesic contraction is implemented for qubit channels");

  // draws are generated serially from one stream, evaluated in parallel
  Rng rng(sampler.seed);
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(sampler.count) + seeds.size());
  for (int i = 0; i < sampler.count; ++i) {
    Candidate c;
    c.a = random_faithful_state(d, rng).matrix();
    if (kind == ContractionKind::metric) c.b = random_traceless_hermitian(d, rng);
    else c.b = random_faithful_state(d, rng).matrix();
    cands.push_back(std::move(c));
  }
  cands.insert(cands.end(), seeds.begin(), seeds.end());

  const RatioProblem problem(kind, model, channel);
  std::vector<double> ratios(cands.size());
  detail::parallel_for(cands.size(), sampler.workers, [&](std::size_t i) { ratios[i] = problem.ratio(cands[i]); });

  std::size_t best = 0;
  for (std::size_t i = 1; i < ratios.size(); ++i)
    if (ratios[i] > ratios[best]) best = i;

  ContractionReport rep;
  rep.kind = kind;
  rep.sample_count = static_cast<int>(cands.size());
  Candidate winner = cands[best];
  double value = ratios[best];

  if (std::isfinite(value) && sampler.refine_iterations > 0 && value > 0.0) {
    const RealVector x0 = problem.encode(winner);
    auto objective = [&](const RealVector& p) { return -problem.ratio(problem.decode(p)); };
    const detail::MinimizeResult r = detail::nelder_mead(objective, x0, 0.05, sampler.refine_iterations, 1e-12);
    const double refined = -r.value;
    if (std::isfinite(refined) && refined > value) {
      const Candidate c = problem.decode(r.x);
      // the decoded candidate is re-evaluated so the report and witnesses agree
      const double check = problem.ratio(c);
      if (check > value) {
        value = check;
        winner = c;
      }
    }
  }
  if (!std::isfinite(value)) value = 0.0;
  rep.value = std::max(0.0, value);
  rep.witness_a = DensityMatrix::validate(winner.a);
  if (kind == ContractionKind::metric) rep.direction = winner.b;
  else rep.witness_b = DensityMatrix::validate(winner.b);
  return rep;
}

}  // namespace

ContractionReport contraction_coefficient(ContractionKind kind, const ContractionModel& model,
                                          const QuantumChannel& channel, const Sampler& sampler) {
  return estimate(kind, model, channel, sampler, {});
}

ContractionChain contraction_chain(const ContractionModel& model, const QuantumChannel& channel,
                                   const Sampler& sampler) {
  ContractionChain out;
  const bool qubit = channel.input_dim() == 2 && channel.output_dim() == 2;
  std::vector<Candidate> metric_seeds;
  if (qubit) {
    Sampler s = sampler;
    s.seed = sampler.seed + 2;
    out.geodesic = estimate(ContractionKind::geodesic, model, channel, s, {});
    // any geodesic pair is dominated by the metric ratio somewhere along the connecting geodesic
    if (out.geodesic.witness_a && out.geodesic.witness_b && out.geodesic.value > 0.0) {
      try {
        const PlanarMetric planar(model.metric);
        const QubitGeodesic path = qubit_geodesic(planar, *out.geodesic.witness_a, *out.geodesic.witness_b, true);
        for (std::size_t i = 0; i < path.points.size(); ++i)
          if (path.tangents[i].cwiseAbs().maxCoeff() > 0.0)
            metric_seeds.push_back({path.points[i].matrix(), path.tangents[i]});
      } catch (const Error&) {
      }
    }
  } else {
    out.geodesic.kind = ContractionKind::geodesic;
    out.geodesic.value = kNaN;
  }
  {
    Sampler s = sampler;
    s.seed = sampler.seed + 1;
    out.metric = estimate(ContractionKind::metric, model, channel, s, metric_seeds);
  }
  std::vector<Candidate> divergence_seeds;
  if (out.metric.witness_a && out.metric.direction && out.metric.value > 0.0) {
    const Matrix& rho = out.metric.witness_a->matrix();
    const Matrix& v = *out.metric.direction;
    const double lam = out.metric.witness_a->min_eigenvalue();
    const double vn = v.cwiseAbs().maxCoeff() * static_cast<double>(v.rows());
    // infinitesimal pairs recover the metric ratio up to O(ε)
    for (double eps : {1e-3, 1e-4}) {
      const double e = eps * lam / vn;
      divergence_seeds.push_back({rho - e * v, rho + e * v});
    }
  }
  out.divergence = estimate(ContractionKind::divergence, model, channel, sampler, divergence_seeds);

  out.max_violation = std::max({0.0, out.divergence.value - 1.0, out.metric.value - out.divergence.value});
  if (qubit) out.max_violation = std::max(out.max_violation, out.geodesic.value - out.metric.value);
  return out;
}

// ---------------------------------------------------------------------------
// Markovian rescaling

StateFunctional markov_rescale(StateFunctional f, QuantumChannel channel, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::ZeroCoefficient, "contraction coefficient must be positive");
  if (eta > 1.0 + 1e-12) fail(ErrorCode::InvalidArgument, "contraction coefficient exceeds 1");
  return [f = std::move(f), channel = std::move(channel), eta](const DensityMatrix& rho) {
    return f(apply_channel(channel, rho)) / eta;
  };
}

FixedPointResidual fixed_point_check(const DistanceFunctional& d, const StateFunctional& f,
                                     const QuantumChannel& channel, const DensityMatrix& omega,
                                     const DensityMatrix& phi, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::ZeroCoefficient, "contraction coefficient must be positive");
  if (eta > 1.0 + 1e-12) fail(ErrorCode::InvalidArgument, "contraction coefficient exceeds 1");
  const DensityMatrix t_omega = apply_channel(channel, omega), t_phi = apply_channel(channel, phi);
  return {std::abs(eta * f(phi) - f(t_phi)), std::abs(eta * d(omega, phi) - d(t_omega, t_phi))};
}

}  // namespace qig
