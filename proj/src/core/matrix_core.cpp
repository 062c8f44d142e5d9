#include "qig/matrix_core.hpp"

#include <cmath>
#include <sstream>

namespace qig {

Spectrum Spectrum::of(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  if (solver.info() != Eigen::Success) fail(ErrorCode::NumericalBreakdown, "eigendecomposition failed");
  return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

Matrix Spectrum::reconstruct() const {
  return eigenvectors * eigenvalues.cast<cplx>().asDiagonal() * eigenvectors.adjoint();
}

Matrix Spectrum::map(const std::function<double(double)>& f) const {
  Vector fvals(eigenvalues.size());
  for (Index i = 0; i < eigenvalues.size(); ++i) fvals(i) = f(eigenvalues(i));
  return eigenvectors * fvals.asDiagonal() * eigenvectors.adjoint();
}

Matrix Spectrum::map_complex(const std::function<cplx(double)>& f) const {
  Vector fvals(eigenvalues.size());
  for (Index i = 0; i < eigenvalues.size(); ++i) fvals(i) = f(eigenvalues(i));
  return eigenvectors * fvals.asDiagonal() * eigenvectors.adjoint();
}

Matrix dagger(const Matrix& m) { return m.adjoint(); }

double hermitian_residual(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << " must be a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

Matrix symmetrized_or_throw(const Matrix& m, const char* what) {
  require_square(m, what);
  const double res = hermitian_residual(m);
  if (!(res <= kHermitianTol)) {
    std::ostringstream os;
    os << what << " hermiticity residual " << res << " exceeds " << kHermitianTol;
    fail(ErrorCode::NotHermitian, os.str());
  }
  return hermitian_part(m);
}

}  // namespace

DensityMatrix DensityMatrix::validate(const Matrix& m, TraceMode mode) {
  Matrix h = symmetrized_or_throw(m, "density matrix");
  Spectrum s = Spectrum::of(h);
  const double lo = s.eigenvalues(0);
  if (lo < -kPositivityTol) {
    std::ostringstream os;
    os << "minimum eigenvalue " << lo << " below -" << kPositivityTol;
    fail(ErrorCode::NotPositive, os.str());
  }
  if (lo < 0.0) {
    for (Index i = 0; i < s.eigenvalues.size(); ++i) s.eigenvalues(i) = std::max(0.0, s.eigenvalues(i));
    h = s.reconstruct();
    h = hermitian_part(h);
  }
  const double tr = h.trace().real();
  if (mode == TraceMode::normalized && std::abs(tr - 1.0) > kTraceTol) {
    std::ostringstream os;
    os << "trace " << tr << " differs from 1 by more than " << kTraceTol;
    fail(ErrorCode::TraceMismatch, os.str());
  }
  if (mode == TraceMode::subnormalized && (tr > 1.0 + kTraceTol || tr <= 0.0)) {
    std::ostringstream os;
    os << "subnormalized trace " << tr << " outside (0, 1]";
    fail(ErrorCode::TraceMismatch, os.str());
  }
  return DensityMatrix(std::move(h), mode, std::move(s));
}

HermitianObservable HermitianObservable::validate(const Matrix& m) {
  return HermitianObservable(symmetrized_or_throw(m, "observable"));
}

TangentDirection TangentDirection::validate(const Matrix& m) {
  Matrix h = symmetrized_or_throw(m, "tangent direction");
  const double tr = std::abs(h.trace());
  if (tr > kTraceTol) {
    std::ostringstream os;
    os << "tangent direction trace " << tr << " exceeds " << kTraceTol;
    fail(ErrorCode::TraceMismatch, os.str());
  }
  return TangentDirection(std::move(h));
}

QuantumChannel QuantumChannel::from_kraus(std::vector<Matrix> kraus) {
  if (kraus.empty()) fail(ErrorCode::InvalidArgument, "channel needs at least one Kraus operator");
  const Index rows = kraus.front().rows(), cols = kraus.front().cols();
  Matrix sum = Matrix::Zero(cols, cols);
  for (const auto& k : kraus) {
    if (k.rows() != rows || k.cols() != cols) fail(ErrorCode::DimensionMismatch, "Kraus operators differ in shape");
    sum += k.adjoint() * k;
  }
  const double res = (sum - Matrix::Identity(cols, cols)).cwiseAbs().maxCoeff();
  if (res > kChannelTol) {
    std::ostringstream os;
    os << "trace-preservation residual " << res << " exceeds " << kChannelTol;
    fail(ErrorCode::NotTracePreserving, os.str());
  }
  return QuantumChannel(std::move(kraus));
}

QuantumChannel QuantumChannel::identity(Index dim) { return from_kraus({Matrix::Identity(dim, dim)}); }

QuantumChannel QuantumChannel::depolarizing(Index dim, double p) {
  if (p < 0.0 || p > 1.0) fail(ErrorCode::InvalidArgument, "depolarizing parameter outside [0,1]");
  // Weyl operators X^a Z^b satisfy Σ W ρ W† = d tr(ρ) 1.
  const double d = static_cast<double>(dim);
  Matrix shift = Matrix::Zero(dim, dim), clock = Matrix::Zero(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    shift((j + 1) % dim, j) = 1.0;
    clock(j, j) = std::polar(1.0, 2.0 * M_PI * static_cast<double>(j) / d);
  }
  std::vector<Matrix> kraus;
  kraus.emplace_back(std::sqrt(1.0 - p + p / (d * d)) * Matrix::Identity(dim, dim));
  Matrix xa = Matrix::Identity(dim, dim);
  for (Index a = 0; a < dim; ++a) {
    Matrix w = xa;
    for (Index b = 0; b < dim; ++b) {
      if (a != 0 || b != 0) kraus.emplace_back(std::sqrt(p) / d * w);
      w = w * clock;
    }
    xa = shift * xa;
  }
  return from_kraus(std::move(kraus));
}

QuantumChannel QuantumChannel::amplitude_damping(double gamma) {
  if (gamma < 0.0 || gamma > 1.0) fail(ErrorCode::InvalidArgument, "damping rate outside [0,1]");
  Matrix k0 = Matrix::Zero(2, 2), k1 = Matrix::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - gamma);
  k1(0, 1) = std::sqrt(gamma);
  return from_kraus({k0, k1});
}

QuantumChannel QuantumChannel::random(Index dim, Index kraus_count, Rng& rng) {
  // Columns of a random isometry C^d -> C^(d k), split into k blocks.
  Matrix g = ginibre(dim * kraus_count, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim * kraus_count, dim);
  std::vector<Matrix> kraus;
  for (Index k = 0; k < kraus_count; ++k) kraus.emplace_back(q.block(k * dim, 0, dim, dim));
  return from_kraus(std::move(kraus));
}

Matrix QuantumChannel::apply(const Matrix& x) const {
  if (x.rows() != input_dim() || x.cols() != input_dim())
    fail(ErrorCode::DimensionMismatch, "channel input dimension mismatch");
  Matrix out = Matrix::Zero(output_dim(), output_dim());
  for (const auto& k : kraus_) out += k * x * k.adjoint();
  return out;
}

Matrix matrix_function(const ScalarFunction& f, const Matrix& hermitian) {
  const Matrix h = symmetrized_or_throw(hermitian, "matrix_function argument");
  const Spectrum s = Spectrum::of(h);
  return s.map([&](double x) {
    double v = f.eval(x);
    if (!std::isfinite(v) && std::abs(x) <= kFaithfulFloor && f.value_at_zero && std::isfinite(*f.value_at_zero))
      v = *f.value_at_zero;
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "function undefined at eigenvalue " << x;
      fail(ErrorCode::DomainError, os.str());
    }
    return v;
  });
}

Matrix matrix_function(const std::function<double(double)>& f, const Matrix& hermitian) {
  return matrix_function(ScalarFunction{f, std::nullopt}, hermitian);
}

DensityMatrix apply_channel(const QuantumChannel& channel, const DensityMatrix& rho) {
  if (rho.dim() != channel.input_dim()) fail(ErrorCode::DimensionMismatch, "channel/state dimension mismatch");
  return DensityMatrix::validate(channel.apply(rho.matrix()), rho.trace_mode());
}

DensityMatrix partial_trace(const DensityMatrix& rho, Index dim_a, Index dim_b, int keep) {
  if (dim_a <= 0 || dim_b <= 0 || dim_a * dim_b != rho.dim()) {
    std::ostringstream os;
    os << "dimension " << rho.dim() << " does not factor as " << dim_a << "x" << dim_b;
    fail(ErrorCode::BadFactorization, os.str());
  }
  if (keep != 0 && keep != 1) fail(ErrorCode::InvalidArgument, "keep must be 0 or 1");
  const Matrix& m = rho.matrix();
  const Index keep_dim = keep == 0 ? dim_a : dim_b;
  Matrix out = Matrix::Zero(keep_dim, keep_dim);
  // index (a, b) -> a * dim_b + b
  for (Index a = 0; a < dim_a; ++a)
    for (Index b = 0; b < dim_b; ++b)
      for (Index a2 = 0; a2 < dim_a; ++a2)
        for (Index b2 = 0; b2 < dim_b; ++b2) {
          const cplx v = m(a * dim_b + b, a2 * dim_b + b2);
          if (keep == 0 && b == b2) out(a, a2) += v;
          if (keep == 1 && a == a2) out(b, b2) += v;
        }
  return DensityMatrix::validate(out, rho.trace_mode());
}

Matrix ginibre(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = cplx(re, im);
    }
  return g;
}

DensityMatrix random_faithful_state(Index dim, Rng& rng) {
  if (dim < 2) fail(ErrorCode::InvalidArgument, "random_faithful_state needs dim >= 2");
  constexpr double lambda = 0.95;
  const Matrix g = ginibre(dim, dim, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = lambda * rho + (1.0 - lambda) / static_cast<double>(dim) * Matrix::Identity(dim, dim);
  rho = hermitian_part(rho);
  rho /= rho.trace().real();
  return DensityMatrix::validate(rho);
}

DensityMatrix random_faithful_state(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  return random_faithful_state(dim, rng);
}

Matrix random_unitary(Index dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    const cplx d = r(j, j);
    q.col(j) *= (std::abs(d) > 0 ? d / std::abs(d) : cplx(1.0));
  }
  return q;
}

Matrix random_hermitian(Index dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  return 0.5 * (g + g.adjoint());
}

Matrix random_traceless_hermitian(Index dim, Rng& rng) {
  Matrix h = random_hermitian(dim, rng);
  h -= h.trace() / static_cast<double>(dim) * Matrix::Identity(dim, dim);
  return h;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double hs_inner(const Matrix& a, const Matrix& b) { return (a.adjoint() * b).trace().real(); }

double trace_distance(const Matrix& a, const Matrix& b) {
  const Matrix diff = hermitian_part(a - b);
  const Spectrum s = Spectrum::of(diff);
  return 0.5 * s.eigenvalues.cwiseAbs().sum();
}

Matrix projector(const Vector& v) {
  const Vector u = v / v.norm();
  return u * u.adjoint();
}

Matrix exp_hermitian(const Matrix& hermitian, cplx factor) {
  const Spectrum s = Spectrum::of(hermitian_part(hermitian));
  return s.map_complex([&](double x) { return std::exp(factor * x); });
}

Matrix sqrt_psd(const Matrix& m) {
  const Spectrum s = Spectrum::of(hermitian_part(m));
  return s.map([](double x) { return std::sqrt(std::max(0.0, x)); });
}

Matrix log_pd(const Matrix& m) {
  const Spectrum s = Spectrum::of(hermitian_part(m));
  if (s.eigenvalues(0) <= 0.0) fail(ErrorCode::NotFaithful, "logarithm of a singular matrix");
  return s.map([](double x) { return std::log(x); });
}

DensityMatrix maximally_mixed(Index dim) {
  return DensityMatrix::validate(Matrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix pure_state(const Vector& v) { return DensityMatrix::validate(projector(v)); }

DensityMatrix gibbs_state(const Matrix& hamiltonian, double beta) {
  Matrix e = exp_hermitian(hamiltonian, cplx(-beta));
  e /= e.trace().real();
  return DensityMatrix::validate(hermitian_part(e));
}

namespace pauli {
Matrix identity() { return Matrix::Identity(2, 2); }
Matrix x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix y() {
  Matrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
Matrix z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

}  // namespace qig
