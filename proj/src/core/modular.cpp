#include "qig/modular.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace qig {

namespace {

void require_faithful(const DensityMatrix& s, const char* what) {
  if (!s.faithful()) fail(ErrorCode::NotFaithful, std::string(what) + " must be faithful");
}

void require_same_dim(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) fail(ErrorCode::DimensionMismatch, "states live on different dimensions");
}

// vec(x†) = P conj(vec(x))
Matrix adjoint_permutation(Index d) {
  Matrix p = Matrix::Zero(d * d, d * d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) p(a + d * b, b + d * a) = 1.0;
  return p;
}

Matrix hermitian_exp(const Matrix& h, cplx factor) { return exp_hermitian(hermitian_part(h), factor); }

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

Matrix unvec(const Vector& v, Index d) {
  if (v.size() != d * d) fail(ErrorCode::DimensionMismatch, "vector length is not d²");
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

Vector Superoperator::apply(const Vector& xi) const {
  if (linearity == Linearity::linear) return matrix * xi;
  return matrix * xi.conjugate();
}

Superoperator Superoperator::compose(const Superoperator& o) const {
  const bool a_lin = linearity == Linearity::linear, b_lin = o.linearity == Linearity::linear;
  if (a_lin) return {matrix * o.matrix, o.linearity};
  // antilinear after anything: M conj(B ξ) or M conj(B conj ξ)
  return {matrix * o.matrix.conjugate(), b_lin ? Linearity::antilinear : Linearity::linear};
}

Superoperator Superoperator::operator+(const Superoperator& o) const {
  if (linearity != o.linearity) fail(ErrorCode::InvalidArgument, "cannot add linear and antilinear maps");
  return {matrix + o.matrix, linearity};
}

Superoperator Superoperator::operator-(const Superoperator& o) const {
  if (linearity != o.linearity) fail(ErrorCode::InvalidArgument, "cannot subtract linear and antilinear maps");
  return {matrix - o.matrix, linearity};
}

Superoperator Superoperator::scaled(cplx c) const {
  if (linearity != Linearity::linear) fail(ErrorCode::InvalidArgument, "complex scaling of an antilinear map");
  return {c * matrix, linearity};
}

GnsSpace GnsSpace::build(const DensityMatrix& state) {
  require_faithful(state, "GNS state");
  GnsSpace g(state);
  const Index d = state.dim();
  g.d_ = d;
  const Matrix id = Matrix::Identity(d, d);
  const Spectrum& s = state.spectrum();
  g.sqrt_state_ = s.map([](double x) { return std::sqrt(x); });
  g.inv_sqrt_state_ = s.map([](double x) { return 1.0 / std::sqrt(x); });
  g.gram_ = kron(state.matrix().transpose(), id);
  g.sqrt_gram_ = kron(g.sqrt_state_.transpose(), id);
  g.inv_sqrt_gram_ = kron(g.inv_sqrt_state_.transpose(), id);
  return g;
}

Superoperator GnsSpace::rep(const Matrix& x) const {
  if (x.rows() != d_ || x.cols() != d_) fail(ErrorCode::DimensionMismatch, "operator dimension differs from GNS base");
  return {kron(Matrix::Identity(d_, d_), x), Linearity::linear};
}

Index GnsSpace::cyclic_rank() const {
  Matrix span(d_ * d_, d_ * d_);
  const Vector omega = cyclic_vector();
  for (Index a = 0; a < d_; ++a)
    for (Index b = 0; b < d_; ++b) {
      Matrix e = Matrix::Zero(d_, d_);
      e(a, b) = 1.0;
      span.col(a + d_ * b) = sqrt_gram_ * rep(e).apply(omega);
    }
  Eigen::FullPivLU<Matrix> lu(span);
  lu.setThreshold(1e-9);
  return lu.rank();
}

Matrix GnsSpace::pullback(const Vector& xi) const {
  const Matrix x = unvec(xi, d_);
  return hermitian_part(x * state_.matrix() * x.adjoint());
}

double GnsSpace::cone_defect(const Vector& xi) const {
  const Matrix p = unvec(xi, d_) * sqrt_state_;
  const double herm = hermitian_residual(p);
  const double neg = std::max(0.0, -Spectrum::of(hermitian_part(p)).eigenvalues(0));
  return std::max(herm, neg);
}

Vector GnsSpace::cone_vector(const DensityMatrix& psi) const {
  if (psi.dim() != d_) fail(ErrorCode::DimensionMismatch, "state dimension differs from GNS base");
  return vec(sqrt_psd(psi.matrix()) * inv_sqrt_state_);
}

Matrix to_orthonormal(const Superoperator& op, const GnsSpace& source, const GnsSpace& target) {
  if (op.linearity == Linearity::linear) return target.sqrt_gram() * op.matrix * source.inv_sqrt_gram();
  return target.sqrt_gram() * op.matrix * source.inv_sqrt_gram().conjugate();
}

Superoperator from_orthonormal(const Matrix& m, Linearity kind, const GnsSpace& source, const GnsSpace& target) {
  if (kind == Linearity::linear) return {target.inv_sqrt_gram() * m * source.sqrt_gram(), kind};
  return {target.inv_sqrt_gram() * m * source.sqrt_gram().conjugate(), kind};
}

Superoperator gns_adjoint(const Superoperator& op, const GnsSpace& source, const GnsSpace& target) {
  const Matrix m = to_orthonormal(op, source, target);
  if (op.linearity == Linearity::linear) return from_orthonormal(m.adjoint(), Linearity::linear, target, source);
  return from_orthonormal(m.transpose(), Linearity::antilinear, target, source);
}

RelativeModular relative_modular(const DensityMatrix& phi, const DensityMatrix& omega) {
  require_faithful(phi, "phi");
  require_faithful(omega, "omega");
  require_same_dim(phi, omega);
  const GnsSpace gw = GnsSpace::build(omega), gp = GnsSpace::build(phi);
  const Index d = omega.dim();
  const Superoperator s{adjoint_permutation(d), Linearity::antilinear};
  const Matrix m = to_orthonormal(s, gw, gp);
  // S*S for ξ ↦ M conj(ξ) is Mᵀ conj(M)
  const Spectrum delta = Spectrum::of(hermitian_part(m.transpose() * m.conjugate()));
  if (delta.eigenvalues(0) <= 0.0) fail(ErrorCode::NumericalBreakdown, "relative modular operator is singular");
  const Matrix inv_sqrt = delta.map([](double x) { return 1.0 / std::sqrt(x); });
  const Matrix j = m * inv_sqrt.conjugate();
  return {from_orthonormal(delta.reconstruct(), Linearity::linear, gw, gw),
          from_orthonormal(j, Linearity::antilinear, gw, gp)};
}

Superoperator modular_conjugation(const GnsSpace& gns) { return relative_modular(gns.state(), gns.state()).j; }

ModularFlowReport modular_flow_kms(const DensityMatrix& rho, const HermitianObservable& x, double t,
                                   int sample_pairs, std::uint64_t seed) {
  require_faithful(rho, "state");
  if (x.dim() != rho.dim()) fail(ErrorCode::DimensionMismatch, "observable and state dimensions differ");
  const Spectrum& s = rho.spectrum();
  const Matrix u = s.map_complex([t](double l) { return std::exp(cplx(0.0, t * std::log(l))); });
  ModularFlowReport r;
  r.evolved = u * x.matrix() * u.adjoint();

  // ω(a σ_{-i}(b)) with the flow continued in the eigenbasis: (σ_t b)_kj = λ_k^{it} λ_j^{-it} b_kj
  const Matrix& m = rho.matrix();
  const Matrix& v = s.eigenvectors;
  const RealVector& lam = s.eigenvalues;
  const Index d = rho.dim();
  Rng rng(seed);
  r.kms_residual = 0.0;
  for (int k = 0; k < sample_pairs; ++k) {
    const Matrix a = random_hermitian(d, rng), b = random_hermitian(d, rng);
    const Matrix ae = v.adjoint() * a * v, be = v.adjoint() * b * v;
    cplx continued = 0.0;
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < d; ++i)
        continued += lam(j) * ae(j, i) * std::exp(std::log(lam(i)) - std::log(lam(j))) * be(i, j);
    r.kms_residual = std::max(r.kms_residual, std::abs(continued - (m * b * a).trace()));
  }

  const GnsSpace gns = GnsSpace::build(rho);
  const Matrix dhat = to_orthonormal(relative_modular(rho, rho).delta, gns, gns);
  const Spectrum ds = Spectrum::of(hermitian_part(dhat));
  const Matrix dit = ds.map_complex([t](double l) { return std::exp(cplx(0.0, t * std::log(l))); });
  const Superoperator flow = from_orthonormal(dit, Linearity::linear, gns, gns);
  r.implementation_residual = max_abs(flow.apply(vec(x.matrix())) - vec(r.evolved));
  return r;
}

Superoperator standard_unitary_transition(const DensityMatrix& phi, const DensityMatrix& omega) {
  const Superoperator j_rel = relative_modular(phi, omega).j;
  const Superoperator j_phi = relative_modular(phi, phi).j;
  return j_phi.compose(j_rel);
}

Superoperator standard_liouvillean(const HermitianObservable& h, const GnsSpace& gns) {
  const Superoperator j = modular_conjugation(gns);
  const Superoperator lh = gns.rep(h.matrix());
  return lh - j.compose(lh).compose(j);
}

Superoperator unitary_group(const Superoperator& generator, const GnsSpace& gns, double t) {
  if (generator.linearity != Linearity::linear) fail(ErrorCode::InvalidArgument, "generator must be linear");
  const Matrix hat = to_orthonormal(generator, gns, gns);
  if (hermitian_residual(hat) > 1e-8 * std::max(1.0, max_abs(hat)))
    fail(ErrorCode::NotHermitian, "generator is not self-adjoint on the GNS space");
  return from_orthonormal(hermitian_exp(hat, cplx(0.0, -t)), Linearity::linear, gns, gns);
}

Superoperator DjpPerturbation::expansional(double t) const {
  return unitary_group(k + q, gns, -t).compose(unitary_group(k, gns, t));
}

Superoperator DjpPerturbation::dyson_partial_sum(double t, int order) const {
  if (order < 0) fail(ErrorCode::InvalidArgument, "Dyson order must be nonnegative");
  const Matrix kh = to_orthonormal(k, gns, gns), qh = to_orthonormal(q, gns, gns);
  const Index n = kh.rows();
  const Index blocks = order + 1;
  Matrix big = Matrix::Zero(n * blocks, n * blocks);
  for (Index b = 0; b < blocks; ++b) {
    big.block(b * n, b * n, n, n) = cplx(0.0, t) * kh;
    if (b + 1 < blocks) big.block(b * n, (b + 1) * n, n, n) = cplx(0.0, t) * qh;
  }
  const Matrix e = big.exp();
  Matrix sum = Matrix::Zero(n, n);
  for (Index b = 0; b < blocks; ++b) sum += e.block(0, b * n, n, n);
  const Matrix back = hermitian_exp(kh, cplx(0.0, -t));
  return from_orthonormal(sum * back, Linearity::linear, gns, gns);
}

double DjpPerturbation::cocycle_residual(double t1, double t2) const {
  const Superoperator lhs = expansional(t1 + t2);
  const Superoperator flowed = unitary_group(k, gns, -t1).compose(expansional(t2)).compose(unitary_group(k, gns, t1));
  const Superoperator rhs = expansional(t1).compose(flowed);
  return max_abs(to_orthonormal(lhs - rhs, gns, gns));
}

Superoperator DjpPerturbation::perturbed_flow(const Superoperator& a, double t) const {
  const Superoperator e = expansional(t);
  const Superoperator flowed = unitary_group(k, gns, -t).compose(a).compose(unitary_group(k, gns, t));
  return e.compose(flowed).compose(gns_adjoint(e, gns, gns));
}

DjpPerturbation djp_perturb(const Superoperator& k, const HermitianObservable& q, const GnsSpace& gns) {
  return djp_perturb(k, gns.rep(q.matrix()), gns);
}

DjpPerturbation djp_perturb(const Superoperator& k, const Superoperator& q, const GnsSpace& gns) {
  const Index d = gns.base_dim();
  if (k.matrix.rows() != d * d || q.matrix.rows() != d * d)
    fail(ErrorCode::DimensionMismatch, "superoperator size differs from GNS space");
  if (q.linearity != Linearity::linear) fail(ErrorCode::NotRepresented, "perturbation must be linear");
  const Matrix block = q.matrix.topLeftCorner(d, d);
  if (max_abs(q.matrix - kron(Matrix::Identity(d, d), block)) > 1e-9)
    fail(ErrorCode::NotRepresented, "perturbation is not a left multiplication");
  const Superoperator j = modular_conjugation(gns);
  return DjpPerturbation{k + q - j.compose(q).compose(j), k, q, gns};
}

Superoperator modular_liouvillean(const GnsSpace& gns, double beta) {
  if (!(beta > 0.0)) fail(ErrorCode::InvalidArgument, "beta must be positive");
  const Matrix dhat = to_orthonormal(relative_modular(gns.state(), gns.state()).delta, gns, gns);
  const Matrix log_delta = Spectrum::of(hermitian_part(dhat)).map([](double l) { return std::log(l); });
  return from_orthonormal(-log_delta / beta, Linearity::linear, gns, gns);
}

DensityMatrix perturbed_kms_state(const DensityMatrix& omega, const HermitianObservable& q, double beta) {
  require_faithful(omega, "omega");
  if (q.dim() != omega.dim()) fail(ErrorCode::DimensionMismatch, "perturbation and state dimensions differ");
  const GnsSpace gns = GnsSpace::build(omega);
  const Superoperator gen = modular_liouvillean(gns, beta) + gns.rep(q.matrix());
  const Matrix hat = to_orthonormal(gen, gns, gns);
  const Vector omega_hat = gns.sqrt_gram() * gns.cyclic_vector();
  const Vector xi = gns.inv_sqrt_gram() * (hermitian_exp(hat, cplx(-0.5 * beta, 0.0)) * omega_hat);
  const Matrix rho = gns.pullback(xi);
  return DensityMatrix::validate(rho / rho.trace().real());
}

cplx npoint_correlation(const DensityMatrix& base, const std::vector<CorrelationLink>& chain) {
  require_faithful(base, "base state");
  const GnsSpace g0 = GnsSpace::build(base);
  Vector v = g0.cyclic_vector();
  const DensityMatrix* prev = &base;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    require_same_dim(base, it->state);
    require_faithful(it->state, "chain state");
    v = standard_unitary_transition(it->state, *prev).apply(v);
    const GnsSpace gk = GnsSpace::build(it->state);
    Superoperator px = gk.rep(it->x);
    if (it->liouvillean && it->t != 0.0) {
      const Superoperator fwd = unitary_group(*it->liouvillean, gk, -it->t);
      const Superoperator bwd = unitary_group(*it->liouvillean, gk, it->t);
      px = fwd.compose(px).compose(bwd);
    }
    v = px.apply(v);
    prev = &it->state;
  }
  v = standard_unitary_transition(base, *prev).apply(v);
  return g0.inner(g0.cyclic_vector(), v);
}

InstrumentResult liouvillean_instrument_step(const DensityMatrix& phi, const HermitianObservable& h,
                                             const std::optional<HermitianObservable>& gauge,
                                             const std::vector<Source>& sources, double t,
                                             const std::optional<DensityMatrix>& reference) {
  require_faithful(phi, "state");
  const DensityMatrix& ref = reference ? *reference : phi;
  require_same_dim(phi, ref);
  const GnsSpace gns = GnsSpace::build(ref);
  const Superoperator j = modular_conjugation(gns);
  auto liouvillean = [&](const Matrix& x) {
    const Superoperator lx = gns.rep(x);
    return lx - j.compose(lx).compose(j);
  };
  Superoperator l = standard_liouvillean(h, gns);
  if (gauge) l = l + liouvillean(gauge->matrix());
  for (const Source& s : sources) {
    if (hermitian_residual(s.h) > kHermitianTol) fail(ErrorCode::NotHermitian, "source generator is not Hermitian");
    l = l + liouvillean(s.lambda * s.h);
  }
  Vector xi = unitary_group(l, gns, t).apply(gns.cone_vector(phi));
  const double defect = gns.cone_defect(xi);
  bool projected = false;
  if (defect > 1e-8) {
    const Matrix p = unvec(xi, gns.base_dim()) * sqrt_psd(ref.matrix());
    const Matrix plus = Spectrum::of(hermitian_part(p)).map([](double x) { return std::max(0.0, x); });
    xi = vec(plus * sqrt_psd(ref.matrix()).inverse());
    projected = true;
  }
  const Matrix rho = gns.pullback(xi);
  return {DensityMatrix::validate(rho / rho.trace().real()), defect, projected};
}

}  // namespace qig
