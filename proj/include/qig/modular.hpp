#pragma once

// Tomita-Takesaki calculus at matrix scale. Each faithful state ω carries its
// own GNS space: vectors are GNS representatives [x] of d x d matrices, stored
// as column-major vec(x) ("matrix-unit coordinates") with gram matrix
// G_ω = ωᵀ ⊗ 1, so ⟨[x], [y]⟩ = tr(ω x† y). Antilinear maps are stored as
// ξ ↦ M conj(ξ).

#include <optional>
#include <vector>

#include "qig/matrix_core.hpp"

namespace qig {

enum class Linearity { linear, antilinear };

struct Superoperator {
  Matrix matrix;
  Linearity linearity = Linearity::linear;

  Vector apply(const Vector& xi) const;
  /// this ∘ other
  Superoperator compose(const Superoperator& other) const;
  Superoperator operator+(const Superoperator& o) const;
  Superoperator operator-(const Superoperator& o) const;
  Superoperator scaled(cplx c) const;  // only for linear maps
};

Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Index d);

class GnsSpace {
 public:
  static GnsSpace build(const DensityMatrix& state);

  Index base_dim() const { return d_; }
  const DensityMatrix& state() const { return state_; }
  const Matrix& gram() const { return gram_; }
  /// G^{1/2} and G^{-1/2}: maps to and from orthonormal coordinates.
  const Matrix& sqrt_gram() const { return sqrt_gram_; }
  const Matrix& inv_sqrt_gram() const { return inv_sqrt_gram_; }
  Vector cyclic_vector() const { return vec(Matrix::Identity(d_, d_)); }
  /// Left multiplication π(x).
  Superoperator rep(const Matrix& x) const;
  cplx inner(const Vector& a, const Vector& b) const { return a.dot(gram_ * b); }
  /// Rank of {π(E_ab) Ω}.
  Index cyclic_rank() const;
  /// ⟨ξ, π(x) ξ⟩ for every x, as a (possibly unnormalized) density matrix ξ ω ξ†.
  Matrix pullback(const Vector& xi) const;
  /// Distance of ξ from the natural cone: ξ is in the cone iff [ξ] ω^{1/2} ≥ 0.
  double cone_defect(const Vector& xi) const;
  /// Cone representative of a state ψ: [ψ^{1/2} ω^{-1/2}].
  Vector cone_vector(const DensityMatrix& psi) const;

 private:
  GnsSpace(DensityMatrix s) : state_(std::move(s)) {}
  Index d_ = 0;
  DensityMatrix state_;
  Matrix gram_, sqrt_gram_, inv_sqrt_gram_;
  Matrix sqrt_state_, inv_sqrt_state_;
};

/// Matrix of a map H_source → H_target in orthonormal coordinates.
Matrix to_orthonormal(const Superoperator& op, const GnsSpace& source, const GnsSpace& target);
Superoperator from_orthonormal(const Matrix& m, Linearity kind, const GnsSpace& source, const GnsSpace& target);
/// Adjoint with respect to the GNS inner products (H_source → H_target map, adjoint goes back).
Superoperator gns_adjoint(const Superoperator& op, const GnsSpace& source, const GnsSpace& target);

struct RelativeModular {
  Superoperator delta;     // on H_ω
  Superoperator j;         // antilinear H_ω → H_φ
};

/// Polar decomposition of S: [x]_ω ↦ [x†]_φ, S = J Δ^{1/2}.
RelativeModular relative_modular(const DensityMatrix& phi, const DensityMatrix& omega);
Superoperator modular_conjugation(const GnsSpace& gns);

struct ModularFlowReport {
  Matrix evolved;                 // σ_t(x) = ρ^{it} x ρ^{-it}
  double kms_residual;            // max |ω(x σ_{-i}(y)) - ω(y x)| over sampled pairs, flow continued spectrally
  double implementation_residual; // ‖Δ^{it}[x] - [σ_t(x)]‖ with Δ from the polar decomposition
};

ModularFlowReport modular_flow_kms(const DensityMatrix& rho, const HermitianObservable& x, double t,
                                   int sample_pairs = 50, std::uint64_t seed = 0);

/// V_{φ,ω} = J_{φ,φ} J_{φ,ω}: unitary H_ω → H_φ.
Superoperator standard_unitary_transition(const DensityMatrix& phi, const DensityMatrix& omega);

/// K = π(H) - J π(H) J on the given GNS space.
Superoperator standard_liouvillean(const HermitianObservable& h, const GnsSpace& gns);

/// e^{-i t L} for a linear L self-adjoint on the GNS space (computed through orthonormal coordinates).
Superoperator unitary_group(const Superoperator& generator, const GnsSpace& gns, double t);

struct DjpPerturbation {
  Superoperator k_pert;  // K + Q - J Q J
  Superoperator k;
  Superoperator q;
  GnsSpace gns;

  /// E(t) = e^{it(K+Q)} e^{-itK}
  Superoperator expansional(double t) const;
  /// Partial sum of the Dyson series of E(t) through `order` insertions of Q.
  Superoperator dyson_partial_sum(double t, int order) const;
  /// ‖E(t1 + t2) - E(t1) ς_{t1}(E(t2))‖ in orthonormal coordinates.
  double cocycle_residual(double t1, double t2) const;
  /// ς^Q_t(A) = E(t) ς_t(A) E(t)⁻¹ on a linear map A.
  Superoperator perturbed_flow(const Superoperator& a, double t) const;
};

DjpPerturbation djp_perturb(const Superoperator& k, const HermitianObservable& q, const GnsSpace& gns);
/// Q must lie in π(M_d) within 1e-9, otherwise NotRepresented.
DjpPerturbation djp_perturb(const Superoperator& k, const Superoperator& q, const GnsSpace& gns);

/// Liouvillean for which ω is β-KMS: K_ω = -log Δ_ω / β.
Superoperator modular_liouvillean(const GnsSpace& gns, double beta);

/// Ω_Q = e^{-β(K_ω + π(q))/2} Ω_ω, returned as its normalized vector state.
DensityMatrix perturbed_kms_state(const DensityMatrix& omega, const HermitianObservable& q, double beta);

struct CorrelationLink {
  DensityMatrix state;
  Matrix x;
  std::optional<Superoperator> liouvillean;  // on H_state; sandwich e^{itL} π(x) e^{-itL}
  double t = 0.0;
};

cplx npoint_correlation(const DensityMatrix& base, const std::vector<CorrelationLink>& chain);

struct InstrumentResult {
  DensityMatrix state;
  double cone_defect;  // of the evolved vector before any projection
  bool projected;      // defect exceeded 1e-8 and the vector was projected onto the cone
};

struct Source {
  double lambda;
  Matrix h;
};

/// Evolves the cone representative of φ in the GNS space of `reference` (default φ) by
/// e^{-itL}, L = K_h + π(g) - Jπ(g)J + Σ(λπ(H) - Jλπ(H)J), and pulls back to a state.
InstrumentResult liouvillean_instrument_step(const DensityMatrix& phi, const HermitianObservable& h,
                                             const std::optional<HermitianObservable>& gauge,
                                             const std::vector<Source>& sources, double t,
                                             const std::optional<DensityMatrix>& reference = std::nullopt);

}  // namespace qig
