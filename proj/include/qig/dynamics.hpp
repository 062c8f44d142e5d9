#pragma once

// Causal and inferential state dynamics: Lie-Poisson brackets and Bona flows,
// entropic projections onto constraint sets, their composition into causal
// inference instruments, and a Strang-split effective local step.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qig/divergences.hpp"
#include "qig/info_geometry.hpp"
#include "qig/matrix_core.hpp"

namespace qig {

/// Smooth function on Hermitian matrices near the state space, with its
/// Frechet derivative represented through tr(v · gradient).
struct HamiltonianFunction {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  std::string label;

  double operator()(const DensityMatrix& rho) const { return value(rho.matrix()); }
  Matrix grad(const DensityMatrix& rho) const { return gradient(rho.matrix()); }

  /// tr(ρX): the von Neumann case.
  static HamiltonianFunction linear(const HermitianObservable& x);
  /// tr(ρH) + Σ ½ λ_k tr(ρA_k)²
  static HamiltonianFunction mean_field(const HermitianObservable& h,
                                        const std::vector<std::pair<double, HermitianObservable>>& squares);
  /// ½ Σ c_ij tr(ρA_i) tr(ρA_j) with symmetric c.
  static HamiltonianFunction quadratic(const std::vector<HermitianObservable>& a, const RealMatrix& c);
};

/// (h(ρ+εv) - h(ρ-εv)) / 2ε - tr(v ∇h(ρ)).
double gradient_consistency(const HamiltonianFunction& h, const DensityMatrix& rho, const Matrix& v,
                            double eps = 1e-5);

/// {f, k}(ρ) = i tr(ρ [∇f, ∇k])
double poisson_bracket(const HamiltonianFunction& f, const HamiltonianFunction& k, const DensityMatrix& rho);
/// ρ ↦ {f, k}(ρ) as a function, gradient by central differences on a traceless Hermitian basis.
HamiltonianFunction bracket_function(HamiltonianFunction f, HamiltonianFunction k, double step = 1e-5);
/// |{f,{g,k}} + {g,{k,f}} + {k,{f,g}}|
double jacobi_residual(const HamiltonianFunction& f, const HamiltonianFunction& g, const HamiltonianFunction& k,
                       const DensityMatrix& rho);

struct TrajectoryPoint {
  double t;
  DensityMatrix state;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  int halvings = 0;  // total dt halvings forced by positivity

  const DensityMatrix& final_state() const { return points.back().state; }
};

/// RK4 for ρ̇ = -i[∇h(ρ), ρ]. Steps dropping below -1e-8 in the spectrum are retried
/// with half the step, at most 20 times (StepRejected after that).
Trajectory hamiltonian_flow(const HamiltonianFunction& h, const DensityMatrix& rho0, double t_final, double dt,
                            int record_every = 1);
DensityMatrix evolve(const HamiltonianFunction& h, const DensityMatrix& rho0, double t_final, double dt = 1e-3);

enum class ConstraintKind { expectation_equalities, commutant_blocks, product_marginal };

struct ConstraintSet {
  ConstraintKind kind = ConstraintKind::expectation_equalities;
  std::vector<HermitianObservable> observables;  // expectation_equalities
  std::vector<double> targets;
  std::vector<Matrix> blocks;                    // commutant_blocks: orthogonal projectors summing to 1
  Index dim_a = 0, dim_b = 0;                    // product_marginal
  double tolerance = 1e-9;

  static ConstraintSet expectations(std::vector<HermitianObservable> obs, std::vector<double> targets);
  static ConstraintSet commutant(std::vector<Matrix> projectors);
  static ConstraintSet product(Index dim_a, Index dim_b);
  /// No constraint at all: the full state space.
  static ConstraintSet full() { return {}; }

  Index dim() const;
  bool contains(const DensityMatrix& sigma) const;
  /// Largest constraint violation of sigma.
  double violation(const DensityMatrix& sigma) const;
};

/// Which slot of D the constrained state occupies.
///   automatic: D(σ, ω) for expectation constraints (exponential tilt for D₁),
///              D(ω, σ) for commutant and product constraints (Lüders and marginals for D₁).
enum class ProjectionOrder { automatic, constrained_first, constrained_second };

struct ProjectionReport {
  DensityMatrix state;
  double objective;
  double constraint_residual;
  int iterations;
  std::string method;
};

ProjectionReport entropic_projection_report(const DistanceFunctional& d, const ConstraintSet& q,
                                            const DensityMatrix& omega,
                                            ProjectionOrder order = ProjectionOrder::automatic);
DensityMatrix entropic_projection(const DistanceFunctional& d, const ConstraintSet& q, const DensityMatrix& omega,
                                  ProjectionOrder order = ProjectionOrder::automatic);

/// |D(x, ω) - D(x, P(ω)) - D(P(ω), ω)| for x in an affine Q.
double pythagorean_residual(const DistanceFunctional& d, const ConstraintSet& q, const DensityMatrix& omega,
                            const DensityMatrix& x);

/// Bregman version in primal coordinates of a potential: Q = {θ : Aθ = c}.
struct AffineProjection {
  RealVector theta;
  double residual;
};
/// Minimizes D_Ψ(θ', θ_ω) over the affine set by Newton on the KKT system; the
/// residual is the Pythagorean defect at x ∈ Q.
AffineProjection bregman_affine_projection(const DuallyFlatChart& chart, const RealMatrix& a, const RealVector& c,
                                           const RealVector& theta_omega, const RealVector& x);

/// P^D_Q ∘ w^h_t (flow first, then project).
DensityMatrix causal_inference_step(const HamiltonianFunction& h, double t, const DistanceFunctional& d,
                                    const ConstraintSet& q, const DensityMatrix& phi, double dt = 1e-3);

/// Half hamiltonian step, a D_{1/2} drift of duration dt toward the projection
/// onto the constraint (rate κ, in square-root coordinates), half hamiltonian step.
DensityMatrix effective_local_step(const HamiltonianFunction& h, const DensityMatrix& rho, double dt,
                                   const std::optional<ConstraintSet>& constraint, double rate = 1.0);

/// Direct RK4 of the combined field Ẋ = -i[∇h(X²), X] + κ(Y(X) - X)_⊥ in square-root
/// coordinates, Y the square root of the D_{1/2} projection. Reference for the splitting.
DensityMatrix effective_local_reference(const HamiltonianFunction& h, const DensityMatrix& rho, double t_final,
                                        double dt, const ConstraintSet& constraint, double rate = 1.0);

}  // namespace qig
