#pragma once

// Source renormalization on covariance models (Jaynes-Mitchell), its dually
// flat form (Favretti), the first law split into work and heat, and CPTP
// contraction coefficients with the markovian rescaling of constraints.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qig/divergences.hpp"
#include "qig/info_geometry.hpp"
#include "qig/matrix_core.hpp"

namespace qig {

/// Disjoint index sets covering 0..n-1: A driving, B response, C control.
struct BlockPartition {
  std::vector<Index> a, b, c;
};

struct BlockModel {
  RealMatrix k;  // symmetric positive semidefinite; K_CC and K_AA must be invertible
  BlockPartition blocks;

  static BlockModel validate(const RealMatrix& k, BlockPartition blocks);
  RealMatrix block(const std::vector<Index>& rows, const std::vector<Index>& cols) const;
};

struct RenormalizedBlocks {
  RealMatrix k_aa, k_ab, k_ba, k_bb;  // K̃_XY = K_XY - K_XC K_CC⁻¹ K_CY
  RealMatrix r2_ac;                   // K_AA⁻¹ K_AC K_CC⁻¹ K_CA
  RealMatrix factor;                  // (1 - R²_AC)⁻¹, NaN entries when singular
  bool factor_finite = true;
  double identity_residual = 0.0;     // ‖K̃_AA - K_AA(1 - R²_AC)‖
};

RenormalizedBlocks block_renormalize(const BlockModel& model);
/// δQ̃_A = (1 - R²_AC)⁻¹ δQ_A
RealVector renormalized_source(const RenormalizedBlocks& r, const RealVector& delta_q_a);

struct PropagatorSeries {
  /// S_N = (G_BA - G_BC G_CA) Σ_{n≤N} (G_AC G_CA)ⁿ with G_ij = K_ij K_jj⁻¹, one entry per N = 0..order.
  std::vector<RealMatrix> partial_sums;
  double spectral_radius = 0.0;  // of R²_AC
  bool convergent = true;        // false is the DivergentSeries flag
  RealMatrix limit;              // K̃_BA K̃_AA⁻¹ when convergent
};

PropagatorSeries propagator_series(const BlockModel& model, int order);

/// Mixed coordinates: θ_B fixed, η_A and η_C prescribed; solves for θ_A, θ_C by Newton.
RealVector mixed_coordinate_solve(const DuallyFlatChart& chart, const BlockPartition& blocks,
                                  const RealVector& theta_b, const RealVector& eta_a, const RealVector& eta_c,
                                  const RealVector& start);

struct FavrettiTrajectory {
  std::vector<double> t;
  std::vector<RealVector> eta_b;
  std::vector<RealVector> theta;
  RealVector eta_b_direct;  // one-shot constrained solve at t = 1
};

/// Integrates η̇_B = Ψ̃_{,BA} (Ψ̃_{,AA})⁻¹ η̇_A along t ↦ η_A(t), t ∈ [0, 1] (RK4), with θ_B and
/// η_C frozen at their values in theta_start. η_A(0) must match theta_start.
FavrettiTrajectory favretti_response(const DuallyFlatChart& chart, const BlockPartition& blocks,
                                     const RealVector& theta_start,
                                     const std::function<RealVector(double)>& eta_a_path, int steps = 100);

struct FirstLaw {
  RealVector d_expectation;  // δ⟨f⟩
  RealVector d_work;         // ⟨δf⟩
  RealVector d_heat;         // δ⟨f⟩ - ⟨δf⟩
  double d_entropy = 0.0;
  RealVector lambda;         // natural parameters in the ρ ∝ exp(-λ·f) convention
  double entropy_residual = 0.0;  // |δS - λ·δQ|
};

/// States and observables before and after the change; λ of the initial state.
FirstLaw first_law_decompose(const DensityMatrix& p, const DensityMatrix& p_next, const std::vector<Matrix>& f,
                             const std::vector<Matrix>& f_next, const RealVector& lambda);
/// ρ ∝ exp(θ·f(r)) with observables depending on external parameters r.
FirstLaw first_law_decompose(const std::function<std::vector<Matrix>(const RealVector&)>& observables,
                             const RealVector& theta, const RealVector& delta_theta, const RealVector& r,
                             const RealVector& delta_r);

enum class ContractionKind { divergence, metric, geodesic };

struct Sampler {
  int count = 2000;
  std::uint64_t seed = 0;
  int workers = 1;
  int refine_iterations = 200;
};

struct ContractionReport {
  ContractionKind kind;
  double value = 0.0;  // sampled lower bound of the supremum
  std::optional<DensityMatrix> witness_a, witness_b;
  std::optional<Matrix> direction;  // metric kind
  int sample_count = 0;
};

/// D_f together with the monotone metric it induces.
struct ContractionModel {
  DistanceFunctional distance;
  OperatorMonotoneFunction metric;

  static ContractionModel f_gamma(double gamma);
};

ContractionReport contraction_coefficient(ContractionKind kind, const ContractionModel& model,
                                          const QuantumChannel& channel, const Sampler& sampler);

struct ContractionChain {
  ContractionReport divergence, metric, geodesic;
  double max_violation = 0.0;  // largest positive step in 1 ≥ η_D ≥ η_g ≥ η_geo
};

/// All three coefficients, each refinement also seeded by the witnesses of the
/// next one down the chain (geodesic points → metric, metric directions → divergence).
ContractionChain contraction_chain(const ContractionModel& model, const QuantumChannel& channel,
                                   const Sampler& sampler);

/// Riemannian distance of a monotone metric between qubit states. The geodesic stays in the
/// plane through the origin and both Bloch vectors, where the metric is rotationally symmetric.
double qubit_geodesic_distance(const OperatorMonotoneFunction& h, const DensityMatrix& a, const DensityMatrix& b);

using StateFunctional = std::function<double(const DensityMatrix&)>;

/// F ↦ η⁻¹ F ∘ T
StateFunctional markov_rescale(StateFunctional f, QuantumChannel channel, double eta);

struct FixedPointResidual {
  double constraint;  // |η F(φ) - F(Tφ)|
  double distance;    // |η D(ω, φ) - D(Tω, Tφ)|
};

FixedPointResidual fixed_point_check(const DistanceFunctional& d, const StateFunctional& f,
                                     const QuantumChannel& channel, const DensityMatrix& omega,
                                     const DensityMatrix& phi, double eta);

}  // namespace qig
