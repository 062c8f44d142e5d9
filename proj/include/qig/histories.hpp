#pragma once

// Projector histories, the histories functional, discrete geometric phases,
// time-sliced spin-coherent propagators, entropic priors and path weights.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qig/divergences.hpp"
#include "qig/info_geometry.hpp"
#include "qig/matrix_core.hpp"

namespace qig {

struct HistorySpec {
  std::vector<Matrix> projectors;
  std::vector<double> times;  // strictly increasing, measured from t₀ = 0

  /// Projectors must be Hermitian idempotents within 1e-9; BadTimes for unordered times.
  static HistorySpec validate(std::vector<Matrix> projectors, std::vector<double> times);
  /// All-identity history on the given grid.
  static HistorySpec trivial(Index dim, std::vector<double> times);
  Index dim() const { return projectors.front().rows(); }
  std::size_t length() const { return projectors.size(); }
};

/// C = P₁(t₁) P₂(t₂) ⋯ Pₙ(tₙ) with Heisenberg projectors P(t) = e^{iHt} P e^{-iHt}.
Matrix class_operator(const HistorySpec& history, const HermitianObservable& h);
/// tr(C† ρ C)
double history_probability(const DensityMatrix& rho, const HistorySpec& history, const HermitianObservable& h);
/// tr(C_ϖ† ρ C_ϑ); GridMismatch unless both histories use the same times.
cplx histories_functional(const DensityMatrix& rho, const HermitianObservable& h, const HistorySpec& varpi,
                          const HistorySpec& vartheta);

/// arg(⟨ζ₀|ζ_N⟩ Π_k ⟨ζ_{k+1}|ζ_k⟩) in (-π, π]. For a closed path the last vector must equal the
/// first up to phase. ZeroOverlap when a consecutive or endpoint overlap vanishes.
double geometric_phase(const std::vector<Vector>& path, bool closed);

struct CoherentFamily {
  Index label_dim = 0;
  Index dim = 0;
  std::function<Vector(const RealVector&)> vector_map;
  std::vector<RealVector> nodes;
  std::vector<double> weights;  // ∫ |z⟩⟨z| dμ ≈ Σ w_i |z_i⟩⟨z_i|
  double identity_residual = 0.0;
  std::string label;

  cplx overlap(const RealVector& a, const RealVector& b) const { return vector_map(a).dot(vector_map(b)); }

  /// Checks unit norms on the nodes and records the resolution-of-identity residual.
  static CoherentFamily build(Index label_dim, Index dim, std::function<Vector(const RealVector&)> map,
                              std::vector<RealVector> nodes, std::vector<double> weights, std::string label);
  /// Spin-j coherent vectors |θ, φ⟩ (two_j = 2j ≥ 1), product rule of Gauss-Legendre in cos θ
  /// and a uniform rule in φ; the default 6 x 12 grid is exact through degree 11.
  static CoherentFamily spin(int two_j, int n_theta = 6, int n_phi = 12);
};

enum class SliceKernel {
  linearized,    // ⟨z_{k+1}|(1 - iεH)|z_k⟩
  lower_symbol,  // ⟨z_{k+1}|z_k⟩ e^{-iε⟨z_k|H|z_k⟩}
};

struct SliceOptions {
  SliceKernel kernel = SliceKernel::linearized;
  std::optional<double> regulator;  // υ: extra factor exp(-(1/2υ) (1 - |⟨z_{k+1}|z_k⟩|²) / ε)
};

struct PropagatorResult {
  cplx amplitude;
  cplx exact;  // ⟨z_end| e^{-iHs} |z_start⟩
  double error;
  double identity_residual;
  int slices;
};

/// N-slice amplitude with N - 1 intermediate integrations over the family's quadrature,
/// evaluated as a transfer matrix. QuadratureTooCoarse if the identity residual exceeds 1e-4.
PropagatorResult sliced_propagator(const CoherentFamily& family, const HermitianObservable& h,
                                   const RealVector& z_start, const RealVector& z_end, double s, int slices,
                                   const SliceOptions& options = {});

struct MonteCarloOptions {
  int strata_theta = 6, strata_phi = 12;  // one uniform point per cell and batch
  int batches = 16;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct MonteCarloResult {
  cplx mean;
  double std_error;  // batch means
  cplx exact;
  int batches;
};

/// Spin families only: each batch draws a fresh stratified node set on the sphere.
MonteCarloResult sliced_propagator_mc(int two_j, const HermitianObservable& h, const RealVector& z_start,
                                      const RealVector& z_end, double s, int slices, const MonteCarloOptions& mc,
                                      const SliceOptions& options = {});

struct ConvergenceReport {
  std::vector<int> slices;
  std::vector<double> errors;
  std::vector<double> observed_orders;    // log₂(e_N / e_{2N})
  std::vector<double> richardson_orders;  // log₂(|A_N - A_{2N}| / |A_{2N} - A_{4N}|)
};

ConvergenceReport propagator_convergence(const CoherentFamily& family, const HermitianObservable& h,
                                         const RealVector& z_start, const RealVector& z_end, double s,
                                         const std::vector<int>& slices, const SliceOptions& options = {});

/// det g_FS(ξ) - h(ξ)^{-2n} along a path of labels, g_FS pulled back by central differences.
std::vector<double> klauder_maraner_residual(const CoherentFamily& family, const HermitianObservable& h,
                                             const std::vector<RealVector>& path, double step = 1e-5);

struct PriorSpec {
  double k = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  DensityMatrix reference;
  std::optional<DistanceFunctional> base_distance;  // defaults to D_α

  static PriorSpec make(double k, double alpha, double beta, DensityMatrix reference);
};

/// Density relative to the Jeffreys volume:
///   β = 1: exp(-k D_α(p, p₀));  β ≠ 1: (1 + k(1-β) D_α(p, p₀))^{-2/(1+β)}.
double entropic_prior_density(const PriorSpec& spec, const DensityMatrix& p);
/// √|det g|
double jeffreys_factor(const MetricTensor& g);

struct PathWeight {
  double weight;        // exp(action) · jeffreys
  double action;        // -k Σ D(φ + εφ̇, φ) dt
  double jeffreys;      // 1 when no chart is given
  int shrinks;          // total ε halvings forced by positivity
};

/// Trapezoid sum over t = 0, dt, ..., s; φ̇ by second-order differences of the trajectory.
PathWeight path_weight(const std::function<DensityMatrix(double)>& trajectory, double s,
                       const DistanceFunctional& d, double k, double eps, double dt,
                       const std::optional<std::pair<StateChart, RealVector>>& chart = std::nullopt);

}  // namespace qig
