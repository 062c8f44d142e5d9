#pragma once

// Geometry induced by a distance: Eguchi tensors by finite differences,
// monotone metrics from operator monotone functions, dually flat charts,
// geodesics and Levi-Civita curvature.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qig/divergences.hpp"
#include "qig/matrix_core.hpp"

namespace qig {

struct StateChart {
  Index param_dim = 0;
  std::function<DensityMatrix(const RealVector&)> map;
  std::string label;

  DensityMatrix operator()(const RealVector& theta) const { return map(theta); }
};

/// Affine Bloch chart around a qubit state: θ ↦ ρ0 + Σ θ_i σ_i / 2.
StateChart bloch_chart(const DensityMatrix& base);
/// Mixture chart of the n-simplex by its first n probabilities (diagonal states).
StateChart simplex_chart(Index outcomes);

struct MetricTensor {
  RealMatrix matrix;

  Index dim() const { return matrix.rows(); }
  double operator()(const RealVector& u, const RealVector& v) const { return u.dot(matrix * v); }
};

using MetricField = std::function<MetricTensor(const RealVector&)>;

/// Rank-3 real array. Lower-index form Γ_ijk = g(∇_i ∂_j, ∂_k) unless noted.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Index n) : n_(n), data_(static_cast<std::size_t>(n * n * n), 0.0) {}

  Index dim() const { return n_; }
  double& operator()(Index i, Index j, Index k) { return data_[static_cast<std::size_t>((i * n_ + j) * n_ + k)]; }
  double operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>((i * n_ + j) * n_ + k)];
  }
  double max_abs() const;
  /// max |T_ijk - T_jik|
  double torsion() const;

 private:
  Index n_ = 0;
  std::vector<double> data_;
};

struct ChristoffelField {
  Tensor3 coeffs;
};

struct EguchiTriple {
  MetricTensor metric;
  ChristoffelField gamma;       // ∇
  ChristoffelField gamma_dual;  // ∇*
};

struct FiniteDifferenceSteps {
  double metric = 1e-3;
  double connection = 5e-3;
};

/// Metric only: g_ij = -∂u_i ∂v_j D(ρ(θ+u), ρ(θ+v)) at 0, Richardson-extrapolated.
MetricTensor eguchi_metric(const DistanceFunctional& d, const StateChart& chart, const RealVector& theta,
                           double step = 1e-3);
EguchiTriple eguchi_tensors(const DistanceFunctional& d, const StateChart& chart, const RealVector& theta,
                            FiniteDifferenceSteps steps = {});
MetricField eguchi_metric_field(DistanceFunctional d, StateChart chart, double step = 1e-3);

struct OperatorMonotoneFunction {
  std::function<double(double)> eval;
  std::string label;

  static OperatorMonotoneFunction bkm();
  static OperatorMonotoneFunction wigner_yanase();
  static OperatorMonotoneFunction bures();
  /// h_f(λ) = (λ-1)² / (f(λ) + λ f(1/λ)), closed form for the f_gamma family.
  static OperatorMonotoneFunction from_f_gamma(double gamma);
  /// Same formula for an arbitrary f, using the limit 1/f''(1) near λ = 1.
  static OperatorMonotoneFunction from_f(const OperatorConvexFunction& f);
};

/// Σ_ij conj(u_ij) v_ij / (λ_j h(λ_i/λ_j)) in the eigenbasis of ρ.
double monotone_metric_eval(const OperatorMonotoneFunction& h, const DensityMatrix& rho, const Matrix& u,
                            const Matrix& v);
double monotone_metric_eval(const OperatorMonotoneFunction& h, const DensityMatrix& rho, const TangentDirection& u,
                            const TangentDirection& v);
/// Pullback of the monotone metric through the chart differential (central differences, step 1e-5).
MetricTensor monotone_metric_tensor(const OperatorMonotoneFunction& h, const StateChart& chart,
                                    const RealVector& theta);

/// |g(∇_u v, w) + g(v, ∇*_u w) - u(g(v, w))| with ∂g from central differences of the field.
double norden_sen_residual(const MetricField& g, const ChristoffelField& gamma, const ChristoffelField& gamma_dual,
                           const RealVector& theta, const RealVector& u, const RealVector& v, const RealVector& w,
                           double step = 1e-3);

/// Potential Ψ with its Legendre structure. θ are the primal coordinates, η = ∇Ψ.
class DuallyFlatChart {
 public:
  struct Potential {
    std::function<double(const RealVector&)> value;
    std::function<RealVector(const RealVector&)> gradient;
    std::function<RealMatrix(const RealVector&)> hessian;
  };

  DuallyFlatChart(Index dim, Potential psi, std::optional<StateChart> states, std::vector<Matrix> observables,
                  std::string label);

  /// Ψ(θ) = ½ θᵀKθ + bᵀθ.
  static DuallyFlatChart quadratic(const RealMatrix& k, const RealVector& b);

  Index dim() const { return dim_; }
  const std::string& label() const { return label_; }
  double psi(const RealVector& theta) const { return psi_.value(theta); }
  RealVector eta(const RealVector& theta) const { return psi_.gradient(theta); }
  RealMatrix hessian(const RealVector& theta) const { return psi_.hessian(theta); }
  /// L⁻¹: solves ∇Ψ(θ) = η by damped Newton from `start` (default 0).
  RealVector theta_of(const RealVector& eta, const std::optional<RealVector>& start = std::nullopt) const;
  /// Ψ*(η) = sup_θ (θ·η - Ψ(θ)).
  double psi_dual(const RealVector& eta) const;
  /// Ψ(θ) - θ·η(θ): the maximized entropy for exponential families.
  double entropy(const RealVector& theta) const;
  /// D_Ψ(θ', θ) = Ψ(θ') - Ψ(θ) - (θ' - θ)·η(θ).
  double bregman(const RealVector& theta_prime, const RealVector& theta) const;

  bool has_states() const { return states_.has_value(); }
  const StateChart& states() const;
  DensityMatrix state(const RealVector& theta) const { return states().map(theta); }
  const std::vector<Matrix>& observables() const { return observables_; }
  MetricField metric_field() const;

 private:
  Index dim_;
  Potential psi_;
  std::optional<StateChart> states_;
  std::vector<Matrix> observables_;
  std::string label_;
};

enum class FamilyKind { classical, quantum };

/// ρ(θ) ∝ exp(Σ θ_k F_k). Classical families require diagonal observables.
DuallyFlatChart build_exponential_family(const std::vector<Matrix>& observables, FamilyKind kind);

/// Index-raised Christoffel symbols Γ^a_bc as a field.
using ConnectionField = std::function<Tensor3(const RealVector&)>;

struct GeodesicPoint {
  double t;
  RealVector theta;
  RealVector velocity;
};

/// Γ^a_ij = g^{ak} Γ_ijk
Tensor3 raise_index(const ChristoffelField& lower, const MetricTensor& g);

/// RK4 for θ̈ᵃ + Γᵃ_bc θ̇ᵇ θ̇ᶜ = 0. BlowUp when |θ| exceeds max_norm or leaves `domain`.
std::vector<GeodesicPoint> geodesic_shoot(const ConnectionField& gamma, const RealVector& theta0,
                                          const RealVector& v0, double t_final, double dt,
                                          const std::function<bool(const RealVector&)>& domain = {},
                                          double max_norm = 1e6);

/// Γ^a_bc of the Levi-Civita connection of g, by Richardson-extrapolated central differences.
Tensor3 levi_civita(const MetricField& g, const RealVector& theta, double step = 1e-3);
ConnectionField levi_civita_field(MetricField g, double step = 1e-3);

/// Scalar curvature of the Levi-Civita connection at θ (n ≥ 2).
double scalar_curvature(const MetricField& g, const RealVector& theta, double step = 1e-3);

/// Riemannian distance by Newton shooting on the initial velocity.
double geodesic_distance(const MetricField& g, const RealVector& a, const RealVector& b, int steps = 200,
                         const std::function<bool(const RealVector&)>& domain = {});

/// Closed-form Fisher metric of the mixture chart of the simplex.
MetricField fisher_simplex_metric(Index outcomes);

}  // namespace qig
