#pragma once

// Quantum distances: quasi-entropies D_f over the f_gamma family, Bregman
// functionals, Wigner-Yanase and Fubini-Study distances, and sampled CPTP
// monotonicity checks.

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qig/matrix_core.hpp"

namespace qig {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// f_gamma(t) for t > 0 with the three branches gamma ∉ {0,1}, gamma = 1, gamma = 0.
double f_gamma_eval(double gamma, double t);

struct OperatorConvexFunction {
  std::function<double(double)> eval;  // on (0, inf)
  double value_at_0 = 0.0;             // limit t -> 0+, may be +inf
  std::string label;

  static OperatorConvexFunction f_gamma(double gamma);
  /// Checks f(1) = 0 and midpoint convexity on a log grid over [1e-3, 1e3].
  static OperatorConvexFunction custom(std::function<double(double)> eval, double value_at_0, std::string label);
};

enum class DistanceKind { quasi_entropy, bregman, wigner_yanase, d_half, hilbert_schmidt, custom };

struct DistanceFunctional {
  std::function<double(const DensityMatrix&, const DensityMatrix&)> eval;
  bool smooth = true;
  std::string label;
  DistanceKind kind = DistanceKind::custom;
  double gamma = std::numeric_limits<double>::quiet_NaN();  // set for f_gamma quasi-entropies

  double operator()(const DensityMatrix& a, const DensityMatrix& b) const { return eval(a, b); }
  bool is_umegaki() const { return kind == DistanceKind::quasi_entropy && gamma == 1.0; }
};

/// Σ_ij μ_j |<a_i|b_j>|² f(λ_i/μ_j); +inf when supp(ρ) ⊄ supp(σ).
double quasi_entropy(const OperatorConvexFunction& f, const DensityMatrix& rho, const DensityMatrix& sigma);

DistanceFunctional quasi_entropy_distance(OperatorConvexFunction f);
DistanceFunctional f_gamma_distance(double gamma);
inline DistanceFunctional umegaki_distance() { return f_gamma_distance(1.0); }
/// ½ ‖ρ - σ‖²_HS
DistanceFunctional hilbert_schmidt_distance();

/// Convex potential Ψ on Hermitian matrices with its HS gradient.
struct BregmanPotential {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  std::string label;

  /// ½ ‖X‖²_HS
  static BregmanPotential quadratic();
  /// tr(X log X); gradient log X + 1, defined for X > 0.
  static BregmanPotential negentropy();
};

using StateEmbedding = std::function<Matrix(const DensityMatrix&)>;

namespace embedding {
StateEmbedding identity();
StateEmbedding square_root();
/// Diagonal part in the computational basis: the classical embedding of commuting states.
StateEmbedding diagonal();
}  // namespace embedding

/// Ψ(x) - Ψ(y) - <x - y, ∇Ψ(y)> with x = embed(ρ), y = embed(σ).
double bregman_distance(const BregmanPotential& psi, const StateEmbedding& embed, const DensityMatrix& rho,
                        const DensityMatrix& sigma);
DistanceFunctional bregman_distance_functional(BregmanPotential psi, StateEmbedding embed);

enum class ClosedFormKind { wigner_yanase, fubini_study, d_half };

double closed_form_distance(ClosedFormKind kind, const DensityMatrix& a, const DensityMatrix& b);
DistanceFunctional closed_form_functional(ClosedFormKind kind);

struct MonotonicityReport {
  double max_violation = 0.0;  // max(0, -min margin)
  double min_margin = kInfinity;
  std::vector<double> margins;
  bool violated = false;  // some margin < -1e-9
};

inline constexpr double kMonotonicitySlack = 1e-9;

MonotonicityReport monotonicity_check(const DistanceFunctional& distance, const QuantumChannel& channel,
                                      const std::vector<std::pair<DensityMatrix, DensityMatrix>>& pairs);

}  // namespace qig
