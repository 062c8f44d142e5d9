#pragma once

// Validated complex-matrix domain types and the spectral calculus shared by
// every other module. All values are immutable after construction.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qig/errors.hpp"

namespace qig {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPositivityTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kFaithfulFloor = 1e-12;
inline constexpr double kChannelTol = 1e-9;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
struct Spectrum {
  RealVector eigenvalues;
  Matrix eigenvectors;

  static Spectrum of(const Matrix& hermitian);

  Matrix reconstruct() const;
  /// U f(Λ) U† without validating f.
  Matrix map(const std::function<double(double)>& f) const;
  Matrix map_complex(const std::function<cplx(double)>& f) const;
};

enum class TraceMode { normalized, subnormalized };

class DensityMatrix {
 public:
  /// Symmetrizes within kHermitianTol, clips eigenvalues in [-kPositivityTol, 0).
  static DensityMatrix validate(const Matrix& m, TraceMode mode = TraceMode::normalized);

  const Matrix& matrix() const noexcept { return matrix_; }
  Index dim() const noexcept { return matrix_.rows(); }
  TraceMode trace_mode() const noexcept { return mode_; }
  const Spectrum& spectrum() const noexcept { return spectrum_; }
  double min_eigenvalue() const { return spectrum_.eigenvalues(0); }
  bool faithful() const { return min_eigenvalue() >= kFaithfulFloor; }
  double trace() const { return matrix_.trace().real(); }

 private:
  DensityMatrix(Matrix m, TraceMode mode, Spectrum s)
      : matrix_(std::move(m)), mode_(mode), spectrum_(std::move(s)) {}

  Matrix matrix_;
  TraceMode mode_;
  Spectrum spectrum_;
};

class HermitianObservable {
 public:
  static HermitianObservable validate(const Matrix& m);

  const Matrix& matrix() const noexcept { return matrix_; }
  Index dim() const noexcept { return matrix_.rows(); }

 private:
  explicit HermitianObservable(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

/// Hermitian traceless matrix: a tangent vector to the normalized state space.
class TangentDirection {
 public:
  static TangentDirection validate(const Matrix& m);

  const Matrix& matrix() const noexcept { return matrix_; }
  Index dim() const noexcept { return matrix_.rows(); }

 private:
  explicit TangentDirection(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

class QuantumChannel {
 public:
  /// Kraus operators share one shape (output_dim x input_dim); Σ K†K = 1 within kChannelTol.
  static QuantumChannel from_kraus(std::vector<Matrix> kraus);

  static QuantumChannel identity(Index dim);
  /// ρ ↦ (1-p)ρ + p tr(ρ) 1/d. p = 1 is the fully depolarizing channel.
  static QuantumChannel depolarizing(Index dim, double p);
  static QuantumChannel amplitude_damping(double gamma);
  /// Random Stinespring isometry with `kraus_count` Kraus operators.
  static QuantumChannel random(Index dim, Index kraus_count, Rng& rng);

  const std::vector<Matrix>& kraus() const noexcept { return kraus_; }
  Index input_dim() const { return kraus_.front().cols(); }
  Index output_dim() const { return kraus_.front().rows(); }

  /// Linear extension Σ K X K† on arbitrary matrices (used on tangent directions).
  Matrix apply(const Matrix& x) const;

 private:
  explicit QuantumChannel(std::vector<Matrix> k) : kraus_(std::move(k)) {}
  std::vector<Matrix> kraus_;
};

/// Scalar function on a Hermitian spectrum. f may return a non-finite value;
/// `value_at_zero` supplies the finite limit at 0 when one exists.
struct ScalarFunction {
  std::function<double(double)> eval;
  std::optional<double> value_at_zero;
};

Matrix matrix_function(const ScalarFunction& f, const Matrix& hermitian);
Matrix matrix_function(const std::function<double(double)>& f, const Matrix& hermitian);

DensityMatrix apply_channel(const QuantumChannel& channel, const DensityMatrix& rho);

/// Reduced state on subsystem `keep` (0 = A, 1 = B) of a d_A x d_B split.
DensityMatrix partial_trace(const DensityMatrix& rho, Index dim_a, Index dim_b, int keep);

/// Ginibre state mixed with the maximally mixed state: 0.95 ρ + 0.05 1/d.
DensityMatrix random_faithful_state(Index dim, std::uint64_t seed);
DensityMatrix random_faithful_state(Index dim, Rng& rng);
Matrix random_unitary(Index dim, Rng& rng);
Matrix random_hermitian(Index dim, Rng& rng);
Matrix random_traceless_hermitian(Index dim, Rng& rng);
Matrix ginibre(Index rows, Index cols, Rng& rng);

// Small helpers used throughout.
Matrix dagger(const Matrix& m);
double hermitian_residual(const Matrix& m);
Matrix hermitian_part(const Matrix& m);
Matrix kron(const Matrix& a, const Matrix& b);
double hs_inner(const Matrix& a, const Matrix& b);  // Re tr(a† b)
double trace_distance(const Matrix& a, const Matrix& b);
Matrix projector(const Vector& v);
Matrix exp_hermitian(const Matrix& hermitian, cplx factor);  // exp(factor · H)
Matrix sqrt_psd(const Matrix& m);
Matrix log_pd(const Matrix& m);
DensityMatrix maximally_mixed(Index dim);
DensityMatrix pure_state(const Vector& v);
DensityMatrix gibbs_state(const Matrix& hamiltonian, double beta);

namespace pauli {
Matrix identity();
Matrix x();
Matrix y();
Matrix z();
}  // namespace pauli

}  // namespace qig
