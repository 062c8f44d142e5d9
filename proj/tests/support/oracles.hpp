#pragma once

// Reference computations that avoid the engine's spectral code paths: Schur-Parlett
// matrix functions from Eigen's unsupported module, brute-force index loops,
// and textbook closed forms.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using M = Eigen::MatrixXcd;
using C = std::complex<double>;

inline M expm(const M& a) { return a.exp(); }
inline M logm(const M& a) { return a.log(); }
inline M sqrtm(const M& a) { return a.sqrt(); }

/// tr(ρ log ρ - ρ log σ)
inline double umegaki(const M& rho, const M& sigma) {
  return (rho * (logm(rho) - logm(sigma))).trace().real();
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

inline M gibbs(const M& h, double beta) {
  M e = expm(-beta * h);
  return e / e.trace();
}

inline M kron(const M& a, const M& b) {
  M out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Partial trace by explicit index contraction.
inline M trace_out_b(const M& rho, int da, int db) {
  M out = M::Zero(da, da);
  for (int a = 0; a < da; ++a)
    for (int ap = 0; ap < da; ++ap)
      for (int b = 0; b < db; ++b) out(a, ap) += rho(a * db + b, ap * db + b);
  return out;
}
inline M trace_out_a(const M& rho, int da, int db) {
  M out = M::Zero(db, db);
  for (int b = 0; b < db; ++b)
    for (int bp = 0; bp < db; ++bp)
      for (int a = 0; a < da; ++a) out(b, bp) += rho(a * db + b, a * db + bp);
  return out;
}

inline double trace_norm(const M& a) {
  Eigen::SelfAdjointEigenSolver<M> es((a + a.adjoint()) / 2.0);
  return es.eigenvalues().cwiseAbs().sum();
}

/// Solid angle of the triangle (a, b, c) on the unit sphere (Van Oosterom-Strackee).
inline double solid_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

}  // namespace oracle
