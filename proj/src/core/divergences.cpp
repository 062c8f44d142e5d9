#include "qig/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qig {

double f_gamma_eval(double gamma, double t) {
  if (!(t > 0.0)) {
    std::ostringstream os;
    os << "f_gamma requires t > 0, got " << t;
    fail(ErrorCode::DomainError, os.str());
  }
  if (gamma == 1.0) return t * std::log(t) - (t - 1.0);
  if (gamma == 0.0) return -std::log(t) + (t - 1.0);
  return 1.0 / gamma + t / (1.0 - gamma) - std::pow(t, gamma) / (gamma * (1.0 - gamma));
}

OperatorConvexFunction OperatorConvexFunction::f_gamma(double gamma) {
  OperatorConvexFunction f;
  f.eval = [gamma](double t) { return f_gamma_eval(gamma, t); };
  if (gamma == 0.0)
    f.value_at_0 = kInfinity;
  else if (gamma == 1.0)
    f.value_at_0 = 1.0;
  else if (gamma > 0.0)
    f.value_at_0 = 1.0 / gamma;
  else
    f.value_at_0 = kInfinity;
  std::ostringstream os;
  os << "f_gamma(" << gamma << ")";
  f.label = os.str();
  return f;
}

OperatorConvexFunction OperatorConvexFunction::custom(std::function<double(double)> eval, double value_at_0,
                                                      std::string label) {
  const double at_one = eval(1.0);
  if (std::abs(at_one) > 1e-12) {
    std::ostringstream os;
    os << label << ": f(1) = " << at_one << " is not 0";
    fail(ErrorCode::DomainError, os.str());
  }
  std::vector<double> grid;
  for (int k = 0; k <= 24; ++k) grid.push_back(std::pow(10.0, -3.0 + 6.0 * k / 24.0));
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double x = grid[i], y = grid[j];
      const double mid = eval(0.5 * (x + y));
      const double chord = 0.5 * (eval(x) + eval(y));
      if (mid > chord + 1e-9 * std::max(1.0, std::abs(chord))) {
        std::ostringstream os;
        os << label << ": midpoint convexity fails between " << x << " and " << y;
        fail(ErrorCode::DomainError, os.str());
      }
    }
  return OperatorConvexFunction{std::move(eval), value_at_0, std::move(label)};
}

double quasi_entropy(const OperatorConvexFunction& f, const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) fail(ErrorCode::DimensionMismatch, "quasi_entropy dimension mismatch");
  const Spectrum& sr = rho.spectrum();
  const Spectrum& ss = sigma.spectrum();
  const Matrix overlap = sr.eigenvectors.adjoint() * ss.eigenvectors;
  constexpr double kOverlapFloor = 1e-12;
  constexpr double kSnap = 1e-12;
  double total = 0.0;
  for (Index i = 0; i < overlap.rows(); ++i) {
    const double lam = std::max(0.0, sr.eigenvalues(i));
    for (Index j = 0; j < overlap.cols(); ++j) {
      const double c = std::norm(overlap(i, j));
      const double mu = std::max(0.0, ss.eigenvalues(j));
      if (mu <= kFaithfulFloor) {
        if (lam > kFaithfulFloor && c > kOverlapFloor) return kInfinity;  // support violation
        continue;
      }
      if (c == 0.0) continue;
      double term;
      if (std::abs(lam - mu) <= kSnap * std::max(lam, mu)) {
        term = 0.0;  // f(1) = 0
      } else if (lam <= kFaithfulFloor) {
        if (std::isinf(f.value_at_0)) {
          if (c > kOverlapFloor) return kInfinity;
          continue;
        }
        term = mu * f.value_at_0;
      } else {
        term = mu * f.eval(lam / mu);
      }
      total += c * term;
    }
  }
  return total;
}

DistanceFunctional quasi_entropy_distance(OperatorConvexFunction f) {
  DistanceFunctional d;
  d.label = "D[" + f.label + "]";
  d.kind = DistanceKind::quasi_entropy;
  d.eval = [f = std::move(f)](const DensityMatrix& a, const DensityMatrix& b) { return quasi_entropy(f, a, b); };
  return d;
}

DistanceFunctional f_gamma_distance(double gamma) {
  DistanceFunctional d = quasi_entropy_distance(OperatorConvexFunction::f_gamma(gamma));
  d.gamma = gamma;
  return d;
}

DistanceFunctional hilbert_schmidt_distance() {
  DistanceFunctional d;
  d.label = "half_hs_squared";
  d.kind = DistanceKind::hilbert_schmidt;
  d.eval = [](const DensityMatrix& a, const DensityMatrix& b) {
    return 0.5 * (a.matrix() - b.matrix()).squaredNorm();
  };
  return d;
}

BregmanPotential BregmanPotential::quadratic() {
  return BregmanPotential{[](const Matrix& x) { return 0.5 * x.squaredNorm(); }, [](const Matrix& x) { return x; },
                          "half_hs_norm"};
}

BregmanPotential BregmanPotential::negentropy() {
  BregmanPotential p;
  p.label = "negentropy";
  p.value = [](const Matrix& x) {
    const Spectrum s = Spectrum::of(hermitian_part(x));
    double v = 0.0;
    for (Index i = 0; i < s.eigenvalues.size(); ++i) {
      const double e = std::max(0.0, s.eigenvalues(i));
      if (e > 0.0) v += e * std::log(e);
    }
    return v;
  };
  p.gradient = [](const Matrix& x) {
    const Spectrum s = Spectrum::of(hermitian_part(x));
    if (s.eigenvalues(0) <= 0.0) fail(ErrorCode::NonDifferentiablePoint, "negentropy gradient needs a positive definite point");
    return Matrix(s.map([](double e) { return std::log(e) + 1.0; }));
  };
  return p;
}

namespace embedding {
StateEmbedding identity() {
  return [](const DensityMatrix& r) { return r.matrix(); };
}
StateEmbedding square_root() {
  return [](const DensityMatrix& r) { return Matrix(r.spectrum().map([](double e) { return std::sqrt(std::max(0.0, e)); })); };
}
StateEmbedding diagonal() {
  return [](const DensityMatrix& r) { return Matrix(r.matrix().diagonal().asDiagonal()); };
}
}  // namespace embedding

double bregman_distance(const BregmanPotential& psi, const StateEmbedding& embed, const DensityMatrix& rho,
                        const DensityMatrix& sigma) {
  const Matrix x = embed(rho);
  const Matrix y = embed(sigma);
  const Matrix grad = psi.gradient(y);
  if (!grad.allFinite()) fail(ErrorCode::NonDifferentiablePoint, psi.label + " gradient is not finite");
  return psi.value(x) - psi.value(y) - hs_inner(x - y, grad);
}

DistanceFunctional bregman_distance_functional(BregmanPotential psi, StateEmbedding embed) {
  DistanceFunctional d;
  d.label = "bregman[" + psi.label + "]";
  d.kind = DistanceKind::bregman;
  d.eval = [psi = std::move(psi), embed = std::move(embed)](const DensityMatrix& a, const DensityMatrix& b) {
    return bregman_distance(psi, embed, a, b);
  };
  return d;
}

namespace {

double sqrt_fidelity_overlap(const DensityMatrix& a, const DensityMatrix& b) {
  const Matrix sa = a.spectrum().map([](double e) { return std::sqrt(std::max(0.0, e)); });
  const Matrix sb = b.spectrum().map([](double e) { return std::sqrt(std::max(0.0, e)); });
  return (sa * sb).trace().real();
}

void require_pure(const DensityMatrix& p) {
  const double purity = (p.matrix() * p.matrix()).trace().real();
  if (std::abs(purity - 1.0) > 1e-9 || std::abs(p.trace() - 1.0) > 1e-9)
    fail(ErrorCode::NotPure, "Fubini-Study distance needs rank-one projectors");
}

}  // namespace

double closed_form_distance(ClosedFormKind kind, const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) fail(ErrorCode::DimensionMismatch, "closed_form_distance dimension mismatch");
  switch (kind) {
    case ClosedFormKind::wigner_yanase:
      return 2.0 * std::acos(std::clamp(sqrt_fidelity_overlap(a, b), -1.0, 1.0));
    case ClosedFormKind::fubini_study: {
      require_pure(a);
      require_pure(b);
      const double overlap = (a.matrix() * b.matrix()).trace().real();
      return std::acos(std::clamp(overlap, -1.0, 1.0));
    }
    case ClosedFormKind::d_half: {
      const Matrix sa = a.spectrum().map([](double e) { return std::sqrt(std::max(0.0, e)); });
      const Matrix sb = b.spectrum().map([](double e) { return std::sqrt(std::max(0.0, e)); });
      return 2.0 * (sa - sb).squaredNorm();
    }
  }
  return 0.0;
}

DistanceFunctional closed_form_functional(ClosedFormKind kind) {
  DistanceFunctional d;
  switch (kind) {
    case ClosedFormKind::wigner_yanase:
      d.label = "wigner_yanase";
      d.kind = DistanceKind::wigner_yanase;
      d.smooth = false;  // not differentiable on the diagonal
      break;
    case ClosedFormKind::fubini_study:
      d.label = "fubini_study";
      d.kind = DistanceKind::custom;
      d.smooth = false;
      break;
    case ClosedFormKind::d_half:
      d.label = "d_half";
      d.kind = DistanceKind::d_half;
      break;
  }
  d.eval = [kind](const DensityMatrix& a, const DensityMatrix& b) { return closed_form_distance(kind, a, b); };
  return d;
}

MonotonicityReport monotonicity_check(const DistanceFunctional& distance, const QuantumChannel& channel,
                                      const std::vector<std::pair<DensityMatrix, DensityMatrix>>& pairs) {
  MonotonicityReport report;
  report.margins.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a.dim() != channel.input_dim() || b.dim() != channel.input_dim())
      fail(ErrorCode::DimensionMismatch, "monotonicity_check: channel and state dimensions differ");
    const double before = distance(a, b);
    const double after = distance(apply_channel(channel, a), apply_channel(channel, b));
    double margin = before - after;
    if (std::isinf(before) && std::isinf(after)) margin = 0.0;
    report.margins.push_back(margin);
    report.min_margin = std::min(report.min_margin, margin);
  }
  if (!pairs.empty()) report.max_violation = std::max(0.0, -report.min_margin);
  report.violated = report.min_margin < -kMonotonicitySlack;
  return report;
}

}  // namespace qig
