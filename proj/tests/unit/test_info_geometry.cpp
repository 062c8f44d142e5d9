#include <doctest.h>

#include <cmath>

#include "qig/info_geometry.hpp"
#include "support/oracles.hpp"

using namespace qig;

namespace {

RealVector vec(std::initializer_list<double> xs) {
  RealVector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Matrix diag(std::initializer_list<double> xs) {
  Matrix m = Matrix::Zero(static_cast<Index>(xs.size()), static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) m(i, i) = x, ++i;
  return m;
}

// Bloch vector of length ≤ 0.8 in a random direction
DensityMatrix random_qubit(Rng& rng) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 0.8);
  RealVector r = vec({n(rng), n(rng), n(rng)});
  r *= u(rng) / r.norm();
  return DensityMatrix::validate(0.5 * (pauli::identity() + r(0) * pauli::x() + r(1) * pauli::y() + r(2) * pauli::z()));
}

}  // namespace

TEST_CASE("binary Fisher metric from relative entropy") {
  auto chart = simplex_chart(2);
  auto g = eguchi_metric(umegaki_distance(), chart, vec({0.5}));
  CHECK(std::abs(g.matrix(0, 0) - 4.0) < 1e-7);
  auto g3 = eguchi_metric(umegaki_distance(), chart, vec({0.3}));
  CHECK(std::abs(g3.matrix(0, 0) - (1 / 0.3 + 1 / 0.7)) < 1e-6);
}

TEST_CASE("quadratic distance is flat") {
  auto chart = bloch_chart(random_faithful_state(2, 4));
  auto t = eguchi_tensors(hilbert_schmidt_distance(), chart, vec({0.01, -0.02, 0.03}));
  CHECK(t.gamma.coeffs.max_abs() < 1e-6);
  CHECK(t.gamma_dual.coeffs.max_abs() < 1e-6);
  CHECK((t.metric.matrix - 0.5 * RealMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Eguchi metric symmetry and torsion freedom") {
  Rng rng(1);
  for (double g : {0.0, 0.5, 1.0}) {
    auto chart = bloch_chart(random_qubit(rng));
    auto t = eguchi_tensors(f_gamma_distance(g), chart, RealVector::Zero(3));
    CHECK((t.metric.matrix - t.metric.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(t.gamma.coeffs.torsion() < 1e-6);
  }
}

TEST_CASE("non-smooth distances are rejected") {
  auto chart = simplex_chart(2);
  try {
    eguchi_metric(closed_form_functional(ClosedFormKind::wigner_yanase), chart, vec({0.5}));
    FAIL("expected NonSmoothDistance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonSmoothDistance);
  }
}

TEST_CASE("operator monotone functions") {
  auto bkm = OperatorMonotoneFunction::bkm();
  CHECK(std::abs(bkm.eval(4.0) - 3.0 / std::log(4.0)) < 1e-12);
  CHECK(std::abs(bkm.eval(4.0) - 2.164043) < 1e-6);
  CHECK(std::abs(OperatorMonotoneFunction::wigner_yanase().eval(1.0) - 1.0) < 1e-15);
  auto wy_fam = OperatorMonotoneFunction::from_f_gamma(0.5);
  auto wy_f = OperatorMonotoneFunction::from_f(OperatorConvexFunction::f_gamma(0.5));
  auto bkm_f = OperatorMonotoneFunction::from_f(OperatorConvexFunction::f_gamma(1.0));
  for (double x : {0.01, 0.3, 0.99999, 1.0, 1.00001, 2.5, 40.0}) {
    const double wy = OperatorMonotoneFunction::wigner_yanase().eval(x);
    CHECK(std::abs(wy_fam.eval(x) - wy) < 1e-8 * wy);
    CHECK(std::abs(wy_f.eval(x) - wy) < 1e-6 * wy);
    CHECK(std::abs(bkm_f.eval(x) - bkm.eval(x)) < 1e-6 * bkm.eval(x));
  }
  // γ = 0.3 against its defining quotient away from 1
  auto h3 = OperatorMonotoneFunction::from_f_gamma(0.3);
  for (double x : {0.1, 3.0}) {
    const double quotient = (x - 1) * (x - 1) / (f_gamma_eval(0.3, x) + x * f_gamma_eval(0.3, 1 / x));
    CHECK(std::abs(h3.eval(x) - quotient) < 1e-12 * quotient);
  }
}

TEST_CASE("monotone metric closed values") {
  auto rho = maximally_mixed(2);
  auto u = TangentDirection::validate(diag({0.5, -0.5}));
  CHECK(std::abs(monotone_metric_eval(OperatorMonotoneFunction::bkm(), rho, u, u) - 1.0) < 1e-12);
  // classical Fisher Σ u_i²/p_i on commuting data for every h
  auto p = DensityMatrix::validate(diag({0.2, 0.8}));
  for (auto h : {OperatorMonotoneFunction::bkm(), OperatorMonotoneFunction::bures(),
                 OperatorMonotoneFunction::wigner_yanase()})
    CHECK(std::abs(monotone_metric_eval(h, p, u, u) - (0.25 / 0.2 + 0.25 / 0.8)) < 1e-12);
  // Bures on |X| directions: 2|u01|²·2/(λ0+λ1)
  Matrix x = pauli::x();
  CHECK(std::abs(monotone_metric_eval(OperatorMonotoneFunction::bures(), p, x, x) - 4.0) < 1e-12);
  try {
    monotone_metric_eval(OperatorMonotoneFunction::bkm(), DensityMatrix::validate(diag({1.0, 0.0})), u, u);
    FAIL("expected NotFaithful");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFaithful);
  }
}

TEST_CASE("relative entropy metric is BKM on random qubit charts") {
  Rng rng(2024);
  auto d1 = umegaki_distance();
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto chart = bloch_chart(random_qubit(rng));
    const RealVector o = RealVector::Zero(3);
    RealMatrix eg = eguchi_metric(d1, chart, o).matrix;
    RealMatrix bk = monotone_metric_tensor(OperatorMonotoneFunction::bkm(), chart, o).matrix;
    worst = std::max(worst, (eg - bk).norm() / bk.norm());
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("half relative entropy metric is Wigner-Yanase") {
  Rng rng(5);
  auto chart = bloch_chart(random_qubit(rng));
  RealMatrix eg = eguchi_metric(f_gamma_distance(0.5), chart, RealVector::Zero(3)).matrix;
  RealMatrix wy = monotone_metric_tensor(OperatorMonotoneFunction::wigner_yanase(), chart, RealVector::Zero(3)).matrix;
  CHECK((eg - wy).norm() / wy.norm() < 1e-4);
}

TEST_CASE("Norden-Sen duality of Eguchi triples") {
  auto d1 = umegaki_distance();
  auto chart = simplex_chart(2);
  auto t = eguchi_tensors(d1, chart, vec({0.3}));
  auto field = eguchi_metric_field(d1, chart);
  CHECK(norden_sen_residual(field, t.gamma, t.gamma_dual, vec({0.3}), vec({1}), vec({1}), vec({1})) < 1e-4);

  // flat quadratic chart
  auto qc = DuallyFlatChart::quadratic(RealMatrix::Identity(2, 2), RealVector::Zero(2));
  ChristoffelField zero{Tensor3(2)};
  CHECK(norden_sen_residual(qc.metric_field(), zero, zero, vec({0.1, 0.2}), vec({1, 0}), vec({0, 1}), vec({1, 1})) <
        1e-10);

  // symmetric distance: both connections coincide
  auto hs_chart = simplex_chart(3);
  auto hs = eguchi_tensors(hilbert_schmidt_distance(), hs_chart, vec({0.2, 0.3}));
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index k = 0; k < 2; ++k) CHECK(std::abs(hs.gamma.coeffs(i, j, k) - hs.gamma_dual.coeffs(i, j, k)) < 1e-6);
  CHECK(norden_sen_residual(eguchi_metric_field(hilbert_schmidt_distance(), hs_chart), hs.gamma, hs.gamma_dual,
                            vec({0.2, 0.3}), vec({1, 0}), vec({0, 1}), vec({1, 2})) < 1e-4);

  // random qubit points, all three f_gamma distances
  Rng rng(77);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    auto c = bloch_chart(random_qubit(rng));
    auto dist = f_gamma_distance(k % 3 == 0 ? 0.0 : (k % 3 == 1 ? 0.5 : 1.0));
    const RealVector o = RealVector::Zero(3);
    auto tri = eguchi_tensors(dist, c, o);
    const RealVector u = vec({n(rng), n(rng), n(rng)}), v = vec({n(rng), n(rng), n(rng)}),
                     w = vec({n(rng), n(rng), n(rng)});
    CHECK(norden_sen_residual(eguchi_metric_field(dist, c), tri.gamma, tri.gamma_dual, o, u, v, w) < 1e-4);
  }
}

TEST_CASE("exponential families") {
  auto binary = build_exponential_family({diag({0.0, 1.0})}, FamilyKind::classical);
  const RealVector zero = vec({0.0});
  CHECK(std::abs(binary.psi(zero) - std::log(2.0)) < 1e-14);
  CHECK(std::abs(binary.eta(zero)(0) - 0.5) < 1e-14);
  CHECK(std::abs(binary.entropy(zero) - std::log(2.0)) < 1e-14);
  CHECK(std::abs(binary.hessian(vec({0.7}))(0, 0) - std::exp(0.7) / std::pow(1 + std::exp(0.7), 2)) < 1e-14);

  auto qubit = build_exponential_family({pauli::z()}, FamilyKind::quantum);
  CHECK(std::abs(qubit.eta(zero)(0)) < 1e-15);

  CHECK_THROWS_AS(build_exponential_family({pauli::x()}, FamilyKind::classical), Error);
  try {
    build_exponential_family({diag({1.0, 1.0})}, FamilyKind::classical);
    FAIL("expected DependentObservables");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DependentObservables);
  }
  try {
    build_exponential_family({pauli::x(), 2.0 * pauli::x()}, FamilyKind::quantum);
    FAIL("expected DependentObservables");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DependentObservables);
  }
}

TEST_CASE("quantum family potential against Schur-Parlett exponential") {
  auto fam = build_exponential_family({pauli::x(), pauli::z(), pauli::y()}, FamilyKind::quantum);
  Rng rng(3);
  std::normal_distribution<double> n;
  for (int k = 0; k < 5; ++k) {
    RealVector t = vec({n(rng), n(rng), n(rng)});
    Matrix h = t(0) * pauli::x() + t(1) * pauli::z() + t(2) * pauli::y();
    CHECK(std::abs(fam.psi(t) - std::log(oracle::expm(h).trace().real())) < 1e-12);
    // Hessian against central differences of the gradient
    RealMatrix fd(3, 3);
    for (Index j = 0; j < 3; ++j) {
      RealVector e = RealVector::Zero(3);
      e(j) = 1e-5;
      fd.col(j) = (fam.eta(t + e) - fam.eta(t - e)) / 2e-5;
    }
    CHECK((fd - fam.hessian(t)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Legendre roundtrip and dual orthogonality") {
  auto fam = build_exponential_family({diag({1, 0, 0}), diag({0, 1, 0})}, FamilyKind::classical);
  auto qfam = build_exponential_family({pauli::x(), pauli::z()}, FamilyKind::quantum);
  Rng rng(9);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    const auto& f = k % 2 ? fam : qfam;
    RealVector t = vec({n(rng), n(rng)});
    CHECK((f.theta_of(f.eta(t)) - t).norm() < 1e-8);
    // Ψ* + Ψ = θ·η
    CHECK(std::abs(f.psi_dual(f.eta(t)) + f.psi(t) - t.dot(f.eta(t))) < 1e-10);
    // g(∂/∂θ, ∂/∂η) = identity
    RealMatrix jac(2, 2);
    const RealVector eta = f.eta(t);
    for (Index j = 0; j < 2; ++j) {
      RealVector e = RealVector::Zero(2);
      e(j) = 1e-6;
      jac.col(j) = (f.theta_of(eta + e, t) - f.theta_of(eta - e, t)) / 2e-6;
    }
    CHECK((f.hessian(t) * jac - RealMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK_THROWS_AS(fam.theta_of(vec({0.7, 0.6})), Error);  // outside the simplex interior
}

TEST_CASE("relative entropy metric is the Hessian of the potential") {
  auto fam = build_exponential_family({pauli::x(), pauli::z()}, FamilyKind::quantum);
  for (const RealVector& t : {vec({0.3, -0.2}), vec({-0.5, 0.4})}) {
    RealMatrix g = eguchi_metric(umegaki_distance(), fam.states(), t).matrix;
    CHECK((g - fam.hessian(t)).cwiseAbs().maxCoeff() < 1e-5);
  }
  auto cfam = build_exponential_family({diag({1, 0, 0}), diag({0, 1, 0})}, FamilyKind::classical);
  RealMatrix g = eguchi_metric(umegaki_distance(), cfam.states(), vec({0.2, 0.1})).matrix;
  CHECK((g - cfam.hessian(vec({0.2, 0.1}))).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("geodesics") {
  ConnectionField flat = [](const RealVector& t) { return Tensor3(t.size()); };
  auto traj = geodesic_shoot(flat, vec({1, 2}), vec({0.5, -1}), 1.0, 1e-2);
  CHECK((traj.back().theta - vec({1.5, 1.0})).norm() < 1e-12);

  // the θ-flat connection of an exponential family: straight lines in natural coordinates
  auto fam = build_exponential_family({diag({1, 0, 0}), diag({0, 1, 0})}, FamilyKind::classical);
  auto d1 = umegaki_distance();
  ConnectionField dual = [&](const RealVector& t) {
    auto tri = eguchi_tensors(d1, fam.states(), t);
    return raise_index(tri.gamma_dual, tri.metric);
  };
  auto eg = geodesic_shoot(dual, vec({0.1, -0.2}), vec({0.3, 0.2}), 1.0, 1e-2);
  CHECK((eg.back().theta - vec({0.4, 0.0})).norm() < 1e-6);

  // Fisher arc length on the binary simplex
  auto fisher = fisher_simplex_metric(2);
  const double exact = 2.0 * (std::asin(std::sqrt(0.75)) - std::asin(std::sqrt(0.5)));
  CHECK(std::abs(geodesic_distance(fisher, vec({0.5}), vec({0.75})) - exact) < 1e-4);

  ConnectionField blow = [](const RealVector& t) {
    Tensor3 g(1);
    g(0, 0, 0) = -t(0);  // θ̈ = θ θ̇², escapes in finite time
    return g;
  };
  try {
    geodesic_shoot(blow, vec({1}), vec({1}), 10.0, 1e-2, {}, 1e3);
    FAIL("expected BlowUp");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BlowUp);
  }
}

TEST_CASE("scalar curvature") {
  auto flat = DuallyFlatChart::quadratic(RealMatrix::Identity(2, 2) * 2.0, vec({0.1, 0.0}));
  CHECK(std::abs(scalar_curvature(flat.metric_field(), vec({0.3, 0.4}))) < 1e-6);

  CHECK(std::abs(scalar_curvature(fisher_simplex_metric(3), vec({1.0 / 3, 1.0 / 3})) - 0.5) < 1e-3);

  // same point in mixture and natural coordinates
  auto fam = build_exponential_family({diag({1, 0, 0}), diag({0, 1, 0})}, FamilyKind::classical);
  const double p1 = 0.2, p2 = 0.3, p3 = 0.5;
  const double k_mix = scalar_curvature(fisher_simplex_metric(3), vec({p1, p2}));
  const double k_nat = scalar_curvature(fam.metric_field(), vec({std::log(p1 / p3), std::log(p2 / p3)}));
  CHECK(std::abs(k_mix - k_nat) < 1e-3);
  CHECK(std::abs(k_nat - 0.5) < 1e-3);
}
