#include <doctest.h>

#include <cmath>

#include "qig/matrix_core.hpp"
#include "support/oracles.hpp"

using namespace qig;

namespace {
Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}
}  // namespace

TEST_CASE("state validation") {
  auto mixed = DensityMatrix::validate(Matrix::Identity(2, 2) / 2.0);
  CHECK(mixed.faithful());
  CHECK_THROWS_AS(DensityMatrix::validate(diag2(1.2, -0.2)), Error);
  try {
    DensityMatrix::validate(diag2(1.2, -0.2));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositive);
  }
  auto pure = DensityMatrix::validate(diag2(1.0, 0.0));
  CHECK_FALSE(pure.faithful());

  Matrix nh = diag2(0.5, 0.5);
  nh(0, 1) = 0.1;
  try {
    DensityMatrix::validate(nh);
    FAIL("expected NotHermitian");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotHermitian);
  }
  try {
    DensityMatrix::validate(diag2(0.5, 0.6));
    FAIL("expected TraceMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TraceMismatch);
  }
  CHECK_NOTHROW(DensityMatrix::validate(diag2(0.2, 0.3), TraceMode::subnormalized));
  // tiny negative eigenvalue is clipped
  auto clipped = DensityMatrix::validate(diag2(1.0 + 5e-11, -5e-11));
  CHECK(clipped.min_eigenvalue() >= 0.0);
}

TEST_CASE("matrix functions") {
  Matrix e = matrix_function([](double x) { return std::exp(x); }, diag2(0.0, std::log(2.0)));
  CHECK(std::abs(e(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(e(1, 1) - 2.0) < 1e-12);
  Matrix s = matrix_function([](double x) { return std::sqrt(x); }, diag2(4.0, 9.0));
  CHECK(std::abs(s(0, 0) - 2.0) < 1e-12);
  CHECK(std::abs(s(1, 1) - 3.0) < 1e-12);

  ScalarFunction xlogx{[](double x) { return x * std::log(x); }, 0.0};
  Matrix r = matrix_function(xlogx, Matrix::Identity(2, 2) / 2.0);
  CHECK(std::abs(r(0, 0).real() + 0.346574) < 1e-6);
  CHECK(std::abs(r(0, 1)) < 1e-14);

  // log at a zero eigenvalue has no finite limit
  try {
    matrix_function([](double x) { return std::log(x); }, diag2(1.0, 0.0));
    FAIL("expected DomainError");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DomainError);
  }
}

TEST_CASE("matrix function agrees with polynomial evaluation") {
  Rng rng(11);
  for (int d = 2; d <= 4; ++d)
    for (int trial = 0; trial < 10; ++trial) {
      Matrix a = random_hermitian(d, rng);
      Matrix poly = 2.0 * a * a * a - a * a + 3.0 * a + Matrix::Identity(d, d) * 0.5;
      Matrix got = matrix_function([](double x) { return 2 * x * x * x - x * x + 3 * x + 0.5; }, a);
      CHECK((got - poly).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("spectrum reconstruction and unitarity") {
  Rng rng(3);
  for (int d = 2; d <= 5; ++d) {
    Matrix a = random_hermitian(d, rng);
    Spectrum s = Spectrum::of(a);
    CHECK((s.reconstruct() - a).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((s.eigenvectors.adjoint() * s.eigenvectors - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-9);
    for (int i = 1; i < d; ++i) CHECK(s.eigenvalues(i) >= s.eigenvalues(i - 1));
  }
}

TEST_CASE("channels") {
  auto rho = random_faithful_state(2, 5);
  auto id = QuantumChannel::identity(2);
  CHECK((apply_channel(id, rho).matrix() - rho.matrix()).norm() < 1e-14);

  auto full = QuantumChannel::depolarizing(2, 1.0);
  CHECK((apply_channel(full, rho).matrix() - Matrix::Identity(2, 2) / 2.0).norm() < 1e-12);

  auto dephase = QuantumChannel::from_kraus({std::sqrt(0.5) * pauli::identity(), std::sqrt(0.5) * pauli::z()});
  Vector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  auto out = apply_channel(dephase, pure_state(plus));
  CHECK((out.matrix() - diag2(0.5, 0.5)).norm() < 1e-12);

  CHECK_THROWS_AS(QuantumChannel::from_kraus({pauli::identity(), pauli::z()}), Error);
  auto three = random_faithful_state(3, 1);
  try {
    apply_channel(id, three);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("channel output stays a state") {
  Rng rng(17);
  for (int d = 2; d <= 4; ++d)
    for (int trial = 0; trial < 100; ++trial) {
      auto ch = QuantumChannel::random(d, 1 + trial % 4, rng);
      auto rho = random_faithful_state(d, rng);
      Matrix out = ch.apply(rho.matrix());
      CHECK(hermitian_residual(out) < 1e-9);
      CHECK(std::abs(out.trace().real() - 1.0) < 1e-9);
      Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(out));
      CHECK(es.eigenvalues().minCoeff() > -1e-9);
    }
}

TEST_CASE("partial trace") {
  auto a = random_faithful_state(2, 1);
  auto b = random_faithful_state(3, 2);
  auto ab = DensityMatrix::validate(kron(a.matrix(), b.matrix()));
  CHECK((partial_trace(ab, 2, 3, 0).matrix() - a.matrix()).norm() < 1e-12);
  CHECK((partial_trace(ab, 2, 3, 1).matrix() - b.matrix()).norm() < 1e-12);

  Vector bell = Vector::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  auto phi = pure_state(bell);
  CHECK((partial_trace(phi, 2, 2, 0).matrix() - Matrix::Identity(2, 2) / 2.0).norm() < 1e-12);
  CHECK((partial_trace(maximally_mixed(4), 2, 2, 0).matrix() - Matrix::Identity(2, 2) / 2.0).norm() < 1e-12);

  try {
    partial_trace(maximally_mixed(4), 3, 2, 0);
    FAIL("expected BadFactorization");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadFactorization);
  }

  // agrees with explicit index contraction and is trace preserving
  auto r = random_faithful_state(6, 9);
  CHECK((partial_trace(r, 2, 3, 0).matrix() - oracle::trace_out_b(r.matrix(), 2, 3)).norm() < 1e-12);
  CHECK((partial_trace(r, 2, 3, 1).matrix() - oracle::trace_out_a(r.matrix(), 2, 3)).norm() < 1e-12);
  CHECK(std::abs(partial_trace(partial_trace(r, 2, 3, 0), 1, 2, 1).trace() - 1.0) < 1e-12);
}

TEST_CASE("partial trace is linear") {
  auto r1 = random_faithful_state(4, 21);
  auto r2 = random_faithful_state(4, 22);
  auto mix = DensityMatrix::validate(0.3 * r1.matrix() + 0.7 * r2.matrix());
  Matrix lhs = partial_trace(mix, 2, 2, 1).matrix();
  Matrix rhs = 0.3 * partial_trace(r1, 2, 2, 1).matrix() + 0.7 * partial_trace(r2, 2, 2, 1).matrix();
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("random faithful states") {
  auto a = random_faithful_state(2, 7);
  auto b = random_faithful_state(2, 7);
  CHECK((a.matrix() - b.matrix()).norm() == 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = random_faithful_state(2, seed);
    CHECK(s.min_eigenvalue() >= 0.025 - 1e-15);
    CHECK(s.faithful());
  }
  CHECK(std::abs(random_faithful_state(3, 1).trace() - 1.0) < 1e-12);
}

TEST_CASE("gibbs helper matches Schur-Parlett exponential") {
  Rng rng(4);
  Matrix h = random_hermitian(3, rng);
  CHECK((gibbs_state(h, 0.7).matrix() - oracle::gibbs(h, 0.7)).norm() < 1e-12);
}
