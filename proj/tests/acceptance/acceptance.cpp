// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qig/divergences.hpp"
#include "qig/dynamics.hpp"
#include "qig/histories.hpp"
#include "qig/info_geometry.hpp"
#include "qig/modular.hpp"
#include "qig/renorm.hpp"
#include "support/oracles.hpp"

using namespace qig;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  // records a measured value against its bound
  void bound(const std::string& what, double value, double limit) {
    const bool pass = std::isfinite(value) && value <= limit;
    ok = ok && pass;
    detail << " " << what << "=" << value << (pass ? "" : "(!)");
  }
  void require(const std::string& what, bool cond) {
    ok = ok && cond;
    if (!cond) detail << " " << what << "(!)";
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double time_limit, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail << " threw: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0.0) out.bound("runtime_s", secs, time_limit);
  std::printf("%s %d %s:%s\n", out.ok ? "PASS" : "FAIL", id, name.c_str(), out.detail.str().c_str());
  std::fflush(stdout);
  if (!out.ok) ++failures;
}

template <class D>
double max_abs(const Eigen::MatrixBase<D>& m) {
  return m.cwiseAbs().maxCoeff();
}

RealVector rv(std::initializer_list<double> xs) {
  RealVector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Matrix diag(const std::vector<double>& xs) {
  Matrix m = Matrix::Zero(static_cast<Index>(xs.size()), static_cast<Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Index>(i), static_cast<Index>(i)) = xs[i];
  return m;
}

Vector ket(std::initializer_list<cplx> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (auto x : xs) v(i++) = x;
  return v.normalized();
}

DensityMatrix random_qubit(Rng& rng, double max_radius) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, max_radius);
  Eigen::Vector3d r(n(rng), n(rng), n(rng));
  r *= u(rng) / r.norm();
  return DensityMatrix::validate(0.5 * (pauli::identity() + r(0) * pauli::x() + r(1) * pauli::y() + r(2) * pauli::z()));
}

std::vector<double> random_simplex(Index n, Rng& rng) {
  std::gamma_distribution<double> g(2.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& x : p) s += (x = g(rng) + 0.05);
  for (auto& x : p) x /= s;
  return p;
}

std::vector<double> spectrum(const DensityMatrix& r) {
  return {r.spectrum().eigenvalues.data(), r.spectrum().eigenvalues.data() + r.dim()};
}

Eigen::Vector3d bloch(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vector bloch_ket(const Eigen::Vector3d& n) {
  const Matrix m = n(0) * pauli::x() + n(1) * pauli::y() + n(2) * pauli::z();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvectors().col(1);
}

// ---------------------------------------------------------------------------------------------

void eguchi_vs_bkm(Outcome& o) {
  Rng rng(2024);
  const auto d1 = umegaki_distance();
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto chart = bloch_chart(random_qubit(rng, 0.8));
    const RealVector at = RealVector::Zero(3);
    const RealMatrix eg = eguchi_tensors(d1, chart, at).metric.matrix;
    const RealMatrix bk = monotone_metric_tensor(OperatorMonotoneFunction::bkm(), chart, at).matrix;
    worst = std::max(worst, (eg - bk).norm() / bk.norm());
  }
  o.bound("max_rel_err", worst, 1e-4);
}

void monotonicity(Outcome& o) {
  Rng rng(77);
  for (double gamma : {0.0, 0.5, 1.0}) {
    const auto d = f_gamma_distance(gamma);
    double worst = std::numeric_limits<double>::infinity();
    int violations = 0;
    for (Index dim : {2, 3}) {
      const int draws = dim == 2 ? 200 : 50;
      for (int i = 0; i < draws; ++i) {
        const auto ch = QuantumChannel::random(dim, 1 + i % 4, rng);
        const auto r = monotonicity_check(d, ch, {{random_faithful_state(dim, rng), random_faithful_state(dim, rng)}});
        worst = std::min(worst, r.min_margin);
        if (r.min_margin < -kMonotonicitySlack) ++violations;
      }
    }
    o.detail << " gamma=" << gamma << " min_margin=" << worst;
    o.require("violations_gamma_" + std::to_string(gamma), violations == 0);
  }
}

void luders_and_marginals(Outcome& o) {
  Rng rng(17);
  const auto d1 = umegaki_distance();
  std::vector<Matrix> blocks2{diag({1, 0}), diag({0, 1})};
  const Matrix u = random_unitary(3, rng);
  std::vector<Matrix> blocks3{u.col(0) * u.col(0).adjoint() + u.col(1) * u.col(1).adjoint(),
                              u.col(2) * u.col(2).adjoint()};
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto& blocks = k % 2 ? blocks3 : blocks2;
    const auto w = random_faithful_state(k % 2 ? 3 : 2, rng);
    Matrix luders = Matrix::Zero(w.dim(), w.dim());
    for (const auto& p : blocks) luders += p * w.matrix() * p;
    worst = std::max(worst, trace_distance(entropic_projection(d1, ConstraintSet::commutant(blocks), w).matrix(), luders));
  }
  o.bound("luders_trace_dist", worst, 1e-6);
  worst = 0.0;
  const auto product = ConstraintSet::product(2, 2);
  for (int k = 0; k < 10; ++k) {
    const auto v = random_faithful_state(4, rng);
    const Matrix m = oracle::kron(oracle::trace_out_b(v.matrix(), 2, 2), oracle::trace_out_a(v.matrix(), 2, 2));
    worst = std::max(worst, trace_distance(entropic_projection(d1, product, v).matrix(), m));
  }
  o.bound("marginal_trace_dist", worst, 1e-6);
}

void pythagorean(Outcome& o) {
  Rng rng(13);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    RealMatrix m(3, 3);
    for (Index i = 0; i < 9; ++i) m(i / 3, i % 3) = n01(rng);
    const auto chart = DuallyFlatChart::quadratic(m * m.transpose() + RealMatrix::Identity(3, 3), rv({n01(rng), n01(rng), n01(rng)}));
    RealMatrix a(1, 3);
    a << n01(rng), n01(rng), n01(rng);
    const RealVector c = rv({n01(rng)});
    const RealVector theta = rv({n01(rng), n01(rng), n01(rng)});
    RealVector x = rv({n01(rng), n01(rng), n01(rng)});
    x += a.transpose() * ((c - a * x)(0) / a.squaredNorm());
    worst = std::max(worst, bregman_affine_projection(chart, a, c, theta, x).residual);
  }
  o.bound("quadratic_residual", worst, 1e-7);
  worst = 0.0;
  const auto d1 = umegaki_distance();
  for (int k = 0; k < 10; ++k) {
    const auto omega = DensityMatrix::validate(diag(random_simplex(3, rng)));
    const auto p = random_simplex(3, rng);
    const std::vector<double> f{n01(rng), n01(rng), n01(rng)};
    const double target = p[0] * f[0] + p[1] * f[1] + p[2] * f[2];
    const auto q = ConstraintSet::expectations({HermitianObservable::validate(diag(f))}, {target});
    worst = std::max(worst, pythagorean_residual(d1, q, omega, DensityMatrix::validate(diag(p))));
  }
  o.bound("tilt_residual", worst, 1e-7);
}

void bona_flow(Outcome& o) {
  Rng rng(5);
  const auto obs = [](const Matrix& m) { return HermitianObservable::validate(m); };
  const std::vector<std::pair<std::string, HamiltonianFunction>> cases = {
      {"linear", HamiltonianFunction::linear(obs(0.7 * pauli::x() + 0.3 * pauli::z()))},
      {"mean_field", HamiltonianFunction::mean_field(obs(pauli::z()), {{1.0, obs(pauli::x())}})},
  };
  for (const auto& [name, h] : cases) {
    const auto rho0 = random_faithful_state(2, rng);
    const auto traj = hamiltonian_flow(h, rho0, 10.0, 1e-3, 10);
    const auto s0 = spectrum(rho0);
    double spec = 0.0, energy = 0.0;
    for (const auto& p : traj.points) {
      const auto s = spectrum(p.state);
      for (std::size_t i = 0; i < s.size(); ++i) spec = std::max(spec, std::abs(s[i] - s0[i]));
      energy = std::max(energy, std::abs(h(p.state) - h(rho0)));
    }
    o.require(name + "_reaches_t10", std::abs(traj.points.back().t - 10.0) < 1e-9);
    o.bound(name + "_spectrum_drift", spec, 1e-8);
    o.bound(name + "_h_drift", energy, 1e-8);
  }
}

void modular_suite(Outcome& o) {
  Rng rng(31);
  double kms = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index d = 2 + k % 2;
    const auto g = gibbs_state(random_hermitian(d, rng), 0.3 + 0.05 * k);
    kms = std::max(kms, modular_flow_kms(g, HermitianObservable::validate(random_hermitian(d, rng)), 0.1 * k, 50,
                                         static_cast<std::uint64_t>(k))
                            .kms_residual);
  }
  o.bound("kms", kms, 1e-10);

  double unitarity = 0.0, intertwining = 0.0, cone = 0.0, jcomm = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 2 + k % 2;
    const auto phi = random_faithful_state(d, rng), omega = random_faithful_state(d, rng);
    const auto gp = GnsSpace::build(phi), gw = GnsSpace::build(omega);
    const auto v = standard_unitary_transition(phi, omega);
    const Matrix vh = to_orthonormal(v, gw, gp);
    unitarity = std::max(unitarity, max_abs(vh.adjoint() * vh - Matrix::Identity(d * d, d * d)));
    const Matrix a = ginibre(d, d, rng);
    intertwining = std::max(intertwining, max_abs(vh * to_orthonormal(gw.rep(a), gw, gw) * vh.adjoint() -
                                                  to_orthonormal(gp.rep(a), gp, gp)));
    const auto jw = modular_conjugation(gw), jp = modular_conjugation(gp);
    jcomm = std::max(jcomm, max_abs(v.compose(jw).matrix - jp.compose(v).matrix));
    for (int c = 0; c < 5; ++c) cone = std::max(cone, gp.cone_defect(v.apply(gw.cone_vector(random_faithful_state(d, rng)))));
  }
  o.bound("v_unitarity", unitarity, 1e-10);
  o.bound("v_intertwining", intertwining, 1e-10);
  o.bound("v_cone", cone, 1e-10);
  o.bound("v_j_commutation", jcomm, 1e-10);

  double anti = 0.0, cocycle = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 2 + k % 2;
    const auto g = GnsSpace::build(random_faithful_state(d, rng));
    const auto kk = standard_liouvillean(HermitianObservable::validate(random_hermitian(d, rng)), g);
    const auto j = modular_conjugation(g);
    anti = std::max(anti, max_abs(j.compose(kk).matrix + kk.compose(j).matrix));
    const auto p = djp_perturb(kk, HermitianObservable::validate(random_hermitian(d, rng)), g);
    cocycle = std::max(cocycle, p.cocycle_residual(0.1 + 0.02 * k, 0.5 - 0.01 * k));
  }
  o.bound("jk_plus_kj", anti, 1e-10);
  o.bound("djp_cocycle", cocycle, 1e-9);

  double gibbs = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 2 + k % 2;
    const Matrix h0 = random_hermitian(d, rng);
    Matrix v = random_hermitian(d, rng);
    v /= std::max(1.0, v.operatorNorm());
    const double beta = 0.5 + 0.1 * k;
    const auto r = perturbed_kms_state(gibbs_state(h0, beta), HermitianObservable::validate(v), beta);
    gibbs = std::max(gibbs, max_abs(r.matrix() - oracle::gibbs(h0 + v, beta)));
  }
  o.bound("perturbed_gibbs", gibbs, 1e-8);
}

void jmf_example(Outcome& o) {
  RealMatrix k(3, 3);
  k << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  const BlockPartition blocks{{0}, {1}, {2}};
  const auto model = BlockModel::validate(k, blocks);
  const auto r = block_renormalize(model);
  const double eps = 4.0 * std::numeric_limits<double>::epsilon();
  o.bound("k_tilde_aa_err", std::abs(r.k_aa(0, 0) - 1.5), eps * 1.5);
  o.bound("k_tilde_ba_err", std::abs(r.k_ba(0, 0) - 0.5), eps * 0.5);
  o.bound("r2_ac_err", std::abs(r.r2_ac(0, 0) - 0.25), eps * 0.25);
  o.bound("factor_err", std::abs(r.factor(0, 0) - 4.0 / 3.0), eps * 4.0 / 3.0);
  const auto s = propagator_series(model, 20);
  o.bound("series_s20_err", std::abs(s.partial_sums[20](0, 0) - 1.0 / 3.0), 1e-6);

  const RealVector b = rv({0.1, -0.2, 0.3}), th0 = rv({0.2, -0.4, 0.5});
  const auto chart = DuallyFlatChart::quadratic(k, b);
  const double e0 = chart.eta(th0)(0);
  auto path = [&](double t) { return rv({e0 + 0.8 * t * t + 0.3 * std::sin(M_PI * t)}); };
  const auto f = favretti_response(chart, blocks, th0, path, 100);
  o.bound("favretti_vs_direct", (f.eta_b.back() - f.eta_b_direct).cwiseAbs().maxCoeff(), 1e-6);

  // the same on a curved potential: the classical 4-outcome exponential family
  const auto fam = build_exponential_family({diag({1, 0, 0, 0}), diag({0, 1, 0, 0}), diag({0, 0, 1, 0})},
                                            FamilyKind::classical);
  const RealVector th1 = rv({0.3, -0.2, 0.1});
  const double e1 = fam.eta(th1)(0);
  auto path1 = [&](double t) { return rv({e1 + 0.1 * t}); };
  const auto g = favretti_response(fam, blocks, th1, path1, 100);
  o.bound("favretti_family_vs_direct", (g.eta_b.back() - g.eta_b_direct).cwiseAbs().maxCoeff(), 1e-6);
}

void contraction(Outcome& o) {
  const auto model = ContractionModel::f_gamma(1.0);
  Sampler s;
  s.count = 2000;
  s.seed = 8;
  s.workers = std::max(1u, std::thread::hardware_concurrency());
  Rng rng(99);
  std::vector<QuantumChannel> channels;
  for (int i = 0; i < 10; ++i) channels.push_back(QuantumChannel::random(2, 1 + i % 3, rng));
  for (double p : {0.2, 0.5, 0.8}) channels.push_back(QuantumChannel::depolarizing(2, p));
  double worst = 0.0, top = 0.0;
  for (const auto& ch : channels) {
    const auto c = contraction_chain(model, ch, s);
    worst = std::max(worst, c.max_violation);
    top = std::max(top, c.divergence.value);
    const double step = std::max({c.divergence.value - 1.0, c.metric.value - c.divergence.value,
                                  c.geodesic.value - c.metric.value});
    worst = std::max(worst, step);
  }
  o.detail << " max_eta_d=" << top;
  o.bound("chain_violation", worst, 1e-3);
}

void histories_and_phase(Outcome& o) {
  const auto rho = pure_state(ket({1, 0}));
  const auto h0 = HermitianObservable::validate(Matrix::Zero(2, 2));
  const auto hist = HistorySpec::validate({projector(ket({1, 1})), projector(ket({1, 0}))}, {0.5, 1.0});
  const double p = history_probability(rho, hist, h0);
  o.detail << " probability=" << p;
  o.require("probability_quarter", std::abs(p - 0.25) <= 4 * std::numeric_limits<double>::epsilon());

  Rng rng(5);
  auto projector_of_rank = [&](Index d, Index r) {
    const Matrix u = random_unitary(d, rng);
    return Matrix(u.leftCols(r) * u.leftCols(r).adjoint());
  };
  double hermiticity = 0.0, positivity = 0.0, additivity = 0.0, normalization = 0.0, null = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const Index d = 3;
    const std::size_t n = 2 + trial % 3;
    const auto r = random_faithful_state(d, rng);
    const auto h = HermitianObservable::validate(random_hermitian(d, rng));
    std::vector<double> times;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) times.push_back(t += 0.1 + 0.3 * (i + 1));
    std::vector<Matrix> pa, pb;
    for (std::size_t i = 0; i < n; ++i) {
      pa.push_back(projector_of_rank(d, 1 + (i + trial) % 2));
      pb.push_back(projector_of_rank(d, 1 + i % 2));
    }
    const auto a = HistorySpec::validate(pa, times), b = HistorySpec::validate(pb, times);
    hermiticity = std::max(hermiticity, std::abs(histories_functional(r, h, a, b) - std::conj(histories_functional(r, h, b, a))));
    const cplx aa = histories_functional(r, h, a, a);
    positivity = std::max({positivity, std::abs(aa.imag()), std::max(0.0, -aa.real())});
    const auto one = HistorySpec::trivial(d, times);
    normalization = std::max(normalization, std::abs(histories_functional(r, h, one, one) - 1.0));
    auto zero = pa;
    zero[trial % n] = Matrix::Zero(d, d);
    null = std::max(null, std::abs(histories_functional(r, h, HistorySpec::validate(zero, times), b)));
    const Matrix u = random_unitary(d, rng);
    auto left = pa, right = pa, joined = pa;
    const std::size_t slot = trial % n;
    left[slot] = u.col(0) * u.col(0).adjoint();
    right[slot] = u.col(1) * u.col(1).adjoint();
    joined[slot] = left[slot] + right[slot];
    const cplx sum = histories_functional(r, h, HistorySpec::validate(left, times), b) +
                     histories_functional(r, h, HistorySpec::validate(right, times), b);
    additivity = std::max(additivity, std::abs(sum - histories_functional(r, h, HistorySpec::validate(joined, times), b)));
  }
  o.bound("hermiticity", hermiticity, 1e-9);
  o.bound("positivity", positivity, 1e-9);
  o.bound("normalization", normalization, 1e-9);
  o.bound("null_history", null, 1e-9);
  o.bound("additivity", additivity, 1e-9);

  double phase_err = 0.0;
  const std::vector<std::vector<Eigen::Vector3d>> triangles = {
      {bloch(0.4, 0.1), bloch(1.3, 0.9), bloch(1.1, 2.4)},
      {bloch(M_PI / 2, 0.0), bloch(M_PI / 2, M_PI / 2), bloch(0.0, 0.0)},
      {bloch(2.0, -0.5), bloch(1.0, 0.3), bloch(2.5, 1.7)},
  };
  for (const auto& verts : triangles) {
    const int segments = 10000;
    std::vector<Vector> path;
    for (int s = 0; s < segments; ++s) {
      const double u = 3.0 * s / segments;
      const int side = std::min(2, static_cast<int>(u));
      const double f = u - side;
      const Eigen::Vector3d a = verts[static_cast<std::size_t>(side)], b = verts[static_cast<std::size_t>((side + 1) % 3)];
      const double om = std::acos(a.dot(b));
      path.push_back(bloch_ket(((std::sin((1 - f) * om) * a + std::sin(f * om) * b) / std::sin(om)).normalized()));
    }
    path.push_back(bloch_ket(verts[0]));
    const double omega = oracle::solid_angle(verts[0], verts[1], verts[2]);
    phase_err = std::max(phase_err, std::abs(geometric_phase(path, true) + omega / 2.0));
  }
  o.bound("phase_err", phase_err, 1e-3);
}

void sliced_propagator_check(Outcome& o) {
  const auto fam = CoherentFamily::spin(1);
  RealVector a(2), b(2);
  a << 0.7, 0.2;
  b << 1.9, 1.1;
  const auto rep = propagator_convergence(fam, HermitianObservable::validate(pauli::z() / 2.0), a, b, 1.0, {8, 16, 32, 64});
  double order = std::numeric_limits<double>::infinity();
  for (double p : rep.richardson_orders) order = std::min(order, p);
  for (double p : rep.observed_orders) order = std::min(order, p);
  o.detail << " min_order=" << order;
  o.require("order_at_least_0.9", order >= 0.9);

  double telescoping = 0.0;
  for (int two_j : {1, 2}) {
    const auto f = CoherentFamily::spin(two_j);
    const auto h0 = HermitianObservable::validate(Matrix::Zero(two_j + 1, two_j + 1));
    for (int n : {8, 16, 32, 64}) {
      const auto r = sliced_propagator(f, h0, a, b, 1.0, n);
      telescoping = std::max(telescoping, std::abs(r.amplitude - f.overlap(b, a)));
    }
  }
  o.bound("telescoping", telescoping, 1e-6);
}

void curvature(Outcome& o) {
  const auto flat = DuallyFlatChart::quadratic(RealMatrix::Identity(2, 2) * 2.0, rv({0.1, 0.0}));
  o.bound("flat", std::abs(scalar_curvature(flat.metric_field(), rv({0.3, 0.4}))), 1e-6);
  o.bound("simplex_fisher", std::abs(scalar_curvature(fisher_simplex_metric(3), rv({1.0 / 3, 1.0 / 3})) - 0.5), 1e-3);
  const auto fam = build_exponential_family({diag({1, 0, 0}), diag({0, 1, 0})}, FamilyKind::classical);
  double invariance = 0.0;
  for (const auto& p : std::vector<std::vector<double>>{{0.2, 0.3, 0.5}, {0.6, 0.1, 0.3}, {0.25, 0.45, 0.3}}) {
    const double mix = scalar_curvature(fisher_simplex_metric(3), rv({p[0], p[1]}));
    const double nat = scalar_curvature(fam.metric_field(), rv({std::log(p[0] / p[2]), std::log(p[1] / p[2])}));
    const double eg = scalar_curvature(eguchi_metric_field(umegaki_distance(), simplex_chart(3)), rv({p[0], p[1]}));
    invariance = std::max({invariance, std::abs(mix - nat), std::abs(mix - eg)});
  }
  o.bound("chart_invariance", invariance, 1e-3);
}

void entropic_prior(Outcome& o) {
  const auto p0 = maximally_mixed(2);
  const auto p = DensityMatrix::validate(diag({0.25, 0.75}));
  o.bound("worked_value_err", std::abs(entropic_prior_density(PriorSpec::make(1.0, 1.0, 1.0, p0), p) - 0.877383), 1e-6);

  // k = 0 leaves only the Jeffreys measure
  double jeff = 0.0;
  const auto chart = simplex_chart(2);
  for (double th : {0.1, 0.3, 0.5, 0.8}) {
    const auto q = chart(rv({th}));
    const double jw = jeffreys_factor(eguchi_metric(umegaki_distance(), chart, rv({th})));
    for (double alpha : {0.0, 0.5, 1.0})
      for (double beta : {0.0, 0.5, 1.0})
        jeff = std::max(jeff, std::abs(jw * entropic_prior_density(PriorSpec::make(0.0, alpha, beta, p0), q) - jw));
  }
  o.bound("k0_jeffreys", jeff, 1e-12);

  double gap = 0.0;
  for (double x : {0.1, 0.25, 0.4}) {
    const auto q = DensityMatrix::validate(diag({x, 1.0 - x}));
    for (double k : {0.5, 1.0}) {
      const double at = entropic_prior_density(PriorSpec::make(k, 1.0, 1.0, p0), q);
      const double near = entropic_prior_density(PriorSpec::make(k, 1.0, 1.0 - 1e-6, p0), q);
      gap = std::max(gap, std::abs(near - at));
    }
  }
  o.bound("branch_continuity", gap, 1e-4);

  const Matrix h = 0.5 * pauli::x() + 0.2 * pauli::z();
  const auto start = DensityMatrix::validate(0.5 * (pauli::identity() + 0.4 * pauli::z() + 0.2 * pauli::y()));
  auto traj = [&](double t) {
    const Matrix u = exp_hermitian(h, cplx(0.0, -t));
    return DensityMatrix::validate(u * start.matrix() * u.adjoint());
  };
  const auto d = umegaki_distance();
  const double ratio = path_weight(traj, 1.0, d, 1.0, 0.02, 1e-3).action / path_weight(traj, 1.0, d, 1.0, 0.01, 1e-3).action;
  o.bound("eps_ratio_rel_err", std::abs(ratio - 4.0) / 4.0, 0.05);
}

}  // namespace

int main() {
  criterion(1, "eguchi metric of D1 equals BKM", 10.0, eguchi_vs_bkm);
  criterion(2, "CPTP monotonicity of f_gamma quasi-entropies", 30.0, monotonicity);
  criterion(3, "Luders and product-marginal recovery", 60.0, luders_and_marginals);
  criterion(4, "generalized Pythagorean identity", 0.0, pythagorean);
  criterion(5, "Bona flow conservation", 20.0, bona_flow);
  criterion(6, "modular suite", 60.0, modular_suite);
  criterion(7, "JMF worked example", 0.0, jmf_example);
  criterion(8, "contraction chain", 120.0, contraction);
  criterion(9, "histories and geometric phase", 0.0, histories_and_phase);
  criterion(10, "sliced propagator", 60.0, sliced_propagator_check);
  criterion(11, "scalar curvature", 0.0, curvature);
  criterion(12, "entropic prior", 0.0, entropic_prior);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
