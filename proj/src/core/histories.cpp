#include "qig/histories.hpp"

#include <cmath>
#include <numeric>

#include <gsl/gsl_integration.h>

#include "parallel.hpp"

namespace qig {

namespace {

constexpr double kProjectorTol = 1e-9;
constexpr double kOverlapFloor = 1e-12;
constexpr double kUnitNormTol = 1e-10;
constexpr double kQuadratureLimit = 1e-4;

void check_times(const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) fail(ErrorCode::BadTimes, "non-finite time");
    if (i > 0 && !(times[i] > times[i - 1])) fail(ErrorCode::BadTimes, "times must be strictly increasing");
  }
}

// Heisenberg picture relative to t₀ = 0.
Matrix heisenberg(const Matrix& p, const Matrix& h, double t) {
  if (t == 0.0) return p;
  const Matrix u = exp_hermitian(h, cplx(0.0, -t));
  return u.adjoint() * p * u;
}

double binomial(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

Vector spin_vector(int two_j, double theta, double phi) {
  Vector v(two_j + 1);
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  for (int k = 0; k <= two_j; ++k) {
    // basis ordered m = j, j-1, ..., -j
    const double mag = std::sqrt(binomial(two_j, k)) * std::pow(c, two_j - k) * std::pow(s, k);
    v(k) = mag * std::polar(1.0, k * phi);
  }
  return v;
}

RealVector spin_label(double theta, double phi) {
  RealVector z(2);
  z << theta, phi;
  return z;
}

double resolution_residual(const std::vector<Vector>& vecs, const std::vector<double>& weights, Index dim) {
  Matrix acc = Matrix::Zero(dim, dim);
  for (std::size_t i = 0; i < vecs.size(); ++i) acc += weights[i] * vecs[i] * vecs[i].adjoint();
  return (acc - Matrix::Identity(dim, dim)).norm();
}

struct NodeSet {
  std::vector<Vector> vecs;
  std::vector<double> weights;
};

// Transfer-matrix evaluation of the sliced amplitude over a fixed node set.
cplx transfer_amplitude(const NodeSet& nodes, const Matrix& h, const Vector& start, const Vector& end, double s,
                        int slices, const SliceOptions& options) {
  const double eps = s / slices;
  const std::size_t n = nodes.vecs.size();
  const Index d = h.rows();
  const Matrix step_op = Matrix::Identity(d, d) - cplx(0.0, eps) * h;

  auto symbol = [&](const Vector& z) { return z.dot(h * z).real(); };
  auto regulator = [&](cplx overlap) {
    if (!options.regulator) return 1.0;
    const double ds2 = std::max(0.0, 1.0 - std::norm(overlap));
    return std::exp(-ds2 / (2.0 * *options.regulator * eps));
  };
  // ⟨to| K |from⟩
  auto kernel = [&](const Vector& to, const Vector& from) -> cplx {
    const cplx ov = to.dot(from);
    cplx k;
    if (options.kernel == SliceKernel::linearized) {
      k = to.dot(step_op * from);
    } else {
      k = ov * std::exp(cplx(0.0, -eps * symbol(from)));
    }
    return k * regulator(ov);
  };

  Eigen::MatrixXcd t(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t(static_cast<Index>(i), static_cast<Index>(j)) = kernel(nodes.vecs[i], nodes.vecs[j]) * nodes.weights[j];

  Eigen::VectorXcd a(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) a(static_cast<Index>(i)) = kernel(nodes.vecs[i], start);
  for (int k = 2; k < slices; ++k) a = t * a;
  cplx out = 0.0;
  for (std::size_t i = 0; i < n; ++i) out += kernel(end, nodes.vecs[i]) * nodes.weights[i] * a(static_cast<Index>(i));
  return out;
}

}  // namespace

HistorySpec HistorySpec::validate(std::vector<Matrix> projectors, std::vector<double> times) {
  if (projectors.empty()) fail(ErrorCode::InvalidArgument, "history needs at least one projector");
  if (projectors.size() != times.size())
    fail(ErrorCode::DimensionMismatch, "history needs one time per projector");
  check_times(times);
  const Index d = projectors.front().rows();
  for (auto& p : projectors) {
    if (p.rows() != d || p.cols() != d) fail(ErrorCode::DimensionMismatch, "history projectors differ in shape");
    if (hermitian_residual(p) > kProjectorTol) fail(ErrorCode::NotHermitian, "history projector is not Hermitian");
    if ((p * p - p).norm() > kProjectorTol) fail(ErrorCode::InvalidArgument, "history entry is not idempotent");
    p = hermitian_part(p);
  }
  return HistorySpec{std::move(projectors), std::move(times)};
}

HistorySpec HistorySpec::trivial(Index dim, std::vector<double> times) {
  std::vector<Matrix> ps(times.size(), Matrix::Identity(dim, dim));
  return validate(std::move(ps), std::move(times));
}

Matrix class_operator(const HistorySpec& history, const HermitianObservable& h) {
  check_times(history.times);
  if (h.dim() != history.dim()) fail(ErrorCode::DimensionMismatch, "Hamiltonian and history dimensions differ");
  Matrix c = Matrix::Identity(history.dim(), history.dim());
  for (std::size_t i = 0; i < history.length(); ++i)
    c = c * heisenberg(history.projectors[i], h.matrix(), history.times[i]);
  return c;
}

double history_probability(const DensityMatrix& rho, const HistorySpec& history, const HermitianObservable& h) {
  if (rho.dim() != history.dim()) fail(ErrorCode::DimensionMismatch, "state and history dimensions differ");
  const Matrix c = class_operator(history, h);
  return (c.adjoint() * rho.matrix() * c).trace().real();
}

cplx histories_functional(const DensityMatrix& rho, const HermitianObservable& h, const HistorySpec& varpi,
                          const HistorySpec& vartheta) {
  if (varpi.times != vartheta.times) fail(ErrorCode::GridMismatch, "histories use different time grids");
  if (rho.dim() != varpi.dim() || rho.dim() != vartheta.dim())
    fail(ErrorCode::DimensionMismatch, "state and history dimensions differ");
  const Matrix a = class_operator(varpi, h);
  const Matrix b = class_operator(vartheta, h);
  return (a.adjoint() * rho.matrix() * b).trace();
}

double geometric_phase(const std::vector<Vector>& path, bool closed) {
  if (path.size() < 2) return 0.0;
  const Index d = path.front().size();
  for (const auto& v : path) {
    if (v.size() != d) fail(ErrorCode::DimensionMismatch, "path vectors differ in dimension");
    if (std::abs(v.norm() - 1.0) > 1e-8) fail(ErrorCode::InvalidArgument, "path vectors must be unit vectors");
  }
  const cplx ends = path.front().dot(path.back());
  if (closed && std::abs(std::abs(ends) - 1.0) > 1e-8)
    fail(ErrorCode::InvalidArgument, "closed path must return to its initial ray");
  if (std::abs(ends) < kOverlapFloor) fail(ErrorCode::ZeroOverlap, "endpoint overlap vanishes");
  // accumulate phases rather than the raw product to avoid underflow on long paths
  double phase = std::arg(ends);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const cplx ov = path[k + 1].dot(path[k]);
    if (std::abs(ov) < kOverlapFloor) fail(ErrorCode::ZeroOverlap, "consecutive overlap vanishes");
    phase += std::arg(ov);
  }
  phase = std::remainder(phase, 2.0 * M_PI);
  if (phase <= -M_PI) phase += 2.0 * M_PI;
  return phase;
}

CoherentFamily CoherentFamily::build(Index label_dim, Index dim, std::function<Vector(const RealVector&)> map,
                                     std::vector<RealVector> nodes, std::vector<double> weights, std::string label) {
  if (nodes.size() != weights.size() || nodes.empty())
    fail(ErrorCode::InvalidArgument, "quadrature needs one weight per node");
  std::vector<Vector> vecs;
  vecs.reserve(nodes.size());
  for (const auto& z : nodes) {
    if (z.size() != label_dim) fail(ErrorCode::DimensionMismatch, "node label has the wrong dimension");
    Vector v = map(z);
    if (v.size() != dim) fail(ErrorCode::DimensionMismatch, "coherent vector has the wrong dimension");
    if (std::abs(v.norm() - 1.0) > kUnitNormTol) fail(ErrorCode::InvalidArgument, "coherent vector is not unit");
    vecs.push_back(std::move(v));
  }
  CoherentFamily f;
  f.label_dim = label_dim;
  f.dim = dim;
  f.vector_map = std::move(map);
  f.nodes = std::move(nodes);
  f.weights = std::move(weights);
  f.identity_residual = resolution_residual(vecs, f.weights, dim);
  f.label = std::move(label);
  return f;
}

CoherentFamily CoherentFamily::spin(int two_j, int n_theta, int n_phi) {
  if (two_j < 1) fail(ErrorCode::InvalidArgument, "spin family needs 2j >= 1");
  if (n_theta < 1 || n_phi < 1) fail(ErrorCode::InvalidArgument, "quadrature sizes must be positive");
  gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n_theta));
  if (!table) fail(ErrorCode::NumericalBreakdown, "Gauss-Legendre table allocation failed");
  std::vector<RealVector> nodes;
  std::vector<double> weights;
  const double norm = (two_j + 1.0) / (4.0 * M_PI);
  for (int i = 0; i < n_theta; ++i) {
    double x = 0.0, w = 0.0;
    gsl_integration_glfixed_point(-1.0, 1.0, static_cast<std::size_t>(i), &x, &w, table);
    for (int k = 0; k < n_phi; ++k) {
      nodes.push_back(spin_label(std::acos(x), 2.0 * M_PI * k / n_phi));
      weights.push_back(norm * w * 2.0 * M_PI / n_phi);
    }
  }
  gsl_integration_glfixed_table_free(table);
  auto map = [two_j](const RealVector& z) { return spin_vector(two_j, z(0), z(1)); };
  return build(2, two_j + 1, map, std::move(nodes), std::move(weights), "spin-" + std::to_string(two_j) + "/2");
}

PropagatorResult sliced_propagator(const CoherentFamily& family, const HermitianObservable& h,
                                   const RealVector& z_start, const RealVector& z_end, double s, int slices,
                                   const SliceOptions& options) {
  if (slices < 2) fail(ErrorCode::InvalidArgument, "need at least two slices");
  if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "total time must be finite");
  if (h.dim() != family.dim) fail(ErrorCode::DimensionMismatch, "Hamiltonian and family dimensions differ");
  if (options.regulator && !(*options.regulator > 0.0))
    fail(ErrorCode::InvalidArgument, "regulator must be positive");
  if (family.identity_residual > kQuadratureLimit)
    fail(ErrorCode::QuadratureTooCoarse, "resolution-of-identity residual " + std::to_string(family.identity_residual));
  NodeSet nodes;
  for (const auto& z : family.nodes) nodes.vecs.push_back(family.vector_map(z));
  nodes.weights = family.weights;
  const Vector a = family.vector_map(z_start), b = family.vector_map(z_end);
  PropagatorResult r;
  r.amplitude = transfer_amplitude(nodes, h.matrix(), a, b, s, slices, options);
  r.exact = b.dot(exp_hermitian(h.matrix(), cplx(0.0, -s)) * a);
  r.error = std::abs(r.amplitude - r.exact);
  r.identity_residual = family.identity_residual;
  r.slices = slices;
  return r;
}

MonteCarloResult sliced_propagator_mc(int two_j, const HermitianObservable& h, const RealVector& z_start,
                                      const RealVector& z_end, double s, int slices, const MonteCarloOptions& mc,
                                      const SliceOptions& options) {
  if (two_j < 1) fail(ErrorCode::InvalidArgument, "spin family needs 2j >= 1");
  if (slices < 2) fail(ErrorCode::InvalidArgument, "need at least two slices");
  if (mc.batches < 2 || mc.strata_theta < 1 || mc.strata_phi < 1)
    fail(ErrorCode::InvalidArgument, "Monte Carlo needs at least two batches and one stratum");
  if (h.dim() != two_j + 1) fail(ErrorCode::DimensionMismatch, "Hamiltonian and family dimensions differ");

  // all draws come from one stream in batch order, then batches run in parallel
  Rng rng(mc.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cells = mc.strata_theta * mc.strata_phi;
  const double w = (two_j + 1.0) / cells;
  std::vector<NodeSet> sets(static_cast<std::size_t>(mc.batches));
  for (auto& set : sets) {
    for (int i = 0; i < mc.strata_theta; ++i)
      for (int k = 0; k < mc.strata_phi; ++k) {
        const double x = -1.0 + 2.0 * (i + unit(rng)) / mc.strata_theta;
        const double phi = 2.0 * M_PI * (k + unit(rng)) / mc.strata_phi;
        set.vecs.push_back(spin_vector(two_j, std::acos(x), phi));
        set.weights.push_back(w);
      }
  }
  const Vector a = spin_vector(two_j, z_start(0), z_start(1));
  const Vector b = spin_vector(two_j, z_end(0), z_end(1));
  std::vector<cplx> values(sets.size());
  detail::parallel_for(sets.size(), mc.workers, [&](std::size_t i) {
    values[i] = transfer_amplitude(sets[i], h.matrix(), a, b, s, slices, options);
  });
  MonteCarloResult r;
  r.batches = mc.batches;
  r.mean = std::accumulate(values.begin(), values.end(), cplx(0.0)) / static_cast<double>(values.size());
  double var = 0.0;
  for (const auto& v : values) var += std::norm(v - r.mean);
  var /= (values.size() - 1.0);
  r.std_error = std::sqrt(var / values.size());
  r.exact = b.dot(exp_hermitian(h.matrix(), cplx(0.0, -s)) * a);
  return r;
}

ConvergenceReport propagator_convergence(const CoherentFamily& family, const HermitianObservable& h,
                                         const RealVector& z_start, const RealVector& z_end, double s,
                                         const std::vector<int>& slices, const SliceOptions& options) {
  ConvergenceReport rep;
  rep.slices = slices;
  std::vector<cplx> amps;
  for (int n : slices) {
    const auto r = sliced_propagator(family, h, z_start, z_end, s, n, options);
    amps.push_back(r.amplitude);
    rep.errors.push_back(r.error);
  }
  for (std::size_t i = 0; i + 1 < slices.size(); ++i)
    rep.observed_orders.push_back(std::log(rep.errors[i] / rep.errors[i + 1]) /
                                  std::log(static_cast<double>(slices[i + 1]) / slices[i]));
  for (std::size_t i = 0; i + 2 < slices.size(); ++i)
    rep.richardson_orders.push_back(std::log(std::abs(amps[i] - amps[i + 1]) / std::abs(amps[i + 1] - amps[i + 2])) /
                                    std::log(static_cast<double>(slices[i + 1]) / slices[i]));
  return rep;
}

std::vector<double> klauder_maraner_residual(const CoherentFamily& family, const HermitianObservable& h,
                                             const std::vector<RealVector>& path, double step) {
  if (family.label_dim % 2 != 0) fail(ErrorCode::InvalidArgument, "phase space must be even-dimensional");
  if (h.dim() != family.dim) fail(ErrorCode::DimensionMismatch, "Hamiltonian and family dimensions differ");
  const Index m = family.label_dim;
  const double n = static_cast<double>(m / 2);
  std::vector<double> out;
  out.reserve(path.size());
  for (const auto& xi : path) {
    const Vector z = family.vector_map(xi);
    std::vector<Vector> dz;
    for (Index i = 0; i < m; ++i) {
      RealVector p = xi, q = xi;
      p(i) += step;
      q(i) -= step;
      dz.push_back((family.vector_map(p) - family.vector_map(q)) / (2.0 * step));
    }
    RealMatrix g(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) g(i, j) = (dz[i].dot(dz[j]) - dz[i].dot(z) * z.dot(dz[j])).real();
    const double hz = z.dot(h.matrix() * z).real();
    out.push_back(g.determinant() - std::pow(hz, -2.0 * n));
  }
  return out;
}

PriorSpec PriorSpec::make(double k, double alpha, double beta, DensityMatrix reference) {
  if (!std::isfinite(k) || k < 0.0) fail(ErrorCode::InvalidArgument, "prior strength k must be finite and >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::InvalidArgument, "beta must lie in [0, 1]");
  return PriorSpec{k, alpha, beta, std::move(reference), std::nullopt};
}

double entropic_prior_density(const PriorSpec& spec, const DensityMatrix& p) {
  if (p.dim() != spec.reference.dim()) fail(ErrorCode::DimensionMismatch, "state and reference dimensions differ");
  const DistanceFunctional d = spec.base_distance ? *spec.base_distance : f_gamma_distance(spec.alpha);
  const double dist = d(p, spec.reference);
  if (!std::isfinite(dist)) fail(ErrorCode::DomainError, "distance to the reference is not finite");
  if (spec.beta == 1.0) return std::exp(-spec.k * dist);
  const double base = 1.0 + spec.k * (1.0 - spec.beta) * dist;
  if (base < 0.0) fail(ErrorCode::BranchDomain, "negative base in the power-law branch");
  return std::pow(base, -2.0 / (1.0 + spec.beta));
}

double jeffreys_factor(const MetricTensor& g) { return std::sqrt(std::abs(g.matrix.determinant())); }

PathWeight path_weight(const std::function<DensityMatrix(double)>& trajectory, double s,
                       const DistanceFunctional& d, double k, double eps, double dt,
                       const std::optional<std::pair<StateChart, RealVector>>& chart) {
  if (!(dt > 0.0) || !(s > 0.0)) fail(ErrorCode::InvalidArgument, "path weight needs s > 0 and dt > 0");
  if (!(eps > 0.0) || !std::isfinite(k)) fail(ErrorCode::InvalidArgument, "path weight needs eps > 0, finite k");
  const int n = std::max(2, static_cast<int>(std::lround(s / dt)));
  const double h = s / n;
  std::vector<DensityMatrix> phi;
  phi.reserve(static_cast<std::size_t>(n + 1));
  for (int j = 0; j <= n; ++j) phi.push_back(trajectory(j * h));

  PathWeight out{0.0, 0.0, 1.0, 0};
  double sum = 0.0;
  for (int j = 0; j <= n; ++j) {
    Matrix vel;
    if (j == 0)
      vel = (-3.0 * phi[0].matrix() + 4.0 * phi[1].matrix() - phi[2].matrix()) / (2.0 * h);
    else if (j == n)
      vel = (3.0 * phi[n].matrix() - 4.0 * phi[n - 1].matrix() + phi[n - 2].matrix()) / (2.0 * h);
    else
      vel = (phi[j + 1].matrix() - phi[j - 1].matrix()) / (2.0 * h);
    vel = hermitian_part(vel);
    vel -= (vel.trace() / static_cast<double>(vel.rows())) * Matrix::Identity(vel.rows(), vel.rows());

    double e = eps;
    std::optional<DensityMatrix> moved;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      const Matrix m = phi[j].matrix() + e * vel;
      if (Spectrum::of(hermitian_part(m)).eigenvalues(0) > 0.0) {
        moved = DensityMatrix::validate(m);
        break;
      }
      if (attempt == 10) break;
      e *= 0.5;
      ++out.shrinks;
    }
    if (!moved) fail(ErrorCode::InvalidPerturbedState, "perturbed state not positive after 10 shrinks");
    const double w = (j == 0 || j == n) ? 0.5 : 1.0;
    sum += w * d(*moved, phi[j]) * h;
  }
  out.action = -k * sum;
  if (chart) out.jeffreys = jeffreys_factor(eguchi_metric(d, chart->first, chart->second));
  out.weight = std::exp(out.action) * out.jeffreys;
  return out;
}

}  // namespace qig
