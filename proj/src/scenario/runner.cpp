#include "runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "config.hpp"
#include "qig/divergences.hpp"
#include "qig/dynamics.hpp"
#include "qig/histories.hpp"
#include "qig/info_geometry.hpp"
#include "qig/modular.hpp"
#include "qig/renorm.hpp"

namespace qig::scenario {

namespace {

struct Context {
  const Field& params;
  Index dim;
  std::optional<std::uint64_t> seed;
  const RunOptions& options;
  Report& report;

  std::uint64_t require_seed() const {
    if (!seed) fail(ErrorCode::ConfigInvalid, "seed: required for this scenario");
    return *seed;
  }
};

// Turns validation failures of config-supplied values into ConfigInvalid at that field.
template <class Fn>
auto guard(const Field& f, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    f.invalid(e.what());
  }
}

DensityMatrix state(const Field& f, Index d) {
  return guard(f, [&] { return DensityMatrix::validate(f.square(d)); });
}

HermitianObservable observable(const Field& f, Index d) {
  return guard(f, [&] { return HermitianObservable::validate(f.square(d)); });
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string ij(Index i, Index j) { return "_" + std::to_string(i) + "_" + std::to_string(j); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

void add_real_matrix(Report& r, const std::string& prefix, const RealMatrix& m, bool upper_only = false) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = upper_only ? i : 0; j < m.cols(); ++j) r.add(prefix + ij(i, j), m(i, j));
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// --- divergence --------------------------------------------------------------------------------

void run_divergence(Context& c) {
  const auto rho = state(c.params["rho"], c.dim);
  const auto sigma = state(c.params["sigma"], c.dim);
  const std::vector<double> gammas = c.params["gammas"].present() ? c.params["gammas"].numbers() : std::vector<double>{1.0};
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const auto d = guard(c.params["gammas"][i], [&] { return f_gamma_distance(gammas[i]); });
    c.report.add("quasi_entropy_gamma_" + tag(gammas[i]), d(rho, sigma));
  }
  c.report.add("wigner_yanase", closed_form_distance(ClosedFormKind::wigner_yanase, rho, sigma));
  c.report.add("d_half", closed_form_distance(ClosedFormKind::d_half, rho, sigma));
  c.report.add("hilbert_schmidt", hilbert_schmidt_distance()(rho, sigma));
  c.report.add("trace_distance", trace_distance(rho.matrix(), sigma.matrix()));

  const Field mono = c.params["monotonicity"];
  if (mono.present()) {
    Rng rng(c.require_seed());
    const long samples = mono["samples"].integer_or(100);
    const long kraus = mono["kraus"].integer_or(2);
    if (samples < 1) mono["samples"].invalid("must be positive");
    if (kraus < 1) mono["kraus"].invalid("must be positive");
    std::vector<QuantumChannel> channels;
    std::vector<std::pair<DensityMatrix, DensityMatrix>> pairs;
    for (long s = 0; s < samples; ++s) {
      channels.push_back(QuantumChannel::random(c.dim, kraus, rng));
      auto a = random_faithful_state(c.dim, rng);
      auto b = random_faithful_state(c.dim, rng);
      pairs.emplace_back(std::move(a), std::move(b));
    }
    for (double g : gammas) {
      const auto d = f_gamma_distance(g);
      double worst = 0.0;
      for (long s = 0; s < samples; ++s) {
        const auto rep = monotonicity_check(d, channels[static_cast<std::size_t>(s)], {pairs[static_cast<std::size_t>(s)]});
        worst = std::max(worst, rep.max_violation);
      }
      c.report.check("monotonicity_violation_gamma_" + tag(g), worst, kMonotonicitySlack);
    }
  }
}

// --- geometry ----------------------------------------------------------------------------------

std::optional<OperatorMonotoneFunction> monotone_by_name(const Field& f, double gamma) {
  if (!f.present()) return std::nullopt;
  const std::string name = f.string();
  if (name == "bkm") return OperatorMonotoneFunction::bkm();
  if (name == "bures") return OperatorMonotoneFunction::bures();
  if (name == "wigner_yanase") return OperatorMonotoneFunction::wigner_yanase();
  if (name == "f_gamma") return OperatorMonotoneFunction::from_f_gamma(gamma);
  f.invalid("expected one of bkm, bures, wigner_yanase, f_gamma");
}

void run_geometry(Context& c) {
  const std::string kind = c.params["chart"].string_or("bloch");
  StateChart chart;
  if (kind == "bloch") {
    if (c.dim != 2) c.params["chart"].invalid("the Bloch chart needs dim = 2");
    const auto base = c.params["base"].present() ? state(c.params["base"], 2) : maximally_mixed(2);
    chart = bloch_chart(base);
  } else if (kind == "simplex") {
    chart = guard(c.params["chart"], [&] { return simplex_chart(c.dim); });
  } else {
    c.params["chart"].invalid("expected bloch or simplex");
  }
  const auto theta_list = c.params["theta"].numbers();
  if (static_cast<Index>(theta_list.size()) != chart.param_dim)
    c.params["theta"].invalid("expected " + std::to_string(chart.param_dim) + " coordinates");
  const RealVector theta = Eigen::Map<const RealVector>(theta_list.data(), chart.param_dim);
  guard(c.params["theta"], [&] { return chart(theta); });

  const double gamma = c.params["gamma"].number_or(1.0);
  const auto d = guard(c.params["gamma"], [&] { return f_gamma_distance(gamma); });
  const MetricTensor g = eguchi_metric(d, chart, theta);
  add_real_matrix(c.report, "metric", g.matrix, true);

  if (auto h = monotone_by_name(c.params["monotone"], gamma)) {
    const MetricTensor m = monotone_metric_tensor(*h, chart, theta);
    add_real_matrix(c.report, "monotone_metric", m.matrix, true);
    const double rel = (g.matrix - m.matrix).cwiseAbs().maxCoeff() / m.matrix.cwiseAbs().maxCoeff();
    c.report.check("eguchi_vs_monotone_relative", rel, c.params["tolerance"].number_or(1e-4));
  }
  if (c.params["curvature"].boolean_or(false)) {
    if (chart.param_dim < 2) c.params["curvature"].invalid("curvature needs at least two coordinates");
    c.report.add("scalar_curvature", scalar_curvature(eguchi_metric_field(d, chart), theta));
  }
}

// --- project -----------------------------------------------------------------------------------

void run_project(Context& c) {
  const auto omega = state(c.params["omega"], c.dim);
  const double gamma = c.params["gamma"].number_or(1.0);
  const auto d = guard(c.params["gamma"], [&] { return f_gamma_distance(gamma); });
  const Field q = c.params["constraint"];
  const std::string kind = q["kind"].string();
  ConstraintSet set;
  if (kind == "expectations") {
    std::vector<HermitianObservable> obs;
    for (std::size_t i = 0; i < q["observables"].size(); ++i) obs.push_back(observable(q["observables"][i], c.dim));
    set = guard(q, [&] { return ConstraintSet::expectations(obs, q["targets"].numbers()); });
  } else if (kind == "commutant") {
    std::vector<Matrix> ps;
    for (std::size_t i = 0; i < q["projectors"].size(); ++i) ps.push_back(q["projectors"][i].square(c.dim));
    set = guard(q["projectors"], [&] { return ConstraintSet::commutant(ps); });
  } else if (kind == "product") {
    const long a = q["dim_a"].integer(), b = q["dim_b"].integer();
    if (a < 1 || b < 1 || a * b != c.dim) q.invalid("dim_a * dim_b must equal dim");
    set = guard(q, [&] { return ConstraintSet::product(a, b); });
  } else {
    q["kind"].invalid("expected expectations, commutant or product");
  }
  const std::string order_name = c.params["order"].string_or("automatic");
  ProjectionOrder order = ProjectionOrder::automatic;
  if (order_name == "constrained_first")
    order = ProjectionOrder::constrained_first;
  else if (order_name == "constrained_second")
    order = ProjectionOrder::constrained_second;
  else if (order_name != "automatic")
    c.params["order"].invalid("expected automatic, constrained_first or constrained_second");

  const auto rep = entropic_projection_report(d, set, omega, order);
  c.report.add("objective", rep.objective);
  c.report.add("iterations", rep.iterations);
  c.report.check("constraint_residual", rep.constraint_residual, c.params["tolerance"].number_or(1e-6));
  c.report.witnesses["state"] = matrix_json(rep.state.matrix());
  c.report.witnesses["method"] = rep.method;

  if (gamma == 1.0 && order == ProjectionOrder::automatic) {
    if (kind == "commutant") {
      Matrix luders = Matrix::Zero(c.dim, c.dim);
      for (const auto& p : set.blocks) luders += p * omega.matrix() * p;
      c.report.check("luders_trace_distance", trace_distance(rep.state.matrix(), luders), 1e-6);
    } else if (kind == "product") {
      const Matrix prod = kron(partial_trace(omega, set.dim_a, set.dim_b, 0).matrix(),
                               partial_trace(omega, set.dim_a, set.dim_b, 1).matrix());
      c.report.check("marginal_product_trace_distance", trace_distance(rep.state.matrix(), prod), 1e-6);
    }
  }
  if (c.params["x"].present()) {
    const auto x = state(c.params["x"], c.dim);
    if (!set.contains(x)) c.params["x"].invalid("state does not satisfy the constraint");
    c.report.check("pythagorean_residual", pythagorean_residual(d, set, omega, x), 1e-7);
  }
}

// --- evolve ------------------------------------------------------------------------------------

void run_evolve(Context& c) {
  const auto rho = state(c.params["rho"], c.dim);
  const auto h = observable(c.params["h"], c.dim);
  HamiltonianFunction fn = HamiltonianFunction::linear(h);
  const Field mf = c.params["mean_field"];
  if (mf.present()) {
    std::vector<std::pair<double, HermitianObservable>> squares;
    for (std::size_t i = 0; i < mf.size(); ++i) squares.emplace_back(mf[i]["lambda"].number(), observable(mf[i]["a"], c.dim));
    fn = HamiltonianFunction::mean_field(h, squares);
  }
  const double t_final = c.params["t_final"].number_or(1.0);
  const double dt = c.params["dt"].number_or(1e-3);
  if (!(t_final > 0.0)) c.params["t_final"].invalid("must be positive");
  if (!(dt > 0.0) || dt > t_final) c.params["dt"].invalid("must lie in (0, t_final]");
  const long every = c.params["record_every"].integer_or(100);
  if (every < 1) c.params["record_every"].invalid("must be positive");

  const auto traj = hamiltonian_flow(fn, rho, t_final, dt, static_cast<int>(every));
  const RealVector spec0 = rho.spectrum().eigenvalues;
  const double e0 = fn(rho);
  double spec_drift = 0.0, energy_drift = 0.0;
  for (const auto& p : traj.points) {
    spec_drift = std::max(spec_drift, (p.state.spectrum().eigenvalues - spec0).cwiseAbs().maxCoeff());
    energy_drift = std::max(energy_drift, std::abs(fn(p.state) - e0));
  }
  c.report.add("final_time", traj.points.back().t);
  c.report.add("energy", e0);
  c.report.add("halvings", traj.halvings);
  const double tol = c.params["tolerance"].number_or(1e-8);
  c.report.check("spectrum_drift", spec_drift, tol);
  c.report.check("energy_drift", energy_drift, tol);
  c.report.witnesses["final_state"] = matrix_json(traj.final_state().matrix());
}

// --- modular -----------------------------------------------------------------------------------

void run_modular(Context& c) {
  const auto omega = state(c.params["omega"], c.dim);
  if (!omega.faithful()) c.params["omega"].invalid("state must be faithful");
  const auto x = observable(c.params["x"], c.dim);
  const double t = c.params["t"].number_or(0.5);
  const long pairs = c.params["sample_pairs"].integer_or(50);
  if (pairs < 1) c.params["sample_pairs"].invalid("must be positive");
  const auto kms = modular_flow_kms(omega, x, t, static_cast<int>(pairs), c.require_seed());
  c.report.check("kms_residual", kms.kms_residual, 1e-10);
  c.report.check("implementation_residual", kms.implementation_residual, 1e-10);

  const auto gw = GnsSpace::build(omega);
  const Superoperator jw = modular_conjugation(gw);
  if (c.params["phi"].present()) {
    const auto phi = state(c.params["phi"], c.dim);
    if (!phi.faithful()) c.params["phi"].invalid("state must be faithful");
    const auto gp = GnsSpace::build(phi);
    const auto v = standard_unitary_transition(phi, omega);
    const Matrix vh = to_orthonormal(v, gw, gp);
    c.report.check("transition_unitarity", max_abs(vh.adjoint() * vh - Matrix::Identity(vh.cols(), vh.cols())), 1e-10);
    const auto jp = modular_conjugation(gp);
    c.report.check("transition_j_intertwining", max_abs(v.compose(jw).matrix - jp.compose(v).matrix), 1e-10);
  }
  if (c.params["h0"].present()) {
    const auto h0 = observable(c.params["h0"], c.dim);
    const auto k = standard_liouvillean(h0, gw);
    c.report.check("jk_anticommutation", max_abs(jw.compose(k).matrix + k.compose(jw).matrix), 1e-10);
    if (c.params["q"].present()) {
      const auto q = observable(c.params["q"], c.dim);
      const auto p = djp_perturb(k, q, gw);
      c.report.check("cocycle_residual",
                     p.cocycle_residual(c.params["t1"].number_or(0.3), c.params["t2"].number_or(0.5)), 1e-9);
      const double beta = c.params["beta"].number_or(1.0);
      const auto omega_q = perturbed_kms_state(gibbs_state(h0.matrix(), beta), q, beta);
      const auto direct = gibbs_state(h0.matrix() + q.matrix(), beta);
      c.report.check("perturbed_gibbs_gap", max_abs(omega_q.matrix() - direct.matrix()), 1e-8);
    }
  }
}

// --- renorm ------------------------------------------------------------------------------------

std::vector<Index> index_list(const Field& f) {
  std::vector<Index> out;
  if (!f.present()) return out;
  for (long v : f.integers()) out.push_back(static_cast<Index>(v));
  return out;
}

void run_renorm(Context& c) {
  const RealMatrix k = c.params["k"].real_matrix();
  if (k.rows() != c.dim || k.cols() != c.dim) c.params["k"].invalid("expected a dim x dim matrix");
  BlockPartition blocks{index_list(c.params["a"]), index_list(c.params["b"]), index_list(c.params["c"])};
  const auto model = guard(c.params, [&] { return BlockModel::validate(k, blocks); });
  const long order = c.params["order"].integer_or(20);
  if (order < 0 || order > 100000) c.params["order"].invalid("must lie in [0, 100000]");

  const auto r = block_renormalize(model);
  add_real_matrix(c.report, "k_tilde_aa", r.k_aa);
  add_real_matrix(c.report, "k_tilde_ab", r.k_ab);
  add_real_matrix(c.report, "k_tilde_ba", r.k_ba);
  add_real_matrix(c.report, "k_tilde_bb", r.k_bb);
  add_real_matrix(c.report, "r2_ac", r.r2_ac);
  add_real_matrix(c.report, "factor", r.factor);
  c.report.check("identity_residual", r.identity_residual, 1e-10);

  const auto series = propagator_series(model, static_cast<int>(order));
  c.report.add("spectral_radius", series.spectral_radius);
  c.report.add("convergent", series.convergent ? 1.0 : 0.0);
  add_real_matrix(c.report, "series_partial", series.partial_sums.back());
  if (series.convergent) {
    add_real_matrix(c.report, "series_limit", series.limit);
    c.report.check("series_limit_gap", (series.partial_sums.back() - series.limit).cwiseAbs().maxCoeff(),
                   c.params["series_tolerance"].number_or(1e-6));
  }

  const Field fav = c.params["favretti"];
  if (fav.present()) {
    // quadratic potential Ψ = ½ θᵀKθ started at θ = 0
    if (k.determinant() <= 0.0) c.params["k"].invalid("Favretti response needs a positive definite K");
    const auto chart = DuallyFlatChart::quadratic(k, RealVector::Zero(c.dim));
    const auto target_list = fav["eta_a"].numbers();
    if (target_list.size() != blocks.a.size()) fav["eta_a"].invalid("expected one entry per driving index");
    const RealVector target = Eigen::Map<const RealVector>(target_list.data(), static_cast<Index>(target_list.size()));
    const long steps = fav["steps"].integer_or(100);
    if (steps < 1) fav["steps"].invalid("must be positive");
    const auto traj = favretti_response(chart, blocks, RealVector::Zero(c.dim),
                                        [&](double t) { return RealVector(t * target); }, static_cast<int>(steps));
    for (Index i = 0; i < traj.eta_b.back().size(); ++i) c.report.add("favretti_eta_b_" + std::to_string(i), traj.eta_b.back()(i));
    c.report.check("favretti_endpoint_gap", (traj.eta_b.back() - traj.eta_b_direct).cwiseAbs().maxCoeff(), 1e-6);
  }
}

// --- contract ----------------------------------------------------------------------------------

QuantumChannel channel_from(const Field& f, Index dim, Rng& rng, bool& used_rng) {
  const std::string kind = f["kind"].string();
  if (kind == "identity") return QuantumChannel::identity(dim);
  if (kind == "depolarizing") {
    return guard(f["p"], [&] { return QuantumChannel::depolarizing(dim, f["p"].number()); });
  }
  if (kind == "amplitude_damping") {
    if (dim != 2) f["kind"].invalid("amplitude damping needs dim = 2");
    return guard(f["gamma"], [&] { return QuantumChannel::amplitude_damping(f["gamma"].number()); });
  }
  if (kind == "random") {
    used_rng = true;
    const long kraus = f["kraus"].integer_or(2);
    if (kraus < 1) f["kraus"].invalid("must be positive");
    return QuantumChannel::random(dim, kraus, rng);
  }
  if (kind == "kraus") {
    std::vector<Matrix> ops;
    for (std::size_t i = 0; i < f["operators"].size(); ++i) ops.push_back(f["operators"][i].square(dim));
    return guard(f["operators"], [&] { return QuantumChannel::from_kraus(ops); });
  }
  f["kind"].invalid("expected identity, depolarizing, amplitude_damping, random or kraus");
}

void run_contract(Context& c) {
  Rng rng(c.require_seed());
  bool used = false;
  const auto channel = channel_from(c.params["channel"], c.dim, rng, used);
  const double gamma = c.params["gamma"].number_or(1.0);
  const auto model = guard(c.params["gamma"], [&] { return ContractionModel::f_gamma(gamma); });
  Sampler s;
  s.count = static_cast<int>(c.params["samples"].integer_or(2000));
  s.refine_iterations = static_cast<int>(c.params["refine_iterations"].integer_or(200));
  if (s.count < 1) c.params["samples"].invalid("must be positive");
  if (s.refine_iterations < 0) c.params["refine_iterations"].invalid("must be non-negative");
  s.seed = *c.seed + (used ? 1 : 0);
  s.workers = c.options.workers;
  const double slack = c.params["slack"].number_or(1e-3);

  if (c.dim == 2) {
    const auto chain = contraction_chain(model, channel, s);
    c.report.add("eta_divergence", chain.divergence.value);
    c.report.add("eta_metric", chain.metric.value);
    c.report.add("eta_geodesic", chain.geodesic.value);
    c.report.check("chain_violation", chain.max_violation, slack);
  } else {
    // the geodesic coefficient is qubit-only
    const auto div = contraction_coefficient(ContractionKind::divergence, model, channel, s);
    const auto met = contraction_coefficient(ContractionKind::metric, model, channel, s);
    c.report.add("eta_divergence", div.value);
    c.report.add("eta_metric", met.value);
    const double viol = std::max({0.0, div.value - 1.0, met.value - div.value});
    c.report.check("chain_violation", viol, slack);
  }
}

// --- histories ---------------------------------------------------------------------------------

HistorySpec history_from(const Field& f, Index dim) {
  std::vector<Matrix> ps;
  for (std::size_t i = 0; i < f["projectors"].size(); ++i) ps.push_back(f["projectors"][i].square(dim));
  const auto times = f["times"].numbers();
  return guard(f, [&] { return HistorySpec::validate(ps, times); });
}

void run_histories(Context& c) {
  const auto rho = state(c.params["rho"], c.dim);
  const auto h = c.params["h"].present() ? observable(c.params["h"], c.dim)
                                         : HermitianObservable::validate(Matrix::Zero(c.dim, c.dim));
  const Field list = c.params["histories"];
  std::vector<HistorySpec> hs;
  for (std::size_t i = 0; i < list.size(); ++i) hs.push_back(history_from(list[i], c.dim));
  if (hs.empty()) list.invalid("at least one history is required");
  for (std::size_t i = 1; i < hs.size(); ++i)
    if (hs[i].times != hs[0].times) list[i]["times"].invalid("all histories must share one time grid");

  const std::size_t n = hs.size();
  std::vector<std::vector<cplx>> hf(n, std::vector<cplx>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) hf[i][j] = histories_functional(rho, h, hs[i], hs[j]);
  double herm = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c.report.add("probability_" + std::to_string(i), history_probability(rho, hs[i], h));
    neg = std::max(neg, -hf[i][i].real());
    for (std::size_t j = 0; j < n; ++j) herm = std::max(herm, std::abs(hf[i][j] - std::conj(hf[j][i])));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      c.report.add("functional" + ij(static_cast<Index>(i), static_cast<Index>(j)) + "_re", hf[i][j].real());
      c.report.add("functional" + ij(static_cast<Index>(i), static_cast<Index>(j)) + "_im", hf[i][j].imag());
    }
  c.report.check("hermiticity_residual", herm, 1e-9);
  c.report.check("positivity_defect", neg, 1e-9);
  const auto one = HistorySpec::trivial(c.dim, hs[0].times);
  c.report.check("normalization_residual", std::abs(histories_functional(rho, h, one, one) - 1.0), 1e-9);

  const Field path = c.params["phase_path"];
  if (path.present()) {
    std::vector<Vector> vs;
    for (std::size_t i = 0; i < path.size(); ++i) {
      Vector v = path[i].vector();
      if (v.size() != c.dim) path[i].invalid("expected " + std::to_string(c.dim) + " entries");
      if (v.norm() == 0.0) path[i].invalid("zero vector");
      vs.push_back(v.normalized());
    }
    c.report.add("geometric_phase", geometric_phase(vs, c.params["phase_closed"].boolean_or(false)));
  }
}

// --- prior -------------------------------------------------------------------------------------

void run_prior(Context& c) {
  const auto ref = state(c.params["reference"], c.dim);
  const double k = c.params["k"].number(), alpha = c.params["alpha"].number_or(1.0), beta = c.params["beta"].number_or(1.0);
  const auto spec = guard(c.params, [&] { return PriorSpec::make(k, alpha, beta, ref); });
  const Field states = c.params["states"];
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto p = state(states[i], c.dim);
    c.report.add("density_" + std::to_string(i), entropic_prior_density(spec, p));
  }
  if (c.params["continuity"].boolean_or(false)) {
    // power branch just below β = 1 against the exponential branch
    double gap = 0.0;
    auto near = spec;
    near.beta = 1.0 - 1e-4;
    auto at = spec;
    at.beta = 1.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto p = state(states[i], c.dim);
      gap = std::max(gap, std::abs(entropic_prior_density(near, p) - entropic_prior_density(at, p)));
    }
    c.report.check("branch_continuity_gap", gap, 1e-4);
  }
  const Field pw = c.params["path_weight"];
  if (pw.present()) {
    // φ(t) = e^{-iHt} ρ₀ e^{iHt}
    const auto start = state(pw["start"], c.dim);
    const Matrix hm = observable(pw["hamiltonian"], c.dim).matrix();
    const double s = pw["s"].number_or(1.0), eps = pw["eps"].number(), dt = pw["dt"].number_or(1e-3);
    if (!(s > 0.0)) pw["s"].invalid("must be positive");
    if (!(eps > 0.0)) pw["eps"].invalid("must be positive");
    if (!(dt > 0.0) || dt > s) pw["dt"].invalid("must lie in (0, s]");
    auto traj = [&](double t) {
      const Matrix u = exp_hermitian(hm, cplx(0.0, -t));
      return DensityMatrix::validate(u * start.matrix() * u.adjoint());
    };
    const auto d = f_gamma_distance(alpha);
    const auto w = path_weight(traj, s, d, k, eps, dt);
    c.report.add("path_action", w.action);
    c.report.add("path_weight", w.weight);
    c.report.add("path_shrinks", w.shrinks);
  }
}

// --- propagator --------------------------------------------------------------------------------

RealVector label2(const Field& f) {
  const auto v = f.numbers();
  if (v.size() != 2) f.invalid("expected [theta, phi]");
  RealVector z(2);
  z << v[0], v[1];
  return z;
}

void run_propagator(Context& c) {
  const long two_j = c.params["two_j"].integer_or(c.dim - 1);
  if (two_j < 1 || two_j + 1 != c.dim) c.params["two_j"].invalid("dim must equal 2j + 1 with 2j >= 1");
  const auto h = observable(c.params["h"], c.dim);
  const RealVector a = label2(c.params["z_start"]), b = label2(c.params["z_end"]);
  const double s = c.params["s"].number_or(1.0);
  std::vector<long> slices = c.params["slices"].present() ? c.params["slices"].integers() : std::vector<long>{8, 16, 32, 64};
  for (std::size_t i = 0; i < slices.size(); ++i)
    if (slices[i] < 2 || slices[i] > 100000) c.params["slices"][i].invalid("must lie in [2, 100000]");
  SliceOptions opt;
  const std::string kernel = c.params["kernel"].string_or("linearized");
  if (kernel == "lower_symbol")
    opt.kernel = SliceKernel::lower_symbol;
  else if (kernel != "linearized")
    c.params["kernel"].invalid("expected linearized or lower_symbol");
  if (c.params["regulator"].present()) {
    opt.regulator = c.params["regulator"].number();
    if (!(*opt.regulator > 0.0)) c.params["regulator"].invalid("must be positive");
  }
  const Field quad = c.params["quadrature"];
  const long nt = quad["n_theta"].integer_or(6), np = quad["n_phi"].integer_or(12);
  if (nt < 1 || nt > 100) quad["n_theta"].invalid("must lie in [1, 100]");
  if (np < 1 || np > 200) quad["n_phi"].invalid("must lie in [1, 200]");
  const auto fam = CoherentFamily::spin(static_cast<int>(two_j), static_cast<int>(nt), static_cast<int>(np));
  c.report.check("identity_residual", fam.identity_residual, 1e-6);

  std::vector<int> ns(slices.begin(), slices.end());
  std::vector<cplx> amps;
  cplx exact;
  for (int n : ns) {
    const auto r = sliced_propagator(fam, h, a, b, s, n, opt);
    exact = r.exact;
    amps.push_back(r.amplitude);
    c.report.add("amplitude_re_" + std::to_string(n), r.amplitude.real());
    c.report.add("amplitude_im_" + std::to_string(n), r.amplitude.imag());
    c.report.add("error_" + std::to_string(n), r.error);
  }
  c.report.add("exact_re", exact.real());
  c.report.add("exact_im", exact.imag());
  for (std::size_t i = 0; i + 1 < ns.size(); ++i) {
    const double e0 = std::abs(amps[i] - exact), e1 = std::abs(amps[i + 1] - exact);
    c.report.add("observed_order_" + std::to_string(ns[i]) + "_" + std::to_string(ns[i + 1]),
                 std::log(e0 / e1) / std::log(static_cast<double>(ns[i + 1]) / ns[i]));
  }
  for (std::size_t i = 0; i + 2 < ns.size(); ++i)
    c.report.add("richardson_order_" + std::to_string(ns[i]),
                 std::log(std::abs(amps[i] - amps[i + 1]) / std::abs(amps[i + 1] - amps[i + 2])) /
                     std::log(static_cast<double>(ns[i + 1]) / ns[i]));

  const Field mcf = c.params["monte_carlo"];
  if (mcf.present()) {
    MonteCarloOptions mc;
    mc.seed = c.require_seed();
    mc.workers = c.options.workers;
    mc.batches = static_cast<int>(mcf["batches"].integer_or(16));
    mc.strata_theta = static_cast<int>(mcf["strata_theta"].integer_or(6));
    mc.strata_phi = static_cast<int>(mcf["strata_phi"].integer_or(12));
    if (mc.batches < 2) mcf["batches"].invalid("must be at least 2");
    if (mc.strata_theta < 1 || mc.strata_phi < 1) mcf.invalid("strata must be positive");
    const long n = mcf["slices"].integer_or(ns.back());
    if (n < 2) mcf["slices"].invalid("must be at least 2");
    const auto r = sliced_propagator_mc(static_cast<int>(two_j), h, a, b, s, static_cast<int>(n), mc, opt);
    c.report.add("mc_re", r.mean.real());
    c.report.add("mc_im", r.mean.imag());
    c.report.add("mc_std_error", r.std_error);
  }
}

using Runner = void (*)(Context&);

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> table = {
      {"divergence", run_divergence}, {"geometry", run_geometry},     {"project", run_project},
      {"evolve", run_evolve},         {"modular", run_modular},       {"renorm", run_renorm},
      {"contract", run_contract},     {"histories", run_histories},   {"prior", run_prior},
      {"propagator", run_propagator},
  };
  return table;
}

json parse(const std::string& text) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config: expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
}

void apply_expectations(const Field& expect, Report& report) {
  if (!expect.present()) return;
  if (!expect.raw().is_object()) expect.invalid("expected an object of {value, tolerance}");
  for (const auto& [name, _] : expect.raw().items()) {
    const Field e = expect[name];
    Entry* entry = report.find(name);
    if (!entry) e.invalid("no result of that name");
    const double value = e["value"].number();
    const double tol = e["tolerance"].number_or(1e-9);
    entry->tolerance = tol;
    entry->pass = std::abs(entry->value - value) <= tol;
    report.witnesses["expected"][name] = value;
  }
}

}  // namespace

Report run_scenario(const std::string& scenario, const std::string& config_text, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const json doc = parse(config_text);
  const Field root(&doc, "");
  auto it = runners().find(scenario);
  if (it == runners().end()) fail(ErrorCode::ConfigInvalid, "scenario: unknown scenario '" + scenario + "'");
  if (root["scenario"].present() && root["scenario"].string() != scenario)
    root["scenario"].invalid("config is for '" + root["scenario"].string() + "'");
  const long dim = root["dim"].integer();
  if (dim < 1 || dim > 16) root["dim"].invalid("must lie in [1, 16]");
  std::optional<std::uint64_t> seed;
  if (root["seed"].present()) {
    const json& s = root["seed"].raw();
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long>() >= 0))
      root["seed"].invalid("expected a non-negative integer");
    seed = s.get<std::uint64_t>();
  }
  if (root["output_path"].present()) root["output_path"].string();
  if (options.workers < 1) fail(ErrorCode::ConfigInvalid, "workers: must be at least 1");

  Report report;
  report.scenario = scenario;
  report.engine_version = kEngineVersion;
  report.seed = seed;
  report.dim = dim;
  const Field params = root["parameters"];
  if (params.present() && !params.raw().is_object()) params.invalid("expected an object");
  Context ctx{params, static_cast<Index>(dim), seed, options, report};
  it->second(ctx);
  apply_expectations(params["expect"], report);
  if (options.timing)
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string config_output_path(const std::string& config_text) {
  const json doc = parse(config_text);
  const Field root(&doc, "");
  return root["output_path"].string_or("");
}

}  // namespace qig::scenario
