#include "tfem/sim.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace tfem {

namespace {

double interp(std::span<const double> x, std::span<const double> y, double t, double* slope) {
  if (slope) *slope = 0.0;
  if (t < x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
  const double s = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (slope) *slope = s;
  if (x[i] == t) return y[i];
  return y[i] + s * (t - x[i]);
}

void check_abscissae(const std::vector<double>& x, const std::string& what, bool strict) {
  if (x.empty()) throw ValidationError(what + ": table is empty");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw ValidationError(what + ": non-finite abscissa");
    if (i > 0 && (strict ? x[i] <= x[i - 1] : x[i] < x[i - 1])) {
      throw ValidationError(what + (strict ? ": abscissae must be strictly increasing"
                                           : ": abscissae must be non-decreasing"));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tables

double LinearTable::operator()(double t) const { return interp(x, y, t, nullptr); }

double LinearTable::slope(double t) const {
  double s = 0.0;
  interp(x, y, t, &s);
  return s;
}

void LinearTable::validate(const std::string& what, bool strict) const {
  check_abscissae(x, what, strict);
  if (y.size() != x.size()) throw ValidationError(what + ": value count differs from abscissa count");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError(what + ": non-finite value");
}

LinearTable constant_table(double value) { return {{0.0}, {value}}; }

void Material::validate() const {
  const std::string what = "material '" + name + "'";
  check_abscissae(temperatures, what, true);
  const std::size_t n = temperatures.size();
  auto positive = [&](const std::vector<double>& v, const char* field, bool strictly) {
    if (v.size() != n) throw ValidationError(what + ": " + field + " has the wrong number of samples");
    for (double s : v)
      if (!std::isfinite(s) || (strictly ? !(s > 0.0) : false)) {
        throw ValidationError(what + ": " + field + " must be positive and finite");
      }
  };
  positive(alpha, "alpha", false);
  positive(youngs, "E", true);
  positive(kappa, "kappa", true);
  positive(cv, "cv", true);
  if (!(rho > 0.0)) throw ValidationError(what + ": rho must be positive");
  if (!(poisson > -1.0 && poisson < 0.5)) throw ValidationError(what + ": Poisson ratio must lie in (-1, 0.5)");
  if (!std::isfinite(t_ref)) throw ValidationError(what + ": T_ref must be finite");
}

Material constant_material(double alpha, double youngs, double kappa, double cv, double rho, double poisson,
                           double t_ref) {
  Material m;
  m.name = "constant";
  m.temperatures = {t_ref};
  m.alpha = {alpha};
  m.youngs = {youngs};
  m.kappa = {kappa};
  m.cv = {cv};
  m.rho = rho;
  m.poisson = poisson;
  m.t_ref = t_ref;
  return m;
}

namespace {

MaterialProperties eval(const Material& m, double temperature) {
  MaterialProperties p;
  p.alpha = interp(m.temperatures, m.alpha, temperature, nullptr);
  p.youngs = interp(m.temperatures, m.youngs, temperature, nullptr);
  p.kappa = interp(m.temperatures, m.kappa, temperature, &p.dkappa);
  p.cv = interp(m.temperatures, m.cv, temperature, &p.dcv);
  return p;
}

const Material& region_material(const MaterialTable& table, int region) {
  auto it = table.find(region);
  if (it == table.end()) throw ValidationError("no material for region " + std::to_string(region));
  return it->second;
}

}  // namespace

MaterialProperties eval_material(const MaterialTable& table, int region, double temperature) {
  return eval(region_material(table, region), temperature);
}

BoundaryValues eval_schedule(const BoundarySchedule& schedule, int tag, double t) {
  auto it = schedule.find(tag);
  if (it == schedule.end()) throw ValidationError("no boundary schedule for tag " + std::to_string(tag));
  const BoundaryRegion& r = it->second;
  BoundaryValues v;
  if (r.robin) {
    v.beta = r.robin->beta(t);
    v.t_bc = r.robin->t_bc(t);
  }
  if (r.pressure) v.pressure = r.pressure->p(t);
  if (r.displacement)
    for (int c = 0; c < 3; ++c)
      if (r.displacement->u[c]) v.displacement[c] = (*r.displacement->u[c])(t);
  return v;
}

// ---------------------------------------------------------------------------
// Controller

void ControllerSettings::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("controller: theta must lie in [0, 1]");
  if (!(dt0 > 0.0)) throw ValidationError("controller: initial time step must be positive");
  if (!(delta_t_max > 0.0)) throw ValidationError("controller: temperature change cap must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("controller: epsilon must lie in (0, 1]");
  if (!(t_end > t_start)) throw ValidationError("controller: end time must exceed start time");
  if (max_retries < 0) throw ValidationError("controller: retry limit must be non-negative");
}

TimeController::TimeController(const ControllerSettings& s) : settings(s), dt(s.dt0) { s.validate(); }

double next_time_step(double dt, double max_change, const ControllerSettings& s) {
  const double cap = s.dt_max > 0.0 ? s.dt_max : s.t_end - s.t_start;
  if (!(max_change > 0.0)) return cap;
  return std::min(s.epsilon * s.delta_t_max / max_change * dt, cap);
}

// ---------------------------------------------------------------------------
// Problem

Problem make_problem(std::shared_ptr<const Mesh> mesh, int degree, MaterialTable materials,
                     BoundarySchedule schedule, TimingReport* timing) {
  if (!mesh) throw ValidationError("problem: no mesh");
  if (degree != 1 && degree != 2) throw ValidationError("problem: degree must be 1 or 2");
  for (const auto& [region, m] : materials) m.validate();
  for (Index c = 0; c < mesh->num_cells(); ++c) {
    if (!materials.count(mesh->cell_region()[c])) {
      throw ValidationError("problem: no material for cell region " + std::to_string(mesh->cell_region()[c]));
    }
  }
  std::set<int> tags;
  for (const auto& [key, tag] : mesh->facet_tags()) tags.insert(tag);
  for (const auto& [tag, r] : schedule) {
    const std::string what = "boundary tag " + std::to_string(tag);
    if (!tags.count(tag)) throw ValidationError(what + " does not exist in the mesh");
    if (r.pressure && r.displacement) throw ValidationError(what + ": both pressure and displacement given");
    if (r.robin) {
      r.robin->beta.validate(what + " beta", false);
      r.robin->t_bc.validate(what + " T_bc", false);
    }
    if (r.pressure) r.pressure->p.validate(what + " pressure", false);
    if (r.displacement)
      for (const auto& u : r.displacement->u)
        if (u) u->validate(what + " displacement", false);
  }

  auto scope = time_phase(timing, "dofmap");
  Problem p;
  p.mesh = mesh;
  p.degree = degree;
  p.thermal_space = std::make_shared<FunctionSpace>(mesh, degree, 1);
  p.elastic_space = std::make_shared<FunctionSpace>(mesh, degree, 3);
  p.materials = std::move(materials);
  p.schedule = std::move(schedule);
  p.facets = tagged_boundary(*mesh);
  p.elastic.amg = smoothed_aggregation_defaults(degree);
  p.thermal_pattern = std::make_shared<CsrMatrix>(make_matrix(p.thermal_space->dofmap()));
  p.elastic_pattern = std::make_shared<CsrMatrix>(make_matrix(p.elastic_space->dofmap()));
  return p;
}

State initial_state(const Problem& problem, double temperature, double t) {
  State s;
  s.t = t;
  s.temperature.assign(static_cast<std::size_t>(problem.thermal_space->num_dofs()), temperature);
  s.displacement.assign(static_cast<std::size_t>(problem.elastic_space->num_dofs()), 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Preconditioner policy

double PreconditionerPolicy::rolling_average() const {
  if (history.empty()) return 0.0;
  double s = 0.0;
  for (double h : history) s += h;
  return s / static_cast<double>(history.size());
}

bool PreconditionerPolicy::observe(double iterations, bool rejected) {
  if (rejected || (!history.empty() && iterations > spike_factor * rolling_average())) {
    history.clear();
    return true;
  }
  history.push_back(iterations);
  while (static_cast<int>(history.size()) > window) history.pop_front();
  return false;
}

// ---------------------------------------------------------------------------
// Thermal

ThermalSystem assemble_thermal(const Problem& problem, const ThermalStep& step, std::span<const double> t_old_field,
                               std::span<const double> t_new_field) {
  const FunctionSpace& space = *problem.thermal_space;
  const Mesh& mesh = space.mesh();
  const Index n = space.num_dofs();
  if (t_old_field.size() != static_cast<std::size_t>(n) || t_new_field.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("assemble_thermal: field size mismatch");
  }
  const bool steady = step.steady;
  const double theta = steady ? 1.0 : step.theta;
  const double dt = step.dt();
  if (!steady && !(dt > 0.0)) throw ValidationError("assemble_thermal: time step must be positive");

  ThermalSystem sys{*problem.thermal_pattern, Vector(static_cast<std::size_t>(n), 0.0)};
  const int p = space.degree();
  const int nb = basis_size(p);
  const QuadratureRule& rule = quadrature(stiffness_quadrature_degree(p));
  std::array<double, 10> phi{};
  std::array<Vec3, 10> grad{};
  ElementMatrix ke(nb, nb);
  ElementVector re(nb);

  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(mesh, c);
    const Material& mat = region_material(problem.materials, mesh.cell_region()[c]);
    const auto dofs = space.dofmap().nodes(c);
    ke.setZero();
    re.setZero();
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto l = barycentric(rule.points[q]);
      basis_values(p, l, phi);
      basis_gradients(p, l, g.grad_lambda, grad);
      double tn = 0.0, to = 0.0;
      Vec3 gn{0.0, 0.0, 0.0}, go{0.0, 0.0, 0.0};
      for (int a = 0; a < nb; ++a) {
        tn += t_new_field[dofs[a]] * phi[a];
        to += t_old_field[dofs[a]] * phi[a];
        gn = gn + t_new_field[dofs[a]] * grad[a];
        go = go + t_old_field[dofs[a]] * grad[a];
      }
      const MaterialProperties pn = eval(mat, tn);
      double kappa = pn.kappa, cv = pn.cv;
      Vec3 gth = gn;
      if (!steady && theta != 1.0) {
        const MaterialProperties po = eval(mat, to);
        kappa = (1.0 - theta) * po.kappa + theta * pn.kappa;
        cv = (1.0 - theta) * po.cv + theta * pn.cv;
        gth = (1.0 - theta) * go + theta * gn;
      }
      if (!(kappa > 0.0) || !(cv > 0.0)) {
        throw ValidationError("assemble_thermal: non-positive conductivity or specific heat in cell " +
                              std::to_string(c));
      }
      const double w = rule.weights[q] * 6.0 * g.volume;
      double source = 0.0;
      if (problem.heat_source) {
        const Vec3 x = g.map(rule.points[q]);
        source = steady || theta == 1.0 ? problem.heat_source(x, step.t_new)
                                        : (1.0 - theta) * problem.heat_source(x, step.t_old) +
                                              theta * problem.heat_source(x, step.t_new);
      }
      const double rate = steady ? 0.0 : mat.rho * (tn - to) / dt;
      for (int i = 0; i < nb; ++i) {
        re(i) += w * (rate * cv * phi[i] + kappa * dot(gth, grad[i]) - source * phi[i]);
        const double gti = dot(gth, grad[i]);
        for (int j = 0; j < nb; ++j) {
          double v = theta * kappa * dot(grad[j], grad[i]) + theta * pn.dkappa * phi[j] * gti;
          if (!steady) v += mat.rho / dt * (cv + theta * pn.dcv * (tn - to)) * phi[j] * phi[i];
          ke(i, j) += w * v;
        }
      }
    }
    add_local(sys.jacobian, dofs, ke);
    add_local(sys.residual, dofs, re);
  }

  const double sign = static_cast<double>(static_cast<int>(problem.thermal.robin_sign));
  const FacetQuadratureRule& frule = facet_quadrature(stiffness_quadrature_degree(p));
  const int fb = facet_basis_size(p);
  std::vector<double> beta_q(frule.weights.size()), tbc_q(frule.weights.size());
  ElementVector tth(fb);
  for (const BoundaryFacet& f : problem.facets) {
    auto it = problem.schedule.find(f.tag);
    if (it == problem.schedule.end() || !it->second.robin) continue;
    const RobinCondition& rc = *it->second.robin;
    double beta = rc.beta(step.t_new), tbc = rc.t_bc(step.t_new);
    if (!steady && theta != 1.0) {
      beta = (1.0 - theta) * rc.beta(step.t_old) + theta * beta;
      tbc = (1.0 - theta) * rc.t_bc(step.t_old) + theta * tbc;
    }
    if (beta == 0.0) continue;
    std::fill(beta_q.begin(), beta_q.end(), beta);
    std::fill(tbc_q.begin(), tbc_q.end(), tbc);
    const RobinElement e = element_robin_matrices(facet_geometry(mesh, f), p, frule, beta_q, tbc_q);
    const std::vector<Index> nodes = space.facet_nodes(f);
    for (int a = 0; a < fb; ++a) {
      const double tn = t_new_field[nodes[a]];
      tth(a) = steady ? tn : (1.0 - theta) * t_old_field[nodes[a]] + theta * tn;
    }
    add_local(sys.residual, nodes, ElementVector(sign * (e.matrix * tth - e.vector)));
    add_local(sys.jacobian, nodes, ElementMatrix(sign * theta * e.matrix));
  }
  return sys;
}

namespace {

SolveReport krylov_solve(KrylovMethod method, const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                         const Preconditioner* pc, const SolveOptions& opts) {
  return method == KrylovMethod::cg ? cg(a, b, x, pc, opts) : bicgstab(a, b, x, pc, opts);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string history_text(const std::vector<double>& h) {
  std::ostringstream s;
  s.precision(3);
  for (std::size_t i = 0; i < h.size(); ++i) s << (i ? ", " : "") << h[i];
  return s.str();
}

}  // namespace

NewtonReport newton_thermal(const Problem& problem, State& state, const ThermalStep& step, Vector& temperature,
                            TimingReport* timing) {
  const ThermalSettings& ts = problem.thermal;
  NewtonReport report;
  auto assemble = [&](std::span<const double> t) {
    auto scope = time_phase(timing, "assembly");
    return assemble_thermal(problem, step, state.temperature, t);
  };
  ThermalSystem sys = assemble(temperature);
  const double r0 = norm2(sys.residual);
  report.residual_norms.push_back(r0);
  double r = r0;
  const std::size_t n = temperature.size();
  Vector rhs(n), delta(n);

  while (!(r <= ts.newton_rtol * r0) && r0 > 0.0) {
    if (report.iterations == ts.max_newton) {
      throw SolverError("thermal Newton did not converge in " + std::to_string(ts.max_newton) +
                        " iterations; residual history: " + history_text(report.residual_norms));
    }
    if (!state.thermal_pc || state.thermal_rebuild_pending) {
      auto scope = time_phase(timing, "precond build");
      state.thermal_pc = std::make_shared<AmgHierarchy>(build_classical(sys.jacobian, ts.amg));
      ++state.thermal_builds;
      state.thermal_rebuild_pending = false;
      report.preconditioner_built = true;
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -sys.residual[i];
    SolveOptions opts;
    opts.rtol = ts.linear_rtol;
    opts.max_iterations = ts.linear_max_iterations;
    opts.norm = ResidualNorm::unpreconditioned;
    {
      auto scope = time_phase(timing, "thermal solve");
      std::fill(delta.begin(), delta.end(), 0.0);
      SolveReport lin = krylov_solve(ts.krylov, sys.jacobian, rhs, delta, state.thermal_pc.get(), opts);
      int its = lin.iterations;
      if (!lin.converged && ts.krylov == KrylovMethod::cg) {
        ++report.fallbacks;
        std::fill(delta.begin(), delta.end(), 0.0);
        lin = bicgstab(sys.jacobian, rhs, delta, state.thermal_pc.get(), opts);
        its += lin.iterations;
      }
      if (!lin.converged) {
        throw SolverError("thermal linear solve failed after " + std::to_string(its) +
                          " iterations (relative residual " + std::to_string(lin.relative_residual) + ")" +
                          (lin.breakdown_reason ? ": " + *lin.breakdown_reason : std::string()));
      }
      report.linear_iterations.push_back(its);
    }
    Vector trial(n);
    double scale = 1.0;
    for (int cut = 0;; ++cut) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = temperature[i] + scale * delta[i];
      ThermalSystem next = assemble(trial);
      const double rn = norm2(next.residual);
      if (!ts.backtracking || rn < r || cut == 10) {
        temperature.swap(trial);
        sys = std::move(next);
        r = rn;
        break;
      }
      scale *= 0.5;
    }
    ++report.iterations;
    report.residual_norms.push_back(r);
    if (scale * max_abs(delta) <= 1e-13 * max_abs(temperature) && !(r <= ts.newton_rtol * r0)) {
      report.stagnated = true;
      break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Elastic

ElasticSystem assemble_elastic(const Problem& problem, std::span<const double> temperature, double t) {
  const FunctionSpace& space = *problem.elastic_space;
  const Mesh& mesh = space.mesh();
  if (temperature.size() != static_cast<std::size_t>(problem.thermal_space->num_dofs())) {
    throw ValidationError("assemble_elastic: temperature size mismatch");
  }
  ElasticSystem sys{*problem.elastic_pattern, Vector(static_cast<std::size_t>(space.num_dofs()), 0.0), {}, {}};
  const int p = space.degree();
  const int nb = basis_size(p);
  const QuadratureRule& rule = quadrature(stiffness_quadrature_degree(p));
  const std::size_t nq = rule.weights.size();
  std::vector<ElasticModuli> moduli(nq);
  std::vector<Matrix3> eps_t(nq);
  std::vector<Vec3> body(nq, problem.body_force);
  const bool has_body = problem.body_force != Vec3{0.0, 0.0, 0.0};
  std::array<double, 10> phi{};
  std::array<Index, kMaxLocalDofs> dofs{};

  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(mesh, c);
    const Material& mat = region_material(problem.materials, mesh.cell_region()[c]);
    const auto nodes = space.dofmap().nodes(c);
    for (std::size_t q = 0; q < nq; ++q) {
      basis_values(p, barycentric(rule.points[q]), phi);
      double tq = 0.0;
      for (int a = 0; a < nb; ++a) tq += temperature[nodes[a]] * phi[a];
      const MaterialProperties mp = eval(mat, tq);
      moduli[q] = {mp.youngs, mat.poisson};
      eps_t[q] = thermal_strain(mp.alpha, tq, mat.t_ref);
    }
    ElasticElement e = element_elastic_system(g, p, rule, moduli, eps_t);
    if (has_body) e.load += element_body_load(g, p, rule, body);
    const std::span<Index> local(dofs.data(), static_cast<std::size_t>(3 * nb));
    space.dofmap().cell_dofs(c, local);
    add_local(sys.stiffness, local, e.stiffness);
    add_local(sys.load, local, e.load);
  }

  const FacetQuadratureRule& frule = facet_quadrature(stiffness_quadrature_degree(p));
  std::vector<double> p_q(frule.weights.size());
  std::map<Index, double> fixed;
  for (const BoundaryFacet& f : problem.facets) {
    auto it = problem.schedule.find(f.tag);
    if (it == problem.schedule.end()) continue;
    const std::vector<Index> nodes = space.facet_nodes(f);
    if (it->second.pressure) {
      std::fill(p_q.begin(), p_q.end(), it->second.pressure->p(t));
      const ElementVector fe = element_pressure_load(facet_geometry(mesh, f), p, frule, p_q);
      std::vector<Index> fd;
      for (Index a : nodes)
        for (int k = 0; k < 3; ++k) fd.push_back(3 * a + k);
      add_local(sys.load, fd, fe);
    }
    if (it->second.displacement) {
      for (int k = 0; k < 3; ++k) {
        const auto& uk = it->second.displacement->u[k];
        if (!uk) continue;
        const double v = (*uk)(t);
        for (Index a : nodes) {
          auto [pos, inserted] = fixed.emplace(3 * a + k, v);
          if (!inserted && pos->second != v) {
            throw ValidationError("displacement conditions disagree at node " + std::to_string(a));
          }
        }
      }
    }
  }
  for (const auto& [d, v] : fixed) {
    sys.fixed_dofs.push_back(d);
    sys.fixed_values.push_back(v);
  }
  return sys;
}

void check_rigid_constraints(const FunctionSpace& space, std::span<const Index> fixed_dofs) {
  static const char* names[6] = {"translation x", "translation y", "translation z",
                                 "rotation about x", "rotation about y", "rotation about z"};
  const NearNullspace modes = rigid_body_modes(space.node_coordinates(), 3, RigidModes::full, false);
  const double diag = space.mesh().bounding_diagonal();
  Eigen::Matrix<double, 6, 6> gram = Eigen::Matrix<double, 6, 6>::Zero();
  for (Index d : fixed_dofs) {
    Eigen::Matrix<double, 6, 1> row;
    for (int j = 0; j < 6; ++j) row(j) = modes.vector(j)[d] / (j < 3 ? 1.0 : diag);
    gram += row * row.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(gram);
  const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  std::set<int> missing;
  for (int k = 0; k < 6; ++k) {
    if (eig.eigenvalues()(k) > 1e-10 * top && top > 0.0) continue;
    const auto v = eig.eigenvectors().col(k);
    const double vmax = v.cwiseAbs().maxCoeff();
    for (int j = 0; j < 6; ++j)
      if (std::abs(v(j)) >= 0.3 * vmax) missing.insert(j);
  }
  if (missing.empty()) return;
  std::string msg = "elastic problem is not constrained against rigid motion (";
  bool first = true;
  for (int j : missing) {
    msg += (first ? "" : ", ") + std::string(names[j]);
    first = false;
  }
  throw ValidationError(msg + ")");
}

ElasticReport solve_elastic(const Problem& problem, State& state, std::span<const double> temperature, double t,
                            Vector& displacement, TimingReport* timing) {
  const auto start = std::chrono::steady_clock::now();
  const ElasticSettings& es = problem.elastic;
  ElasticReport report;
  ElasticSystem sys;
  {
    auto scope = time_phase(timing, "assembly");
    sys = assemble_elastic(problem, temperature, t);
    check_rigid_constraints(*problem.elastic_space, sys.fixed_dofs);
    apply_dirichlet(sys.stiffness, sys.load, sys.fixed_dofs, sys.fixed_values);
  }
  displacement.resize(sys.load.size(), 0.0);
  for (std::size_t k = 0; k < sys.fixed_dofs.size(); ++k) displacement[sys.fixed_dofs[k]] = sys.fixed_values[k];
  if (!state.elastic_pc) {
    auto scope = time_phase(timing, "precond build");
    const NearNullspace ns = rigid_body_modes(problem.elastic_space->node_coordinates(), 3, es.modes);
    state.elastic_pc = std::make_shared<AmgHierarchy>(build_smoothed_aggregation(sys.stiffness, ns, es.amg));
    ++state.elastic_builds;
    report.preconditioner_built = true;
  }
  {
    auto scope = time_phase(timing, "elastic solve");
    SolveOptions opts;
    opts.rtol = es.rtol;
    opts.max_iterations = es.max_iterations;
    report.solve = krylov_solve(es.krylov, sys.stiffness, sys.load, displacement, state.elastic_pc.get(), opts);
  }
  if (!report.solve.converged) {
    throw SolverError("elastic solve failed after " + std::to_string(report.solve.iterations) +
                      " iterations (relative residual " + std::to_string(report.solve.relative_residual) + ")" +
                      (report.solve.breakdown_reason ? ": " + *report.solve.breakdown_reason : std::string()));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double max_von_mises(const Problem& problem, std::span<const double> temperature,
                     std::span<const double> displacement) {
  const FunctionSpace& space = *problem.elastic_space;
  const Mesh& mesh = space.mesh();
  const int p = space.degree();
  const int nb = basis_size(p);
  const QuadratureRule& rule = quadrature(stiffness_quadrature_degree(p));
  std::array<double, 10> phi{};
  std::array<Vec3, 10> grad{};
  double vm = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(mesh, c);
    const Material& mat = region_material(problem.materials, mesh.cell_region()[c]);
    const auto nodes = space.dofmap().nodes(c);
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto l = barycentric(rule.points[q]);
      basis_values(p, l, phi);
      basis_gradients(p, l, g.grad_lambda, grad);
      Matrix3 du = Matrix3::Zero();
      double tq = 0.0;
      for (int a = 0; a < nb; ++a) {
        tq += temperature[nodes[a]] * phi[a];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) du(i, j) += displacement[3 * nodes[a] + i] * grad[a][j];
      }
      const MaterialProperties mp = eval(mat, tq);
      const Matrix3 eps = 0.5 * (du + du.transpose()) - thermal_strain(mp.alpha, tq, mat.t_ref);
      const Matrix3 sigma = isotropic_stress({mp.youngs, mat.poisson}, eps);
      const Matrix3 s = sigma - sigma.trace() / 3.0 * Matrix3::Identity();
      vm = std::max(vm, std::sqrt(1.5 * s.cwiseProduct(s).sum()));
    }
  }
  return vm;
}

// ---------------------------------------------------------------------------
// Drivers

SteadyResult coupled_steady_solve(const Problem& problem, double t, TimingReport* timing) {
  SteadyResult res;
  res.state = initial_state(problem, problem.thermal.steady_initial_guess, t);
  res.temperature = res.state.temperature;
  const ThermalStep step{t, t, 1.0, true};
  res.newton = newton_thermal(problem, res.state, step, res.temperature, timing);
  res.state.temperature = res.temperature;
  res.displacement = res.state.displacement;
  res.elastic = solve_elastic(problem, res.state, res.temperature, t, res.displacement, timing);
  res.state.displacement = res.displacement;
  return res;
}

StepReport advance_transient(const Problem& problem, State& state, TimeController& controller,
                             TimingReport* timing) {
  const ControllerSettings& s = controller.settings;
  const double remaining = s.t_end - state.t;
  if (!(remaining > 0.0)) throw ValidationError("transient: end time already reached");
  StepReport rep;
  rep.step = state.step + 1;
  double dt = std::min(controller.dt, remaining);
  Vector temperature;
  NewtonReport newton;
  const auto thermal_start = std::chrono::steady_clock::now();
  for (;;) {
    const bool last = dt >= remaining;
    const ThermalStep step{state.t, last ? s.t_end : state.t + dt, s.theta, false};
    temperature = state.temperature;
    newton = newton_thermal(problem, state, step, temperature, timing);
    rep.newton_iterations += newton.iterations;
    rep.thermal_pc_built = rep.thermal_pc_built || newton.preconditioner_built;
    double change = 0.0;
    for (std::size_t i = 0; i < temperature.size(); ++i)
      change = std::max(change, std::abs(temperature[i] - state.temperature[i]));
    if (change <= s.delta_t_max) {
      rep.max_change = change;
      rep.dt = step.dt();
      rep.t = step.t_new;
      break;
    }
    rep.rejected_changes.push_back(change);
    if (++rep.rejections > s.max_retries) {
      throw SolverError("transient: step " + std::to_string(rep.step) + " still exceeds the temperature change cap after " +
                        std::to_string(s.max_retries) + " halvings");
    }
    state.policy.observe(0.0, true);
    state.thermal_rebuild_pending = true;
    dt *= 0.5;
  }
  rep.thermal_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - thermal_start).count();
  for (int its : newton.linear_iterations) rep.thermal_krylov_iterations += its;
  if (!newton.linear_iterations.empty()) {
    const double mean = static_cast<double>(rep.thermal_krylov_iterations) /
                        static_cast<double>(newton.linear_iterations.size());
    if (state.policy.observe(mean, false)) state.thermal_rebuild_pending = true;
  }

  state.temperature = temperature;
  state.t = rep.t;
  state.step = rep.step;
  rep.dt_next = next_time_step(rep.dt, rep.max_change, s);
  controller.dt = rep.dt_next;

  const ElasticReport er = solve_elastic(problem, state, state.temperature, state.t, state.displacement, timing);
  rep.elastic_krylov_iterations = er.solve.iterations;
  rep.elastic_pc_built = er.preconditioner_built;
  rep.elastic_seconds = er.seconds;
  return rep;
}

}  // namespace tfem
