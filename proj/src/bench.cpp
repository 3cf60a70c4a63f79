#include "tfem/bench.hpp"

#include <chrono>
#include <cstdio>
#include <set>

namespace tfem {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

LinearSystem poisson_system(std::shared_ptr<const Mesh> mesh, int degree) {
  auto space = std::make_shared<const FunctionSpace>(mesh, degree, 1);
  LinearSystem sys{make_matrix(space->dofmap()), Vector(static_cast<std::size_t>(space->num_dofs()), 0.0), space};
  const QuadratureRule& rule = quadrature(stiffness_quadrature_degree(degree));
  const std::vector<double> ones(rule.weights.size(), 1.0);
  const int nb = basis_size(degree);
  std::array<double, 10> phi{};
  ElementVector fe(nb);
  for (Index c = 0; c < mesh->num_cells(); ++c) {
    const CellGeometry g = cell_geometry(*mesh, c);
    const ThermalElement e = element_thermal_matrices(g, degree, rule, ones, ones);
    fe.setZero();
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      basis_values(degree, barycentric(rule.points[q]), phi);
      for (int i = 0; i < nb; ++i) fe(i) += rule.weights[q] * 6.0 * g.volume * phi[i];
    }
    const auto nodes = space->dofmap().nodes(c);
    add_local(sys.a, nodes, e.stiffness);
    add_local(sys.b, nodes, fe);
  }
  std::set<Index> fixed;
  for (const BoundaryFacet& f : tagged_boundary(*mesh))
    for (Index v : space->facet_nodes(f)) fixed.insert(v);
  const std::vector<Index> dofs(fixed.begin(), fixed.end());
  const std::vector<double> zeros(dofs.size(), 0.0);
  apply_dirichlet(sys.a, sys.b, dofs, zeros);
  return sys;
}

Mesh cantilever_mesh(int refinements) {
  Mesh m = build_box_mesh(32, 4, 4, {0.0, 0.0, 0.0}, {8.0, 1.0, 1.0});
  for (int r = 0; r < refinements; ++r) m = reorder_vertices(uniform_refine(m));
  return m;
}

LinearSystem cantilever_system(std::shared_ptr<const Mesh> mesh, int degree) {
  MaterialTable mats{{0, constant_material(0.0, 1.0, 1.0, 1.0, 1.0, 0.3, 0.0)}};
  BoundarySchedule bcs;
  DisplacementCondition clamp;
  for (auto& u : clamp.u) u = constant_table(0.0);
  bcs[1].displacement = clamp;
  Problem p = make_problem(mesh, degree, mats, bcs);
  p.body_force = {0.0, 0.0, -1.0};
  const Vector temperature(static_cast<std::size_t>(p.thermal_space->num_dofs()), 0.0);
  ElasticSystem e = assemble_elastic(p, temperature, 0.0);
  apply_dirichlet(e.stiffness, e.load, e.fixed_dofs, e.fixed_values);
  return {std::move(e.stiffness), std::move(e.load), p.elastic_space};
}

std::vector<BenchRow> run_bench(const BenchOptions& o, const std::function<void(const BenchRow&)>& on_row) {
  if (o.levels < 0) throw ValidationError("bench: levels must be non-negative");
  if (o.base_n < 1) throw ValidationError("bench: base size must be positive");
  if (o.repeats < 1) throw ValidationError("bench: repeats must be positive");
  if (o.problem == BenchProblem::elasticity && o.amg == AmgKind::classical) {
    throw ValidationError("bench: classical AMG supports scalar problems only; use --amg sa for elasticity");
  }
  std::vector<BenchRow> rows;
  std::shared_ptr<const Mesh> mesh;
  for (int level = 0; level <= o.levels; ++level) {
    if (o.problem == BenchProblem::poisson) {
      mesh = std::make_shared<const Mesh>(
          level == 0 ? build_box_mesh(o.base_n, o.base_n, o.base_n, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0})
                     : reorder_vertices(uniform_refine(*mesh)));
    } else {
      mesh = std::make_shared<const Mesh>(level == 0 ? cantilever_mesh(0) : reorder_vertices(uniform_refine(*mesh)));
    }
    const LinearSystem sys =
        o.problem == BenchProblem::poisson ? poisson_system(mesh, o.degree) : cantilever_system(mesh, o.degree);
    BenchRow row;
    row.level = level;
    row.n = sys.a.rows;
    row.nnz = sys.a.nnz();
    SolveOptions opts;
    opts.rtol = o.rtol;
    opts.max_iterations = o.max_iterations;
    auto solve = [&](const Preconditioner* pc, Vector& x) {
      std::fill(x.begin(), x.end(), 0.0);
      return o.solver == KrylovMethod::cg ? cg(sys.a, sys.b, x, pc, opts) : bicgstab(sys.a, sys.b, x, pc, opts);
    };
    Vector x(sys.b.size());
    if (o.plain) {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveReport r = solve(nullptr, x);
      row.plain_seconds = seconds_since(t0);
      row.plain_iterations = r.iterations;
      row.converged = row.converged && r.converged;
    }
    for (int rep = 0; rep < o.repeats; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      AmgHierarchy h;
      if (o.amg == AmgKind::classical) {
        h = build_classical(sys.a);
      } else if (o.problem == BenchProblem::poisson) {
        h = build_smoothed_aggregation(sys.a, constant_nullspace(sys.a.rows), smoothed_aggregation_defaults(o.degree));
      } else {
        const NearNullspace ns = rigid_body_modes(sys.space->node_coordinates(), 3,
                                                  o.rotations ? RigidModes::full : RigidModes::translations_only);
        h = build_smoothed_aggregation(sys.a, ns, smoothed_aggregation_defaults(o.degree));
      }
      const double setup = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const SolveReport r = solve(&h, x);
      const double solve_s = seconds_since(t0);
      if (rep == 0 || setup + solve_s < row.setup_seconds + row.solve_seconds) {
        row.setup_seconds = setup;
        row.solve_seconds = solve_s;
      }
      row.amg_iterations = r.iterations;
      row.converged = row.converged && r.converged;
      row.operator_complexity = h.operator_complexity();
      row.amg_levels = static_cast<int>(h.num_levels());
    }
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

std::string bench_header() {
  return "level\tn\tnnz\tcg_iterations_plain\tcg_iterations_amg\tplain_seconds\tsetup_seconds\tsolve_seconds\t"
         "operator_complexity\tamg_levels\tconverged";
}

std::string bench_row_tsv(const BenchRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d\t%d\t%lld\t%d\t%d\t%.4f\t%.4f\t%.4f\t%.3f\t%d\t%s", r.level, r.n,
                static_cast<long long>(r.nnz), r.plain_iterations, r.amg_iterations, r.plain_seconds,
                r.setup_seconds, r.solve_seconds, r.operator_complexity, r.amg_levels,
                r.converged ? "yes" : "no");
  return buf;
}

}  // namespace tfem
