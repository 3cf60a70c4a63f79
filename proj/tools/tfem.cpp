// tfem command line driver.
//
// Exit codes: 0 success, 1 validation error, 2 solver failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tfem/bench.hpp"
#include "tfem/config.hpp"
#include "tfem/io.hpp"
#include "tfem/report.hpp"

namespace fs = std::filesystem;
using namespace tfem;

namespace {

std::string prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return dir;
}

std::vector<PointField> fields(const Problem& p, const Vector& t, const Vector& u) {
  return {{"temperature", 1, p.thermal_space->dofmap().num_nodes, t},
          {"displacement", 3, p.elastic_space->dofmap().num_nodes, u}};
}

int run_steady(const std::string& config_path, std::string out_dir, bool echo) {
  const auto t0 = std::chrono::steady_clock::now();
  TimingReport timing;
  const SimulationConfig cfg = read_config(config_path, &timing);
  if (echo) std::cout << echo_config(cfg).dump(2) << '\n';
  if (out_dir.empty()) out_dir = cfg.output.directory;
  prepare_dir(out_dir);
  const Problem problem = make_problem(cfg, &timing);
  const SteadyResult res = coupled_steady_solve(problem, cfg.steady_time, &timing);
  {
    auto scope = time_phase(&timing, "output");
    write_vtk(*problem.mesh, fields(problem, res.temperature, res.displacement), out_dir + "/steady.vtk");
    std::ofstream(out_dir + "/config_echo.json") << echo_config(cfg).dump(2) << '\n';
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream tf(out_dir + "/timing.jsonl");
  write_timing(timing, wall, tf);
  write_timing(timing, wall, std::cout);
  std::cout << "{\"newton_iterations\":" << res.newton.iterations
            << ",\"elastic_iterations\":" << res.elastic.solve.iterations << "}\n";
  return 0;
}

int run_transient(const std::string& config_path, std::string out_dir, int max_steps, bool echo) {
  const auto t0 = std::chrono::steady_clock::now();
  TimingReport timing;
  const SimulationConfig cfg = read_config(config_path, &timing);
  if (echo) std::cout << echo_config(cfg).dump(2) << '\n';
  if (out_dir.empty()) out_dir = cfg.output.directory;
  prepare_dir(out_dir);
  const Problem problem = make_problem(cfg, &timing);
  State state = initial_state(problem, cfg.controller.initial_temperature, cfg.controller.t_start);
  TimeController controller(cfg.controller);
  StepLog log(out_dir + "/steps.jsonl");
  {
    auto scope = time_phase(&timing, "output");
    std::ofstream(out_dir + "/config_echo.json") << echo_config(cfg).dump(2) << '\n';
  }
  while (state.t < cfg.controller.t_end && (max_steps <= 0 || state.step < max_steps)) {
    const StepReport step = advance_transient(problem, state, controller, &timing);
    auto scope = time_phase(&timing, "output");
    log.append(step);
    std::cout << step_record(step).dump() << '\n';
    if (cfg.output.every > 0 && (step.step % cfg.output.every == 0 || state.t >= cfg.controller.t_end)) {
      char name[64];
      std::snprintf(name, sizeof(name), "/step_%05d.vtk", step.step);
      write_vtk(*problem.mesh, fields(problem, state.temperature, state.displacement), out_dir + name);
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream tf(out_dir + "/timing.jsonl");
  write_timing(timing, wall, tf);
  std::cout << "{\"thermal_pc_builds\":" << state.thermal_builds << ",\"elastic_pc_builds\":" << state.elastic_builds
            << ",\"steps\":" << state.step << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermoelastic finite element solver with AMG-preconditioned Krylov methods"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("mesh-gen", "Write a structured box mesh");
  std::vector<int> n{1, 1, 1};
  std::vector<double> lower{0, 0, 0}, upper{1, 1, 1};
  int gen_refine = 0;
  std::string gen_out;
  gen->add_option("--n", n, "Subdivisions nx ny nz")->expected(3);
  gen->add_option("--lower", lower, "Lower corner")->expected(3);
  gen->add_option("--upper", upper, "Upper corner")->expected(3);
  gen->add_option("--refine", gen_refine, "Uniform refinements")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "Output tfmesh file")->required();

  auto* ref = app.add_subcommand("refine", "Uniformly refine a mesh");
  std::string ref_mesh, ref_out;
  int ref_levels = 1;
  ref->add_option("--mesh", ref_mesh, "Input tfmesh file")->required();
  ref->add_option("--levels", ref_levels, "Refinement levels")->check(CLI::NonNegativeNumber);
  ref->add_option("--out", ref_out, "Output tfmesh file")->required();

  auto* qual = app.add_subcommand("quality", "Dihedral angle histogram");
  std::string q_mesh;
  int bins = 18;
  qual->add_option("--mesh", q_mesh, "Input tfmesh file")->required();
  qual->add_option("--bins", bins, "Histogram bins over [0, 180]")->check(CLI::PositiveNumber);

  std::string config, out_dir;
  bool echo = false;
  auto* steady = app.add_subcommand("steady", "Steady thermal solve followed by the elastic solve");
  steady->add_option("--config", config, "Configuration file")->required();
  steady->add_option("--out", out_dir, "Output directory (overrides the config)");
  steady->add_flag("--echo", echo, "Print the resolved configuration");

  auto* trans = app.add_subcommand("transient", "Adaptive theta-method run");
  int max_steps = 0;
  trans->add_option("--config", config, "Configuration file")->required();
  trans->add_option("--out", out_dir, "Output directory (overrides the config)");
  trans->add_option("--max-steps", max_steps, "Stop after this many accepted steps (0: run to t_end)");
  trans->add_flag("--echo", echo, "Print the resolved configuration");

  auto* bench = app.add_subcommand("bench", "Solver scaling under uniform refinement");
  BenchOptions bo;
  std::string amg = "classical", solver = "cg", problem = "poisson", bench_out;
  bool no_rotations = false, no_plain = false;
  bench->add_option("--levels", bo.levels, "Refinement levels 0..L")->check(CLI::NonNegativeNumber);
  bench->add_option("--base", bo.base_n, "Base box subdivisions (poisson)")->check(CLI::PositiveNumber);
  bench->add_option("--degree", bo.degree, "Element degree")->check(CLI::Range(1, 2));
  bench->add_option("--problem", problem, "poisson or elasticity")
      ->check(CLI::IsMember({"poisson", "elasticity"}));
  bench->add_option("--amg", amg, "classical or sa")->check(CLI::IsMember({"classical", "sa"}));
  bench->add_option("--solver", solver, "cg or bicgstab")->check(CLI::IsMember({"cg", "bicgstab"}));
  bench->add_option("--rtol", bo.rtol, "Relative tolerance");
  bench->add_option("--repeats", bo.repeats, "Timing repetitions")->check(CLI::PositiveNumber);
  bench->add_flag("--no-rotations", no_rotations, "Translations-only near-nullspace (elasticity)");
  bench->add_flag("--no-plain", no_plain, "Skip the unpreconditioned solve");
  bench->add_option("--out", bench_out, "Also write the table to this TSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_num_threads(threads);
    if (*gen) {
      Mesh m = build_box_mesh(n[0], n[1], n[2], {lower[0], lower[1], lower[2]}, {upper[0], upper[1], upper[2]});
      for (int r = 0; r < gen_refine; ++r) m = uniform_refine(m);
      write_mesh(m, gen_out);
      std::cout << "cells " << m.num_cells() << " vertices " << m.num_vertices() << '\n';
    } else if (*ref) {
      Mesh m = read_mesh(ref_mesh);
      for (int r = 0; r < ref_levels; ++r) m = uniform_refine(m);
      write_mesh(m, ref_out);
      std::cout << "cells " << m.num_cells() << " vertices " << m.num_vertices() << '\n';
    } else if (*qual) {
      std::cout << quality_text(quality_report(read_mesh(q_mesh), bins));
    } else if (*steady) {
      return run_steady(config, out_dir, echo);
    } else if (*trans) {
      return run_transient(config, out_dir, max_steps, echo);
    } else if (*bench) {
      bo.problem = problem == "poisson" ? BenchProblem::poisson : BenchProblem::elasticity;
      bo.amg = amg == "classical" ? AmgKind::classical : AmgKind::smoothed_aggregation;
      bo.solver = solver == "cg" ? KrylovMethod::cg : KrylovMethod::bicgstab;
      bo.rotations = !no_rotations;
      bo.plain = !no_plain;
      std::ofstream tsv;
      if (!bench_out.empty()) {
        tsv.open(bench_out);
        if (!tsv) throw ValidationError("cannot open '" + bench_out + "'");
        tsv << bench_header() << '\n';
      }
      std::cout << bench_header() << '\n';
      run_bench(bo, [&](const BenchRow& row) {
        std::cout << bench_row_tsv(row) << std::endl;
        if (tsv.is_open()) tsv << bench_row_tsv(row) << std::endl;
      });
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
