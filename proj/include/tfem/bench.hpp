#pragma once

// Model problems and the solver scaling study behind `tfem bench`.

#include <functional>
#include <string>
#include <vector>

#include "tfem/sim.hpp"

namespace tfem {

struct LinearSystem {
  CsrMatrix a;
  Vector b;
  std::shared_ptr<const FunctionSpace> space;
};

/// -div grad u = 1 with u = 0 on the whole boundary, eliminated symmetrically.
LinearSystem poisson_system(std::shared_ptr<const Mesh> mesh, int degree);

/// Box [0, 8] x [0, 1] x [0, 1] under unit downward body force, clamped
/// on tag 1 (x = 0); E = 1, nu = 0.3. cantilever_mesh(0) has 32 x 4 x 4 boxes.
LinearSystem cantilever_system(std::shared_ptr<const Mesh> mesh, int degree);

Mesh cantilever_mesh(int refinements);

enum class BenchProblem { poisson, elasticity };
enum class AmgKind { classical, smoothed_aggregation };

struct BenchOptions {
  BenchProblem problem = BenchProblem::poisson;
  int levels = 3;      // refinement levels 0..levels
  int base_n = 4;      // poisson: base box subdivisions per axis
  int degree = 1;
  AmgKind amg = AmgKind::classical;
  KrylovMethod solver = KrylovMethod::cg;
  bool rotations = true;
  bool plain = true;   // also run the unpreconditioned solver
  double rtol = 1e-6;
  int max_iterations = 20000;
  int repeats = 1;     // setup+solve repetitions; the minimum time is reported
};

struct BenchRow {
  int level = 0;
  Index n = 0;
  std::int64_t nnz = 0;
  int plain_iterations = -1;  // -1 when skipped
  double plain_seconds = 0.0;
  int amg_iterations = 0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  double operator_complexity = 0.0;
  int amg_levels = 0;
  bool converged = true;
};

/// Runs every level; `on_row` (if set) is called as each row completes.
std::vector<BenchRow> run_bench(const BenchOptions& options,
                                const std::function<void(const BenchRow&)>& on_row = {});

std::string bench_header();
std::string bench_row_tsv(const BenchRow& row);

}  // namespace tfem
