#pragma once

// Thermoelastic problem definition and solvers: temperature-dependent
// materials, time-dependent boundary schedules, Newton for the heat equation,
// the one-way coupled linear elastic solve, and the adaptive theta-method loop.

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tfem/amg.hpp"
#include "tfem/fem.hpp"
#include "tfem/timing.hpp"

namespace tfem {

/// Piecewise-linear lookup, clamped to the end values. A query equal to a
/// sample abscissa returns that sample's value exactly (the last one when
/// abscissae repeat).
struct LinearTable {
  std::vector<double> x;
  std::vector<double> y;

  double operator()(double t) const;
  /// Slope of the segment containing t (the right segment at a knot), zero
  /// outside the range.
  double slope(double t) const;
  /// strict: abscissae strictly increasing, otherwise non-decreasing.
  void validate(const std::string& what, bool strict) const;
};

LinearTable constant_table(double value);

struct Material {
  std::string name;
  std::vector<double> temperatures;
  std::vector<double> alpha;    // 1/K
  std::vector<double> youngs;   // Pa
  std::vector<double> kappa;    // W/m/K
  std::vector<double> cv;       // J/kg/K
  double rho = 1.0;             // kg/m^3
  double poisson = 0.3;
  double t_ref = 293.0;         // K

  void validate() const;
};

Material constant_material(double alpha, double youngs, double kappa, double cv, double rho, double poisson,
                           double t_ref);

struct MaterialProperties {
  double alpha = 0.0;
  double youngs = 0.0;
  double kappa = 0.0;
  double cv = 0.0;
  double dkappa = 0.0;  // d kappa / dT
  double dcv = 0.0;     // d cv / dT
};

using MaterialTable = std::map<int, Material>;

MaterialProperties eval_material(const MaterialTable& table, int region, double temperature);

struct RobinCondition {
  LinearTable beta;  // W/m^2/K
  LinearTable t_bc;  // K
};

struct PressureCondition {
  LinearTable p;  // Pa, load p n with n the outward normal
};

struct DisplacementCondition {
  std::array<std::optional<LinearTable>, 3> u;  // unset components are free
};

/// Thermal and mechanical conditions of one boundary tag. Facets of tags not
/// listed are insulated and traction free.
struct BoundaryRegion {
  std::optional<RobinCondition> robin;
  std::optional<PressureCondition> pressure;
  std::optional<DisplacementCondition> displacement;
};

using BoundarySchedule = std::map<int, BoundaryRegion>;

struct BoundaryValues {
  std::optional<double> beta;
  std::optional<double> t_bc;
  std::optional<double> pressure;
  std::array<std::optional<double>, 3> displacement;
};

BoundaryValues eval_schedule(const BoundarySchedule& schedule, int tag, double t);

/// +1: beta > 0 with T > T_bc removes heat. -1 flips the boundary term.
enum class RobinSign { heat_loss = 1, heat_gain = -1 };

enum class KrylovMethod { cg, bicgstab };

struct ThermalSettings {
  double newton_rtol = 1e-9;
  int max_newton = 30;
  bool backtracking = false;
  double linear_rtol = 1e-11;  // on the true residual of each Newton system
  int linear_max_iterations = 5000;
  KrylovMethod krylov = KrylovMethod::cg;
  AmgOptions amg = classical_defaults();
  double steady_initial_guess = 400.0;
  RobinSign robin_sign = RobinSign::heat_loss;
};

struct ElasticSettings {
  double rtol = 1e-6;
  int max_iterations = 5000;
  KrylovMethod krylov = KrylovMethod::cg;
  AmgOptions amg = smoothed_aggregation_defaults(1);
  RigidModes modes = RigidModes::full;
};

struct ControllerSettings {
  double theta = 1.0;
  double dt0 = 1.0;
  double dt_max = 0.0;  // <= 0: t_end - t_start
  double delta_t_max = 10.0;
  double epsilon = 0.8;
  double t_start = 0.0;
  double t_end = 1.0;
  int max_retries = 20;
  double initial_temperature = 293.0;

  void validate() const;
};

struct TimeController {
  ControllerSettings settings;
  double dt = 1.0;

  explicit TimeController(const ControllerSettings& s);
};

/// Next step from the accepted one: epsilon dT_max / max_change * dt, capped
/// at dt_max (which is also used when max_change is zero).
double next_time_step(double dt, double max_change, const ControllerSettings& s);

struct Problem {
  std::shared_ptr<const Mesh> mesh;
  int degree = 1;
  std::shared_ptr<const FunctionSpace> thermal_space;
  std::shared_ptr<const FunctionSpace> elastic_space;
  MaterialTable materials;
  BoundarySchedule schedule;
  std::vector<BoundaryFacet> facets;  // tagged boundary facets
  /// Volumetric heat source (W/m^3) at (x, t).
  std::function<double(const Vec3&, double)> heat_source;
  Vec3 body_force{0.0, 0.0, 0.0};  // N/m^3
  ThermalSettings thermal;
  ElasticSettings elastic;

  std::shared_ptr<const CsrMatrix> thermal_pattern;
  std::shared_ptr<const CsrMatrix> elastic_pattern;
};

/// Builds spaces and patterns; checks that materials cover every cell region
/// and that every scheduled tag exists in the mesh.
Problem make_problem(std::shared_ptr<const Mesh> mesh, int degree, MaterialTable materials,
                     BoundarySchedule schedule, TimingReport* timing = nullptr);

/// Rebuild decisions for the thermal preconditioner: rebuild after a step
/// rejection or when a step's mean Krylov iteration count exceeds
/// spike_factor times the rolling mean of the previous `window` steps.
struct PreconditionerPolicy {
  int window = 10;
  double spike_factor = 1.5;
  std::deque<double> history;

  double rolling_average() const;
  /// Returns true when the thermal preconditioner should be rebuilt.
  bool observe(double iterations, bool rejected);
};

struct State {
  double t = 0.0;
  int step = 0;
  Vector temperature;
  Vector displacement;

  std::shared_ptr<const AmgHierarchy> thermal_pc;
  std::shared_ptr<const AmgHierarchy> elastic_pc;
  int thermal_builds = 0;
  int elastic_builds = 0;
  bool thermal_rebuild_pending = false;
  PreconditionerPolicy policy;
};

State initial_state(const Problem& problem, double temperature, double t = 0.0);

struct ThermalStep {
  double t_old = 0.0;
  double t_new = 0.0;
  double theta = 1.0;
  bool steady = false;

  double dt() const { return t_new - t_old; }
};

struct ThermalSystem {
  CsrMatrix jacobian;
  Vector residual;
};

/// Residual of the theta-method heat equation at candidate `t_new` given the
/// previous field `t_old_field`, and its full Newton Jacobian.
ThermalSystem assemble_thermal(const Problem& problem, const ThermalStep& step, std::span<const double> t_old_field,
                               std::span<const double> t_new_field);

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_norms;
  std::vector<int> linear_iterations;
  int fallbacks = 0;  // linear solves redone with bicgstab
  bool stagnated = false;  // stopped on a roundoff-level update
  bool preconditioner_built = false;
};

/// Solves F_T = 0 in place of `temperature`. The preconditioner in
/// `state.thermal_pc` is reused; it is built from the first Jacobian when
/// absent or when a rebuild is pending.
NewtonReport newton_thermal(const Problem& problem, State& state, const ThermalStep& step, Vector& temperature,
                            TimingReport* timing = nullptr);

struct ElasticSystem {
  CsrMatrix stiffness;  // before elimination
  Vector load;
  std::vector<Index> fixed_dofs;
  Vector fixed_values;
};

ElasticSystem assemble_elastic(const Problem& problem, std::span<const double> temperature, double t);

/// Throws ValidationError naming the rigid modes left unconstrained by the
/// fixed dofs.
void check_rigid_constraints(const FunctionSpace& space, std::span<const Index> fixed_dofs);

struct ElasticReport {
  SolveReport solve;
  bool preconditioner_built = false;
  double seconds = 0.0;
};

/// Solves the elastic system at temperature `temperature` and time t into
/// `displacement` (also the initial guess). The smoothed-aggregation
/// preconditioner is built on first use and then reused.
ElasticReport solve_elastic(const Problem& problem, State& state, std::span<const double> temperature, double t,
                            Vector& displacement, TimingReport* timing = nullptr);

/// Largest von Mises stress of sigma = C : (eps(u) - eps_T) over the
/// quadrature points of all cells.
double max_von_mises(const Problem& problem, std::span<const double> temperature,
                     std::span<const double> displacement);

struct SteadyResult {
  Vector temperature;
  Vector displacement;
  NewtonReport newton;
  ElasticReport elastic;
  State state;
};

/// One thermal Newton solve followed by one elastic solve at time t.
SteadyResult coupled_steady_solve(const Problem& problem, double t, TimingReport* timing = nullptr);

struct StepReport {
  int step = 0;
  double t = 0.0;           // time reached
  double dt = 0.0;          // accepted step size
  double dt_next = 0.0;
  double max_change = 0.0;  // max nodal |T_{m+1} - T_m|
  int rejections = 0;
  std::vector<double> rejected_changes;
  int newton_iterations = 0;
  int thermal_krylov_iterations = 0;
  int elastic_krylov_iterations = 0;
  bool thermal_pc_built = false;
  bool elastic_pc_built = false;
  double thermal_seconds = 0.0;
  double elastic_seconds = 0.0;
};

/// One accepted step: retries with halved dt while the temperature change
/// exceeds delta_t_max, then solves the elastic problem.
StepReport advance_transient(const Problem& problem, State& state, TimeController& controller,
                             TimingReport* timing = nullptr);

}  // namespace tfem
