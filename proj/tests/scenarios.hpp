#pragma once

// Problem builders shared by the sim tests and the acceptance runner.

#include <cmath>
#include <memory>

#include "tfem/sim.hpp"

namespace scenarios {

using namespace tfem;

inline std::shared_ptr<const Mesh> cube(int n, double side = 1.0) {
  return std::make_shared<const Mesh>(build_box_mesh(n, n, n, {0.0, 0.0, 0.0}, {side, side, side}));
}

inline DisplacementCondition fix_component(int c, double value = 0.0) {
  DisplacementCondition d;
  d.u[c] = constant_table(value);
  return d;
}

inline DisplacementCondition clamp(const Vec3& value = {0.0, 0.0, 0.0}) {
  DisplacementCondition d;
  for (int c = 0; c < 3; ++c) d.u[c] = constant_table(value[c]);
  return d;
}

/// Symmetry planes x = 0, y = 0, z = 0 of a box: removes rigid motion while
/// leaving expansion about the origin free.
inline void add_symmetry_planes(BoundarySchedule& s) {
  s[1].displacement = fix_component(0);
  s[3].displacement = fix_component(1);
  s[5].displacement = fix_component(2);
}

/// alpha 1e-5, E 200 GPa, nu 0.3, T_ref 293 K.
inline Material steel(double kappa = 45.0, double cv = 460.0) {
  return constant_material(1e-5, 200e9, kappa, cv, 7800.0, 0.3, 293.0);
}

/// Conductivity and heat capacity linear in T over [200, 2000] K.
inline Material temperature_dependent() {
  Material m;
  m.name = "graded";
  m.temperatures = {200.0, 2000.0};
  m.alpha = {1e-5, 2e-5};
  m.youngs = {2e11, 1e11};
  m.kappa = {20.0, 200.0};
  m.cv = {400.0, 900.0};
  m.rho = 7800.0;
  m.poisson = 0.3;
  m.t_ref = 293.0;
  return m;
}

inline RobinCondition robin(double beta, double t_bc) { return {constant_table(beta), constant_table(t_bc)}; }

/// Cube at 293 K whose x = 1 face sees a stiff film at `t_hot`; x = 0 face
/// held mechanically by symmetry planes.
inline Problem heated_cube(int n, int degree, double t_hot, double beta = 5e4) {
  BoundarySchedule s;
  add_symmetry_planes(s);
  s[2].robin = robin(beta, t_hot);
  MaterialTable mats{{0, steel()}};
  return make_problem(cube(n, 0.1), degree, mats, s);
}

}  // namespace scenarios
