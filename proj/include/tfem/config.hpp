#pragma once

// JSON run configuration. The schema is described in docs/config.md.

#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "tfem/sim.hpp"

namespace tfem {

struct BoxSpec {
  std::array<int, 3> n{1, 1, 1};
  Vec3 lower{0.0, 0.0, 0.0};
  Vec3 upper{1.0, 1.0, 1.0};
};

struct MeshSource {
  std::string path;  // resolved against the config file's directory
  std::optional<BoxSpec> box;
  int refine = 0;
};

struct OutputSettings {
  std::string directory = "out";
  int every = 1;  // field output cadence in accepted steps, 0 disables
};

struct SimulationConfig {
  MeshSource mesh_source;
  int degree = 1;
  MaterialTable materials;
  BoundarySchedule schedule;
  ControllerSettings controller;
  ThermalSettings thermal;
  ElasticSettings elastic;
  Vec3 body_force{0.0, 0.0, 0.0};
  double steady_time = 0.0;
  OutputSettings output;

  std::shared_ptr<const Mesh> mesh;  // loaded by read_config
};

/// Parses and validates a configuration; loads the mesh (timed as "mesh read")
/// and checks every scheduled tag and material region against it. Relative
/// paths are resolved against `base_dir`.
SimulationConfig parse_config(const nlohmann::json& j, const std::string& base_dir,
                              TimingReport* timing = nullptr);
SimulationConfig read_config(const std::string& path, TimingReport* timing = nullptr);

/// Fully resolved configuration including every default.
nlohmann::ordered_json echo_config(const SimulationConfig& config);

std::shared_ptr<const Mesh> load_mesh(const MeshSource& source);

/// Problem with the configured solver settings.
Problem make_problem(const SimulationConfig& config, TimingReport* timing = nullptr);

}  // namespace tfem
