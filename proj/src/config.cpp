#include "tfem/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "tfem/io.hpp"

namespace tfem {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

LinearTable time_function(const json& j, const std::string& where) {
  LinearTable t;
  if (j.is_number()) return constant_table(j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError("config: " + where + " must be a number or [[t, v], ...]");
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) throw ValidationError("config: " + where + " entries must be [t, v] pairs");
    t.x.push_back(p[0].get<double>());
    t.y.push_back(p[1].get<double>());
  }
  t.validate("config: " + where, false);
  return t;
}

json time_function_echo(const LinearTable& t) {
  if (t.x.size() == 1) return t.y[0];
  json a = json::array();
  for (std::size_t i = 0; i < t.x.size(); ++i) a.push_back({t.x[i], t.y[i]});
  return a;
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("config: " + where + " must have 3 entries");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Material parse_material(const json& j, const std::string& where) {
  check_keys(j, {"name", "temperatures", "alpha", "E", "kappa", "cv", "rho", "nu", "T_ref"}, where);
  Material m;
  m.name = j.value("name", where);
  read(j, "T_ref", m.t_ref);
  if (j.contains("temperatures")) {
    m.temperatures = j.at("temperatures").get<std::vector<double>>();
  } else {
    m.temperatures = {m.t_ref};
  }
  auto samples = [&](const char* key, std::vector<double>& out) {
    if (!j.contains(key)) throw ValidationError("config: " + where + " is missing '" + key + "'");
    const json& v = j.at(key);
    if (v.is_number()) {
      out.assign(m.temperatures.size(), v.get<double>());
    } else {
      out = v.get<std::vector<double>>();
    }
  };
  samples("alpha", m.alpha);
  samples("E", m.youngs);
  samples("kappa", m.kappa);
  samples("cv", m.cv);
  if (!j.contains("rho") || !j.contains("nu")) throw ValidationError("config: " + where + " needs 'rho' and 'nu'");
  m.rho = j.at("rho").get<double>();
  m.poisson = j.at("nu").get<double>();
  m.validate();
  return m;
}

BoundaryRegion parse_boundary(const json& j, const std::string& where) {
  check_keys(j, {"robin", "pressure", "displacement"}, where);
  BoundaryRegion r;
  if (j.contains("robin")) {
    const json& rb = j.at("robin");
    check_keys(rb, {"beta", "T_bc"}, where + ".robin");
    if (!rb.contains("beta") || !rb.contains("T_bc")) {
      throw ValidationError("config: " + where + ".robin needs 'beta' and 'T_bc'");
    }
    r.robin = RobinCondition{time_function(rb.at("beta"), where + ".robin.beta"),
                             time_function(rb.at("T_bc"), where + ".robin.T_bc")};
  }
  if (j.contains("pressure")) r.pressure = PressureCondition{time_function(j.at("pressure"), where + ".pressure")};
  if (j.contains("displacement")) {
    const json& d = j.at("displacement");
    check_keys(d, {"x", "y", "z"}, where + ".displacement");
    DisplacementCondition dc;
    const char* names[3] = {"x", "y", "z"};
    for (int c = 0; c < 3; ++c)
      if (d.contains(names[c]) && !d.at(names[c]).is_null()) {
        dc.u[c] = time_function(d.at(names[c]), where + ".displacement." + names[c]);
      }
    r.displacement = dc;
  }
  return r;
}

KrylovMethod parse_krylov(const json& j, const std::string& where) {
  const std::string s = j.get<std::string>();
  if (s == "cg") return KrylovMethod::cg;
  if (s == "bicgstab") return KrylovMethod::bicgstab;
  throw ValidationError("config: " + where + " must be 'cg' or 'bicgstab'");
}

const char* krylov_name(KrylovMethod k) { return k == KrylovMethod::cg ? "cg" : "bicgstab"; }

void parse_amg(const json& j, AmgOptions& o, const std::string& where) {
  check_keys(j, {"strength_threshold", "coarse_size", "max_levels", "max_dense", "smoother"}, where);
  read(j, "strength_threshold", o.strength_threshold);
  read(j, "coarse_size", o.coarse_size);
  read(j, "max_levels", o.max_levels);
  read(j, "max_dense", o.max_dense);
  if (j.contains("smoother")) {
    const json& s = j.at("smoother");
    check_keys(s, {"type", "sweeps", "degree", "lower_ratio", "eig_iterations", "jacobi_omega"}, where + ".smoother");
    if (s.contains("type")) {
      const std::string t = s.at("type").get<std::string>();
      if (t == "gauss_seidel") {
        o.smoother.type = SmootherType::gauss_seidel;
      } else if (t == "chebyshev") {
        o.smoother.type = SmootherType::chebyshev;
      } else if (t == "jacobi") {
        o.smoother.type = SmootherType::jacobi;
      } else {
        throw ValidationError("config: unknown smoother '" + t + "'");
      }
    }
    read(s, "sweeps", o.smoother.sweeps);
    read(s, "degree", o.smoother.chebyshev.degree);
    read(s, "lower_ratio", o.smoother.chebyshev.lower_ratio);
    read(s, "eig_iterations", o.smoother.eig_iterations);
    read(s, "jacobi_omega", o.smoother.jacobi_omega);
  }
  if (!(o.strength_threshold >= 0.0 && o.strength_threshold < 1.0)) {
    throw ValidationError("config: " + where + ".strength_threshold must lie in [0, 1)");
  }
  if (o.coarse_size < 1 || o.max_levels < 1 || o.max_dense < 1 || o.smoother.sweeps < 1) {
    throw ValidationError("config: " + where + " sizes and sweep counts must be positive");
  }
}

ojson amg_echo(const AmgOptions& o) {
  const char* type = o.smoother.type == SmootherType::gauss_seidel ? "gauss_seidel"
                     : o.smoother.type == SmootherType::chebyshev  ? "chebyshev"
                                                                   : "jacobi";
  ojson s;
  s["type"] = type;
  s["sweeps"] = o.smoother.sweeps;
  s["degree"] = o.smoother.chebyshev.degree;
  s["lower_ratio"] = o.smoother.chebyshev.lower_ratio;
  s["eig_iterations"] = o.smoother.eig_iterations;
  s["jacobi_omega"] = o.smoother.jacobi_omega;
  ojson a;
  a["strength_threshold"] = o.strength_threshold;
  a["coarse_size"] = o.coarse_size;
  a["max_levels"] = o.max_levels;
  a["max_dense"] = o.max_dense;
  a["smoother"] = s;
  return a;
}

int parse_key(const std::string& key, const std::string& where) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(key, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != key.size()) throw ValidationError("config: " + where + " key '" + key + "' is not an integer");
  return v;
}

void check_against_mesh(const SimulationConfig& c) {
  std::set<int> tags;
  for (const auto& [key, tag] : c.mesh->facet_tags()) tags.insert(tag);
  for (const auto& [tag, r] : c.schedule)
    if (!tags.count(tag)) {
      throw ValidationError("config: boundary tag " + std::to_string(tag) + " does not exist in the mesh");
    }
  for (int region : c.mesh->cell_region())
    if (!c.materials.count(region)) {
      throw ValidationError("config: no material for cell region " + std::to_string(region));
    }
}

SimulationConfig parse_impl(const json& j, const std::string& base_dir, TimingReport* timing) {
  check_keys(j, {"mesh", "degree", "materials", "boundaries", "controller", "thermal", "elastic", "body_force",
                 "steady_time", "output"},
             "the top level");
  SimulationConfig c;

  if (!j.contains("mesh")) throw ValidationError("config: missing 'mesh'");
  const json& m = j.at("mesh");
  if (m.is_string()) {
    c.mesh_source.path = m.get<std::string>();
  } else {
    check_keys(m, {"path", "box", "refine"}, "mesh");
    read(m, "path", c.mesh_source.path);
    read(m, "refine", c.mesh_source.refine);
    if (m.contains("box")) {
      const json& b = m.at("box");
      check_keys(b, {"n", "lower", "upper"}, "mesh.box");
      BoxSpec box;
      if (b.contains("n")) {
        const auto n = b.at("n").get<std::vector<int>>();
        if (n.size() != 3) throw ValidationError("config: mesh.box.n must have 3 entries");
        box.n = {n[0], n[1], n[2]};
      }
      if (b.contains("lower")) box.lower = vec3(b.at("lower"), "mesh.box.lower");
      if (b.contains("upper")) box.upper = vec3(b.at("upper"), "mesh.box.upper");
      c.mesh_source.box = box;
    }
  }
  if (c.mesh_source.path.empty() == !c.mesh_source.box.has_value()) {
    throw ValidationError("config: mesh needs exactly one of a path or a box");
  }
  if (c.mesh_source.refine < 0) throw ValidationError("config: mesh.refine must be non-negative");
  if (!c.mesh_source.path.empty()) {
    std::filesystem::path p(c.mesh_source.path);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    c.mesh_source.path = p.lexically_normal().string();
    if (!std::filesystem::exists(p)) throw ValidationError("config: mesh file '" + c.mesh_source.path + "' not found");
  }

  read(j, "degree", c.degree);
  if (c.degree != 1 && c.degree != 2) throw ValidationError("config: degree must be 1 or 2");
  c.elastic.amg = smoothed_aggregation_defaults(c.degree);

  if (!j.contains("materials") || !j.at("materials").is_object() || j.at("materials").empty()) {
    throw ValidationError("config: 'materials' must map region ids to materials");
  }
  for (const auto& [key, value] : j.at("materials").items()) {
    const int region = parse_key(key, "materials");
    c.materials[region] = parse_material(value, "materials." + key);
  }
  if (j.contains("boundaries")) {
    if (!j.at("boundaries").is_object()) throw ValidationError("config: 'boundaries' must be an object");
    for (const auto& [key, value] : j.at("boundaries").items()) {
      const int tag = parse_key(key, "boundaries");
      c.schedule[tag] = parse_boundary(value, "boundaries." + key);
      if (c.schedule[tag].pressure && c.schedule[tag].displacement) {
        throw ValidationError("config: boundaries." + key + " has both pressure and displacement");
      }
    }
  }

  if (j.contains("controller")) {
    const json& t = j.at("controller");
    check_keys(t, {"theta", "dt0", "dt_max", "delta_T_max", "epsilon", "t_start", "t_end", "max_retries", "T0"},
               "controller");
    read(t, "theta", c.controller.theta);
    read(t, "dt0", c.controller.dt0);
    read(t, "dt_max", c.controller.dt_max);
    read(t, "delta_T_max", c.controller.delta_t_max);
    read(t, "epsilon", c.controller.epsilon);
    read(t, "t_start", c.controller.t_start);
    read(t, "t_end", c.controller.t_end);
    read(t, "max_retries", c.controller.max_retries);
    read(t, "T0", c.controller.initial_temperature);
  }
  c.controller.validate();

  if (j.contains("thermal")) {
    const json& t = j.at("thermal");
    check_keys(t, {"newton_rtol", "max_newton", "backtracking", "linear_rtol", "linear_max_iterations", "krylov",
                   "amg", "initial_guess", "robin_sign"},
               "thermal");
    read(t, "newton_rtol", c.thermal.newton_rtol);
    read(t, "max_newton", c.thermal.max_newton);
    read(t, "backtracking", c.thermal.backtracking);
    read(t, "linear_rtol", c.thermal.linear_rtol);
    read(t, "linear_max_iterations", c.thermal.linear_max_iterations);
    if (t.contains("krylov")) c.thermal.krylov = parse_krylov(t.at("krylov"), "thermal.krylov");
    if (t.contains("amg")) parse_amg(t.at("amg"), c.thermal.amg, "thermal.amg");
    read(t, "initial_guess", c.thermal.steady_initial_guess);
    if (t.contains("robin_sign")) {
      const std::string s = t.at("robin_sign").get<std::string>();
      if (s == "heat_loss") {
        c.thermal.robin_sign = RobinSign::heat_loss;
      } else if (s == "heat_gain") {
        c.thermal.robin_sign = RobinSign::heat_gain;
      } else {
        throw ValidationError("config: thermal.robin_sign must be 'heat_loss' or 'heat_gain'");
      }
    }
  }
  if (!(c.thermal.newton_rtol > 0.0) || !(c.thermal.linear_rtol > 0.0) || c.thermal.max_newton < 1 ||
      c.thermal.linear_max_iterations < 1) {
    throw ValidationError("config: thermal tolerances and iteration limits must be positive");
  }

  if (j.contains("elastic")) {
    const json& e = j.at("elastic");
    check_keys(e, {"rtol", "max_iterations", "krylov", "amg", "near_nullspace"}, "elastic");
    read(e, "rtol", c.elastic.rtol);
    read(e, "max_iterations", c.elastic.max_iterations);
    if (e.contains("krylov")) c.elastic.krylov = parse_krylov(e.at("krylov"), "elastic.krylov");
    if (e.contains("amg")) parse_amg(e.at("amg"), c.elastic.amg, "elastic.amg");
    if (e.contains("near_nullspace")) {
      const std::string s = e.at("near_nullspace").get<std::string>();
      if (s == "rigid") {
        c.elastic.modes = RigidModes::full;
      } else if (s == "translations") {
        c.elastic.modes = RigidModes::translations_only;
      } else {
        throw ValidationError("config: elastic.near_nullspace must be 'rigid' or 'translations'");
      }
    }
  }
  if (!(c.elastic.rtol > 0.0) || c.elastic.max_iterations < 1) {
    throw ValidationError("config: elastic tolerance and iteration limit must be positive");
  }

  if (j.contains("body_force")) c.body_force = vec3(j.at("body_force"), "body_force");
  read(j, "steady_time", c.steady_time);
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"directory", "every"}, "output");
    read(o, "directory", c.output.directory);
    read(o, "every", c.output.every);
    if (c.output.every < 0) throw ValidationError("config: output.every must be non-negative");
  }

  {
    auto scope = time_phase(timing, "mesh read");
    c.mesh = load_mesh(c.mesh_source);
  }
  check_against_mesh(c);
  return c;
}

}  // namespace

std::shared_ptr<const Mesh> load_mesh(const MeshSource& source) {
  Mesh mesh = source.box ? build_box_mesh(source.box->n[0], source.box->n[1], source.box->n[2], source.box->lower,
                                          source.box->upper)
                         : read_mesh(source.path);
  for (int r = 0; r < source.refine; ++r) mesh = uniform_refine(mesh);
  if (source.refine > 0) mesh = reorder_vertices(mesh);
  return std::make_shared<const Mesh>(std::move(mesh));
}

SimulationConfig parse_config(const json& j, const std::string& base_dir, TimingReport* timing) {
  try {
    return parse_impl(j, base_dir, timing);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

SimulationConfig read_config(const std::string& path, TimingReport* timing) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "': " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path().string(), timing);
}

ojson echo_config(const SimulationConfig& c) {
  ojson j;
  ojson m;
  if (c.mesh_source.box) {
    m["box"] = {{"n", c.mesh_source.box->n},
                {"lower", c.mesh_source.box->lower},
                {"upper", c.mesh_source.box->upper}};
  } else {
    m["path"] = c.mesh_source.path;
  }
  m["refine"] = c.mesh_source.refine;
  j["mesh"] = m;
  j["degree"] = c.degree;

  ojson mats = ojson::object();
  for (const auto& [region, mat] : c.materials) {
    ojson e;
    e["name"] = mat.name;
    e["temperatures"] = mat.temperatures;
    e["alpha"] = mat.alpha;
    e["E"] = mat.youngs;
    e["kappa"] = mat.kappa;
    e["cv"] = mat.cv;
    e["rho"] = mat.rho;
    e["nu"] = mat.poisson;
    e["T_ref"] = mat.t_ref;
    mats[std::to_string(region)] = e;
  }
  j["materials"] = mats;

  ojson bcs = ojson::object();
  for (const auto& [tag, r] : c.schedule) {
    ojson e = ojson::object();
    if (r.robin) e["robin"] = {{"beta", time_function_echo(r.robin->beta)}, {"T_bc", time_function_echo(r.robin->t_bc)}};
    if (r.pressure) e["pressure"] = time_function_echo(r.pressure->p);
    if (r.displacement) {
      ojson d = ojson::object();
      const char* names[3] = {"x", "y", "z"};
      for (int k = 0; k < 3; ++k)
        if (r.displacement->u[k]) d[names[k]] = time_function_echo(*r.displacement->u[k]);
      e["displacement"] = d;
    }
    bcs[std::to_string(tag)] = e;
  }
  j["boundaries"] = bcs;

  const ControllerSettings& t = c.controller;
  j["controller"] = {{"theta", t.theta},     {"dt0", t.dt0},         {"dt_max", t.dt_max},
                     {"delta_T_max", t.delta_t_max}, {"epsilon", t.epsilon}, {"t_start", t.t_start},
                     {"t_end", t.t_end},     {"max_retries", t.max_retries}, {"T0", t.initial_temperature}};
  ojson th;
  th["newton_rtol"] = c.thermal.newton_rtol;
  th["max_newton"] = c.thermal.max_newton;
  th["backtracking"] = c.thermal.backtracking;
  th["linear_rtol"] = c.thermal.linear_rtol;
  th["linear_max_iterations"] = c.thermal.linear_max_iterations;
  th["krylov"] = krylov_name(c.thermal.krylov);
  th["amg"] = amg_echo(c.thermal.amg);
  th["initial_guess"] = c.thermal.steady_initial_guess;
  th["robin_sign"] = c.thermal.robin_sign == RobinSign::heat_loss ? "heat_loss" : "heat_gain";
  j["thermal"] = th;
  ojson el;
  el["rtol"] = c.elastic.rtol;
  el["max_iterations"] = c.elastic.max_iterations;
  el["krylov"] = krylov_name(c.elastic.krylov);
  el["amg"] = amg_echo(c.elastic.amg);
  el["near_nullspace"] = c.elastic.modes == RigidModes::full ? "rigid" : "translations";
  j["elastic"] = el;
  j["body_force"] = c.body_force;
  j["steady_time"] = c.steady_time;
  j["output"] = {{"directory", c.output.directory}, {"every", c.output.every}};
  return j;
}

Problem make_problem(const SimulationConfig& config, TimingReport* timing) {
  if (!config.mesh) throw ValidationError("config: mesh not loaded");
  Problem p = make_problem(config.mesh, config.degree, config.materials, config.schedule, timing);
  p.thermal = config.thermal;
  p.elastic = config.elastic;
  p.body_force = config.body_force;
  return p;
}

}  // namespace tfem
