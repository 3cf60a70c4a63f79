#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "tfem/io.hpp"
#include "tfem/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "tfem_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + TFEM_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') out.push_back(json::parse(line));
  return out;
}

std::string config(const std::string& name) { return std::string(TFEM_SOURCE_DIR) + "/configs/" + name; }

}  // namespace

TEST_CASE("mesh-gen, refine and quality") {
  const std::string mesh = (work_dir() / "cube.tfmesh").string();
  Run r = cli("mesh-gen --n 1 1 1 --out \"" + mesh + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.out == "cells 6 vertices 8\n");
  const std::string fine = (work_dir() / "fine.tfmesh").string();
  r = cli("refine --mesh \"" + mesh + "\" --levels 2 --out \"" + fine + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.out == "cells 384 vertices 125\n");
  r = cli("quality --mesh \"" + mesh + "\" --bins 18");
  REQUIRE(r.code == 0);
  CHECK(r.out == tfem::quality_text(tfem::quality_report(tfem::read_mesh(mesh), 18)));
}

TEST_CASE("exit codes") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("quality --mesh does_not_exist.tfmesh").code == 1);
  CHECK(cli("mesh-gen --n 0 1 1 --out x.tfmesh").code == 1);
  const fs::path bad = work_dir() / "bad.tfmesh";
  std::ofstream(bad) << "tfmesh 2\n";
  const Run r = cli("quality --mesh \"" + bad.string() + "\"");
  CHECK(r.code == 1);
  CHECK(r.err.find("version") != std::string::npos);

  // A thermal Newton solve capped at one iteration on a nonlinear problem is a solver failure.
  json j = json::parse(slurp(config("steady_cube.json")));
  j["thermal"] = {{"max_newton", 1}};
  j["mesh"]["box"]["n"] = {3, 3, 3};
  const fs::path cfg = work_dir() / "capped.json";
  std::ofstream(cfg) << j.dump();
  const Run s = cli("steady --config \"" + cfg.string() + "\" --out \"" + (work_dir() / "capped").string() + "\"");
  CHECK(s.code == 2);
  CHECK(s.err.find("Newton") != std::string::npos);

  json t = json::parse(slurp(config("steady_cube.json")));
  t["controller"] = {{"theta", 1.5}};
  const fs::path tcfg = work_dir() / "theta.json";
  std::ofstream(tcfg) << t.dump();
  CHECK(cli("steady --config \"" + tcfg.string() + "\"").code == 1);
}

TEST_CASE("steady run writes fields and a covering timing report") {
  const fs::path out = work_dir() / "steady";
  const Run r = cli("steady --echo --config \"" + config("steady_cube.json") + "\" --out \"" + out.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"newton_rtol\": 1e-09") != std::string::npos);
  CHECK(r.out.find("\"initial_guess\": 400.0") != std::string::npos);
  const auto timing = json_lines(slurp(out / "timing.jsonl"));
  REQUIRE(!timing.empty());
  CHECK(timing.back()["phase"] == "total");
  CHECK(timing.back()["covered"].get<double>() >= 0.95);
  std::vector<std::string> phases;
  for (const auto& rec : timing) phases.push_back(rec["phase"]);
  for (const char* p : {"mesh read", "dofmap", "assembly", "precond build", "thermal solve", "elastic solve", "output"})
    CHECK(std::find(phases.begin(), phases.end(), p) != phases.end());
  const tfem::VtkData vtk = tfem::read_vtk((out / "steady.vtk").string());
  CHECK(vtk.points.size() == 729);
  CHECK(vtk.point_scalars.count("temperature"));
  CHECK(vtk.point_vectors.count("displacement"));
  for (double t : vtk.point_scalars.at("temperature")) {
    CHECK(t > 290.0);
    CHECK(t < 905.0);
  }
}

TEST_CASE("transient run logs every step") {
  const fs::path out = work_dir() / "cycle";
  const Run r = cli("transient --config \"" + config("cycle.json") + "\" --out \"" + out.string() + "\" --max-steps 25");
  REQUIRE(r.code == 0);
  const auto steps = json_lines(slurp(out / "steps.jsonl"));
  REQUIRE(steps.size() == 25);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    CHECK(steps[k]["step"] == k + 1);
    CHECK(steps[k]["max_dT"].get<double>() <= 10.0);
    CHECK(steps[k]["dt"].get<double>() > 0.0);
    CHECK(steps[k].contains("thermal_pc_built"));
    CHECK(steps[k]["elastic_pc_built"] == (k == 0));
  }
  const auto summary = json_lines(r.out).back();
  CHECK(summary["elastic_pc_builds"] == 1);
  CHECK(summary["steps"] == 25);
  CHECK(fs::exists(out / "step_00010.vtk"));
  CHECK(fs::exists(out / "step_00020.vtk"));
}

TEST_CASE("bench table") {
  const fs::path tsv = work_dir() / "bench.tsv";
  const Run r = cli("bench --levels 2 --base 3 --amg classical --out \"" + tsv.string() + "\"");
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(tsv));
  std::string header, line;
  std::getline(in, header);
  CHECK(header.find("level") == 0);
  CHECK(header.find("operator_complexity") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  CHECK(r.out.rfind(header, 0) == 0);
  CHECK(cli("bench --amg nonsense").code == 1);
}
