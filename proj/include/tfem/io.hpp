#pragma once

// Mesh text format and legacy VTK output.
//
// tfmesh, version 1:
//   tfmesh 1
//   vertices N      followed by N lines "x y z"
//   cells M         followed by M lines "v0 v1 v2 v3 region"
//   facets K        followed by K lines "v0 v1 v2 tag"
// Blank lines and lines starting with '#' are ignored.

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tfem/mesh.hpp"

namespace tfem {

class MeshFormatError : public ValidationError {
 public:
  enum class Kind { bad_header, unsupported_version, malformed, index_out_of_range, truncated };

  MeshFormatError(Kind kind, int line, const std::string& what);
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

void write_mesh(const Mesh& mesh, std::ostream& out);
void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(std::istream& in);
Mesh read_mesh(const std::string& path);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Nodal field. Nodes are numbered vertices first, so for P2 fields only the
/// leading vertex values are written.
struct PointField {
  std::string name;
  int components = 1;  // 1 or 3
  Index num_nodes = 0;
  std::span<const double> values;
};

/// VTK legacy ASCII unstructured grid (version 3.0) with the cell regions as
/// cell data.
void write_vtk(const Mesh& mesh, const std::vector<PointField>& fields, std::ostream& out);
void write_vtk(const Mesh& mesh, const std::vector<PointField>& fields, const std::string& path);

struct VtkData {
  std::vector<Vec3> points;
  std::vector<std::vector<Index>> cells;
  std::vector<int> cell_types;
  std::map<std::string, std::vector<double>> point_scalars;
  std::map<std::string, std::vector<Vec3>> point_vectors;
  std::map<std::string, std::vector<double>> cell_scalars;
};

/// Reads the subset of the legacy format produced by write_vtk.
VtkData read_vtk(std::istream& in);
VtkData read_vtk(const std::string& path);

}  // namespace tfem
