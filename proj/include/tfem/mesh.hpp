#pragma once

// Tetrahedral mesh storage, generation, uniform refinement, boundary
// extraction and dihedral-angle quality analysis.

#include <array>
#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "tfem/common.hpp"

namespace tfem {

using Cell = std::array<Index, 4>;

/// A triangle identified by its sorted vertex triple.
using FacetKey = std::array<Index, 3>;

FacetKey make_facet_key(Index a, Index b, Index c);

struct FacetKeyHash {
  std::size_t operator()(const FacetKey& f) const noexcept;
};

using FacetTagMap = std::unordered_map<FacetKey, int, FacetKeyHash>;

/// Local vertex pairs of the six tetrahedron edges, in the order used for
/// edge dofs and refinement.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Local face f is opposite local vertex f.
inline constexpr std::array<std::array<int, 3>, 4> kTetFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

/// Immutable tetrahedral mesh. Cells are reoriented at construction so that
/// every signed volume is positive.
class Mesh {
 public:
  struct Trusted {};

  Mesh() = default;

  /// Validates indices, rejects degenerate cells, normalizes orientation and
  /// checks that every tagged facet lies on the boundary.
  Mesh(std::vector<Vec3> vertices, std::vector<Cell> cells, std::vector<int> cell_region,
       FacetTagMap facet_tags);

  /// Skips the boundary check on facet tags. Used by generators whose output
  /// is correct by construction.
  Mesh(Trusted, std::vector<Vec3> vertices, std::vector<Cell> cells, std::vector<int> cell_region,
       FacetTagMap facet_tags);

  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<int>& cell_region() const { return cell_region_; }
  const FacetTagMap& facet_tags() const { return facet_tags_; }

  const Vec3& vertex(Index v) const { return vertices_[v]; }
  const Cell& cell(Index c) const { return cells_[c]; }

  double cell_volume(Index c) const;
  double total_volume() const;
  /// Length of the bounding-box diagonal.
  double bounding_diagonal() const;

 private:
  void validate_and_orient();

  std::vector<Vec3> vertices_;
  std::vector<Cell> cells_;
  std::vector<int> cell_region_;
  FacetTagMap facet_tags_;
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Vertex-to-cell incidence in CSR form.
struct VertexCells {
  std::vector<std::int64_t> offsets;
  std::vector<Index> cells;

  std::span<const Index> of(Index v) const {
    return {cells.data() + offsets[v], static_cast<std::size_t>(offsets[v + 1] - offsets[v])};
  }
};

VertexCells vertex_cells(const Mesh& mesh);

/// Unique mesh edges. Edge ids are grouped by their lower vertex.
class EdgeTable {
 public:
  explicit EdgeTable(const Mesh& mesh);

  Index num_edges() const { return static_cast<Index>(upper_.size()); }
  /// Global edge id of local edge e (see kTetEdges) of cell c.
  Index cell_edge(Index c, int e) const { return cell_edges_[6 * static_cast<std::size_t>(c) + e]; }
  /// Edge id of the edge joining a and b; -1 when absent.
  Index find(Index a, Index b) const;
  std::array<Index, 2> vertices(Index edge) const { return {lower_[edge], upper_[edge]}; }

 private:
  std::vector<std::int64_t> offsets_;
  std::vector<Index> upper_;
  std::vector<Index> lower_;
  std::vector<Index> cell_edges_;
};

/// A boundary triangle resolved to the single cell that owns it.
struct BoundaryFacet {
  FacetKey key;
  Index cell = -1;
  int local_face = -1;  // index into kTetFaces
  int tag = 0;
};

[[nodiscard]] Mesh build_box_mesh(int nx, int ny, int nz, const Vec3& lower, const Vec3& upper);

/// Splits each tetrahedron into eight through its edge midpoints. The interior
/// octahedron is cut along its shortest diagonal.
[[nodiscard]] Mesh uniform_refine(const Mesh& mesh);

/// Same mesh with vertices sorted along a Morton curve of their coordinates
/// and cells sorted by centroid, so neighbours get nearby indices. Refinement
/// appends midpoints after all old vertices; this undoes the scatter.
[[nodiscard]] Mesh reorder_vertices(const Mesh& mesh);

/// Facets with exactly one incident cell, sorted by key.
std::vector<FacetKey> boundary_facets(const Mesh& mesh);

/// Tagged facets resolved to their owning cell and local face, sorted by key.
/// Throws ValidationError if a tagged facet is not a boundary facet.
std::vector<BoundaryFacet> tagged_boundary(const Mesh& mesh);

/// Interior dihedral angles in degrees, ordered like kTetEdges.
std::array<double, 6> dihedral_angles(const Mesh& mesh, Index cell);
std::array<double, 6> dihedral_angles(const std::array<Vec3, 4>& x);

struct QualityReport {
  std::vector<double> bin_edges;  // n_bins + 1 values over [0, 180]
  std::vector<std::int64_t> counts;
  double min_angle = 0.0;
  double max_angle = 0.0;
  Index cell_count = 0;
  Index vertex_count = 0;
};

QualityReport quality_report(const Mesh& mesh, int n_bins);

}  // namespace tfem
