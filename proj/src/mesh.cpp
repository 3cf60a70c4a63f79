#include "tfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

namespace tfem {

FacetKey make_facet_key(Index a, Index b, Index c) {
  FacetKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

std::size_t FacetKeyHash::operator()(const FacetKey& f) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (Index v : f) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(b - a, cross(c - a, d - a)) / 6.0;
}

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Cell> cells, std::vector<int> cell_region,
           FacetTagMap facet_tags)
    : Mesh(Trusted{}, std::move(vertices), std::move(cells), std::move(cell_region),
           std::move(facet_tags)) {
  // Resolving every tag against cell incidence is the boundary check.
  (void)tagged_boundary(*this);
}

Mesh::Mesh(Trusted, std::vector<Vec3> vertices, std::vector<Cell> cells, std::vector<int> cell_region,
           FacetTagMap facet_tags)
    : vertices_(std::move(vertices)),
      cells_(std::move(cells)),
      cell_region_(std::move(cell_region)),
      facet_tags_(std::move(facet_tags)) {
  if (cell_region_.empty()) cell_region_.assign(cells_.size(), 0);
  validate_and_orient();
}

void Mesh::validate_and_orient() {
  if (cell_region_.size() != cells_.size()) {
    throw ValidationError("mesh: cell_region has " + std::to_string(cell_region_.size()) +
                          " entries for " + std::to_string(cells_.size()) + " cells");
  }
  const Index nv = num_vertices();
  const double diag = bounding_diagonal();
  const double vol_tol = 1e-14 * diag * diag * diag;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    Cell& cell = cells_[c];
    for (int i = 0; i < 4; ++i) {
      if (cell[i] < 0 || cell[i] >= nv) {
        throw ValidationError("mesh: cell " + std::to_string(c) + " references vertex " +
                              std::to_string(cell[i]) + " of " + std::to_string(nv));
      }
      for (int j = 0; j < i; ++j) {
        if (cell[i] == cell[j]) {
          throw ValidationError("mesh: cell " + std::to_string(c) + " repeats vertex " +
                                std::to_string(cell[i]));
        }
      }
    }
    double v = signed_volume(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]],
                             vertices_[cell[3]]);
    if (std::abs(v) < vol_tol) {
      throw ValidationError("mesh: cell " + std::to_string(c) + " is degenerate (volume " +
                            std::to_string(v) + ")");
    }
    if (v < 0) std::swap(cell[2], cell[3]);
  }
  for (const auto& [key, tag] : facet_tags_) {
    for (Index v : key) {
      if (v < 0 || v >= nv) {
        throw ValidationError("mesh: tagged facet references vertex " + std::to_string(v));
      }
    }
    if (key[0] == key[1] || key[1] == key[2] || key[0] > key[1] || key[1] > key[2]) {
      throw ValidationError("mesh: facet key is not a sorted distinct triple");
    }
  }
}

double Mesh::cell_volume(Index c) const {
  const Cell& k = cells_[c];
  return signed_volume(vertices_[k[0]], vertices_[k[1]], vertices_[k[2]], vertices_[k[3]]);
}

double Mesh::total_volume() const {
  double sum = 0.0;
  for (Index c = 0; c < num_cells(); ++c) sum += cell_volume(c);
  return sum;
}

double Mesh::bounding_diagonal() const {
  if (vertices_.empty()) return 0.0;
  Vec3 lo = vertices_.front(), hi = vertices_.front();
  for (const Vec3& x : vertices_) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
  return norm(hi - lo);
}

VertexCells vertex_cells(const Mesh& mesh) {
  VertexCells vc;
  vc.offsets.assign(static_cast<std::size_t>(mesh.num_vertices()) + 1, 0);
  for (const Cell& c : mesh.cells())
    for (Index v : c) ++vc.offsets[v + 1];
  for (std::size_t i = 1; i < vc.offsets.size(); ++i) vc.offsets[i] += vc.offsets[i - 1];
  vc.cells.resize(static_cast<std::size_t>(vc.offsets.back()));
  std::vector<std::int64_t> fill(vc.offsets.begin(), vc.offsets.end() - 1);
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (Index v : mesh.cell(c)) vc.cells[fill[v]++] = c;
  return vc;
}

EdgeTable::EdgeTable(const Mesh& mesh) {
  const Index nv = mesh.num_vertices();
  const VertexCells vc = vertex_cells(mesh);
  offsets_.assign(static_cast<std::size_t>(nv) + 1, 0);
  std::vector<Index> scratch;
  // Two passes over the vertex stars: count, then fill.
  for (int pass = 0; pass < 2; ++pass) {
    for (Index v = 0; v < nv; ++v) {
      scratch.clear();
      for (Index c : vc.of(v))
        for (Index w : mesh.cell(c))
          if (w > v) scratch.push_back(w);
      std::sort(scratch.begin(), scratch.end());
      scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
      if (pass == 0) {
        offsets_[v + 1] = static_cast<std::int64_t>(scratch.size());
      } else {
        std::copy(scratch.begin(), scratch.end(), upper_.begin() + offsets_[v]);
        std::fill(lower_.begin() + offsets_[v], lower_.begin() + offsets_[v + 1], v);
      }
    }
    if (pass == 0) {
      for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
      upper_.resize(static_cast<std::size_t>(offsets_.back()));
      lower_.resize(upper_.size());
    }
  }
  cell_edges_.resize(6 * static_cast<std::size_t>(mesh.num_cells()));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Cell& k = mesh.cell(c);
    for (int e = 0; e < 6; ++e)
      cell_edges_[6 * static_cast<std::size_t>(c) + e] = find(k[kTetEdges[e][0]], k[kTetEdges[e][1]]);
  }
}

Index EdgeTable::find(Index a, Index b) const {
  if (a > b) std::swap(a, b);
  if (a < 0 || static_cast<std::size_t>(a) + 1 >= offsets_.size()) return -1;
  auto first = upper_.begin() + offsets_[a];
  auto last = upper_.begin() + offsets_[a + 1];
  auto it = std::lower_bound(first, last, b);
  if (it == last || *it != b) return -1;
  return static_cast<Index>(it - upper_.begin());
}

Mesh build_box_mesh(int nx, int ny, int nz, const Vec3& lower, const Vec3& upper) {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw ValidationError("box mesh: subdivision counts must be >= 1");
  }
  for (int d = 0; d < 3; ++d) {
    if (!(upper[d] > lower[d])) throw ValidationError("box mesh: degenerate extents");
  }
  const std::array<int, 3> n{nx, ny, nz};
  auto vid = [&](int i, int j, int k) { return static_cast<Index>((k * (ny + 1) + j) * (nx + 1) + i); };

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const std::array<int, 3> ijk{i, j, k};
        Vec3 x;
        for (int d = 0; d < 3; ++d) {
          // Exact end points regardless of rounding in the step.
          x[d] = ijk[d] == n[d] ? upper[d] : lower[d] + (upper[d] - lower[d]) * ijk[d] / n[d];
        }
        vertices.push_back(x);
      }

  // Kuhn subdivision: six tetrahedra along the 0-7 diagonal, one per axis
  // permutation. Identical orientation in every hexahedron keeps it conforming.
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<Cell> cells;
  cells.reserve(6 * static_cast<std::size_t>(nx) * ny * nz);
  FacetTagMap tags;
  auto tag_of = [&](const std::array<std::array<int, 3>, 3>& f) {
    for (int d = 0; d < 3; ++d) {
      if (f[0][d] == 0 && f[1][d] == 0 && f[2][d] == 0) return 2 * d + 1;
      if (f[0][d] == n[d] && f[1][d] == n[d] && f[2][d] == n[d]) return 2 * d + 2;
    }
    return 0;
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (const auto& p : perms) {
          std::array<std::array<int, 3>, 4> corner;
          corner[0] = {i, j, k};
          corner[1] = corner[0];
          corner[1][p[0]] += 1;
          corner[2] = corner[1];
          corner[2][p[1]] += 1;
          corner[3] = {i + 1, j + 1, k + 1};
          Cell c;
          for (int a = 0; a < 4; ++a) c[a] = vid(corner[a][0], corner[a][1], corner[a][2]);
          cells.push_back(c);
          for (const auto& face : kTetFaces) {
            int t = tag_of({corner[face[0]], corner[face[1]], corner[face[2]]});
            if (t != 0) tags.emplace(make_facet_key(c[face[0]], c[face[1]], c[face[2]]), t);
          }
        }
  std::vector<int> region(cells.size(), 0);
  return Mesh(Mesh::Trusted{}, std::move(vertices), std::move(cells), std::move(region), std::move(tags));
}

Mesh uniform_refine(const Mesh& mesh) {
  const EdgeTable edges(mesh);
  const Index nv = mesh.num_vertices();
  std::vector<Vec3> vertices = mesh.vertices();
  vertices.reserve(static_cast<std::size_t>(nv) + edges.num_edges());
  for (Index e = 0; e < edges.num_edges(); ++e) {
    auto [a, b] = edges.vertices(e);
    vertices.push_back(0.5 * (mesh.vertex(a) + mesh.vertex(b)));
  }

  std::vector<Cell> cells;
  cells.reserve(8 * static_cast<std::size_t>(mesh.num_cells()));
  std::vector<int> region;
  region.reserve(cells.capacity());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Cell& v = mesh.cell(c);
    std::array<Index, 6> m;
    for (int e = 0; e < 6; ++e) m[e] = nv + edges.cell_edge(c, e);
    // m: 01 02 03 12 13 23
    const Index m01 = m[0], m02 = m[1], m03 = m[2], m12 = m[3], m13 = m[4], m23 = m[5];
    cells.push_back({v[0], m01, m02, m03});
    cells.push_back({m01, v[1], m12, m13});
    cells.push_back({m02, m12, v[2], m23});
    cells.push_back({m03, m13, m23, v[3]});

    auto len = [&](Index a, Index b) { return norm(vertices[a] - vertices[b]); };
    const std::array<double, 3> diag{len(m01, m23), len(m02, m13), len(m03, m12)};
    // Each diagonal with the cycle of the four octahedron vertices around it.
    const std::array<std::array<Index, 6>, 3> choices{{{m01, m23, m02, m03, m13, m12},
                                                       {m02, m13, m01, m03, m23, m12},
                                                       {m03, m12, m01, m02, m23, m13}}};
    // Ties (Kuhn cells have two) go to the diagonal whose parent edge pair has
    // the longer shorter edge; this keeps Kuhn children congruent to the parent.
    auto plen = [&](int i, int j) { return norm(mesh.vertex(v[i]) - mesh.vertex(v[j])); };
    const std::array<double, 3> pair_min{std::min(plen(0, 1), plen(2, 3)), std::min(plen(0, 2), plen(1, 3)),
                                         std::min(plen(0, 3), plen(1, 2))};
    int best = 0;
    for (int d = 1; d < 3; ++d) {
      const double tol = 1e-9 * std::max(diag[d], diag[best]);
      if (diag[d] < diag[best] - tol || (diag[d] <= diag[best] + tol && pair_min[d] > pair_min[best] + tol)) best = d;
    }
    const auto& ch = choices[best];
    for (int r = 0; r < 4; ++r) cells.push_back({ch[0], ch[1], ch[2 + r], ch[2 + (r + 1) % 4]});
    region.insert(region.end(), 8, mesh.cell_region()[c]);
  }
  for (Cell& k : cells) {
    if (signed_volume(vertices[k[0]], vertices[k[1]], vertices[k[2]], vertices[k[3]]) < 0)
      std::swap(k[2], k[3]);
  }

  FacetTagMap tags;
  tags.reserve(4 * mesh.facet_tags().size());
  for (const auto& [key, tag] : mesh.facet_tags()) {
    const Index a = key[0], b = key[1], c = key[2];
    const Index mab = nv + edges.find(a, b);
    const Index mac = nv + edges.find(a, c);
    const Index mbc = nv + edges.find(b, c);
    tags.emplace(make_facet_key(a, mab, mac), tag);
    tags.emplace(make_facet_key(b, mab, mbc), tag);
    tags.emplace(make_facet_key(c, mac, mbc), tag);
    tags.emplace(make_facet_key(mab, mbc, mac), tag);
  }
  return Mesh(Mesh::Trusted{}, std::move(vertices), std::move(cells), std::move(region), std::move(tags));
}

namespace {

// 21 bits per axis interleaved into one key.
std::uint64_t morton_key(const Vec3& x, const Vec3& lo, const Vec3& scale) {
  std::uint64_t key = 0;
  std::array<std::uint64_t, 3> q;
  for (int d = 0; d < 3; ++d) {
    const double t = std::clamp((x[d] - lo[d]) * scale[d], 0.0, 1.0);
    q[d] = static_cast<std::uint64_t>(t * ((1u << 21) - 1));
  }
  for (int b = 20; b >= 0; --b)
    for (int d = 0; d < 3; ++d) key = (key << 1) | ((q[d] >> b) & 1u);
  return key;
}

template <class Key>
std::vector<Index> sorted_order(Index n, Key key) {
  std::vector<std::pair<std::uint64_t, Index>> k(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) k[i] = {key(i), i};
  std::sort(k.begin(), k.end());
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = k[i].second;
  return order;
}

}  // namespace

Mesh reorder_vertices(const Mesh& mesh) {
  const Index nv = mesh.num_vertices();
  if (nv == 0) return mesh;
  Vec3 lo = mesh.vertex(0), hi = lo;
  for (const Vec3& x : mesh.vertices())
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  Vec3 scale{};
  for (int d = 0; d < 3; ++d) scale[d] = hi[d] > lo[d] ? 1.0 / (hi[d] - lo[d]) : 0.0;

  const std::vector<Index> vorder = sorted_order(nv, [&](Index v) { return morton_key(mesh.vertex(v), lo, scale); });
  std::vector<Index> new_id(static_cast<std::size_t>(nv));
  std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
  for (Index k = 0; k < nv; ++k) {
    new_id[vorder[k]] = k;
    vertices[k] = mesh.vertex(vorder[k]);
  }
  const std::vector<Index> corder = sorted_order(mesh.num_cells(), [&](Index c) {
    const Cell& k = mesh.cell(c);
    return morton_key(0.25 * (mesh.vertex(k[0]) + mesh.vertex(k[1]) + mesh.vertex(k[2]) + mesh.vertex(k[3])), lo,
                      scale);
  });
  std::vector<Cell> cells;
  std::vector<int> region;
  cells.reserve(corder.size());
  region.reserve(corder.size());
  for (Index c : corder) {
    const Cell& k = mesh.cell(c);
    cells.push_back({new_id[k[0]], new_id[k[1]], new_id[k[2]], new_id[k[3]]});
    region.push_back(mesh.cell_region()[c]);
  }
  FacetTagMap tags;
  tags.reserve(mesh.facet_tags().size());
  for (const auto& [key, tag] : mesh.facet_tags())
    tags.emplace(make_facet_key(new_id[key[0]], new_id[key[1]], new_id[key[2]]), tag);
  return Mesh(Mesh::Trusted{}, std::move(vertices), std::move(cells), std::move(region), std::move(tags));
}

namespace {

bool cell_has(const Cell& c, Index v) { return c[0] == v || c[1] == v || c[2] == v || c[3] == v; }

}  // namespace

std::vector<FacetKey> boundary_facets(const Mesh& mesh) {
  const VertexCells vc = vertex_cells(mesh);
  std::vector<FacetKey> out;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Cell& k = mesh.cell(c);
    for (const auto& face : kTetFaces) {
      const FacetKey key = make_facet_key(k[face[0]], k[face[1]], k[face[2]]);
      bool shared = false;
      for (Index d : vc.of(key[0])) {
        if (d != c && cell_has(mesh.cell(d), key[1]) && cell_has(mesh.cell(d), key[2])) {
          shared = true;
          break;
        }
      }
      if (!shared) out.push_back(key);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BoundaryFacet> tagged_boundary(const Mesh& mesh) {
  std::vector<BoundaryFacet> out;
  if (mesh.facet_tags().empty()) return out;
  const VertexCells vc = vertex_cells(mesh);
  out.reserve(mesh.facet_tags().size());
  for (const auto& [key, tag] : mesh.facet_tags()) {
    BoundaryFacet bf;
    bf.key = key;
    bf.tag = tag;
    int owners = 0;
    for (Index d : vc.of(key[0])) {
      const Cell& k = mesh.cell(d);
      if (cell_has(k, key[1]) && cell_has(k, key[2])) {
        ++owners;
        bf.cell = d;
        for (int a = 0; a < 4; ++a)
          if (k[a] != key[0] && k[a] != key[1] && k[a] != key[2]) bf.local_face = a;
      }
    }
    if (owners != 1) {
      throw ValidationError("mesh: tagged facet (" + std::to_string(key[0]) + "," +
                            std::to_string(key[1]) + "," + std::to_string(key[2]) + ") has " +
                            std::to_string(owners) + " incident cells; expected a boundary facet");
    }
    out.push_back(bf);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

std::array<double, 6> dihedral_angles(const std::array<Vec3, 4>& x) {
  double diag = 0.0;
  {
    Vec3 lo = x[0], hi = x[0];
    for (const Vec3& p : x)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    diag = norm(hi - lo);
  }
  const double vol = signed_volume(x[0], x[1], x[2], x[3]);
  if (!(std::abs(vol) >= 1e-14 * diag * diag * diag) || diag == 0.0) {
    throw ValidationError("dihedral_angles: degenerate cell");
  }
  std::array<double, 6> out;
  for (int e = 0; e < 6; ++e) {
    const int i = kTetEdges[e][0], j = kTetEdges[e][1];
    int k = -1, l = -1;
    for (int a = 0; a < 4; ++a) {
      if (a == i || a == j) continue;
      (k < 0 ? k : l) = a;
    }
    const Vec3 axis = x[j] - x[i];
    const double a2 = dot(axis, axis);
    // Components of the two opposite vertices orthogonal to the edge.
    Vec3 u = x[k] - x[i];
    Vec3 w = x[l] - x[i];
    u = u - (dot(u, axis) / a2) * axis;
    w = w - (dot(w, axis) / a2) * axis;
    out[e] = std::atan2(norm(cross(u, w)), dot(u, w)) * 180.0 / std::numbers::pi;
  }
  return out;
}

std::array<double, 6> dihedral_angles(const Mesh& mesh, Index cell) {
  if (cell < 0 || cell >= mesh.num_cells()) {
    throw ValidationError("dihedral_angles: cell index " + std::to_string(cell) + " out of range");
  }
  const Cell& k = mesh.cell(cell);
  return dihedral_angles({mesh.vertex(k[0]), mesh.vertex(k[1]), mesh.vertex(k[2]), mesh.vertex(k[3])});
}

QualityReport quality_report(const Mesh& mesh, int n_bins) {
  if (n_bins < 1) throw ValidationError("quality_report: n_bins must be >= 1");
  if (mesh.num_cells() == 0) throw ValidationError("quality_report: empty mesh");
  QualityReport r;
  r.cell_count = mesh.num_cells();
  r.vertex_count = mesh.num_vertices();
  r.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) r.bin_edges[b] = 180.0 * b / n_bins;
  r.counts.assign(static_cast<std::size_t>(n_bins), 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;

  auto bin_of = [&](double a) {
    int b = static_cast<int>(a / 180.0 * n_bins);
    return std::clamp(b, 0, n_bins - 1);
  };

#pragma omp parallel
  {
    std::vector<std::int64_t> local(static_cast<std::size_t>(n_bins), 0);
    double llo = std::numeric_limits<double>::infinity();
    double lhi = -llo;
#pragma omp for schedule(static)
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      for (double a : dihedral_angles(mesh, c)) {
        ++local[bin_of(a)];
        llo = std::min(llo, a);
        lhi = std::max(lhi, a);
      }
    }
#pragma omp critical
    {
      for (int b = 0; b < n_bins; ++b) r.counts[b] += local[b];
      lo = std::min(lo, llo);
      hi = std::max(hi, lhi);
    }
  }
  r.min_angle = lo;
  r.max_angle = hi;
  return r;
}

}  // namespace tfem
