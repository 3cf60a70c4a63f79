#include "tfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tfem {

// ---------------------------------------------------------------------------
// Dof maps and spaces

void DofMap::cell_dofs(Index cell, std::span<Index> out) const {
  const auto nd = nodes(cell);
  for (int a = 0; a < nodes_per_cell; ++a)
    for (int c = 0; c < value_size; ++c) out[a * value_size + c] = nd[a] * value_size + c;
}

DofMap build_dofmap(const Mesh& mesh, int degree, int value_size, const EdgeTable* edges) {
  if (degree != 1 && degree != 2) throw ValidationError("dofmap: degree must be 1 or 2");
  if (value_size != 1 && value_size != 3) throw ValidationError("dofmap: value size must be 1 or 3");
  DofMap dm;
  dm.degree = degree;
  dm.value_size = value_size;
  dm.nodes_per_cell = degree == 1 ? 4 : 10;
  const Index nv = mesh.num_vertices();
  std::unique_ptr<EdgeTable> owned;
  if (degree == 2 && edges == nullptr) {
    owned = std::make_unique<EdgeTable>(mesh);
    edges = owned.get();
  }
  dm.num_nodes = nv + (degree == 2 ? edges->num_edges() : 0);
  dm.cell_nodes.resize(static_cast<std::size_t>(mesh.num_cells()) * dm.nodes_per_cell);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    Index* out = dm.cell_nodes.data() + static_cast<std::size_t>(c) * dm.nodes_per_cell;
    for (int a = 0; a < 4; ++a) out[a] = mesh.cell(c)[a];
    if (degree == 2)
      for (int e = 0; e < 6; ++e) out[4 + e] = nv + edges->cell_edge(c, e);
  }
  return dm;
}

FunctionSpace::FunctionSpace(std::shared_ptr<const Mesh> mesh, int degree, int value_size)
    : mesh_(std::move(mesh)) {
  if (!mesh_) throw ValidationError("function space: null mesh");
  if (degree == 2) edges_ = std::make_shared<EdgeTable>(*mesh_);
  dofmap_ = build_dofmap(*mesh_, degree, value_size, edges_.get());
  node_coords_ = mesh_->vertices();
  if (degree == 2) {
    node_coords_.reserve(static_cast<std::size_t>(dofmap_.num_nodes));
    for (Index e = 0; e < edges_->num_edges(); ++e) {
      auto [a, b] = edges_->vertices(e);
      node_coords_.push_back(0.5 * (mesh_->vertex(a) + mesh_->vertex(b)));
    }
  }
}

std::vector<Index> FunctionSpace::facet_nodes(const BoundaryFacet& facet) const {
  const Cell& k = mesh_->cell(facet.cell);
  const auto& lf = kTetFaces[facet.local_face];
  std::vector<Index> nodes{k[lf[0]], k[lf[1]], k[lf[2]]};
  if (degree() == 2) {
    const Index nv = mesh_->num_vertices();
    nodes.push_back(nv + edges_->find(nodes[0], nodes[1]));
    nodes.push_back(nv + edges_->find(nodes[0], nodes[2]));
    nodes.push_back(nv + edges_->find(nodes[1], nodes[2]));
  }
  return nodes;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

QuadratureRule make_tet_rule(int degree) {
  QuadratureRule r;
  r.degree = degree;
  auto add_sym4 = [&](double a, double w) {
    const double b = 1.0 - 3.0 * a;
    r.points.push_back({a, a, a});
    r.points.push_back({b, a, a});
    r.points.push_back({a, b, a});
    r.points.push_back({a, a, b});
    r.weights.insert(r.weights.end(), 4, w);
  };
  switch (degree) {
    case 1:
      r.points.push_back({0.25, 0.25, 0.25});
      r.weights.push_back(1.0 / 6.0);
      break;
    case 2:
      add_sym4(0.1381966011250105151795, 1.0 / 24.0);
      break;
    case 3:
    case 4: {
      // 14-point rule, exact to degree 5 with positive weights.
      add_sym4(0.0927352503108912264, 0.0122488405193936582);
      add_sym4(0.3108859192633006097, 0.0187813209530026417);
      const double a = 0.0455037041256496494;
      const double b = 0.5 - a;
      const double w = 0.0070910034628469110;
      const std::array<std::array<double, 3>, 6> pts{
          {{a, a, b}, {a, b, a}, {b, a, a}, {a, b, b}, {b, a, b}, {b, b, a}}};
      for (const auto& p : pts) {
        r.points.push_back(p);
        r.weights.push_back(w);
      }
      break;
    }
    default:
      throw ValidationError("quadrature: unsupported degree " + std::to_string(degree));
  }
  return r;
}

FacetQuadratureRule make_tri_rule(int degree) {
  FacetQuadratureRule r;
  r.degree = degree;
  auto add_sym3 = [&](double a, double w) {
    const double b = 1.0 - 2.0 * a;
    r.points.push_back({a, a});
    r.points.push_back({b, a});
    r.points.push_back({a, b});
    r.weights.insert(r.weights.end(), 3, w);
  };
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.5);
      break;
    case 2:
      add_sym3(1.0 / 6.0, 1.0 / 6.0);
      break;
    case 3:
    case 4:
      add_sym3(0.44594849091596488632, 0.5 * 0.22338158967801146570);
      add_sym3(0.09157621350977074346, 0.5 * 0.10995174365532186764);
      break;
    default:
      throw ValidationError("facet quadrature: unsupported degree " + std::to_string(degree));
  }
  return r;
}

}  // namespace

const QuadratureRule& quadrature(int degree) {
  static const std::array<QuadratureRule, 4> rules{make_tet_rule(1), make_tet_rule(2), make_tet_rule(3),
                                                   make_tet_rule(4)};
  if (degree < 1 || degree > 4) throw ValidationError("quadrature: unsupported degree " + std::to_string(degree));
  return rules[degree - 1];
}

const FacetQuadratureRule& facet_quadrature(int degree) {
  static const std::array<FacetQuadratureRule, 4> rules{make_tri_rule(1), make_tri_rule(2), make_tri_rule(3),
                                                        make_tri_rule(4)};
  if (degree < 1 || degree > 4) {
    throw ValidationError("facet quadrature: unsupported degree " + std::to_string(degree));
  }
  return rules[degree - 1];
}

// ---------------------------------------------------------------------------
// Geometry

Vec3 CellGeometry::map(const std::array<double, 3>& ref) const {
  return x[0] + ref[0] * (x[1] - x[0]) + ref[1] * (x[2] - x[0]) + ref[2] * (x[3] - x[0]);
}

CellGeometry cell_geometry(const std::array<Vec3, 4>& x) {
  CellGeometry g;
  g.x = x;
  Matrix3 j;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) j(r, c) = x[c + 1][r] - x[0][r];
  const double det = j.determinant();
  g.volume = std::abs(det) / 6.0;
  double diag2 = 0.0;
  for (int c = 0; c < 3; ++c) diag2 = std::max(diag2, j.col(c).squaredNorm());
  if (!(std::abs(det) > 1e-14 * diag2 * std::sqrt(diag2))) throw ValidationError("element: degenerate Jacobian");
  const Matrix3 jinv = j.inverse();
  Vec3 sum{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    g.grad_lambda[k + 1] = {jinv(k, 0), jinv(k, 1), jinv(k, 2)};
    sum = sum + g.grad_lambda[k + 1];
  }
  g.grad_lambda[0] = -1.0 * sum;
  return g;
}

CellGeometry cell_geometry(const Mesh& mesh, Index cell) {
  const Cell& k = mesh.cell(cell);
  return cell_geometry({mesh.vertex(k[0]), mesh.vertex(k[1]), mesh.vertex(k[2]), mesh.vertex(k[3])});
}

Vec3 FacetGeometry::map(const std::array<double, 2>& ref) const {
  return x[0] + ref[0] * (x[1] - x[0]) + ref[1] * (x[2] - x[0]);
}

FacetGeometry facet_geometry(const Mesh& mesh, const BoundaryFacet& facet) {
  if (facet.cell < 0 || facet.local_face < 0) throw ValidationError("facet is not on the boundary");
  const Cell& k = mesh.cell(facet.cell);
  const auto& lf = kTetFaces[facet.local_face];
  FacetGeometry g;
  for (int i = 0; i < 3; ++i) g.x[i] = mesh.vertex(k[lf[i]]);
  Vec3 n = cross(g.x[1] - g.x[0], g.x[2] - g.x[0]);
  const double len = norm(n);
  if (len == 0.0) throw ValidationError("facet: degenerate triangle");
  g.area = 0.5 * len;
  n = (1.0 / len) * n;
  const Vec3& opposite = mesh.vertex(k[facet.local_face]);
  if (dot(n, opposite - g.x[0]) > 0.0) n = -1.0 * n;
  g.normal = n;
  return g;
}

// ---------------------------------------------------------------------------
// Basis

int basis_size(int degree) { return degree == 1 ? 4 : 10; }

std::array<double, 4> barycentric(const std::array<double, 3>& ref) {
  return {1.0 - ref[0] - ref[1] - ref[2], ref[0], ref[1], ref[2]};
}

void basis_values(int degree, const std::array<double, 4>& l, std::span<double> out) {
  if (degree == 1) {
    for (int i = 0; i < 4; ++i) out[i] = l[i];
    return;
  }
  for (int i = 0; i < 4; ++i) out[i] = l[i] * (2.0 * l[i] - 1.0);
  for (int e = 0; e < 6; ++e) out[4 + e] = 4.0 * l[kTetEdges[e][0]] * l[kTetEdges[e][1]];
}

void basis_gradients(int degree, const std::array<double, 4>& l, const std::array<Vec3, 4>& gl,
                     std::span<Vec3> out) {
  if (degree == 1) {
    for (int i = 0; i < 4; ++i) out[i] = gl[i];
    return;
  }
  for (int i = 0; i < 4; ++i) out[i] = (4.0 * l[i] - 1.0) * gl[i];
  for (int e = 0; e < 6; ++e) {
    const int a = kTetEdges[e][0], b = kTetEdges[e][1];
    out[4 + e] = 4.0 * (l[b] * gl[a] + l[a] * gl[b]);
  }
}

int facet_basis_size(int degree) { return degree == 1 ? 3 : 6; }

void facet_basis_values(int degree, const std::array<double, 2>& ref, std::span<double> out) {
  const std::array<double, 3> l{1.0 - ref[0] - ref[1], ref[0], ref[1]};
  if (degree == 1) {
    for (int i = 0; i < 3; ++i) out[i] = l[i];
    return;
  }
  for (int i = 0; i < 3; ++i) out[i] = l[i] * (2.0 * l[i] - 1.0);
  out[3] = 4.0 * l[0] * l[1];
  out[4] = 4.0 * l[0] * l[2];
  out[5] = 4.0 * l[1] * l[2];
}

// ---------------------------------------------------------------------------
// Element kernels

ThermalElement element_thermal_matrices(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                        std::span<const double> kappa_q, std::span<const double> rhoc_q) {
  const int nb = basis_size(degree);
  if (kappa_q.size() != rule.weights.size() || rhoc_q.size() != rule.weights.size()) {
    throw ValidationError("thermal element: coefficient samples do not match the quadrature rule");
  }
  ThermalElement e{ElementMatrix::Zero(nb, nb), ElementMatrix::Zero(nb, nb)};
  std::array<double, 10> phi{};
  std::array<Vec3, 10> grad{};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    const auto l = barycentric(rule.points[q]);
    basis_values(degree, l, phi);
    basis_gradients(degree, l, g.grad_lambda, grad);
    const double w = rule.weights[q] * 6.0 * g.volume;
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        e.stiffness(i, j) += w * kappa_q[q] * dot(grad[i], grad[j]);
        e.mass(i, j) += w * rhoc_q[q] * phi[i] * phi[j];
      }
  }
  return e;
}

RobinElement element_robin_matrices(const FacetGeometry& g, int degree, const FacetQuadratureRule& rule,
                                    std::span<const double> beta_q, std::span<const double> t_bc_q) {
  const int nb = facet_basis_size(degree);
  if (beta_q.size() != rule.weights.size() || t_bc_q.size() != rule.weights.size()) {
    throw ValidationError("robin element: coefficient samples do not match the quadrature rule");
  }
  RobinElement e{ElementMatrix::Zero(nb, nb), ElementVector::Zero(nb)};
  std::array<double, 6> phi{};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    facet_basis_values(degree, rule.points[q], phi);
    const double w = rule.weights[q] * 2.0 * g.area;
    for (int i = 0; i < nb; ++i) {
      e.vector(i) += w * beta_q[q] * t_bc_q[q] * phi[i];
      for (int j = 0; j < nb; ++j) e.matrix(i, j) += w * beta_q[q] * phi[i] * phi[j];
    }
  }
  return e;
}

void ElasticModuli::validate() const {
  if (!(youngs_modulus > 0.0)) throw ValidationError("elastic moduli: Young's modulus must be positive");
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) {
    throw ValidationError("elastic moduli: Poisson ratio must lie in (-1, 0.5)");
  }
}

double ElasticModuli::lambda() const {
  const double nu = poisson_ratio;
  return youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
}

double ElasticModuli::mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }

Matrix3 isotropic_stress(const ElasticModuli& m, const Matrix3& strain) {
  return m.lambda() * strain.trace() * Matrix3::Identity() + 2.0 * m.mu() * strain;
}

Matrix3 thermal_strain(double alpha, double temperature, double reference_temperature) {
  return alpha * (temperature - reference_temperature) * Matrix3::Identity();
}

ElasticElement element_elastic_system(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                      std::span<const ElasticModuli> moduli_q,
                                      std::span<const Matrix3> thermal_strain_q) {
  const int nb = basis_size(degree);
  const int nd = 3 * nb;
  if (moduli_q.size() != rule.weights.size() || thermal_strain_q.size() != rule.weights.size()) {
    throw ValidationError("elastic element: coefficient samples do not match the quadrature rule");
  }
  ElasticElement e{ElementMatrix::Zero(nd, nd), ElementVector::Zero(nd)};
  std::array<Vec3, 10> grad{};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    moduli_q[q].validate();
    const double lam = moduli_q[q].lambda();
    const double mu = moduli_q[q].mu();
    const auto l = barycentric(rule.points[q]);
    basis_gradients(degree, l, g.grad_lambda, grad);
    const double w = rule.weights[q] * 6.0 * g.volume;
    const Matrix3 sigma_t = isotropic_stress(moduli_q[q], thermal_strain_q[q]);
    for (int a = 0; a < nb; ++a) {
      for (int i = 0; i < 3; ++i) {
        double f = 0.0;
        for (int j = 0; j < 3; ++j) f += sigma_t(i, j) * grad[a][j];
        e.load(3 * a + i) += w * f;
      }
      for (int b = 0; b < nb; ++b) {
        const double gg = dot(grad[a], grad[b]);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            double v = lam * grad[a][i] * grad[b][j] + mu * grad[a][j] * grad[b][i];
            if (i == j) v += mu * gg;
            e.stiffness(3 * a + i, 3 * b + j) += w * v;
          }
      }
    }
  }
  return e;
}

ElementVector element_body_load(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                std::span<const Vec3> f_q) {
  const int nb = basis_size(degree);
  if (f_q.size() != rule.weights.size()) throw ValidationError("body load: samples do not match the rule");
  ElementVector f = ElementVector::Zero(3 * nb);
  std::array<double, 10> phi{};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    basis_values(degree, barycentric(rule.points[q]), phi);
    const double w = rule.weights[q] * 6.0 * g.volume;
    for (int a = 0; a < nb; ++a)
      for (int i = 0; i < 3; ++i) f(3 * a + i) += w * f_q[q][i] * phi[a];
  }
  return f;
}

ElementVector element_pressure_load(const FacetGeometry& g, int degree, const FacetQuadratureRule& rule,
                                    std::span<const double> p_q) {
  const int nb = facet_basis_size(degree);
  if (p_q.size() != rule.weights.size()) throw ValidationError("pressure load: samples do not match the rule");
  ElementVector f = ElementVector::Zero(3 * nb);
  std::array<double, 6> phi{};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    facet_basis_values(degree, rule.points[q], phi);
    const double w = rule.weights[q] * 2.0 * g.area;
    for (int a = 0; a < nb; ++a)
      for (int i = 0; i < 3; ++i) f(3 * a + i) += w * p_q[q] * g.normal[i] * phi[a];
  }
  return f;
}

// ---------------------------------------------------------------------------
// Interpolation and evaluation

Vector interpolate(const FunctionSpace& space, const ScalarFunction& f) {
  if (space.value_size() != 1) throw ValidationError("interpolate: scalar function on a vector space");
  const auto& xs = space.node_coordinates();
  Vector out(xs.size());
  for (std::size_t a = 0; a < xs.size(); ++a) out[a] = f(xs[a]);
  return out;
}

Vector interpolate(const FunctionSpace& space, const VectorFunction& f) {
  if (space.value_size() != 3) throw ValidationError("interpolate: vector function on a scalar space");
  const auto& xs = space.node_coordinates();
  Vector out(3 * xs.size());
  for (std::size_t a = 0; a < xs.size(); ++a) {
    const Vec3 v = f(xs[a]);
    for (int c = 0; c < 3; ++c) out[3 * a + c] = v[c];
  }
  return out;
}

double evaluate(const FunctionSpace& space, std::span<const double> coeffs, Index cell,
                const std::array<double, 3>& ref, int component) {
  if (cell < 0 || cell >= space.mesh().num_cells()) throw ValidationError("evaluate: cell out of range");
  if (coeffs.size() != static_cast<std::size_t>(space.num_dofs())) {
    throw ValidationError("evaluate: coefficient vector size mismatch");
  }
  const auto l = barycentric(ref);
  for (double v : l)
    if (v < -1e-12) throw ValidationError("evaluate: point outside the cell");
  std::array<double, 10> phi{};
  basis_values(space.degree(), l, phi);
  const auto nodes = space.dofmap().nodes(cell);
  const int vs = space.value_size();
  double s = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) s += coeffs[nodes[a] * vs + component] * phi[a];
  return s;
}

double l2_error(const FunctionSpace& space, std::span<const double> coeffs, const ScalarFunction& exact,
                int quadrature_degree) {
  const QuadratureRule& rule = quadrature(quadrature_degree);
  const Mesh& mesh = space.mesh();
  const int p = space.degree();
  std::array<double, 10> phi{};
  double sum = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(mesh, c);
    const auto nodes = space.dofmap().nodes(c);
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      basis_values(p, barycentric(rule.points[q]), phi);
      double uh = 0.0;
      for (std::size_t a = 0; a < nodes.size(); ++a) uh += coeffs[nodes[a]] * phi[a];
      const double d = uh - exact(g.map(rule.points[q]));
      sum += rule.weights[q] * 6.0 * g.volume * d * d;
    }
  }
  return std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// Global assembly

CsrMatrix make_matrix(const DofMap& dm) {
  const Index nn = dm.num_nodes;
  const Index nc = static_cast<Index>(dm.cell_nodes.size() / dm.nodes_per_cell);
  // node -> cells
  std::vector<std::int64_t> off(static_cast<std::size_t>(nn) + 1, 0);
  for (Index v : dm.cell_nodes) ++off[v + 1];
  for (Index i = 0; i < nn; ++i) off[i + 1] += off[i];
  std::vector<Index> inc(dm.cell_nodes.size());
  {
    std::vector<std::int64_t> fill(off.begin(), off.end() - 1);
    for (Index c = 0; c < nc; ++c)
      for (Index v : dm.nodes(c)) inc[fill[v]++] = c;
  }
  const int vs = dm.value_size;
  CsrMatrix a;
  a.rows = a.cols = dm.size();
  a.block_size = vs;
  a.symmetric_structure = true;
  a.row_ptr.assign(static_cast<std::size_t>(a.rows) + 1, 0);
  std::vector<Index> nbr;
  std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(nn));
  std::int64_t total = 0;
  for (Index v = 0; v < nn; ++v) {
    nbr.clear();
    for (std::int64_t k = off[v]; k < off[v + 1]; ++k)
      for (Index w : dm.nodes(inc[k])) nbr.push_back(w);
    std::sort(nbr.begin(), nbr.end());
    nbr.erase(std::unique(nbr.begin(), nbr.end()), nbr.end());
    adjacency[v] = nbr;
    total += static_cast<std::int64_t>(nbr.size()) * vs * vs;
  }
  a.col.reserve(static_cast<std::size_t>(total));
  for (Index v = 0; v < nn; ++v) {
    for (int c = 0; c < vs; ++c) {
      for (Index w : adjacency[v])
        for (int d = 0; d < vs; ++d) a.col.push_back(w * vs + d);
      a.row_ptr[v * vs + c + 1] = static_cast<std::int64_t>(a.col.size());
    }
    std::vector<Index>().swap(adjacency[v]);
  }
  a.val.assign(a.col.size(), 0.0);
  return a;
}

void add_local(CsrMatrix& a, std::span<const Index> dofs, const ElementMatrix& local) {
  const std::size_t n = dofs.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Index row = dofs[i];
    const Index* first = a.col.data() + a.row_ptr[row];
    const Index* last = a.col.data() + a.row_ptr[row + 1];
    for (std::size_t j = 0; j < n; ++j) {
      const Index* it = std::lower_bound(first, last, dofs[j]);
      if (it == last || *it != dofs[j]) throw ValidationError("assembly: entry outside the sparsity pattern");
      a.val[it - a.col.data()] += local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
}

void add_local(std::span<double> b, std::span<const Index> dofs, const ElementVector& local) {
  for (std::size_t i = 0; i < dofs.size(); ++i) b[dofs[i]] += local(static_cast<Eigen::Index>(i));
}

}  // namespace tfem
