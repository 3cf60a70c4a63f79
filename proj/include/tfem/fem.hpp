#pragma once

// Lagrange P1/P2 function spaces on tetrahedra, quadrature, and the element
// kernels of the thermal and elastic weak forms.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tfem/mesh.hpp"
#include "tfem/sparse.hpp"

namespace tfem {

inline constexpr int kMaxLocalDofs = 30;
using ElementMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxLocalDofs, kMaxLocalDofs>;
using ElementVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxLocalDofs, 1>;
using Matrix3 = Eigen::Matrix3d;

/// Nodes are mesh vertices followed (for degree 2) by edge midpoints.
/// Dof of component c at node a is a * value_size + c.
struct DofMap {
  int degree = 1;
  int value_size = 1;
  int nodes_per_cell = 4;
  Index num_nodes = 0;
  std::vector<Index> cell_nodes;  // num_cells * nodes_per_cell

  Index size() const { return num_nodes * value_size; }
  int dofs_per_cell() const { return nodes_per_cell * value_size; }
  std::span<const Index> nodes(Index cell) const {
    return {cell_nodes.data() + static_cast<std::size_t>(cell) * nodes_per_cell,
            static_cast<std::size_t>(nodes_per_cell)};
  }
  /// Local dofs ordered node-major, components interleaved.
  void cell_dofs(Index cell, std::span<Index> out) const;
};

class FunctionSpace {
 public:
  FunctionSpace(std::shared_ptr<const Mesh> mesh, int degree, int value_size);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return dofmap_.degree; }
  int value_size() const { return dofmap_.value_size; }
  const DofMap& dofmap() const { return dofmap_; }
  Index num_dofs() const { return dofmap_.size(); }
  const std::vector<Vec3>& node_coordinates() const { return node_coords_; }
  /// Nodes of a tagged facet: 3 vertices, then for degree 2 the edges
  /// (v0 v1), (v0 v2), (v1 v2) of the facet's local vertex order.
  std::vector<Index> facet_nodes(const BoundaryFacet& facet) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  DofMap dofmap_;
  std::vector<Vec3> node_coords_;
  std::shared_ptr<const EdgeTable> edges_;
};

DofMap build_dofmap(const Mesh& mesh, int degree, int value_size, const EdgeTable* edges = nullptr);

struct QuadratureRule {
  int degree = 0;
  std::vector<std::array<double, 3>> points;  // reference coordinates
  std::vector<double> weights;                // sum to the reference volume 1/6
};

/// Tetrahedron rules exact to the requested degree (1..4).
const QuadratureRule& quadrature(int degree);

struct FacetQuadratureRule {
  int degree = 0;
  std::vector<std::array<double, 2>> points;  // reference triangle
  std::vector<double> weights;                // sum to 1/2
};

const FacetQuadratureRule& facet_quadrature(int degree);

/// Affine map data of one cell.
struct CellGeometry {
  std::array<Vec3, 4> x;
  double volume = 0.0;
  std::array<Vec3, 4> grad_lambda;  // barycentric gradients

  /// Physical point of reference coordinates (xi, eta, zeta).
  Vec3 map(const std::array<double, 3>& ref) const;
};

CellGeometry cell_geometry(const Mesh& mesh, Index cell);
CellGeometry cell_geometry(const std::array<Vec3, 4>& x);

struct FacetGeometry {
  std::array<Vec3, 3> x;  // in the order of kTetFaces[local_face]
  double area = 0.0;
  Vec3 normal{};          // outward unit normal
  Vec3 map(const std::array<double, 2>& ref) const;
};

FacetGeometry facet_geometry(const Mesh& mesh, const BoundaryFacet& facet);

// Scalar Lagrange basis on the reference tetrahedron in barycentric form.
int basis_size(int degree);
void basis_values(int degree, const std::array<double, 4>& lambda, std::span<double> out);
void basis_gradients(int degree, const std::array<double, 4>& lambda, const std::array<Vec3, 4>& grad_lambda,
                     std::span<Vec3> out);
std::array<double, 4> barycentric(const std::array<double, 3>& ref);
/// Triangle basis on a facet: P1 has 3 functions, P2 adds the edge functions
/// (0 1), (0 2), (1 2).
int facet_basis_size(int degree);
void facet_basis_values(int degree, const std::array<double, 2>& ref, std::span<double> out);

/// Quadrature degree used for an element of degree p with state-dependent
/// coefficients.
inline int stiffness_quadrature_degree(int p) { return 2 * p; }

struct ThermalElement {
  ElementMatrix stiffness;
  ElementMatrix mass;
};

/// Diffusion matrix with kappa and mass matrix with rho*c sampled at the points
/// of `rule`.
ThermalElement element_thermal_matrices(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                        std::span<const double> kappa_q, std::span<const double> rhoc_q);

struct RobinElement {
  ElementMatrix matrix;  // int beta phi_i phi_j ds
  ElementVector vector;  // int beta T_bc phi_i ds
};

RobinElement element_robin_matrices(const FacetGeometry& g, int degree, const FacetQuadratureRule& rule,
                                    std::span<const double> beta_q, std::span<const double> t_bc_q);

struct ElasticModuli {
  double youngs_modulus = 0.0;
  double poisson_ratio = 0.0;

  /// Throws ValidationError unless E > 0 and -1 < nu < 0.5.
  void validate() const;
  double lambda() const;
  double mu() const;
};

/// C : eps for isotropic C.
Matrix3 isotropic_stress(const ElasticModuli& m, const Matrix3& strain);
/// alpha (T - T_ref) I
Matrix3 thermal_strain(double alpha, double temperature, double reference_temperature);

struct ElasticElement {
  ElementMatrix stiffness;
  ElementVector load;  // int (C : eps_T) : grad v
};

ElasticElement element_elastic_system(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                      std::span<const ElasticModuli> moduli_q,
                                      std::span<const Matrix3> thermal_strain_q);

/// int f . v over the cell, vector space of the given degree.
ElementVector element_body_load(const CellGeometry& g, int degree, const QuadratureRule& rule,
                                std::span<const Vec3> f_q);
/// int p n . v over the facet, n the outward unit normal.
ElementVector element_pressure_load(const FacetGeometry& g, int degree, const FacetQuadratureRule& rule,
                                    std::span<const double> p_q);

using ScalarFunction = std::function<double(const Vec3&)>;
using VectorFunction = std::function<Vec3(const Vec3&)>;

Vector interpolate(const FunctionSpace& space, const ScalarFunction& f);
Vector interpolate(const FunctionSpace& space, const VectorFunction& f);

/// Value of component `component` at reference point `ref` of `cell`.
/// Throws ValidationError for points outside the cell.
double evaluate(const FunctionSpace& space, std::span<const double> coeffs, Index cell,
                const std::array<double, 3>& ref, int component = 0);

/// L2 norm of (u_h - exact) over the mesh.
double l2_error(const FunctionSpace& space, std::span<const double> coeffs, const ScalarFunction& exact,
                int quadrature_degree = 4);

/// Zero-valued matrix with the coupling pattern of `dofmap`.
CsrMatrix make_matrix(const DofMap& dofmap);

/// Adds a local matrix; every (row, col) pair must be in the pattern.
void add_local(CsrMatrix& a, std::span<const Index> dofs, const ElementMatrix& local);
void add_local(std::span<double> b, std::span<const Index> dofs, const ElementVector& local);

}  // namespace tfem
