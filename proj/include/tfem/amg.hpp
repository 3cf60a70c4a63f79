#pragma once

// Algebraic multigrid: classical Ruge-Stueben coarsening with direct
// interpolation for scalar operators, smoothed aggregation with a supplied
// near-nullspace for block (elastic) operators. A built hierarchy applies one
// V(1,1)-cycle as a Preconditioner.

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tfem/krylov.hpp"

namespace tfem {

/// k vectors of length n stored column by column.
struct NearNullspace {
  Index n = 0;
  int k = 0;
  std::vector<double> data;

  std::span<const double> vector(int j) const {
    return {data.data() + static_cast<std::size_t>(j) * n, static_cast<std::size_t>(n)};
  }
  std::span<double> vector(int j) {
    return {data.data() + static_cast<std::size_t>(j) * n, static_cast<std::size_t>(n)};
  }
};

/// Modified Gram-Schmidt, applied twice.
void orthonormalize(NearNullspace& ns);

/// The constant vector, normalized.
NearNullspace constant_nullspace(Index n);

enum class RigidModes { full, translations_only };

/// Three translations and (for RigidModes::full) three infinitesimal rotations
/// about the centroid of `node_coords`, for dofs numbered node * 3 + component.
/// Rotation about z at x is (-(y - yc), x - xc, 0).
NearNullspace rigid_body_modes(std::span<const Vec3> node_coords, int block_size,
                               RigidModes modes = RigidModes::full, bool orthonormal = true);

enum class SmootherType { gauss_seidel, chebyshev, jacobi };

struct SmootherSpec {
  SmootherType type = SmootherType::gauss_seidel;
  int sweeps = 1;
  /// Gauss-Seidel: each pre/post sweep is forward+backward when true,
  /// otherwise forward before and backward after the coarse correction.
  bool symmetric = true;
  ChebyshevSpec chebyshev;
  int eig_iterations = 30;
  /// Multiplies the (already safety-scaled) eigenvalue estimate.
  double eig_factor = 1.0;
  double jacobi_omega = 2.0 / 3.0;
};

struct AmgOptions {
  double strength_threshold = 0.25;
  Index coarse_size = 200;
  int max_levels = 25;
  /// Coarsest levels larger than this are rejected rather than factored densely.
  Index max_dense = 6000;
  /// Classical only: second Ruge-Stueben pass on levels below this index.
  int second_pass_levels = 1;
  /// Classical only: interpolation weights below this fraction of the row's
  /// largest weight are dropped and the row rescaled to its original sum.
  double truncation = 0.0;
  /// Classical only: keep at most this many interpolation weights per row
  /// (largest magnitudes, rescaled to the original row sum); 0 keeps all.
  int max_interp_elements = 0;
  SmootherSpec smoother;
};

AmgOptions classical_defaults();
/// Smoothed-aggregation defaults; the strength threshold depends on the
/// element degree.
AmgOptions smoothed_aggregation_defaults(int degree);

struct AmgLevelInfo {
  Index size = 0;
  std::int64_t nnz = 0;
  int block_size = 1;
};

class AmgHierarchy final : public Preconditioner {
 public:
  struct Level {
    CsrMatrix a;
    CsrMatrix p;  // to the next coarser level; empty on the coarsest
    CsrMatrix r;  // transpose of p
    Vector inv_diag;
    double lambda_max = 0.0;
  };

  Index size() const override { return levels_.empty() ? 0 : levels_.front().a.rows; }
  void apply(std::span<const double> r, std::span<double> z) const override;

  std::size_t num_levels() const { return levels_.size(); }
  const Level& level(std::size_t l) const { return levels_[l]; }
  std::vector<AmgLevelInfo> level_info() const;
  /// Sum of level nnz over fine nnz.
  double operator_complexity() const;
  /// Sum of level sizes over fine size.
  double grid_complexity() const;
  /// One "key=value" line per level followed by a summary line.
  std::string diagnostics() const;

  const AmgOptions& options() const { return options_; }
  const std::string& coarse_factorization() const { return coarse_kind_; }

 private:
  friend AmgHierarchy build_classical(const CsrMatrix&, const AmgOptions&);
  friend AmgHierarchy build_smoothed_aggregation(const CsrMatrix&, const NearNullspace&, const AmgOptions&);

  void finalize();
  void smooth(const Level& lv, std::span<double> x, std::span<const double> b, bool pre) const;
  void cycle(std::size_t l, std::span<const double> r, std::span<double> z) const;

  AmgOptions options_;
  std::vector<Level> levels_;
  std::string coarse_kind_;
  Eigen::LLT<Eigen::MatrixXd> coarse_llt_;
  Eigen::LDLT<Eigen::MatrixXd> coarse_ldlt_;
  Eigen::MatrixXd coarse_pinv_;
};

/// Requires block size 1. Throws SolverError on coarsening stagnation (a level
/// keeping more than 90% of its points).
AmgHierarchy build_classical(const CsrMatrix& a, const AmgOptions& options = classical_defaults());

AmgHierarchy build_smoothed_aggregation(const CsrMatrix& a, const NearNullspace& nullspace,
                                        const AmgOptions& options = smoothed_aggregation_defaults(1));

/// z = one V-cycle applied to r.
Vector vcycle(const AmgHierarchy& h, std::span<const double> r);

// Building blocks, exposed for testing.
struct CoarseSplitting {
  std::vector<char> is_coarse;
  std::vector<Index> coarse_index;  // -1 for F points
  Index num_coarse = 0;
};

/// Strong dependencies: j in S_i iff |a_ij| >= theta * max_{k != i} |a_ik|.
CsrMatrix classical_strength(const CsrMatrix& a, double theta);
/// First pass by maximal measure; the optional second pass makes every pair
/// of strongly connected F points share a strong C point.
CoarseSplitting ruge_stueben_splitting(const CsrMatrix& strength, bool second_pass = true);
CsrMatrix direct_interpolation(const CsrMatrix& a, const CsrMatrix& strength, const CoarseSplitting& split);

/// Aggregate id per node (-1 for nodes left unaggregated).
std::vector<Index> aggregate_nodes(const CsrMatrix& a, int block_size, double theta, Index* num_aggregates);

}  // namespace tfem
