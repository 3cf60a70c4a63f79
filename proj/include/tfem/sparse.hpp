#pragma once

// Compressed sparse row storage and the kernels shared by the solvers and the
// multigrid setup.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tfem/common.hpp"

namespace tfem {

using Vector = std::vector<double>;

struct CsrMatrix {
  Index rows = 0;
  Index cols = 0;
  int block_size = 1;
  // Set by builders whose pattern is symmetric; validate() verifies it.
  bool symmetric_structure = false;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<Index> col;
  std::vector<double> val;

  std::int64_t nnz() const { return static_cast<std::int64_t>(col.size()); }

  std::span<const Index> row_cols(Index i) const {
    return {col.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }
  std::span<const double> row_vals(Index i) const {
    return {val.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }

  /// Position of (i, j) in col/val, or -1 when the entry is not stored.
  std::int64_t find(Index i, Index j) const;
  /// Stored value of (i, j), zero when absent.
  double at(Index i, Index j) const;
  Vector diagonal() const;

  /// Checks sizes, sorted unique columns and, when flagged, structural symmetry.
  void validate() const;

  /// Zeroes every stored value, keeping the pattern.
  void zero_values();
};

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Duplicates are summed.
CsrMatrix csr_from_triplets(Index rows, Index cols, std::vector<Triplet> entries);

CsrMatrix identity_matrix(Index n);

/// y = A x. Row-parallel when threads are enabled; each row is summed in a
/// fixed order so results do not depend on the thread count.
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
Vector spmv(const CsrMatrix& a, std::span<const double> x);

/// r = b - A x
void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> r);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

CsrMatrix transpose(const CsrMatrix& a);
/// Sparse product by row merging with a dense accumulator.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);
/// P^T A P
CsrMatrix galerkin_product(const CsrMatrix& a, const CsrMatrix& p);

/// Frobenius norm of the stored values.
double frobenius_norm(const CsrMatrix& a);
/// Max absolute row sum.
double inf_norm(const CsrMatrix& a);

// Matrix Market coordinate format, real general or symmetric.
void write_matrix_market(const CsrMatrix& a, std::ostream& out);
void write_matrix_market(const CsrMatrix& a, const std::string& path);
CsrMatrix read_matrix_market(std::istream& in);
CsrMatrix read_matrix_market(const std::string& path);

}  // namespace tfem
