#pragma once

// Small oracles shared by the tests: dense copies, model matrices, seeded
// random data.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "tfem/sparse.hpp"

namespace testing {

using tfem::CsrMatrix;
using tfem::Index;
using tfem::Vector;

inline Eigen::MatrixXd dense(const CsrMatrix& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.rows, a.cols);
  for (Index i = 0; i < a.rows; ++i)
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) d(i, a.col[k]) += a.val[k];
  return d;
}

inline CsrMatrix from_dense(const Eigen::MatrixXd& d) {
  std::vector<tfem::Triplet> t;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
  return tfem::csr_from_triplets(static_cast<Index>(d.rows()), static_cast<Index>(d.cols()), std::move(t));
}

/// tridiag(-1, 2, -1)
inline CsrMatrix poisson_1d(Index n) {
  std::vector<tfem::Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  CsrMatrix a = tfem::csr_from_triplets(n, n, std::move(t));
  a.symmetric_structure = true;
  return a;
}

/// 5-point Laplacian on an m x m grid.
inline CsrMatrix poisson_2d(Index m) {
  std::vector<tfem::Triplet> t;
  auto id = [m](Index i, Index j) { return i * m + j; };
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      t.push_back({id(i, j), id(i, j), 4.0});
      if (i > 0) t.push_back({id(i, j), id(i - 1, j), -1.0});
      if (i + 1 < m) t.push_back({id(i, j), id(i + 1, j), -1.0});
      if (j > 0) t.push_back({id(i, j), id(i, j - 1), -1.0});
      if (j + 1 < m) t.push_back({id(i, j), id(i, j + 1), -1.0});
    }
  CsrMatrix a = tfem::csr_from_triplets(m * m, m * m, std::move(t));
  a.symmetric_structure = true;
  return a;
}

inline Vector random_vector(Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(static_cast<std::size_t>(n));
  for (double& x : v) x = u(gen);
  return v;
}

/// Q diag(spectrum) Q^T with a seeded random orthogonal Q.
inline Eigen::MatrixXd random_spd(Index n, unsigned seed, double cond = 100.0) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = g(gen);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd s(n);
  for (Index i = 0; i < n; ++i) s(i) = 1.0 + (cond - 1.0) * i / std::max<Index>(n - 1, 1);
  return q * s.asDiagonal() * q.transpose();
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Vector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace testing
