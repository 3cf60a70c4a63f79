#include "tfem/krylov.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace tfem {

void IdentityPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  std::copy(r.begin(), r.end(), z.begin());
}

JacobiPreconditioner::JacobiPreconditioner(const CsrMatrix& a) : inv_diag_(a.diagonal()) {
  for (double& d : inv_diag_) {
    if (d == 0.0) throw SolverError("jacobi: zero diagonal entry");
    d = 1.0 / d;
  }
}

void JacobiPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  for (std::size_t i = 0; i < inv_diag_.size(); ++i) z[i] = inv_diag_[i] * r[i];
}

namespace {

void check_system(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                  const Preconditioner* p) {
  if (a.rows != a.cols || b.size() != static_cast<std::size_t>(a.rows) || x.size() != b.size()) {
    throw ValidationError("krylov: dimension mismatch");
  }
  if (p != nullptr && p->size() != a.rows) throw ValidationError("krylov: preconditioner size mismatch");
}

void apply_or_copy(const Preconditioner* p, std::span<const double> r, std::span<double> z) {
  if (p != nullptr) {
    p->apply(r, z);
  } else {
    std::copy(r.begin(), r.end(), z.begin());
  }
}

}  // namespace

SolveReport cg(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
               const Preconditioner* p, const SolveOptions& options) {
  check_system(a, b, x, p);
  const std::size_t n = b.size();
  SolveReport report;
  Vector r(n), z(n), q(n), dir(n);
  residual(a, x, b, r);
  apply_or_copy(p, r, z);
  double rz = dot(r, z);
  const bool precond_norm = options.norm == ResidualNorm::preconditioned;
  const double norm0 = precond_norm ? norm2(z) : norm2(r);
  report.relative_residual = norm0 == 0.0 ? 0.0 : 1.0;
  if (options.record_history) report.history.push_back(report.relative_residual);
  if (norm0 == 0.0) {
    report.converged = true;
    return report;
  }
  if (!(rz > 0.0)) {
    report.breakdown_reason = "preconditioner is not positive definite (r.z = " + std::to_string(rz) + ")";
    return report;
  }
  dir = z;
  for (int k = 1; k <= options.max_iterations; ++k) {
    spmv(a, dir, q);
    const double pq = dot(dir, q);
    if (!(pq > 0.0) || std::abs(pq) < 1e-30) {
      report.breakdown_reason = "operator is indefinite (p.Ap = " + std::to_string(pq) + ")";
      return report;
    }
    const double alpha = rz / pq;
    axpy(alpha, dir, x);
    axpy(-alpha, q, r);
    apply_or_copy(p, r, z);
    const double rz_new = dot(r, z);
    const double res = precond_norm ? norm2(z) : norm2(r);
    report.iterations = k;
    report.relative_residual = res / norm0;
    if (options.record_history) report.history.push_back(report.relative_residual);
    if (!std::isfinite(report.relative_residual)) {
      report.breakdown_reason = "non-finite residual";
      return report;
    }
    if (report.relative_residual <= options.rtol) {
      report.converged = true;
      return report;
    }
    if (!(rz_new > 0.0)) {
      report.breakdown_reason =
          "preconditioner is not positive definite (r.z = " + std::to_string(rz_new) + ")";
      return report;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) dir[i] = z[i] + beta * dir[i];
  }
  return report;
}

SolveReport bicgstab(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                     const Preconditioner* p, const SolveOptions& options) {
  check_system(a, b, x, p);
  const std::size_t n = b.size();
  SolveReport report;
  Vector r(n), r_hat(n), v(n, 0.0), dir(n, 0.0), p_hat(n), s(n), s_hat(n), t(n);
  residual(a, x, b, r);
  r_hat = r;
  const double norm0 = norm2(r);
  report.relative_residual = norm0 == 0.0 ? 0.0 : 1.0;
  if (options.record_history) report.history.push_back(report.relative_residual);
  if (norm0 == 0.0) {
    report.converged = true;
    return report;
  }
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  for (int k = 1; k <= options.max_iterations; ++k) {
    const double rho_new = dot(r_hat, r);
    if (std::abs(rho_new) < 1e-30 * norm0 * norm0) {
      report.breakdown_reason = "rho vanished";
      return report;
    }
    if (k == 1) {
      dir = r;
    } else {
      const double beta = (rho_new / rho) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) dir[i] = r[i] + beta * (dir[i] - omega * v[i]);
    }
    rho = rho_new;
    apply_or_copy(p, dir, p_hat);
    spmv(a, p_hat, v);
    const double rv = dot(r_hat, v);
    if (rv == 0.0) {
      report.breakdown_reason = "r_hat.v vanished";
      return report;
    }
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    report.iterations = k;
    const double s_norm = norm2(s);
    if (s_norm / norm0 <= options.rtol) {
      axpy(alpha, p_hat, x);
      report.relative_residual = s_norm / norm0;
      if (options.record_history) report.history.push_back(report.relative_residual);
      report.converged = true;
      return report;
    }
    apply_or_copy(p, s, s_hat);
    spmv(a, s_hat, t);
    const double tt = dot(t, t);
    omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p_hat[i] + omega * s_hat[i];
      r[i] = s[i] - omega * t[i];
    }
    report.relative_residual = norm2(r) / norm0;
    if (options.record_history) report.history.push_back(report.relative_residual);
    if (!std::isfinite(report.relative_residual)) {
      report.breakdown_reason = "non-finite residual";
      return report;
    }
    if (report.relative_residual <= options.rtol) {
      report.converged = true;
      return report;
    }
    if (omega == 0.0) {
      report.breakdown_reason = "omega vanished";
      return report;
    }
  }
  return report;
}

void jacobi_smoother(const CsrMatrix& a, std::span<double> x, std::span<const double> b, int sweeps,
                     double omega) {
  const Vector d = a.diagonal();
  for (double v : d)
    if (v == 0.0) throw SolverError("jacobi smoother: zero diagonal entry");
  Vector r(x.size());
  for (int s = 0; s < sweeps; ++s) {
    residual(a, x, b, r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += omega * r[i] / d[i];
  }
}

namespace {

// One sweep over rows [lo, hi). Couplings to columns outside the block read
// from `frozen` when given.
void gs_block(const CsrMatrix& a, std::span<double> x, std::span<const double> b, Index lo, Index hi,
              bool forward, const double* frozen) {
  auto relax = [&](Index i) {
    double s = b[i];
    double diag = 0.0;
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const Index j = a.col[k];
      if (j == i) {
        diag = a.val[k];
      } else {
        const double xj = (frozen != nullptr && (j < lo || j >= hi)) ? frozen[j] : x[j];
        s -= a.val[k] * xj;
      }
    }
    if (diag == 0.0) throw SolverError("gauss-seidel: zero diagonal in row " + std::to_string(i));
    x[i] = s / diag;
  };
  if (forward) {
    for (Index i = lo; i < hi; ++i) relax(i);
  } else {
    for (Index i = hi - 1; i >= lo; --i) relax(i);
  }
}

}  // namespace

void gauss_seidel_smoother(const CsrMatrix& a, std::span<double> x, std::span<const double> b,
                           int sweeps, SweepDirection direction, int blocks) {
  blocks = std::clamp(blocks, 1, std::max<Index>(1, a.rows));
  std::vector<bool> passes;
  for (int s = 0; s < sweeps; ++s) {
    if (direction != SweepDirection::backward) passes.push_back(true);
    if (direction != SweepDirection::forward) passes.push_back(false);
  }
  if (blocks == 1) {
    for (bool fwd : passes) gs_block(a, x, b, 0, a.rows, fwd, nullptr);
    return;
  }
  Vector frozen(x.size());
  for (bool fwd : passes) {
    std::copy(x.begin(), x.end(), frozen.begin());
#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < blocks; ++blk) {
      const Index lo = static_cast<Index>(static_cast<std::int64_t>(a.rows) * blk / blocks);
      const Index hi = static_cast<Index>(static_cast<std::int64_t>(a.rows) * (blk + 1) / blocks);
      gs_block(a, x, b, lo, hi, fwd, frozen.data());
    }
  }
}

void chebyshev_smoother(const CsrMatrix& a, std::span<const double> inv_diag, double lambda_max,
                        const ChebyshevSpec& spec, std::span<double> x, std::span<const double> b) {
  if (!(lambda_max > 0.0)) throw SolverError("chebyshev: nonpositive eigenvalue estimate");
  if (spec.degree < 0 || !(spec.lower_ratio > 1.0)) throw ValidationError("chebyshev: invalid spec");
  const std::size_t n = x.size();
  Vector r(n);
  residual(a, x, b, r);
  if (spec.degree == 0) {
    for (std::size_t i = 0; i < n; ++i) x[i] += inv_diag[i] * r[i] / lambda_max;
    return;
  }
  const double upper = lambda_max;
  const double lower = lambda_max / spec.lower_ratio;
  const double theta = 0.5 * (upper + lower);
  const double delta = 0.5 * (upper - lower);
  const double sigma = theta / delta;
  double rho = 1.0 / sigma;
  Vector d(n), ad(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = inv_diag[i] * r[i] / theta;
  for (int k = 1; k <= spec.degree; ++k) {
    axpy(1.0, d, x);
    if (k == spec.degree) break;
    spmv(a, d, ad);
    axpy(-1.0, ad, r);
    const double rho_new = 1.0 / (2.0 * sigma - rho);
    for (std::size_t i = 0; i < n; ++i) d[i] = rho_new * rho * d[i] + 2.0 * rho_new / delta * inv_diag[i] * r[i];
    rho = rho_new;
  }
}

double estimate_lambda_max(const CsrMatrix& a, std::span<const double> inv_diag, int iterations) {
  const std::size_t n = static_cast<std::size_t>(a.rows);
  if (n == 0) return 0.0;
  // Symmetric form S A S with S = sqrt(D^{-1}) has the spectrum of D^{-1}A.
  Vector scale(n, 1.0);
  if (!inv_diag.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(inv_diag[i] > 0.0)) throw SolverError("estimate_lambda_max: diagonal must be positive");
      scale[i] = std::sqrt(inv_diag[i]);
    }
  }
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n), w(n), tmp(n), v_prev(n, 0.0);
  for (double& e : v) e = dist(rng);
  const double v0 = norm2(v);
  for (double& e : v) e /= v0;
  std::vector<double> alphas, betas;
  double beta = 0.0;
  const int steps = std::min<int>(iterations, static_cast<int>(n));
  for (int k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = scale[i] * v[i];
    spmv(a, tmp, w);
    for (std::size_t i = 0; i < n; ++i) w[i] = scale[i] * w[i] - beta * v_prev[i];
    const double alpha = dot(w, v);
    axpy(-alpha, v, w);
    alphas.push_back(alpha);
    beta = norm2(w);
    if (beta <= 1e-12 * std::abs(alpha) || k + 1 == steps) break;
    betas.push_back(beta);
    v_prev = v;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / beta;
  }
  const Eigen::Index m = static_cast<Eigen::Index>(alphas.size());
  Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alphas.data(), m);
  Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(betas.data(), m - 1))
                              : Eigen::VectorXd();
  double lambda = diag(0);
  if (m > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    lambda = es.eigenvalues().maxCoeff();
  }
  return kLambdaSafety * lambda;
}

void apply_dirichlet(CsrMatrix& a, std::span<double> b, std::span<const Index> dofs,
                     std::span<const double> values) {
  if (dofs.size() != values.size()) throw ValidationError("apply_dirichlet: size mismatch");
  if (a.rows != a.cols || b.size() != static_cast<std::size_t>(a.rows)) {
    throw ValidationError("apply_dirichlet: dimension mismatch");
  }
  std::vector<char> fixed(static_cast<std::size_t>(a.rows), 0);
  Vector g(static_cast<std::size_t>(a.rows), 0.0);
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    const Index d = dofs[k];
    if (d < 0 || d >= a.rows) throw ValidationError("apply_dirichlet: dof " + std::to_string(d) + " out of range");
    if (fixed[d] && g[d] != values[k]) {
      throw ValidationError("apply_dirichlet: dof " + std::to_string(d) + " constrained to conflicting values");
    }
    fixed[d] = 1;
    g[d] = values[k];
  }
  for (Index i = 0; i < a.rows; ++i) {
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const Index j = a.col[k];
      if (fixed[i]) {
        a.val[k] = (i == j) ? 1.0 : 0.0;
      } else if (fixed[j]) {
        b[i] -= a.val[k] * g[j];
        a.val[k] = 0.0;
      }
    }
    if (fixed[i]) {
      if (a.find(i, i) < 0) throw ValidationError("apply_dirichlet: constrained row has no diagonal entry");
      b[i] = g[i];
    }
  }
}

}  // namespace tfem
