#pragma once

// Krylov solvers, relaxation smoothers, spectral estimation and Dirichlet
// elimination on CsrMatrix.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfem/sparse.hpp"

namespace tfem {

/// Action z = P^{-1} r of a fixed linear preconditioner.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Index size() const = 0;
  virtual void apply(std::span<const double> r, std::span<double> z) const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  explicit IdentityPreconditioner(Index n) : n_(n) {}
  Index size() const override { return n_; }
  void apply(std::span<const double> r, std::span<double> z) const override;

 private:
  Index n_;
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const CsrMatrix& a);
  Index size() const override { return static_cast<Index>(inv_diag_.size()); }
  void apply(std::span<const double> r, std::span<double> z) const override;

 private:
  Vector inv_diag_;
};

enum class ResidualNorm { preconditioned, unpreconditioned };

struct SolveOptions {
  double rtol = 1e-6;
  int max_iterations = 1000;
  /// cg only; bicgstab always monitors the true residual.
  ResidualNorm norm = ResidualNorm::preconditioned;
  bool record_history = false;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 1.0;
  bool converged = false;
  std::optional<std::string> breakdown_reason;
  std::vector<double> history;
};

/// Preconditioned conjugate gradients. x holds the initial guess on entry.
/// Converged when the monitored residual norm relative to its initial value
/// is at most rtol. Nonpositive curvature p.Ap or a nonpositive r.z stops the
/// iteration with a breakdown reason.
SolveReport cg(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
               const Preconditioner* p, const SolveOptions& options);

/// Right-preconditioned BiCGSTAB on the true residual.
SolveReport bicgstab(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                     const Preconditioner* p, const SolveOptions& options);

enum class SweepDirection { forward, backward, symmetric };

/// Damped Jacobi, x += omega D^{-1}(b - Ax) per sweep.
void jacobi_smoother(const CsrMatrix& a, std::span<double> x, std::span<const double> b, int sweeps,
                     double omega = 1.0);

/// Gauss-Seidel sweeps. With blocks > 1 each contiguous row block is swept
/// independently using the previous iterate for couplings outside the block
/// (hybrid Gauss-Seidel); blocks are processed in parallel when threads are
/// enabled.
void gauss_seidel_smoother(const CsrMatrix& a, std::span<double> x, std::span<const double> b,
                           int sweeps, SweepDirection direction = SweepDirection::forward,
                           int blocks = 1);

struct ChebyshevSpec {
  int degree = 2;
  /// Smoothing interval is [lambda_max / lower_ratio, lambda_max].
  double lower_ratio = 30.0;
};

/// Chebyshev polynomial smoothing on D^{-1}A. For degree k >= 1 the error is
/// multiplied by T_k((theta - D^{-1}A)/delta) / T_k(theta/delta). Degree 0 is a
/// single Richardson step x += D^{-1}(b - Ax) / lambda_max.
void chebyshev_smoother(const CsrMatrix& a, std::span<const double> inv_diag, double lambda_max,
                        const ChebyshevSpec& spec, std::span<double> x, std::span<const double> b);

/// Lanczos estimate of the largest eigenvalue of D^{-1}A (or A when inv_diag is
/// empty), multiplied by kLambdaSafety.
inline constexpr double kLambdaSafety = 1.1;
double estimate_lambda_max(const CsrMatrix& a, std::span<const double> inv_diag, int iterations);

/// Symmetric elimination of prescribed dofs: constrained rows and columns are
/// zeroed, the diagonal set to one and the column lift moved into b. The
/// sparsity pattern is left unchanged.
void apply_dirichlet(CsrMatrix& a, std::span<double> b, std::span<const Index> dofs,
                     std::span<const double> values);

}  // namespace tfem
