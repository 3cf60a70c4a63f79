#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "tfem/krylov.hpp"

using namespace tfem;
using testing::dense;
using testing::from_dense;

namespace {

Eigen::VectorXd to_eigen(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

double energy_norm(const CsrMatrix& a, const Vector& e) { return std::sqrt(dot(e, spmv(a, e))); }

// 1D convection-diffusion with upwinding, nonsymmetric.
CsrMatrix convection_diffusion(Index n, double peclet) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0 + peclet});
    if (i > 0) t.push_back({i, i - 1, -1.0 - peclet});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return csr_from_triplets(n, n, std::move(t));
}

// Chebyshev polynomial of the first kind.
double cheb(int k, double x) {
  if (std::abs(x) <= 1.0) return std::cos(k * std::acos(x));
  const double s = x > 0 ? 1.0 : (k % 2 == 0 ? 1.0 : -1.0);
  return s * std::cosh(k * std::acosh(std::abs(x)));
}

}  // namespace

TEST_CASE("csr construction and validation") {
  const CsrMatrix a = csr_from_triplets(3, 4, {{2, 1, 1.0}, {0, 3, 2.0}, {0, 0, 3.0}, {2, 1, 4.0}, {0, 3, -2.0}});
  CHECK_NOTHROW(a.validate());
  CHECK(a.rows == 3);
  CHECK(a.cols == 4);
  CHECK(a.at(2, 1) == 5.0);
  CHECK(a.at(0, 0) == 3.0);
  CHECK(a.at(1, 2) == 0.0);
  CHECK(a.find(1, 2) < 0);
  for (Index i = 0; i < a.rows; ++i)
    for (auto k = a.row_ptr[i] + 1; k < a.row_ptr[i + 1]; ++k) CHECK(a.col[k - 1] < a.col[k]);
  CHECK_THROWS_AS((void)csr_from_triplets(2, 2, {{2, 0, 1.0}}), ValidationError);
  CsrMatrix bad = a;
  bad.col[0] = 9;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("sparse kernels agree with dense algebra") {
  const Eigen::MatrixXd ad = testing::random_spd(30, 1) + Eigen::MatrixXd::Identity(30, 30);
  Eigen::MatrixXd pd = Eigen::MatrixXd::Zero(30, 12);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    pd(i, i % 12) = 1.0;
    if (i % 3 == 0) pd(i, (i + 5) % 12) = u(rng);
  }
  const CsrMatrix a = from_dense(ad), p = from_dense(pd);
  const Vector x = testing::random_vector(30, 3);
  CHECK((to_eigen(spmv(a, x)) - ad * to_eigen(x)).norm() <= 1e-12 * ad.norm());
  CHECK((dense(transpose(p)) - pd.transpose()).norm() == 0.0);
  CHECK((dense(multiply(a, p)) - ad * pd).norm() <= 1e-12 * ad.norm());
  const CsrMatrix g = galerkin_product(a, p);
  CHECK((dense(g) - pd.transpose() * ad * pd).norm() <= 1e-12 * ad.norm() * pd.squaredNorm());
  CHECK_NOTHROW(g.validate());
  CHECK(frobenius_norm(a) == doctest::Approx(ad.norm()));
  CHECK(inf_norm(a) == doctest::Approx(ad.cwiseAbs().rowwise().sum().maxCoeff()));
  Vector r(30);
  const Vector b = testing::random_vector(30, 4);
  residual(a, x, b, r);
  CHECK((to_eigen(r) - (to_eigen(b) - ad * to_eigen(x))).norm() <= 1e-12 * ad.norm());
  Vector y = b;
  axpy(2.0, x, y);
  CHECK((to_eigen(y) - to_eigen(b) - 2.0 * to_eigen(x)).norm() <= 1e-15);
  CHECK(norm2(x) == doctest::Approx(to_eigen(x).norm()));
  CHECK_THROWS_AS((void)multiply(p, p), ValidationError);
}

TEST_CASE("matrix market round trip") {
  const CsrMatrix a = testing::poisson_2d(6);
  std::stringstream ss;
  ss.precision(17);
  write_matrix_market(a, ss);
  const CsrMatrix b = read_matrix_market(ss);
  CHECK(b.rows == a.rows);
  CHECK(b.row_ptr == a.row_ptr);
  CHECK(b.col == a.col);
  CHECK(b.val == a.val);
  std::istringstream bad("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  CHECK_THROWS((void)read_matrix_market(bad));
}

TEST_CASE("conjugate gradients") {
  SUBCASE("terminates in at most n steps on a small SPD system") {
    const CsrMatrix a = from_dense(testing::random_spd(20, 7, 50.0));
    const Vector b = testing::random_vector(20, 8);
    Vector x(20, 0.0);
    const SolveReport rep = cg(a, b, x, nullptr, {.rtol = 1e-10, .max_iterations = 100});
    CHECK(rep.converged);
    CHECK(rep.iterations <= 25);
    const Eigen::VectorXd exact = testing::dense(a).ldlt().solve(to_eigen(b));
    CHECK((to_eigen(x) - exact).norm() <= 1e-7 * exact.norm());
  }
  SUBCASE("Poisson iteration counts follow the spectrum") {
    // Unpreconditioned CG on tridiag(-1,2,-1) of size n needs about n/2 steps
    // for a random right-hand side at tight tolerance; the iteration bound is n.
    for (Index n : {50, 100}) {
      const CsrMatrix a = testing::poisson_1d(n);
      const Vector b = testing::random_vector(n, 1);
      Vector x(n, 0.0);
      const SolveReport rep = cg(a, b, x, nullptr, {.rtol = 1e-10, .max_iterations = 2 * n});
      CHECK(rep.converged);
      CHECK(rep.iterations <= n);
    }
  }
  SUBCASE("unpreconditioned monitoring bounds the true residual") {
    const CsrMatrix a = testing::poisson_2d(20);
    const Vector b = testing::random_vector(a.rows, 2);
    Vector x(a.rows, 0.0);
    const JacobiPreconditioner jac(a);
    const SolveReport rep = cg(a, b, x, &jac,
                               {.rtol = 1e-8, .max_iterations = 500, .norm = ResidualNorm::unpreconditioned,
                                .record_history = true});
    REQUIRE(rep.converged);
    Vector r(a.rows);
    residual(a, x, b, r);
    CHECK(norm2(r) <= 1e-8 * norm2(b) * (1.0 + 1e-10));
    CHECK(rep.history.size() == static_cast<std::size_t>(rep.iterations + 1));
    CHECK(rep.history.front() == doctest::Approx(1.0));
    CHECK(rep.history.back() == doctest::Approx(rep.relative_residual));
  }
  SUBCASE("Jacobi is exact on a diagonal system") {
    const CsrMatrix a = csr_from_triplets(3, 3, {{0, 0, 2.0}, {1, 1, 5.0}, {2, 2, 0.5}});
    const JacobiPreconditioner jac(a);
    Vector x(3, 0.0);
    const SolveReport rep = cg(a, {{1.0, 1.0, 1.0}}, x, &jac, {.rtol = 1e-12});
    CHECK(rep.iterations == 1);
    CHECK(x[2] == doctest::Approx(2.0));
  }
  SUBCASE("zero right-hand side returns immediately") {
    const CsrMatrix a = testing::poisson_1d(5);
    Vector x(5, 0.0);
    const SolveReport rep = cg(a, Vector(5, 0.0), x, nullptr, {});
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
  }
  SUBCASE("indefinite matrix reports breakdown") {
    const CsrMatrix a = csr_from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}});
    Vector x(2, 0.0);
    const SolveReport rep = cg(a, {{1.0, 1.0}}, x, nullptr, {.rtol = 1e-10});
    CHECK_FALSE(rep.converged);
    REQUIRE(rep.breakdown_reason.has_value());
    CHECK_FALSE(rep.breakdown_reason->empty());
  }
  SUBCASE("size mismatch") {
    const CsrMatrix a = testing::poisson_1d(5);
    Vector x(4, 0.0);
    CHECK_THROWS_AS((void)cg(a, Vector(5, 1.0), x, nullptr, {}), ValidationError);
    const IdentityPreconditioner id(3);
    Vector y(5, 0.0);
    CHECK_THROWS_AS((void)cg(a, Vector(5, 1.0), y, &id, {}), ValidationError);
  }
}

TEST_CASE("BiCGSTAB on a nonsymmetric system") {
  const CsrMatrix a = convection_diffusion(200, 0.8);
  const Vector b = testing::random_vector(200, 9);
  for (int use_jacobi = 0; use_jacobi < 2; ++use_jacobi) {
    Vector x(200, 0.0);
    const JacobiPreconditioner jac(a);
    const SolveReport rep = bicgstab(a, b, x, use_jacobi ? &jac : nullptr, {.rtol = 1e-10, .max_iterations = 1000});
    CHECK(rep.converged);
    Vector r(200);
    residual(a, x, b, r);
    CHECK(norm2(r) <= 1.01e-10 * norm2(b));
    CHECK(rep.relative_residual <= 1e-10);
  }
}

TEST_CASE("relaxation smoothers") {
  SUBCASE("Jacobi with omega 1 is exact for diagonal matrices") {
    const CsrMatrix a = csr_from_triplets(3, 3, {{0, 0, 2.0}, {1, 1, 4.0}, {2, 2, 8.0}});
    Vector x(3, 7.0);
    jacobi_smoother(a, x, {{2.0, 4.0, 8.0}}, 1, 1.0);
    for (double v : x) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("forward Gauss-Seidel solves lower triangular systems in one sweep") {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(4, 4);
    l << 2, 0, 0, 0, 1, 3, 0, 0, -1, 2, 4, 0, 0.5, 0, 1, 1;
    const Vector b{1.0, 2.0, 3.0, 4.0};
    Vector x(4, 0.0);
    gauss_seidel_smoother(from_dense(l), x, b, 1, SweepDirection::forward);
    CHECK((l * to_eigen(x) - to_eigen(b)).norm() <= 1e-14);
    Vector y(4, 0.0);
    gauss_seidel_smoother(from_dense(l.transpose()), y, b, 1, SweepDirection::backward);
    CHECK((l.transpose() * to_eigen(y) - to_eigen(b)).norm() <= 1e-14);
  }
  SUBCASE("symmetric Gauss-Seidel reduces the energy error") {
    const CsrMatrix a = testing::poisson_2d(16);
    const Vector exact = testing::random_vector(a.rows, 11);
    const Vector b = spmv(a, exact);
    for (int blocks : {1, 4}) {
      Vector x(a.rows, 0.0);
      double prev = energy_norm(a, exact);
      for (int s = 0; s < 5; ++s) {
        gauss_seidel_smoother(a, x, b, 1, SweepDirection::symmetric, blocks);
        Vector e = x;
        for (Index i = 0; i < a.rows; ++i) e[i] -= exact[i];
        const double now = energy_norm(a, e);
        CHECK(now < prev);
        prev = now;
      }
    }
  }
  SUBCASE("zero diagonal is an error") {
    const CsrMatrix a = csr_from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
    Vector x(2, 0.0);
    CHECK_THROWS_AS(gauss_seidel_smoother(a, x, {{1.0, 1.0}}, 1), SolverError);
    CHECK_THROWS_AS(jacobi_smoother(a, x, {{1.0, 1.0}}, 1), SolverError);
  }
}

TEST_CASE("Chebyshev smoother follows the polynomial oracle") {
  // D^{-1}A for tridiag(-1,2,-1)/2 has eigenvalues 1 - cos(k pi/(n+1)) with
  // sine eigenvectors.
  const Index n = 40;
  CsrMatrix a = testing::poisson_1d(n);
  for (double& v : a.val) v *= 0.5;
  const Vector inv_diag(n, 1.0);
  const double lmax = 2.0;
  const Vector exact = testing::random_vector(n, 3);
  const Vector b = spmv(a, exact);
  for (int degree : {1, 2, 3}) {
    const ChebyshevSpec spec{degree, 30.0};
    const double lmin = lmax / spec.lower_ratio;
    const double theta = 0.5 * (lmax + lmin), delta = 0.5 * (lmax - lmin);
    for (int k : {1, 7, 20, 39}) {
      const double lam = 1.0 - std::cos(k * std::numbers::pi / (n + 1));
      Vector x = exact;
      for (Index i = 0; i < n; ++i) x[i] += std::sin((i + 1) * k * std::numbers::pi / (n + 1));
      chebyshev_smoother(a, inv_diag, lmax, spec, x, b);
      const double factor = cheb(degree, (theta - lam) / delta) / cheb(degree, theta / delta);
      for (Index i = 0; i < n; ++i)
        CHECK(x[i] - exact[i] == doctest::Approx(factor * std::sin((i + 1) * k * std::numbers::pi / (n + 1))).epsilon(1e-9).scale(1.0));
    }
  }
  SUBCASE("degree zero is one Richardson step") {
    Vector x(n, 0.0);
    chebyshev_smoother(a, inv_diag, lmax, {0, 30.0}, x, b);
    for (Index i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(b[i] / lmax));
  }
  SUBCASE("invalid arguments") {
    Vector x(n, 0.0);
    CHECK_THROWS_AS(chebyshev_smoother(a, inv_diag, 0.0, {}, x, b), SolverError);
    CHECK_THROWS_AS(chebyshev_smoother(a, inv_diag, 2.0, {2, 0.5}, x, b), ValidationError);
  }
}

TEST_CASE("largest eigenvalue estimate") {
  const Index n = 60;
  const CsrMatrix a = testing::poisson_1d(n);
  const Vector inv_diag(n, 0.5);
  const double exact = 1.0 + std::cos(std::numbers::pi / (n + 1));  // of D^{-1}A
  const double est = estimate_lambda_max(a, inv_diag, n);
  CHECK(est == doctest::Approx(kLambdaSafety * exact).epsilon(1e-8));
  const double est_a = estimate_lambda_max(a, {}, n);
  CHECK(est_a == doctest::Approx(kLambdaSafety * 2.0 * exact).epsilon(1e-8));
  // Few iterations underestimate but the safety factor keeps the result near.
  const double rough = estimate_lambda_max(a, inv_diag, 10);
  CHECK(rough <= kLambdaSafety * exact * (1 + 1e-12));
  CHECK(rough >= 0.95 * exact);
}

TEST_CASE("Dirichlet elimination") {
  const CsrMatrix a0 = testing::poisson_1d(8);
  CsrMatrix a = a0;
  Vector b(8, 1.0);
  const std::vector<Index> dofs{0, 7, 3};
  const std::vector<double> vals{1.0, -2.0, 0.5};
  apply_dirichlet(a, b, dofs, vals);
  const Eigen::MatrixXd ad = dense(a);
  CHECK((ad - ad.transpose()).norm() == 0.0);
  CHECK(a.row_ptr == a0.row_ptr);
  Eigen::VectorXd x = ad.ldlt().solve(to_eigen(b));
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[7] == doctest::Approx(-2.0));
  CHECK(x[3] == doctest::Approx(0.5));
  // Interior equations of the original operator hold.
  const Eigen::VectorXd r = dense(a0) * x;
  for (Index i : {1, 2, 4, 5, 6}) CHECK(r[i] == doctest::Approx(1.0));
  Vector bb(8, 0.0);
  CsrMatrix c = a0;
  CHECK_THROWS_AS(apply_dirichlet(c, bb, std::vector<Index>{2, 2}, std::vector<double>{1.0, 3.0}), ValidationError);
  CHECK_THROWS_AS(apply_dirichlet(c, bb, std::vector<Index>{9}, std::vector<double>{1.0}), ValidationError);
}
