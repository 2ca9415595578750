#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "layerspectra/eigsolve.hpp"
#include "oracles.hpp"

using namespace layerspectra;

namespace {

Eigen::VectorXd dense_eigs(const SparseMatrix& K, const SparseMatrix& M) {
  const Eigen::MatrixXd Kd(K), Md(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kd, Md);
  return es.eigenvalues();
}

// Lowest eigenvalue of the radial Q1 problem with weight s^2 on [0, S],
// the node at s = 0 free, Dirichlet at S. Element integrals by 3-point Gauss.
double radial_lowest(double S, int cells) {
  const double h = S / cells;
  const int n = cells;  // nodes 0..cells-1
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
  const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double w[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
  for (int e = 0; e < cells; ++e) {
    for (int q = 0; q < 3; ++q) {
      const double x = 0.5 * (g[q] + 1), s = (e + x) * h, wt = 0.5 * w[q] * h * s * s;
      const double phi[2] = {1 - x, x}, dphi[2] = {-1 / h, 1 / h};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const int I = e + i, J = e + j;
          if (I >= n || J >= n) continue;
          K(I, J) += wt * dphi[i] * dphi[j];
          M(I, J) += wt * phi[i] * phi[j];
        }
    }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  return es.eigenvalues()(0);
}

// Q1 Dirichlet eigenvalues on [-a, a], closed form.
double transverse_lowest(double a, int cells) {
  const double h = 2 * a / cells, t = std::cos(oracle::pi / cells);
  return 6.0 / (h * h) * (1 - t) / (2 + t);
}

}  // namespace

TEST_CASE("lanczos on a path graph reproduces the closed-form spectrum") {
  const int n = 300;
  std::vector<Eigen::Triplet<double>> tk, tm;
  for (int i = 0; i < n; ++i) {
    tk.emplace_back(i, i, 2.0);
    tm.emplace_back(i, i, 1.0);
    if (i + 1 < n) {
      tk.emplace_back(i, i + 1, -1.0);
      tk.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseMatrix K(n, n), M(n, n);
  K.setFromTriplets(tk.begin(), tk.end());
  M.setFromTriplets(tm.begin(), tm.end());
  const auto spec = smallest_eigs(K, M, 5);
  REQUIRE(spec.values.size() == 5);
  for (int k = 1; k <= 5; ++k) {
    const double exact = 2 - 2 * std::cos(k * oracle::pi / (n + 1));
    CHECK(spec.values[k - 1] == doctest::Approx(exact).epsilon(1e-9));
  }
  CHECK(spec.inertia_ok);
}

TEST_CASE("sparse solver matches a dense generalized eigensolve") {
  const auto layer = make_layer(build_meridian(CurvatureProfile::gaussian_bump(0.9, 0.5), 8.0, 0.01), 0.2);
  for (int l : {0, 1}) {
    const auto form = assemble(layer, make_mesh(8.0, 0.2, 41, 9), l);
    const auto dense = dense_eigs(form.K, form.M);
    const auto spec = smallest_eigs(form, 4);
    for (int i = 0; i < 4; ++i) CHECK(spec.values[i] == doctest::Approx(dense(i)).epsilon(1e-9));
    for (double r : spec.residuals) CHECK(r < 1e-7);
  }
}

TEST_CASE("assembled forms are exactly symmetric and positive") {
  const auto layer = make_layer(build_meridian(CurvatureProfile::gaussian_bump(0.6, 1.0), 10.0, 0.01), 0.3);
  const auto form = assemble(layer, make_mesh(10.0, 0.3, 30, 10), 0);
  const Eigen::MatrixXd K(form.K), M(form.M);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dense_eigs(form.M, SparseMatrix(Eigen::MatrixXd::Identity(M.rows(), M.cols()).sparseView()))(0) > 0.0);
}

TEST_CASE("flat strip separates into radial and transverse problems") {
  const double S = 20.0, a = 0.5;
  const int ns = 80, nu = 12;
  const auto layer = make_layer(build_meridian(CurvatureProfile::flat(), S, 0.05), a);
  const auto form = assemble(layer, make_mesh(S, a, ns + 1, nu + 1), 0);
  const auto spec = smallest_eigs(form, 1);
  const double expected = radial_lowest(S, ns) + transverse_lowest(a, nu);
  CHECK(spec.values[0] == doctest::Approx(expected).epsilon(1e-9));
  CHECK(spec.values[0] > layer.threshold());
}

TEST_CASE("solver output is bitwise reproducible") {
  const auto layer = make_layer(build_meridian(CurvatureProfile::gaussian_bump(0.5, 1.0), 10.0, 0.01), 0.3);
  const auto form = assemble(layer, make_mesh(10.0, 0.3, 60, 9), 0);
  const auto a = smallest_eigs(form, 3);
  const auto b = smallest_eigs(form, 3);
  for (int i = 0; i < 3; ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("flat convergence study approaches the threshold from above at second order") {
  const double a = 1.0;
  const auto layer = make_layer(build_meridian(CurvatureProfile::flat(), 40.0, 0.05), a);
  ConvergenceOptions o;
  o.levels = 3;
  o.count = 2;
  o.base_u_cells = 8;
  o.base_h_s = 0.5;
  const auto st = convergence_study(layer, o);
  REQUIRE(st.ladder.size() == 3);
  for (std::size_t i = 0; i + 1 < st.ladder.size(); ++i) CHECK(st.ladder[i].values[0] > st.ladder[i + 1].values[0]);
  CHECK(st.observed_order == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::abs(st.lambda1() - layer.threshold()) <= st.lambda1_uncertainty() + 0.005 * layer.threshold());
  const auto count = bound_state_count(st, a, 2 * st.lambda1_uncertainty());
  CHECK(count.count == 0);
}

TEST_CASE("bound state counting with margins") {
  const double a = 1.0, thr = std::pow(oracle::pi / 2, 2);
  const auto c = bound_state_count({thr - 0.5, thr - 0.01, thr + 0.1}, 0.02, a, 0.04);
  CHECK(c.count == 1);
  CHECK(c.conclusive);
  const auto d = bound_state_count({thr - 0.5}, 0.1, a, 0.04);
  CHECK_FALSE(d.conclusive);
}

TEST_CASE("mesh validation") {
  CHECK_THROWS_AS(make_mesh(10.0, 1.0, 4, 9), DomainError);
  CHECK(make_mesh(10.0, 1.0, 11, 9).h_s() == doctest::Approx(1.0));
}
