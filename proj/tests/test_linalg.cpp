#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/linalg.hpp"

using namespace shrinkcoup;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Gauss-Jordan inverse with partial pivoting, independent of Eigen's solvers.
MatrixXd gj_inverse(MatrixXd A) {
  const Eigen::Index n = A.rows();
  MatrixXd I = MatrixXd::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(A(r, c)) > std::abs(A(piv, c))) piv = r;
    A.row(c).swap(A.row(piv));
    I.row(c).swap(I.row(piv));
    const double d = A(c, c);
    A.row(c) /= d;
    I.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = A(r, c);
      A.row(r) -= f * A.row(c);
      I.row(r) -= f * I.row(c);
    }
  }
  return I;
}

double gj_log_det(MatrixXd A) {
  double ld = 0.0;
  const Eigen::Index n = A.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = c + 1; r < n; ++r) A.row(r) -= A(r, c) / A(c, c) * A.row(c);
    ld += std::log(A(c, c));
  }
  return ld;
}

MatrixXd naive_gram(const MatrixXd& X, const VectorXd& eta, double xi) {
  MatrixXd M = MatrixXd::Identity(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index k = 0; k < X.rows(); ++k)
      for (Eigen::Index j = 0; j < X.cols(); ++j) M(i, k) += X(i, j) * X(k, j) / (xi * eta(j));
  return M;
}

}  // namespace

TEST_CASE("weighted_gram") {
  const MatrixXd I = MatrixXd::Identity(4, 4);
  CHECK((linalg::weighted_gram(I, VectorXd::Ones(4), 1.0) - 2.0 * I).norm() == 0.0);

  srand(3);
  const MatrixXd X = MatrixXd::Random(4, 6);
  const MatrixXd M = linalg::weighted_gram(X, VectorXd::Constant(6, 1e12), 1.0);
  CHECK((M - I).norm() <= 1e-10 * X.squaredNorm());

  const VectorXd eta = VectorXd::Random(6).array().abs() + 0.1;
  CHECK((linalg::weighted_gram(X, eta, 0.7) - naive_gram(X, eta, 0.7)).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixXd G = linalg::weighted_cross(X, eta);
  CHECK((G - G.transpose()).norm() == 0.0);

  // Float instantiation.
  const Eigen::MatrixXf Xf = X.cast<float>();
  CHECK((linalg::weighted_gram(Xf, eta.cast<float>(), 0.7f).cast<double>() - naive_gram(X, eta, 0.7))
            .cwiseAbs()
            .maxCoeff() < 1e-4);
}

TEST_CASE("spd_factor") {
  const auto f = linalg::spd_factor(MatrixXd::Identity(3, 3));
  CHECK(f.log_det() == 0.0);
  const VectorXd v = VectorXd::LinSpaced(3, 1, 3);
  CHECK((f.solve(v) - v).norm() == 0.0);
  CHECK(linalg::spd_factor(MatrixXd(2.0 * MatrixXd::Identity(3, 3))).log_det() ==
        doctest::Approx(3 * std::log(2.0)).epsilon(1e-15));

  srand(4);
  const MatrixXd A = MatrixXd::Random(5, 5);
  const MatrixXd S = A * A.transpose() + MatrixXd::Identity(5, 5);
  const VectorXd b = VectorXd::Random(5);
  const auto fs = linalg::spd_factor(S);
  const VectorXd ref = gj_inverse(S) * b;
  CHECK((fs.solve(b) - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fs.quad_form(b) == doctest::Approx(b.dot(ref)).epsilon(1e-10));
  CHECK(fs.log_det() == doctest::Approx(gj_log_det(S)).epsilon(1e-10));

  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(1, 1) = -1;
  CHECK_THROWS_AS(linalg::spd_factor(bad), FactorizationError);
}

TEST_CASE("marginal_log_lik") {
  MatrixXd X(1, 1);
  X << 1;
  VectorXd y(1), eta(1);
  y << 0;
  eta << 1;
  CHECK(linalg::marginal_log_lik(1.0, eta, X, y, 1.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-14));
  y << 1;
  CHECK(linalg::marginal_log_lik(1.0, eta, X, y, 1.0, 1.0) ==
        doctest::Approx(-0.5 * std::log(2.0) - std::log(1.5)).epsilon(1e-14));

  srand(5);
  const MatrixXd Xr = MatrixXd::Random(4, 7);
  const VectorXd yr = VectorXd::Random(4);
  const VectorXd er = VectorXd::Random(7).array().abs() + 0.2;
  const double xi = 2.3, a0 = 1.5, b0 = 0.7;
  const MatrixXd M = naive_gram(Xr, er, xi);
  const double dense = -0.5 * gj_log_det(M) - 0.5 * (a0 + 4) * std::log(b0 + yr.dot(gj_inverse(M) * yr));
  CHECK(linalg::marginal_log_lik(xi, er, Xr, yr, a0, b0) == doctest::Approx(dense).epsilon(1e-11));

  // Eigen route agrees with the Cholesky route.
  const MatrixXd G = linalg::weighted_cross(Xr, er);
  const auto eg = linalg::sym_eigen(G);
  const VectorXd qty = eg.vectors.transpose() * yr;
  CHECK(linalg::marginal_log_lik_eigen(xi, eg.values, qty, a0, b0) == doctest::Approx(dense).epsilon(1e-11));
}

TEST_CASE("sym_eigen") {
  MatrixXd D(2, 2);
  D << 1, 0, 0, 3;
  const auto e = linalg::sym_eigen(D);
  CHECK(e.values(0) == 3.0);
  CHECK(e.values(1) == 1.0);
  CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(1.0));
  CHECK((linalg::sym_eigen(MatrixXd::Identity(4, 4)).values.array() - 1.0).abs().maxCoeff() < 1e-15);

  srand(6);
  const MatrixXd A = MatrixXd::Random(6, 6);
  const MatrixXd S = A + A.transpose();
  const auto es = linalg::sym_eigen(S);
  for (int i = 0; i + 1 < 6; ++i) CHECK(es.values(i) >= es.values(i + 1));
  CHECK((es.vectors * es.values.asDiagonal() * es.vectors.transpose() - S).norm() < 1e-12);
  CHECK((es.vectors.transpose() * es.vectors - MatrixXd::Identity(6, 6)).norm() < 1e-12);
}
