#include "doctest.h"

#include <random>

#include "platoon/numerics.hpp"

using namespace platoon::numerics;

namespace {

Matrix random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = d(rng);
  return symmetrize(m);
}

}  // namespace

TEST_CASE("kron of identity with scalar is a scaled identity") {
  Matrix five(1, 1);
  five << 5;
  const Matrix k = kron(Matrix::Identity(2, 2), five);
  CHECK(k.isApprox(5.0 * Matrix::Identity(2, 2)));
}

TEST_CASE("kron builds the position selector for three followers") {
  Matrix row(1, 3);
  row << 1, 0, 0;
  const Matrix c = kron(Matrix::Identity(3, 3), row);
  REQUIRE(c.rows() == 3);
  REQUIRE(c.cols() == 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 9; ++j) CHECK(c(i, j) == (j == 3 * i ? 1.0 : 0.0));
}

TEST_CASE("kron matches the hand expansion") {
  Matrix a(2, 2), b(2, 2), expected(4, 4);
  a << 1, 2, 3, 4;
  b << 0, 1, 1, 0;
  expected << 0, 1, 0, 2,
              1, 0, 2, 0,
              0, 3, 0, 4,
              3, 0, 4, 0;
  CHECK((kron(a, b) - expected).norm() == 0.0);
}

TEST_CASE("kron is bilinear in its second argument") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = Matrix::Random(2, 3), b = Matrix::Random(3, 2), c = Matrix::Random(3, 2);
    CHECK((kron(a, b + c) - kron(a, b) - kron(a, c)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("eig_sym small examples") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  const Vector ev = eigvals_sym(d);
  CHECK(ev[0] == doctest::Approx(1.0));
  CHECK(ev[1] == doctest::Approx(2.0));
  CHECK(ev[2] == doctest::Approx(3.0));

  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const Vector e2 = eigvals_sym(m);
  CHECK(e2[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e2[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("eig_sym reconstructs random symmetric matrices and agrees with a library solver") {
  std::mt19937_64 rng(42);
  for (int n : {1, 2, 5, 12, 36, 70}) {
    const Matrix m = random_symmetric(n, rng);
    const SymEigResult r = eig_sym(m);
    const Matrix rec = r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose();
    CHECK((m - rec).norm() <= 1e-8 * m.norm());
    CHECK((r.eigenvectors.transpose() * r.eigenvectors - Matrix::Identity(n, n)).norm() <= 1e-8);
    for (int i = 1; i < n; ++i) CHECK(r.eigenvalues[i - 1] <= r.eigenvalues[i]);
    CHECK(std::abs(r.eigenvalues.sum() - m.trace()) <= 1e-9 * std::max(1.0, m.norm()));
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(m);
    CHECK((oracle.eigenvalues() - r.eigenvalues).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, m.norm()));
  }
}

TEST_CASE("eig_sym rejects non-square and non-symmetric input") {
  CHECK_THROWS_AS(eig_sym(Matrix::Zero(2, 3)), std::invalid_argument);
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  CHECK_THROWS_AS(eig_sym(m), std::invalid_argument);
}

TEST_CASE("is_neg_def uses a strict inequality") {
  CHECK(is_neg_def(-Matrix::Identity(3, 3), 0.5));
  CHECK_FALSE(is_neg_def(Matrix::Zero(3, 3), 0.0));
  CHECK_FALSE(is_neg_def(-Matrix::Identity(3, 3), 1.0));
}

TEST_CASE("chol factors and reports the failing pivot") {
  CHECK(chol(Matrix::Identity(4, 4)).isApprox(Matrix::Identity(4, 4)));
  Matrix m(2, 2), l(2, 2);
  m << 4, 2, 2, 3;
  l << 2, 0, 1, std::sqrt(2.0);
  CHECK((chol(m) - l).norm() < 1e-14);

  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  try {
    chol(bad);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 2);
  }
}

TEST_CASE("chol and is_neg_def agree on random symmetric matrices") {
  std::mt19937_64 rng(3);
  int pd = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix m = random_symmetric(4, rng);
    m.diagonal().array() += 1.5;
    bool chol_ok = true;
    try {
      const Matrix l = chol(m);
      CHECK((l * l.transpose() - m).norm() <= 1e-9 * m.norm());
    } catch (const NotPositiveDefinite&) {
      chol_ok = false;
    }
    pd += chol_ok ? 1 : 0;
    CHECK(chol_ok == is_neg_def(-m, 0.0));
  }
  // both branches exercised
  CHECK(pd > 10);
  CHECK(pd < 190);
}

TEST_CASE("solve_linear") {
  const Matrix b = Matrix::Random(3, 2);
  CHECK(solve_linear(Matrix::Identity(3, 3), b).isApprox(b));

  Matrix a(3, 3), inv(3, 3);
  a << 2, 0, 0, 0, 1, 1, 0, 0, 1;
  inv << 0.5, 0, 0, 0, 1, -1, 0, 0, 1;
  const Matrix x = solve_linear(a, Matrix::Identity(3, 3));
  CHECK((x - inv).norm() < 1e-14);

  Matrix sing(3, 3);
  sing << 1, 2, 3, 0, 0, 0, 4, 5, 6;
  CHECK_THROWS_AS(solve_linear(sing, b), SingularMatrix);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix ar = random_symmetric(6, rng) + 4.0 * Matrix::Identity(6, 6);
    const Matrix br = Matrix::Random(6, 1);
    const Matrix xr = solve_linear(ar, br);
    CHECK((ar * xr - br).norm() <= 1e-8 * (ar.norm() * xr.norm() + br.norm()));
  }
}
