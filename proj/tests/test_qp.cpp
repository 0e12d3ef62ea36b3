#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "platoon/convex/qp.hpp"

using namespace platoon::convex;
using platoon::testing::active_set_oracle;
using platoon::testing::random_feasible_qp;

namespace {

QpProblem inequality_qp(const Matrix& h, const Vector& f, const Matrix& a, const Vector& b) {
  QpProblem p;
  p.hessian = h;
  p.linear = f;
  p.a_in = a;
  p.b_in = b;
  return p;
}

}  // namespace

TEST_CASE("unconstrained quadratic") {
  QpProblem p;
  p.hessian = Matrix::Constant(1, 1, 2.0);
  p.linear = Vector::Constant(1, -2.0);
  p.constant = 1.0;  // (x-1)^2
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("active lower bound") {
  QpProblem p;
  p.hessian = Matrix::Constant(1, 1, 2.0);
  p.linear = Vector::Zero(1);
  p.lower = Vector::Constant(1, 2.0);
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(s.kkt_residual <= 1e-6);
}

TEST_CASE("same bound written as an inequality row") {
  const QpProblem p = inequality_qp(Matrix::Constant(1, 1, 2.0), Vector::Zero(1), Matrix::Constant(1, 1, -1.0),
                                    Vector::Constant(1, -2.0));
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s.y_in[0] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("equality constraint") {
  QpProblem p;
  p.hessian = Matrix::Identity(2, 2);
  p.linear = Vector::Zero(2);
  p.a_eq = Matrix::Ones(1, 2);
  p.b_eq = Vector::Constant(1, 1.0);
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.x[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("contradictory bounds are reported infeasible") {
  const QpProblem p = inequality_qp(Matrix::Identity(1, 1), Vector::Zero(1), (Matrix(2, 1) << 1, -1).finished(),
                                    (Vector(2) << 1, -2).finished());  // x <= 1, x >= 2
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::Infeasible);
}

TEST_CASE("validation rejects an indefinite Hessian and bad dimensions") {
  QpProblem p;
  p.hessian = (Matrix(2, 2) << 1, 0, 0, -1).finished();
  p.linear = Vector::Zero(2);
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);
  p.hessian = Matrix::Identity(2, 2);
  p.linear = Vector::Zero(3);
  CHECK_THROWS_AS(solve_qp(p), std::invalid_argument);
}

TEST_CASE("random QPs match the active-set enumeration oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5;
    const int m = 3;
    const auto q = random_feasible_qp(n, m, rng);
    double oracle_value = 0.0;
    const auto ox = active_set_oracle(q.h, q.f, q.a, q.b, &oracle_value);
    REQUIRE(ox.has_value());
    const QpSolution s = solve_qp(inequality_qp(q.h, q.f, q.a, q.b));
    REQUIRE(s.status == QpStatus::Optimal);
    CHECK(std::abs(s.objective - oracle_value) <= 1e-6 * std::max(1.0, std::abs(oracle_value)));
    CHECK((s.x - *ox).norm() <= 1e-5 * std::max(1.0, ox->norm()));
    // feasibility and complementary slackness
    CHECK((q.a * s.x - q.b).maxCoeff() <= 1e-6);
    for (int i = 0; i < m; ++i) CHECK(std::abs(s.y_in[i] * (q.a.row(i).dot(s.x) - q.b[i])) <= 1e-6);
    CHECK(s.kkt_residual <= 1e-6);
  }
}

TEST_CASE("solver output is bit-identical across repeated calls") {
  std::mt19937_64 rng(5);
  const auto q = random_feasible_qp(8, 6, rng);
  const QpProblem p = inequality_qp(q.h, q.f, q.a, q.b);
  const QpSolution a = solve_qp(p);
  const QpSolution b = solve_qp(p);
  CHECK(a.iterations == b.iterations);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  const QpSolution wa = solve_qp(p, {}, a.warm);
  const QpSolution wb = solve_qp(p, {}, a.warm);
  CHECK((wa.x - wb.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("warm start from the solution converges quickly") {
  std::mt19937_64 rng(6);
  const auto q = random_feasible_qp(8, 6, rng);
  const QpProblem p = inequality_qp(q.h, q.f, q.a, q.b);
  const QpSolution cold = solve_qp(p);
  const QpSolution warm = solve_qp(p, {}, cold.warm);
  REQUIRE(warm.status == QpStatus::Optimal);
  CHECK(warm.iterations <= cold.iterations);
  CHECK((warm.x - cold.x).norm() <= 1e-6);
}

TEST_CASE("mixed bounds, inequalities and equalities") {
  // min |x - (3, -3, 0)|^2 s.t. x0 + x1 + x2 = 1, x2 <= 0.2, -1 <= x <= 2
  QpProblem p;
  p.hessian = 2.0 * Matrix::Identity(3, 3);
  p.linear = (Vector(3) << -6, 6, 0).finished();
  p.constant = 18.0;
  p.a_eq = Matrix::Ones(1, 3);
  p.b_eq = Vector::Constant(1, 1.0);
  p.a_in = (Matrix(1, 3) << 0, 0, 1).finished();
  p.b_in = Vector::Constant(1, 0.2);
  p.lower = Vector::Constant(3, -1.0);
  p.upper = Vector::Constant(3, 2.0);
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  // x0 = 2 (bound), x1 = -1 (bound), x2 = 0 from the equality
  CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(s.x[1] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(s.x[2] == doctest::Approx(0.0).epsilon(1e-7));
}
