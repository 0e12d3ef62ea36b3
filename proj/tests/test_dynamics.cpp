#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "platoon/dynamics.hpp"

using namespace platoon::dynamics;

namespace {

VehicleState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(8.0, 30.0), v(-0.8, 0.8), r(-0.3, 0.3), phi(-3.0, 3.0), pos(-100.0, 100.0);
  return {u(rng), v(rng), r(rng), phi(rng), pos(rng), pos(rng)};
}

ControlCommand random_command(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(-15000.0, 15000.0), d(-0.2, 0.2);
  return {f(rng), d(rng)};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); }

VehicleState integrate(VehicleState s, const ControlCommand& c, double dt, double horizon, const VehicleParams& p) {
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < n; ++k) s = step(s, c, dt, p);
  return s;
}

}  // namespace

TEST_CASE("tire forces") {
  VehicleParams p;
  auto f = tire_forces({20.0, 0.0, 0.0, 0.0, 0.0, 0.0}, 0.0, p);
  CHECK(f.Fyf == 0.0);
  CHECK(f.Fyr == 0.0);

  f = tire_forces({20.0, 0.0, 0.0, 0.0, 0.0, 0.0}, 0.01, p);
  CHECK(f.Fyf == doctest::Approx(2597.52).epsilon(1e-12));
  CHECK(f.Fyr == 0.0);

  f = tire_forces({20.0, 0.5, 0.0, 0.0, 0.0, 0.0}, 0.0, p);
  CHECK(f.Fyr == doctest::Approx(-6500.0).epsilon(1e-12));

  CHECK_THROWS_AS(tire_forces({0.05, 0.0, 0.0, 0.0, 0.0, 0.0}, 0.0, p), VelocityFloorViolated);
}

TEST_CASE("derivatives") {
  VehicleParams p;
  SUBCASE("straight-line equilibrium") {
    const StateVec d = derivatives({20.0, 0.0, 0.0, 0.0, 5.0, 3.5}, {}, p);
    StateVec expect;
    expect << 0, 0, 0, 0, 20.0, 0;
    CHECK((d - expect).norm() == doctest::Approx(0.0));
  }
  SUBCASE("heading rotates the velocity") {
    const StateVec d = derivatives({20.0, 0.0, 0.0, std::numbers::pi / 2, 0.0, 0.0}, {}, p);
    CHECK(std::abs(d[4]) < 1e-12);
    CHECK(d[5] == doctest::Approx(20.0));
  }
  SUBCASE("general state against hand evaluation") {
    // u=20, v=0.3, r=0.05, phi=0.2, delta=0.02, FxT=1000, evaluated separately
    const StateVec d = derivatives({20.0, 0.3, 0.05, 0.2, 0.0, 0.0}, {1000.0, 0.02}, p);
    const double expect[] = {0.18861111111111112, -1.1377694097222222, 0.17173020124933194,
                             0.05,                19.541730757586315,  4.267406589253596};
    for (int i = 0; i < kStateDim; ++i) CHECK(d[i] == doctest::Approx(expect[i]).epsilon(1e-13));
  }
}

TEST_CASE("analytic jacobians match central differences") {
  VehicleParams p;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const VehicleState s = random_state(rng);
    const ControlCommand c = random_command(rng);
    const Jacobians j = jacobians(s, c, p);
    const StateVec x = s.vec();
    for (int k = 0; k < kStateDim; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      StateVec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const StateVec fd = (derivatives(VehicleState::from(xp), c, p) - derivatives(VehicleState::from(xm), c, p)) / (2 * h);
      for (int i = 0; i < kStateDim; ++i) CHECK(rel_err(j.A(i, k), fd[i]) < 1e-6);
    }
    const InputVec u = c.vec();
    for (int k = 0; k < kInputDim; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(u[k]));
      InputVec up = u, um = u;
      up[k] += h;
      um[k] -= h;
      const StateVec fd = (derivatives(s, ControlCommand::from(up), p) - derivatives(s, ControlCommand::from(um), p)) / (2 * h);
      for (int i = 0; i < kStateDim; ++i) CHECK(rel_err(j.B(i, k), fd[i]) < 1e-6);
    }
  }
}

TEST_CASE("step") {
  VehicleParams p;
  SUBCASE("zero-rate state keeps its rates") {
    const VehicleState s{20.0, 0.0, 0.0, 0.3, 0.0, 0.0};
    const VehicleState n = step(s, {}, 0.01, p);
    CHECK(n.u_bar == 20.0);
    CHECK(n.v == 0.0);
    CHECK(n.r == 0.0);
    CHECK(n.phi == 0.3);
    CHECK(n.X == doctest::Approx(0.2 * std::cos(0.3)).epsilon(1e-14));
  }
  SUBCASE("unit acceleration adds dt to the speed") {
    const VehicleState n = step({15.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {p.m * 1.0, 0.0}, 0.02, p);
    CHECK(n.u_bar == doctest::Approx(15.02).epsilon(1e-14));
  }
  SUBCASE("fourth-order convergence") {
    const VehicleState s{18.0, 0.2, 0.05, 0.1, 0.0, 0.0};
    const ControlCommand c{3000.0, 0.05};
    const VehicleState ref = integrate(s, c, 0.02 / 64, 1.0, p);
    const double e1 = (integrate(s, c, 0.02, 1.0, p).vec() - ref.vec()).norm();
    const double e2 = (integrate(s, c, 0.01, 1.0, p).vec() - ref.vec()).norm();
    MESSAGE("RK4 error ratio " << e1 / e2);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
  }
  SUBCASE("bad dt and velocity floor") {
    CHECK_THROWS_AS(step({20, 0, 0, 0, 0, 0}, {}, 0.05, p), std::invalid_argument);
    CHECK_THROWS_AS(step({20, 0, 0, 0, 0, 0}, {}, 0.0, p), std::invalid_argument);
    CHECK_THROWS_AS(step({0.15, 0, 0, 0, 0, 0}, {-p.m * 10.0, 0.0}, 0.02, p), VelocityFloorViolated);
  }
  SUBCASE("deterministic") {
    const VehicleState a = integrate({18.0, 0.2, 0.05, 0.1, 0.0, 0.0}, {3000.0, 0.05}, 0.005, 2.0, p);
    const VehicleState b = integrate({18.0, 0.2, 0.05, 0.1, 0.0, 0.0}, {3000.0, 0.05}, 0.005, 2.0, p);
    CHECK(a.vec() == b.vec());
  }
}

TEST_CASE("coasting conserves speed") {
  VehicleParams p;
  const VehicleState end = integrate({22.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {}, 0.01, 10.0, p);
  CHECK(std::abs(end.u_bar - 22.0) < 1e-12);
  CHECK(end.X == doctest::Approx(220.0).epsilon(1e-12));
}

TEST_CASE("frame invariance") {
  VehicleParams p;
  const ControlCommand c{2000.0, 0.04};
  const double alpha = 0.7;
  VehicleState a{16.0, 0.1, 0.02, 0.25, 0.0, 0.0};
  VehicleState b = a;
  b.phi += alpha;
  for (int k = 0; k < 600; ++k) {
    a = step(a, c, 0.005, p);
    b = step(b, c, 0.005, p);
    const double xr = std::cos(alpha) * a.X - std::sin(alpha) * a.Y;
    const double yr = std::sin(alpha) * a.X + std::cos(alpha) * a.Y;
    REQUIRE(std::abs(xr - b.X) < 1e-9);
    REQUIRE(std::abs(yr - b.Y) < 1e-9);
  }
  CHECK(std::abs(a.u_bar - b.u_bar) < 1e-12);
}

TEST_CASE("saturate") {
  VehicleParams p;
  const ControlCommand in{1000.0, 0.1};
  CHECK(saturate(in, p).FxT == in.FxT);
  CHECK(saturate(in, p).delta == in.delta);
  CHECK(saturate({0.0, 2 * p.delta_max}, p).delta == p.delta_max);
  CHECK(saturate({-3 * p.FxT_max, 0.0}, p).FxT == -p.FxT_max);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> f(-1e5, 1e5), d(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const ControlCommand once = saturate({f(rng), d(rng)}, p);
    const ControlCommand twice = saturate(once, p);
    CHECK(once.FxT == twice.FxT);
    CHECK(once.delta == twice.delta);
    CHECK(std::abs(once.delta) <= p.delta_max);
    CHECK(std::abs(once.FxT) <= p.FxT_max);
  }
}

TEST_CASE("linearize_discretize") {
  VehicleParams p;
  SUBCASE("kinematic entry and output selection") {
    const LinearModel lm = linearize_discretize({20.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {}, p, 0.1);
    CHECK(lm.A_M(4, 0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(lm.C_M.rows() == 2);
    CHECK(lm.C_M(kOutY, 5) == 1.0);
    CHECK(lm.C_M(kOutU, 0) == 1.0);
    CHECK(lm.C_M.sum() == 2.0);
  }
  SUBCASE("reproduces the operating point drift") {
    // the affine term makes x0 -> x0 + Gamma f0; for a steady straight run
    // that is exact
    const VehicleState s{20.0, 0.0, 0.0, 0.0, 10.0, 3.5};
    const LinearModel lm = linearize_discretize(s, {}, p, 0.1);
    const Vector nx = lm.next(s.vec(), Vector::Zero(2));
    CHECK(nx[4] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(std::abs(nx[5] - 3.5) < 1e-12);
  }
  SUBCASE("second-order agreement with the nonlinear step") {
    std::mt19937_64 rng(5);
    // tiny Ts keeps the O(Ts^2) first-order mismatch below the quadratic term
    const double ts = 2e-4;
    for (int trial = 0; trial < 5; ++trial) {
      const VehicleState s = random_state(rng);
      const ControlCommand c = random_command(rng);
      const LinearModel lm = linearize_discretize(s, c, p, ts);
      StateVec dx;
      dx << 0.5, -0.2, 0.05, 0.02, 0.3, -0.4;
      InputVec du(500.0, 0.01);
      auto err = [&](double scale) {
        const StateVec x1 = s.vec() + scale * dx;
        const InputVec u1 = c.vec() + scale * du;
        const Vector lin = lm.next(Vector(x1), Vector(u1)) - lm.next(Vector(s.vec()), Vector(c.vec()));
        const StateVec nl = step(VehicleState::from(x1), ControlCommand::from(u1), ts, p).vec() - step(s, c, ts, p).vec();
        return (lin - Vector(nl)).norm();
      };
      const double ratio = err(0.04) / err(0.02);
      MESSAGE("linearization error ratio " << ratio);
      CHECK(ratio > 3.5);
      CHECK(ratio < 4.5);
    }
  }
}
