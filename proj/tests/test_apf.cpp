#include <cmath>
#include <random>

#include "doctest.h"
#include "platoon/apf.hpp"

using namespace platoon::apf;
using platoon::dynamics::VehicleState;

namespace {

double field(const Eigen::Vector2d& ego, const Eigen::Vector2d& obs, const SafetyDistances& d, const ApfParams& p) {
  return potential(normalized_distance(ego.x() - obs.x(), ego.y() - obs.y(), d.Xs, d.Ys, 0.37), p);
}

}  // namespace

TEST_CASE("safety distances") {
  ApfParams p;
  SUBCASE("matched velocities") {
    const VehicleState ego{20.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const ObstacleState obs{40.0, 0.0, 20.0, 0.0, 0.0};
    const SafetyDistances d = safety_distances(ego, obs, p);
    CHECK(d.Xs == doctest::Approx(p.X0 + 20.0 * p.T0));
    CHECK(d.Ys == doctest::Approx(p.Y0));
  }
  SUBCASE("closing on a slower vehicle ahead") {
    ApfParams q = p;
    q.X0 = 2.0;
    q.T0 = 1.0;
    q.a_n = 2.0;
    const SafetyDistances d = safety_distances({20.0, 0, 0, 0, 0, 0}, {50.0, 0.0, 15.0, 0.0, 0.0}, q);
    CHECK(d.Xs == doctest::Approx(28.25));
  }
  SUBCASE("opening gap adds nothing") {
    const SafetyDistances d = safety_distances({20.0, 0, 0, 0, 0, 0}, {50.0, 0.0, 25.0, 0.0, 0.0}, p);
    CHECK(d.Xs == doctest::Approx(p.X0 + 20.0 * p.T0));
  }
  SUBCASE("Ys grows with the lateral closing rate") {
    double last = 0.0;
    for (double vo : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      const SafetyDistances d = safety_distances({20.0, 0, 0, 0, 0, 0}, {10.0, 3.5, 20.0, -vo, 0.0}, p);
      CHECK(d.Ys >= last);
      last = d.Ys;
    }
    CHECK(last > p.Y0);
  }
}

TEST_CASE("normalized distance") {
  CHECK(normalized_distance(30.0, 0.0, 30.0, 2.0, 0.0) == doctest::Approx(1.0));
  CHECK(normalized_distance(30.0, 0.0, 30.0, 2.0, 1.1) == doctest::Approx(1.0));
  CHECK(normalized_distance(30.0, 2.0, 30.0, 2.0, 0.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(normalized_distance(1.0, 1.0, 0.0, 2.0, 0.0), std::invalid_argument);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(-50.0, 50.0), sd(1.0, 40.0);
  for (int i = 0; i < 100; ++i) {
    const double dx = pos(rng), dy = pos(rng), xs = sd(rng), ys = sd(rng);
    const double s0 = normalized_distance(dx, dy, xs, ys, 0.0);
    CHECK(normalized_distance(dx, dy, xs, ys, 0.3) == doctest::Approx(s0).epsilon(1e-13));
    CHECK(normalized_distance(dx, dy, xs, ys, 1.0) == doctest::Approx(s0).epsilon(1e-13));
    CHECK(s0 == doctest::Approx(std::hypot(dx / xs, dy / ys)).epsilon(1e-13));
  }
}

TEST_CASE("potential") {
  ApfParams p;
  CHECK(potential(1.0, p) == doctest::Approx(10000.0));
  CHECK(potential(2.0, p) == doctest::Approx(4263.174458839783).epsilon(1e-13));
  CHECK(potential(0.01, p) == potential(p.s_min, p));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> s(0.06, 50.0);
  for (int i = 0; i < 200; ++i) {
    double s1 = s(rng), s2 = s(rng);
    if (s1 == s2) continue;
    if (s1 > s2) std::swap(s1, s2);
    CHECK(potential(s1, p) > potential(s2, p));
  }
}

TEST_CASE("radial symmetry in normalized coordinates") {
  ApfParams p;
  const SafetyDistances d{30.0, 2.5};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), rad(0.1, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double r = rad(rng), t1 = ang(rng), t2 = ang(rng);
    const Eigen::Vector2d q1(r * std::cos(t1) * d.Xs, r * std::sin(t1) * d.Ys);
    const Eigen::Vector2d q2(r * std::cos(t2) * d.Xs, r * std::sin(t2) * d.Ys);
    CHECK(field(q1, Eigen::Vector2d::Zero(), d, p) == doctest::Approx(field(q2, Eigen::Vector2d::Zero(), d, p)));
  }
}

TEST_CASE("potential decreases along rays") {
  ApfParams p;
  const SafetyDistances d{28.0, 2.0};
  const Eigen::Vector2d obs(100.0, 3.75);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  for (int ray = 0; ray < 10; ++ray) {
    const double t = ang(rng);
    const Eigen::Vector2d dir(std::cos(t), std::sin(t));
    double last = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 100; ++k) {
      const double u = field(obs + (1.5 + 0.5 * k) * dir, obs, d, p);  // outside the clamp radius
      CHECK(u < last);
      last = u;
    }
  }
}

TEST_CASE("gradient and Hessian match central differences") {
  ApfParams p;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-60.0, 60.0), lat(-6.0, 6.0), sd(5.0, 40.0), sy(1.0, 4.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Vector2d obs(pos(rng), lat(rng));
    const Eigen::Vector2d ego = obs + Eigen::Vector2d(pos(rng), lat(rng));
    const SafetyDistances d{sd(rng), sy(rng)};
    const PotentialDerivatives pd = potential_derivatives(ego, obs, d, p);
    CHECK(pd.value == doctest::Approx(field(ego, obs, d, p)).epsilon(1e-13));
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(ego[k]));
      Eigen::Vector2d ep = ego, em = ego;
      ep[k] += h;
      em[k] -= h;
      const double fd = (field(ep, obs, d, p) - field(em, obs, d, p)) / (2 * h);
      CHECK(std::abs(pd.gradient[k] - fd) <= 1e-5 * std::max(std::abs(fd), 1e-3));
      const Eigen::Vector2d gd = (potential_derivatives(ep, obs, d, p).gradient -
                                  potential_derivatives(em, obs, d, p).gradient) / (2 * h);
      for (int i = 0; i < 2; ++i) CHECK(std::abs(pd.hessian(i, k) - gd[i]) <= 1e-5 * std::max(std::abs(gd[i]), 1e-3));
    }
  }
}

TEST_CASE("convexified penalty") {
  ApfParams p;
  SUBCASE("far field is negligible") {
    const QuadraticPenalty q = convexify_at({5000.0, 0.0}, {0.0, 0.0}, {30.0, 2.0}, p);
    CHECK(q.gradient.norm() < 1e-3 * p.a);
  }
  SUBCASE("PSD, exact at the expansion point and never negative") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> pos(-60.0, 60.0), lat(-6.0, 6.0), sd(5.0, 40.0), sy(1.0, 4.0);
    std::uniform_real_distribution<double> probe(-200.0, 200.0);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Vector2d obs(pos(rng), lat(rng));
      const Eigen::Vector2d ego = obs + Eigen::Vector2d(pos(rng), lat(rng));
      const SafetyDistances d{sd(rng), sy(rng)};
      const QuadraticPenalty q = convexify_at(ego, obs, d, p);
      const PotentialDerivatives pd = potential_derivatives(ego, obs, d, p);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q.hessian);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()));
      CHECK((q.hessian - q.hessian.transpose()).norm() == 0.0);
      CHECK(q.evaluate(ego) == pd.value);
      CHECK((q.gradient - pd.gradient).norm() == 0.0);
      for (int k = 0; k < 20; ++k) {
        CHECK(q.evaluate(ego + Eigen::Vector2d(probe(rng), 0.1 * probe(rng))) >= -1e-9 * pd.value);
      }
    }
  }
  SUBCASE("horizon expansion advances obstacles") {
    std::vector<VehicleState> ego(3, VehicleState{20.0, 0, 0, 0, 0, 0});
    for (int k = 0; k < 3; ++k) ego[k].X = 20.0 * 0.1 * (k + 1);
    const std::vector<ObstacleState> obs{{50.0, 0.0, 15.0, 0.0, 0.0}, {0.0, 3.75, 20.0, 0.0, 0.0}};
    const auto pen = convexify(ego, obs, 0.1, p);
    REQUIRE(pen.size() == 3);
    REQUIRE(pen[0].size() == 2);
    // ego closes 0.5 m per step on the slower obstacle
    CHECK(pen[1][0].value > pen[0][0].value);
    CHECK(pen[2][0].value > pen[1][0].value);
    // same-speed neighbour keeps a constant value
    CHECK(pen[2][1].value == doctest::Approx(pen[0][1].value));
  }
}

TEST_CASE("pass-side seed only behind the obstacle") {
  ApfParams p;
  auto one = [&](double ego_x, double ego_y, double obs_y) {
    const std::vector<VehicleState> ego{VehicleState{20.0, 0, 0, 0, ego_x, ego_y}};
    return convexify(ego, {{0.0, obs_y, 20.0, 0.0, 0.0}}, 0.1, p)[0][0];
  };
  SUBCASE("lane 1 obstacle: seed moves towards the road middle") {
    const QuadraticPenalty q = one(-30.0, 0.0, 0.0);
    CHECK(q.point.y() == doctest::Approx(p.pass_offset));
    CHECK(q.gradient.y() < 0.0);  // descent direction is +Y
  }
  SUBCASE("lane 2 obstacle: seed moves the other way") {
    const QuadraticPenalty q = one(-30.0, 3.75, 3.75);
    CHECK(q.point.y() == doctest::Approx(3.75 - p.pass_offset));
    CHECK(q.gradient.y() > 0.0);
  }
  SUBCASE("outside the band or ahead: expansion stays at the ego") {
    CHECK(one(-30.0, 1.5, 0.0).point.y() == 1.5);
    CHECK(one(30.0, 0.0, 0.0).point.y() == 0.0);
    CHECK(one(30.0, 0.0, 0.0).gradient.y() == 0.0);
  }
}
