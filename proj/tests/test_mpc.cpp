#include <cmath>
#include <random>

#include "doctest.h"
#include "platoon/mpc.hpp"

using namespace platoon;
using namespace platoon::mpc;
using dynamics::ControlCommand;
using dynamics::VehicleState;

namespace {

MpcStepInput straight_input(double u, double u_des, double y, double y_des) {
  MpcStepInput in;
  in.state = {u, 0.0, 0.0, 0.0, 0.0, y};
  in.u_bar_des = u_des;
  in.Y_des = y_des;
  return in;
}

struct Loop {
  MotionPlanner planner{MpcConfig{}, dynamics::VehicleParams{}, apf::ApfParams{}};
  VehicleState s;
  ControlCommand last;
  bool limits_ok = true;

  MotionPlanner::Result tick(double y_des, double u_des, const std::vector<apf::ObstacleState>& obs) {
    const dynamics::VehicleParams p;
    const MpcConfig cfg;
    auto r = planner.step(s, y_des, u_des, obs);
    const ControlCommand& c = r.out.command;
    limits_ok = limits_ok && std::abs(c.FxT) <= p.FxT_max && std::abs(c.delta) <= p.delta_max &&
                std::abs(c.FxT - last.FxT) <= cfg.dFxT_max + 1e-9 && std::abs(c.delta - last.delta) <= cfg.ddelta_max + 1e-12;
    last = c;
    for (int j = 0; j < 10; ++j) s = dynamics::step(s, c, 0.005, p);
    return r;
  }
};

}  // namespace

TEST_CASE("adaptive reference weight") {
  CHECK(adaptive_qref({}, 375.0, 2.0, 4.0) == doctest::Approx(187.5));
  CHECK(adaptive_qref({0.0}, 375.0, 2.0, 4.0) == doctest::Approx(281.25));
  CHECK(adaptive_qref({1e12}, 375.0, 2.0, 4.0) == doctest::Approx(187.5).epsilon(1e-9));
  CHECK(adaptive_qref({1e12}, 375.0, 2.0, 4.0) > 187.5);
  double last = adaptive_qref({0.0, 50.0}, 375.0, 2.0, 4.0);
  for (double u : {1.0, 10.0, 100.0, 1e4}) {
    const double q = adaptive_qref({u, 50.0}, 375.0, 2.0, 4.0);
    CHECK(q < last);
    last = q;
  }
  CHECK_THROWS_AS(adaptive_qref({-1.0}, 375.0, 2.0, 4.0), std::invalid_argument);
}

TEST_CASE("problem layout") {
  MpcConfig cfg;
  dynamics::VehicleParams p;
  const MpcStepInput in = straight_input(20.0, 20.0, 0.0, 0.0);
  const auto model = dynamics::linearize_discretize(in.state, {}, p, cfg.Ts);
  const MpcQp q = build_problem(in, model, cfg, p, {}, 187.5);
  CHECK(q.qp.num_vars() == 2 * 5 + 25);
  CHECK(q.x_const.size() == 25);
  CHECK_NOTHROW(q.qp.validate());

  MpcConfig bad = cfg;
  bad.Nc = 30;
  CHECK_THROWS_AS(build_problem(in, model, bad, p, {}, 187.5), std::invalid_argument);
}

TEST_CASE("tracking-only problem at the reference keeps inputs at zero") {
  MpcConfig cfg;
  cfg.S_F = cfg.S_delta = cfg.R_F = cfg.R_delta = cfg.Q_obs = 0.0;
  dynamics::VehicleParams p;
  const MpcStepInput in = straight_input(20.0, 20.0, 0.0, 0.0);
  const MpcStepOutput out = solve_step(in, cfg, p, {});
  CHECK(out.status == convex::QpStatus::Optimal);
  for (const auto& u : out.inputs) {
    CHECK(std::abs(u.FxT) < 1e-3);
    CHECK(std::abs(u.delta) < 1e-7);
  }
}

TEST_CASE("equilibrium command") {
  const MpcStepOutput out = solve_step(straight_input(20.0, 20.0, 0.0, 0.0), {}, {}, {});
  CHECK(std::abs(out.command.FxT) < 1e-2);
  CHECK(std::abs(out.command.delta) < 1e-8);
  CHECK(out.objective == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("speed step produces positive force") {
  const MpcStepOutput out = solve_step(straight_input(20.0, 22.0, 0.0, 0.0), {}, {}, {});
  CHECK(out.command.FxT > 0.0);
}

TEST_CASE("cost breakdown and independent re-evaluation") {
  MpcConfig cfg;
  dynamics::VehicleParams p;
  apf::ApfParams ap;
  MpcStepInput in = straight_input(19.0, 20.5, 0.4, 0.0);
  in.previous = {800.0, 0.01};
  in.obstacles.push_back({70.0, 0.0, 16.0, 0.0, 0.0});
  in.obstacles.push_back({-30.0, 3.75, 21.0, 0.0, 0.0});
  const MpcStepOutput out = solve_step(in, cfg, p, ap);
  REQUIRE(out.status == convex::QpStatus::Optimal);
  CHECK(out.cost.total() == doctest::Approx(out.objective).epsilon(1e-6));

  // rebuild the same penalties and sum every term by forward simulation
  const auto model = dynamics::linearize_discretize(in.state, in.previous, p, cfg.Ts);
  const auto seed = coast_prediction(in.state, cfg.Np, cfg.Ts);
  const auto pen = apf::convexify(seed, in.obstacles, cfg.Ts, ap);
  double track_y = 0, track_u = 0, obstacle = 0, input = 0, rate = 0;
  Vector x = in.state.vec();
  ControlCommand prev = in.previous;
  for (int k = 0; k < cfg.Np; ++k) {
    const ControlCommand u = out.inputs[std::min(k, cfg.Nc - 1)];
    x = model.next(x, Vector(u.vec()));
    track_y += cfg.Q_Y * std::pow(x[5] - in.Y_des, 2);
    track_u += out.q_ref * std::pow(x[0] - in.u_bar_des, 2);
    for (const auto& q : pen[k]) obstacle += cfg.Q_obs * q.evaluate({x[4], x[5]});
    input += cfg.S_F * std::pow(u.FxT / 1000.0, 2) + cfg.S_delta * u.delta * u.delta;
    rate += cfg.R_F * std::pow((u.FxT - prev.FxT) / 1000.0, 2) + cfg.R_delta * std::pow(u.delta - prev.delta, 2);
    prev = u;
  }
  CHECK(out.cost.tracking_Y == doctest::Approx(track_y).epsilon(1e-6));
  CHECK(out.cost.tracking_u == doctest::Approx(track_u).epsilon(1e-6));
  CHECK(out.cost.obstacle == doctest::Approx(obstacle).epsilon(1e-6));
  CHECK(out.cost.input == doctest::Approx(input).epsilon(1e-6));
  CHECK(out.cost.rate == doctest::Approx(rate).epsilon(1e-6));
  CHECK(out.cost.slack >= 0.0);
  // the prediction is the same forward simulation
  CHECK((Vector(out.prediction.back().vec()) - x).norm() < 1e-8 * x.norm());
}

TEST_CASE("receding horizon converges from an offset") {
  Loop loop;
  loop.s = {19.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  for (int k = 0; k < 200; ++k) loop.tick(0.0, 20.0, {});
  CHECK(std::abs(loop.s.Y) < 0.05);
  CHECK(std::abs(loop.s.u_bar - 20.0) < 0.05);
  CHECK(loop.limits_ok);
}

TEST_CASE("in-lane obstacle triggers a lane change") {
  Loop loop;
  loop.s = {19.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  const apf::ObstacleState obs{60.0, 0.0, 15.0, 0.0, 0.0};
  double max_pred = 0.0, max_y = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto r = loop.tick(0.0, 20.0, {obs.advanced(k * 0.05)});
    for (const auto& x : r.out.prediction) max_pred = std::max(max_pred, std::abs(x.Y));
    max_y = std::max(max_y, std::abs(loop.s.Y));
  }
  MESSAGE("max predicted deviation " << max_pred << ", max actual " << max_y);
  CHECK(max_pred > 1.0);
  CHECK(max_y > 2.5);  // clear of the obstacle footprint
  CHECK(loop.limits_ok);
}

TEST_CASE("planner is deterministic") {
  Loop a, b;
  a.s = b.s = {18.0, 0.0, 0.0, 0.0, 0.0, 0.3};
  const apf::ObstacleState obs{80.0, 0.0, 15.0, 0.0, 0.0};
  for (int k = 0; k < 40; ++k) {
    a.tick(0.0, 20.0, {obs.advanced(k * 0.05)});
    b.tick(0.0, 20.0, {obs.advanced(k * 0.05)});
  }
  CHECK(a.s.vec() == b.s.vec());
}
