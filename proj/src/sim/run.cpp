#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "platoon/detail/omp.hpp"
#include "platoon/sim.hpp"

namespace platoon::sim {

using dynamics::ControlCommand;
using dynamics::VehicleState;

CollisionDetected::CollisionDetected(double t_, int a_, int b_)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "collision between " << a_ << " and " << b_ << " at t=" << t_;
        return os.str();
      }()),
      t(t_),
      a(a_),
      b(b_) {}

namespace {

// lane change bookkeeping thresholds, m
constexpr double kLaneLeave = 0.5;
constexpr double kLaneBack = 0.2;

ucl::LongitudinalState longitudinal(const Vector& h) { return {h[0], h[1], h[2]}; }

Vector history_sample(const VehicleState& s, const ControlCommand& c, const dynamics::VehicleParams& p) {
  Vector h(3);
  h << s.X, s.u_bar, dynamics::derivatives(s, c, p)[0];
  return h;
}

double clearance(double dx, double dy, double length, double width) {
  return std::max(std::abs(dx) - length, std::abs(dy) - width);
}

}  // namespace

SimLog run_scenario(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  if (cfg.gains.n() == 0) resolve_gains(cfg);
  cfg.validate();

  const int n = cfg.vehicles;
  const int substeps = static_cast<int>(std::lround(cfg.control_dt / cfg.physics_dt));
  const long steps = std::lround(cfg.duration / cfg.control_dt);
  const int threads = cfg.threads == 0 ? detail::max_threads() : cfg.threads;

  SimLog log;
  log.vehicles = n;
  log.gap = cfg.gap;
  log.control_dt = cfg.control_dt;
  log.lane_y = cfg.lane_y;
  log.records.reserve(static_cast<size_t>(steps + 1) * (static_cast<size_t>(n) + cfg.obstacles.size()));

  std::vector<VehicleState> state(static_cast<size_t>(n));
  std::vector<ControlCommand> command(static_cast<size_t>(n));
  std::vector<mpc::MotionPlanner> planner;
  std::vector<ucl::StateHistory> history;
  std::vector<DelayChannel> channel;
  for (int i = 0; i < n; ++i) {
    state[i] = {cfg.v_init, 0.0, 0.0, 0.0, -i * cfg.gap, cfg.lane_y};
    planner.emplace_back(cfg.mpc, cfg.vehicle, cfg.apf);
    history.emplace_back(cfg.delay_hi + 1.0);
    history.back().push(0.0, history_sample(state[i], command[i], cfg.vehicle));
    channel.emplace_back(cfg.delay_lo, cfg.delay_hi, cfg.delay_mu, cfg.seed * 7919ULL + static_cast<std::uint64_t>(i),
                         cfg.delay_hold);
  }
  std::vector<bool> changing(static_cast<size_t>(n), false);

  std::vector<double> u_des(static_cast<size_t>(n)), lambda(static_cast<size_t>(n), 0.0);
  std::vector<mpc::MotionPlanner::Result> result(static_cast<size_t>(n));
  std::vector<std::exception_ptr> failure(static_cast<size_t>(n));

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.control_dt;

    std::vector<apf::ObstacleState> obstacles;
    std::vector<int> obstacle_ids;
    for (size_t j = 0; j < cfg.obstacles.size(); ++j) {
      if (!cfg.obstacles[j].active(t)) continue;
      obstacles.push_back(cfg.obstacles[j].state(t));
      obstacle_ids.push_back(kObstacleIdBase + static_cast<int>(j) + 1);
    }

    // coordination layer: speed references from delayed V2V states
    u_des[0] = std::clamp(cfg.leader.speed(t), 0.0, cfg.v_max);
    for (int i = 1; i < n; ++i) {
      lambda[i] = channel[i].sample(t);
      const auto lead = longitudinal(delayed_read(history[0], t, lambda[i]));
      const auto own = longitudinal(delayed_read(history[i], t, lambda[i]));
      const auto pred = longitudinal(delayed_read(history[i - 1], t, lambda[i]));
      const ucl::ErrorState e_own = ucl::build_error_state(lead, own, i, cfg.gap);
      const ucl::LongitudinalState now{state[i].X, state[i].u_bar, 0.0};
      if (cfg.mode == Mode::Mcf) {
        std::optional<ucl::ErrorState> e_pred;
        if (i > 1) e_pred = ucl::build_error_state(lead, pred, i - 1, cfg.gap);
        const double u = ucl::feedback_command(cfg.gains, e_own, e_pred, i);
        u_des[i] = ucl::reference_velocity(now, u, cfg.dt_ref, cfg.v_max);
      } else {
        const double v = pred.v + cfg.baseline_kp * (pred.s - own.s - cfg.gap) + cfg.baseline_kl * e_own.s_hat;
        u_des[i] = std::clamp(v, 0.0, cfg.v_max);
      }
    }

    // motion planning, one independent solve per vehicle
    auto plan = [&](int i) {
      try {
        result[i] = planner[i].step(state[i], cfg.lane_y, u_des[i], obstacles);
      } catch (...) {
        failure[i] = std::current_exception();
      }
    };
    if (threads > 1) {
      PLATOON_OMP(omp parallel for num_threads(threads) schedule(static, 1))
      for (int i = 0; i < n; ++i) plan(i);
    } else {
      for (int i = 0; i < n; ++i) plan(i);
    }
    for (int i = 0; i < n; ++i)
      if (failure[i]) std::rethrow_exception(failure[i]);

    for (int i = 0; i < n; ++i) {
      const auto& r = result[i];
      command[i] = r.out.command;
      log.solve_seconds.push_back(r.out.solve_seconds);
      if (r.fault) log.events.push_back({t, "qp_fault", i, "infeasible QP, previous command held"});
      SimRecord rec;
      rec.t = t;
      rec.id = i;
      rec.state = state[i];
      if (i > 0) {
        rec.s_hat = state[0].X - state[i].X - i * cfg.gap;
        rec.v_hat = state[0].u_bar - state[i].u_bar;
      }
      rec.command = command[i];
      rec.q_ref = r.out.q_ref;
      rec.lambda = lambda[i];
      rec.apf_max = r.out.apf_max;
      log.records.push_back(rec);

      const double off = std::abs(state[i].Y - cfg.lane_y);
      if (!changing[i] && off > kLaneLeave) {
        changing[i] = true;
        log.events.push_back({t, "lane_change_start", i, ""});
      } else if (changing[i] && off < kLaneBack) {
        changing[i] = false;
        log.events.push_back({t, "lane_change_end", i, ""});
      }
    }
    for (size_t j = 0; j < obstacles.size(); ++j) {
      SimRecord rec;
      rec.t = t;
      rec.id = obstacle_ids[j];
      rec.state = {obstacles[j].u_bar_o, obstacles[j].v_o, 0.0, obstacles[j].heading, obstacles[j].X, obstacles[j].Y};
      log.records.push_back(rec);
    }
    if (k == steps) break;

    // plant, commands held over the substeps
    for (int sub = 0; sub < substeps; ++sub) {
      const double ts = static_cast<double>(k * substeps + sub + 1) * cfg.physics_dt;
      for (int i = 0; i < n; ++i) {
        state[i] = dynamics::step(state[i], command[i], cfg.physics_dt, cfg.vehicle);
        history[i].push(ts, history_sample(state[i], command[i], cfg.vehicle));
      }
      for (int i = 0; i < n; ++i) {
        for (int m = i + 1; m < n; ++m) {
          const double dx = state[i].X - state[m].X, dy = state[i].Y - state[m].Y;
          log.min_center_distance = std::min(log.min_center_distance, std::hypot(dx, dy));
          const double c = clearance(dx, dy, cfg.footprint_length, cfg.footprint_width);
          log.min_clearance = std::min(log.min_clearance, c);
          if (c <= 0.0) {
            log.status = RunStatus::Collision;
            log.events.push_back({ts, "collision", i, "with vehicle " + std::to_string(m)});
          }
        }
        for (size_t j = 0; j < cfg.obstacles.size(); ++j) {
          if (!cfg.obstacles[j].active(ts)) continue;
          const apf::ObstacleState o = cfg.obstacles[j].state(ts);
          const double c = clearance(state[i].X - o.X, state[i].Y - o.Y, cfg.footprint_length, cfg.footprint_width);
          log.min_clearance = std::min(log.min_clearance, c);
          if (c <= 0.0) {
            log.status = RunStatus::Collision;
            log.events.push_back({ts, "collision", i, "with obstacle " + std::to_string(kObstacleIdBase + j + 1)});
          }
        }
      }
      if (log.status == RunStatus::Collision) return log;
    }
  }
  return log;
}

SimLog run_scenario_checked(const ScenarioConfig& cfg) {
  SimLog log = run_scenario(cfg);
  if (log.status == RunStatus::Collision) {
    for (const auto& e : log.events) {
      if (e.kind != "collision") continue;
      int other = 0;
      std::istringstream(e.detail.substr(e.detail.find_last_of(' ') + 1)) >> other;
      throw CollisionDetected(e.t, e.id, other);
    }
  }
  return log;
}

}  // namespace platoon::sim
