#pragma once

// Time-stepped platoon simulator. Every control period each follower reads
// the leader's and its predecessor's longitudinal state through its own
// delayed V2V channel, the coordination layer turns that into a speed
// reference, and every vehicle's motion planner produces a command that is
// held over the physics substeps.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/apf.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/mpc.hpp"
#include "platoon/ucl.hpp"

namespace platoon::sim {

using numerics::Vector;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Delay channels

/// Seeded bounded random walk lambda(t + dt) = clamp(lambda + eta dt, lo, hi).
/// The slope eta is drawn uniformly from [-mu, mu] and held for `hold`
/// seconds, which keeps the trace piecewise linear.
class DelayChannel {
 public:
  DelayChannel(double lo, double hi, double mu, std::uint64_t seed, double hold = 0.5);

  /// Delay at time t. Times must be non-decreasing across calls.
  double sample(double t);
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mu() const { return mu_; }

 private:
  double lo_, hi_, mu_, hold_;
  std::mt19937_64 rng_;
  double t_ = 0.0;
  double lambda_ = 0.0;
  double eta_ = 0.0;
  double next_draw_ = 0.0;
};

/// Value the receiver sees at time t: the sender's history at t - lambda,
/// interpolated. Reads before the first sample return the initial value.
Vector delayed_read(const ucl::StateHistory& history, double t, double lambda);

// ---------------------------------------------------------------------------
// Scenario configuration

enum class Mode { Mcf, SingleMpc };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

/// Leader speed reference: v0 until t_step, then a second-order step response
/// to v1 whose overshoot and time-to-peak are given.
struct LeaderProfile {
  double v0 = 20.0;
  double v1 = 20.0;
  double t_step = 1.0;
  double overshoot = 0.1;  // fraction of (v1 - v0)
  double peak_time = 2.0;  // s after t_step

  double speed(double t) const;
};

/// Scripted obstacle vehicle. It appears at t_appear at (x_appear, y_start)
/// driving at `speed`, optionally changes speed to speed_end at a constant
/// rate `accel` from t_speed, and optionally moves laterally to y_end with a
/// cosine blend over [t_move, t_move + move_duration]. move_duration 0 means
/// it stays at y_start.
struct ObstacleScript {
  double t_appear = 0.0;
  double x_appear = 0.0;
  double y_start = 0.0;
  double speed = 15.0;
  double speed_end = -1.0;  // negative: keep `speed`
  double t_speed = 0.0;
  double accel = 1.0;       // magnitude, m/s^2
  double y_end = 0.0;
  double t_move = 0.0;
  double move_duration = 0.0;
  double t_vanish = std::numeric_limits<double>::infinity();

  bool active(double t) const { return t >= t_appear && t < t_vanish; }
  apf::ObstacleState state(double t) const;
};

struct ScenarioConfig {
  std::string name = "scenario";
  int vehicles = 4;          // leader plus followers
  double gap = 20.0;         // desired spacing D, m
  double v_init = 20.0;      // initial speed of every platoon vehicle, m/s
  double lane_y = 0.0;       // centreline the platoon keeps, m
  LeaderProfile leader;
  std::vector<ObstacleScript> obstacles;

  double delay_lo = 0.0;
  double delay_hi = 0.0;
  double delay_mu = 0.9;
  double delay_hold = 0.5;
  std::uint64_t seed = 1;

  double duration = 30.0;
  double control_dt = 0.05;
  double physics_dt = 0.005;

  Mode mode = Mode::Mcf;
  std::string gain_file;   // empty = bundled default gains
  ucl::GainSet gains;      // resolved gains; filled by resolve_gains()
  double dt_ref = 0.75;    // lead time turning the UCL acceleration into a speed reference, s
  double v_max = 30.0;
  // single_mpc baseline: u_des = v_pred + kp (X_pred - X - D) + kl s_hat, delayed
  double baseline_kp = 0.4;
  double baseline_kl = 0.1;

  double footprint_length = 12.0;
  double footprint_width = 2.5;

  mpc::MpcConfig mpc;
  apf::ApfParams apf;
  dynamics::VehicleParams vehicle;

  /// Worker threads for per-vehicle solves; 0 = OpenMP default, 1 = serial.
  int threads = 0;

  /// Throws ConfigError.
  void validate() const;
  int followers() const { return vehicles - 1; }
};

/// Loads `gain_file` (or the bundled defaults when empty) into `gains`.
/// Throws ConfigError if the file is missing or does not match the platoon.
void resolve_gains(ScenarioConfig& cfg);

/// Bundled scenarios. Gains are resolved to the defaults.
ScenarioConfig scenario_a(bool with_delay = true);
ScenarioConfig scenario_b();
ScenarioConfig scenario_c();

/// Flat INI text. Unknown keys are rejected. Relative gain paths are resolved
/// against `base_dir`. Throws ConfigError.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(std::istream& is, const std::string& base_dir = ".");
/// Writes every key, so parse_scenario(write_scenario(cfg)) reproduces cfg.
void write_scenario(std::ostream& os, const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Simulation log

struct SimRecord {
  double t = 0.0;
  int id = 0;  // 0 = leader; obstacles are logged as kObstacleIdBase + j
  dynamics::VehicleState state;
  double s_hat = 0.0;
  double v_hat = 0.0;
  dynamics::ControlCommand command;
  double q_ref = 0.0;
  double lambda = 0.0;
  double apf_max = 0.0;
};

inline constexpr int kObstacleIdBase = 100;

struct SimEvent {
  double t = 0.0;
  std::string kind;  // lane_change_start, lane_change_end, collision, qp_fault
  int id = 0;
  std::string detail;
};

enum class RunStatus { Completed, Collision };

struct SimLog {
  int vehicles = 0;
  double gap = 0.0;
  double control_dt = 0.0;
  double lane_y = 0.0;
  std::vector<SimRecord> records;  // grouped by time, ids ascending
  std::vector<SimEvent> events;
  RunStatus status = RunStatus::Completed;
  double min_clearance = std::numeric_limits<double>::infinity();        // footprints, every physics step
  double min_center_distance = std::numeric_limits<double>::infinity();  // platoon vehicles only
  std::vector<double> solve_seconds;  // every MPC solve; excluded from exports
};

class CollisionDetected : public std::runtime_error {
 public:
  CollisionDetected(double t, int a, int b);
  double t;
  int a, b;
};

/// Runs the scenario. A collision ends the run early with status Collision
/// and a collision event; the partial log is returned.
SimLog run_scenario(const ScenarioConfig& cfg);

/// Same as run_scenario but throws CollisionDetected on collision.
SimLog run_scenario_checked(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  int vehicles = 0;
  /// |s_bar_i|_inf for followers i = 1..n (s_bar_i = X_{i-1} - X_i - D).
  std::vector<double> error_norms;
  /// |s_bar_{i+1}| / |s_bar_i|; nullopt where both are zero.
  std::vector<std::optional<double>> ratios;
  double max_error = 0.0;       // max over followers and time of |s_bar_i|
  double max_abs_s_hat = 0.0;   // max |s_hat_i|
  std::optional<double> convergence_time;  // first t after which all |s_hat_i| < 0.05
  double min_clearance = std::numeric_limits<double>::infinity();
  double min_center_distance = std::numeric_limits<double>::infinity();
  double final_lane_offset = 0.0;   // max |Y - lane| at the last sample
  double final_window_spread = 0.0; // max over i of (max - min) s_hat_i over the last 10 s
  double duration = 0.0;
  int qp_faults = 0;
  bool collision = false;
};

Metrics compute_metrics(const SimLog& log);

/// max |s_hat_i| for t >= t0 (followers only), and the same for s_bar_i with i >= 2.
double max_abs_s_hat_after(const SimLog& log, double t0);
double max_inter_follower_error_after(const SimLog& log, double t0);

struct DelayContract {
  bool ok = true;
  double min = 0.0;
  double max = 0.0;
  double max_slope = 0.0;
};
/// Bounds and slope of every follower's logged delay.
DelayContract check_delay_contract(const SimLog& log, double lo, double hi, double mu);

struct TimingSummary {
  double mean_solve = 0.0;
  double max_solve = 0.0;
  size_t solves = 0;
};
TimingSummary timing_summary(const SimLog& log);

// ---------------------------------------------------------------------------
// Export

void write_csv(std::ostream& os, const SimLog& log);
void write_events_csv(std::ostream& os, const SimLog& log);
void write_metrics(std::ostream& os, const Metrics& m);
/// Parses the trajectory CSV back; run-level fields (gap, clearance) must be
/// supplied since they are not part of the per-sample columns.
SimLog read_csv(std::istream& is, int vehicles, double gap, double control_dt, double lane_y);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Key-value metrics file as written by write_metrics.
std::vector<std::pair<std::string, std::string>> read_metrics(std::istream& is);

// ---------------------------------------------------------------------------
// Monte Carlo delay traces for the linear closed loop

struct DelayTraceResult {
  std::uint64_t seed = 0;
  double final_ratio = 0.0;           // |X(T)| / |X(0)|
  std::optional<double> time_to_1pct; // first t with |X| < 0.01 |X(0)| thereafter
};

/// Integrates the delayed closed loop under `traces` independent delay
/// channels in [lo, hi] with slope bound mu. Traces run in parallel unless
/// `parallel` is false; results are ordered by trace index either way.
std::vector<DelayTraceResult> monte_carlo_delays(const ucl::PlatoonSystem& sys, const ucl::GainSet& gains,
                                                 const Vector& x0, int traces, std::uint64_t seed, double lo,
                                                 double hi, double mu, double horizon, double dt = 2e-3,
                                                 bool parallel = true);

}  // namespace platoon::sim
