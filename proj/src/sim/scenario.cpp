#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "platoon/sim.hpp"

namespace platoon::sim {

std::string to_string(Mode m) { return m == Mode::Mcf ? "mcf" : "single_mpc"; }

Mode parse_mode(const std::string& s) {
  if (s == "mcf") return Mode::Mcf;
  if (s == "single_mpc") return Mode::SingleMpc;
  throw ConfigError("unknown mode '" + s + "' (expected mcf or single_mpc)");
}

double LeaderProfile::speed(double t) const {
  if (t <= t_step || v1 == v0) return t <= t_step ? v0 : v1;
  const double tt = t - t_step;
  double y;
  if (overshoot > 0.0) {
    const double l = std::log(overshoot);
    const double zeta = -l / std::sqrt(M_PI * M_PI + l * l);
    const double wd = M_PI / peak_time;
    const double wn = wd / std::sqrt(1.0 - zeta * zeta);
    y = 1.0 - std::exp(-zeta * wn * tt) * (std::cos(wd * tt) + zeta / std::sqrt(1.0 - zeta * zeta) * std::sin(wd * tt));
  } else {
    // critically damped, 90% at peak_time
    const double w = 3.9 / peak_time;
    y = 1.0 - std::exp(-w * tt) * (1.0 + w * tt);
  }
  return v0 + (v1 - v0) * y;
}

apf::ObstacleState ObstacleScript::state(double t) const {
  apf::ObstacleState o;
  // longitudinal: constant speed, then a constant-rate change to speed_end
  const double t0 = std::max(t_speed, t_appear);
  const double ramp = speed_end < 0.0 || speed_end == speed ? 0.0 : std::abs(speed_end - speed) / accel;
  const double a = speed_end > speed ? accel : -accel;
  const double before = std::min(t, t0) - t_appear;
  const double during = std::clamp(t - t0, 0.0, ramp);
  const double after = std::max(t - t0 - ramp, 0.0);
  o.X = x_appear + speed * before + speed * during + 0.5 * a * during * during + speed_end * after;
  o.u_bar_o = speed + a * during;
  if (ramp == 0.0) {
    o.X = x_appear + speed * (t - t_appear);
    o.u_bar_o = speed;
  }
  o.Y = y_start;
  if (move_duration > 0.0 && t > t_move) {
    const double f = std::min((t - t_move) / move_duration, 1.0);
    o.Y = y_start + (y_end - y_start) * 0.5 * (1.0 - std::cos(M_PI * f));
    if (f < 1.0) o.v_o = (y_end - y_start) * 0.5 * M_PI / move_duration * std::sin(M_PI * f);
  }
  return o;
}

void ScenarioConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("scenario: " + what);
  };
  need(vehicles >= 2, "vehicles must be >= 2");
  need(gap > 0.0, "gap must be positive");
  need(v_init > 0.0, "initial speed must be positive");
  need(delay_lo >= 0.0 && delay_hi >= delay_lo, "need 0 <= delay lo <= delay hi");
  need(delay_mu >= 0.0 && delay_hold > 0.0, "bad delay slope or hold");
  need(control_dt > 0.0 && physics_dt > 0.0 && physics_dt <= 0.02, "bad time steps");
  const double ratio = control_dt / physics_dt;
  need(std::abs(ratio - std::round(ratio)) < 1e-9, "control period must be a multiple of the physics step");
  need(duration > control_dt, "duration shorter than one control period");
  need(dt_ref > 0.0 && v_max > 0.0, "bad reference lead time or speed cap");
  need(footprint_length > 0.0 && footprint_width > 0.0, "bad footprint");
  need(leader.peak_time > 0.0 && leader.overshoot >= 0.0 && leader.overshoot < 1.0, "bad leader profile");
  need(threads >= 0, "threads must be >= 0");
  for (const auto& o : obstacles) {
    need(o.t_vanish > o.t_appear, "obstacle vanishes before it appears");
    need(o.move_duration >= 0.0, "obstacle move duration negative");
    need(o.accel > 0.0 && o.speed >= 0.0, "bad obstacle speed profile");
    need(o.move_duration == 0.0 || o.t_move >= o.t_appear, "obstacle moves before it appears");
  }
  if (gains.n() != 0) need(gains.n() == followers(), "gain set does not match the follower count");
  try {
    mpc.validate();
    apf.validate();
    vehicle.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void resolve_gains(ScenarioConfig& cfg) {
  if (cfg.gain_file.empty()) {
    cfg.gains = ucl::default_gains(cfg.followers());
    return;
  }
  if (!std::filesystem::exists(cfg.gain_file)) throw ConfigError("gain file not found: " + cfg.gain_file);
  try {
    cfg.gains = ucl::load_gains(cfg.gain_file).gains;
  } catch (const std::exception& e) {
    throw ConfigError("cannot load gain file '" + cfg.gain_file + "': " + e.what());
  }
  if (cfg.gains.n() != cfg.followers())
    throw ConfigError("gain file has " + std::to_string(cfg.gains.n()) + " followers, scenario has " +
                      std::to_string(cfg.followers()));
}

ScenarioConfig scenario_a(bool with_delay) {
  ScenarioConfig c;
  c.name = with_delay ? "scenario_a" : "scenario_a_nodelay";
  c.gap = 20.0;
  c.v_init = 20.0;
  c.leader = {20.0, 22.0, 1.0, 0.1, 2.0};
  c.duration = 30.0;
  if (with_delay) {
    c.delay_lo = 0.05;
    c.delay_hi = 0.15;
  }
  c.seed = 11;
  resolve_gains(c);
  return c;
}

ScenarioConfig scenario_b() {
  ScenarioConfig c;
  c.name = "scenario_b";
  c.gap = 50.0;
  c.v_init = 20.0;
  c.leader = {20.0, 20.0, 0.0, 0.1, 2.0};
  c.duration = 60.0;
  c.delay_lo = 0.015;
  c.delay_hi = 0.15;
  c.seed = 23;
  ObstacleScript merge;
  merge.x_appear = -20.0;
  merge.y_start = -3.75;
  merge.speed = 15.0;
  merge.y_end = 0.0;
  merge.t_move = 0.5;
  merge.move_duration = 3.0;
  c.obstacles.push_back(merge);
  resolve_gains(c);
  return c;
}

ScenarioConfig scenario_c() {
  ScenarioConfig c;
  c.name = "scenario_c";
  c.gap = 50.0;
  c.v_init = 18.0;
  c.leader = {18.0, 18.0, 0.0, 0.1, 2.0};
  c.duration = 100.0;
  c.delay_lo = 0.015;
  c.delay_hi = 0.15;
  c.seed = 37;
  ObstacleScript slow;
  slow.x_appear = 40.0;
  slow.speed = 15.0;
  c.obstacles.push_back(slow);
  // shows up in the passing lane between followers 1 and 2 and holds 17 m/s
  // until follower 2 is stuck behind the slow vehicle, then pulls away
  ObstacleScript blocker;
  blocker.t_appear = 22.0;
  blocker.x_appear = 316.0;
  blocker.y_start = blocker.y_end = 3.75;
  blocker.speed = 17.0;
  blocker.speed_end = 28.0;
  blocker.t_speed = 33.0;
  c.obstacles.push_back(blocker);
  resolve_gains(c);
  return c;
}

// ---------------------------------------------------------------------------
// INI

namespace {

struct Binding {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string fmt(double v) { return numerics::format_exact(v); }

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  }
}

long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return static_cast<long>(d);
}

Binding num(const std::string& key, double& x) {
  return {[&x] { return fmt(x); }, [&x, key](const std::string& v) { x = to_double(key, v); }};
}

Binding integer(const std::string& key, int& x) {
  return {[&x] { return std::to_string(x); }, [&x, key](const std::string& v) { x = static_cast<int>(to_int(key, v)); }};
}

using Table = std::vector<std::pair<std::string, Binding>>;  // "section.key"

Table top_level(ScenarioConfig& c) {
  Table t;
  auto add = [&t](const std::string& k, Binding b) { t.emplace_back(k, std::move(b)); };
  add("scenario.name", {[&c] { return c.name; }, [&c](const std::string& v) { c.name = v; }});
  add("scenario.vehicles", integer("vehicles", c.vehicles));
  add("scenario.gap", num("gap", c.gap));
  add("scenario.v_init", num("v_init", c.v_init));
  add("scenario.lane_y", num("lane_y", c.lane_y));
  add("scenario.duration", num("duration", c.duration));
  add("scenario.control_dt", num("control_dt", c.control_dt));
  add("scenario.physics_dt", num("physics_dt", c.physics_dt));
  add("scenario.seed", {[&c] { return std::to_string(c.seed); },
                        [&c](const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int("seed", v)); }});
  add("scenario.mode", {[&c] { return to_string(c.mode); }, [&c](const std::string& v) { c.mode = parse_mode(v); }});
  add("scenario.threads", integer("threads", c.threads));
  add("leader.v0", num("v0", c.leader.v0));
  add("leader.v1", num("v1", c.leader.v1));
  add("leader.t_step", num("t_step", c.leader.t_step));
  add("leader.overshoot", num("overshoot", c.leader.overshoot));
  add("leader.peak_time", num("peak_time", c.leader.peak_time));
  add("delay.lo", num("lo", c.delay_lo));
  add("delay.hi", num("hi", c.delay_hi));
  add("delay.mu", num("mu", c.delay_mu));
  add("delay.hold", num("hold", c.delay_hold));
  add("ucl.gain_file", {[&c] { return c.gain_file; }, [&c](const std::string& v) { c.gain_file = v; }});
  add("ucl.dt_ref", num("dt_ref", c.dt_ref));
  add("ucl.v_max", num("v_max", c.v_max));
  add("baseline.kp", num("kp", c.baseline_kp));
  add("baseline.kl", num("kl", c.baseline_kl));
  add("safety.footprint_length", num("footprint_length", c.footprint_length));
  add("safety.footprint_width", num("footprint_width", c.footprint_width));
  auto& m = c.mpc;
  add("mpc.Np", integer("Np", m.Np));
  add("mpc.Nc", integer("Nc", m.Nc));
  add("mpc.Ts", num("Ts", m.Ts));
  add("mpc.Q_Y", num("Q_Y", m.Q_Y));
  add("mpc.Q0", num("Q0", m.Q0));
  add("mpc.sigma0", num("sigma0", m.sigma0));
  add("mpc.sigma_j", num("sigma_j", m.sigma_j));
  add("mpc.S_F", num("S_F", m.S_F));
  add("mpc.S_delta", num("S_delta", m.S_delta));
  add("mpc.R_F", num("R_F", m.R_F));
  add("mpc.R_delta", num("R_delta", m.R_delta));
  add("mpc.H", num("H", m.H));
  add("mpc.Q_obs", num("Q_obs", m.Q_obs));
  add("mpc.dFxT_max", num("dFxT_max", m.dFxT_max));
  add("mpc.ddelta_max", num("ddelta_max", m.ddelta_max));
  add("mpc.y_min", num("y_min", m.y_min));
  add("mpc.y_max", num("y_max", m.y_max));
  add("mpc.trust_radius", num("trust_radius", m.trust_radius));
  auto& a = c.apf;
  add("apf.a", num("a", a.a));
  add("apf.b", num("b", a.b));
  add("apf.X0", num("X0", a.X0));
  add("apf.Y0", num("Y0", a.Y0));
  add("apf.T0", num("T0", a.T0));
  add("apf.a_n", num("a_n", a.a_n));
  add("apf.s_min", num("s_min", a.s_min));
  add("apf.pass_offset", num("pass_offset", a.pass_offset));
  add("apf.pass_band", num("pass_band", a.pass_band));
  add("apf.pass_side_y", num("pass_side_y", a.pass_side_y));
  auto& v = c.vehicle;
  add("vehicle.m", num("m", v.m));
  add("vehicle.Iz", num("Iz", v.Iz));
  add("vehicle.lf", num("lf", v.lf));
  add("vehicle.lr", num("lr", v.lr));
  add("vehicle.Caf", num("Caf", v.Caf));
  add("vehicle.Car", num("Car", v.Car));
  add("vehicle.delta_max", num("delta_max", v.delta_max));
  add("vehicle.FxT_max", num("FxT_max", v.FxT_max));
  return t;
}

Table obstacle_keys(ObstacleScript& o) {
  return {{"t_appear", num("t_appear", o.t_appear)},   {"x_appear", num("x_appear", o.x_appear)},
          {"y_start", num("y_start", o.y_start)},      {"speed", num("speed", o.speed)},
          {"speed_end", num("speed_end", o.speed_end)}, {"t_speed", num("t_speed", o.t_speed)},
          {"accel", num("accel", o.accel)},
          {"y_end", num("y_end", o.y_end)},            {"t_move", num("t_move", o.t_move)},
          {"move_duration", num("move_duration", o.move_duration)},
          {"t_vanish", num("t_vanish", o.t_vanish)}};
}

}  // namespace

ScenarioConfig parse_scenario(std::istream& is, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed scenario file: ") + e.what());
  }
  ScenarioConfig c;
  Table table = top_level(c);
  std::map<std::string, Binding*> index;
  for (auto& [k, b] : table) index[k] = &b;

  // obstacle sections are [obstacle.N], applied in order of N
  std::map<int, const pt::ptree*> obstacle_sections;
  for (const auto& [section, body] : tree) {
    if (section.rfind("obstacle.", 0) == 0) {
      const std::string n = section.substr(9);
      obstacle_sections[static_cast<int>(to_int(section, n))] = &body;
      continue;
    }
    for (const auto& [key, value] : body) {
      const auto it = index.find(section + "." + key);
      if (it == index.end()) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
      it->second->set(value.data());
    }
  }
  for (const auto& [n, body] : obstacle_sections) {
    ObstacleScript o;
    Table keys = obstacle_keys(o);
    for (const auto& [key, value] : *body) {
      auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; });
      if (it == keys.end()) throw ConfigError("unknown key '" + key + "' in section [obstacle." + std::to_string(n) + "]");
      it->second.set(value.data());
    }
    c.obstacles.push_back(o);
  }
  if (!c.gain_file.empty() && std::filesystem::path(c.gain_file).is_relative())
    c.gain_file = (std::filesystem::path(base_dir) / c.gain_file).lexically_normal().string();
  resolve_gains(c);
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open scenario file '" + path + "'");
  return parse_scenario(is, std::filesystem::path(path).parent_path().string());
}

void write_scenario(std::ostream& os, const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  Table table = top_level(c);
  std::string section;
  for (const auto& [k, b] : table) {
    const auto dot = k.find('.');
    const std::string s = k.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << k.substr(dot + 1) << " = " << b.get() << '\n';
  }
  for (size_t j = 0; j < c.obstacles.size(); ++j) {
    os << "\n[obstacle." << j + 1 << "]\n";
    for (const auto& [k, b] : obstacle_keys(c.obstacles[j])) os << k << " = " << b.get() << '\n';
  }
}

}  // namespace platoon::sim
