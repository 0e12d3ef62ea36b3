#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "platoon/sim.hpp"

namespace platoon::sim {

namespace {

const char* const kHeader = "t,vehicle_id,X,Y,u_bar,v,r,phi,s_hat,v_hat,FxT,delta,Q_ref,lambda_t,apf_max";

std::string num(double v) { return numerics::format_exact(v); }

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

double parse(const std::string& s, size_t line) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw FormatError("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::ostream& os, const SimLog& log) {
  os << kHeader << '\n';
  for (const SimRecord& r : log.records) {
    const auto& s = r.state;
    os << num(r.t) << ',' << r.id << ',' << num(s.X) << ',' << num(s.Y) << ',' << num(s.u_bar) << ',' << num(s.v)
       << ',' << num(s.r) << ',' << num(s.phi) << ',' << num(r.s_hat) << ',' << num(r.v_hat) << ','
       << num(r.command.FxT) << ',' << num(r.command.delta) << ',' << num(r.q_ref) << ',' << num(r.lambda) << ','
       << num(r.apf_max) << '\n';
  }
}

void write_events_csv(std::ostream& os, const SimLog& log) {
  os << "t,kind,vehicle_id,detail\n";
  for (const SimEvent& e : log.events) os << num(e.t) << ',' << e.kind << ',' << e.id << ',' << e.detail << '\n';
}

SimLog read_csv(std::istream& is, int vehicles, double gap, double control_dt, double lane_y) {
  SimLog log;
  log.vehicles = vehicles;
  log.gap = gap;
  log.control_dt = control_dt;
  log.lane_y = lane_y;
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw FormatError("trajectory CSV: unexpected header");
  size_t ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 15) throw FormatError("line " + std::to_string(ln) + ": expected 15 fields");
    SimRecord r;
    r.t = parse(f[0], ln);
    r.id = static_cast<int>(parse(f[1], ln));
    r.state = {parse(f[4], ln), parse(f[5], ln), parse(f[6], ln), parse(f[7], ln), parse(f[2], ln), parse(f[3], ln)};
    r.s_hat = parse(f[8], ln);
    r.v_hat = parse(f[9], ln);
    r.command = {parse(f[10], ln), parse(f[11], ln)};
    r.q_ref = parse(f[12], ln);
    r.lambda = parse(f[13], ln);
    r.apf_max = parse(f[14], ln);
    if (!log.records.empty() && r.t < log.records.back().t) throw FormatError("line " + std::to_string(ln) + ": time went backwards");
    log.records.push_back(r);
  }
  return log;
}

void write_metrics(std::ostream& os, const Metrics& m) {
  os << "vehicles = " << m.vehicles << '\n';
  os << "duration = " << num(m.duration) << '\n';
  for (size_t i = 0; i < m.error_norms.size(); ++i) os << "error_norm_" << i + 1 << " = " << num(m.error_norms[i]) << '\n';
  for (size_t i = 0; i < m.ratios.size(); ++i)
    os << "ratio_" << i + 2 << '_' << i + 1 << " = " << opt(m.ratios[i]) << '\n';
  os << "max_error = " << num(m.max_error) << '\n';
  os << "max_abs_s_hat = " << num(m.max_abs_s_hat) << '\n';
  os << "convergence_time = " << opt(m.convergence_time) << '\n';
  os << "min_clearance = " << num(m.min_clearance) << '\n';
  os << "min_center_distance = " << num(m.min_center_distance) << '\n';
  os << "final_lane_offset = " << num(m.final_lane_offset) << '\n';
  os << "final_window_spread = " << num(m.final_window_spread) << '\n';
  os << "qp_faults = " << m.qp_faults << '\n';
  os << "collision = " << (m.collision ? 1 : 0) << '\n';
}

std::vector<std::pair<std::string, std::string>> read_metrics(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t ln = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("metrics line " + std::to_string(ln) + ": expected key = value");
    const std::string k = trim(t.substr(0, eq));
    if (k.empty()) throw FormatError("metrics line " + std::to_string(ln) + ": empty key");
    out.emplace_back(k, trim(t.substr(eq + 1)));
  }
  return out;
}

}  // namespace platoon::sim
