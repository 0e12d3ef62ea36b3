#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "platoon/sim.hpp"

namespace platoon::sim {

namespace {

constexpr double kConverged = 0.05;  // m
constexpr double kFinalWindow = 10.0;  // s

/// Platoon samples indexed [time][vehicle].
struct Grid {
  std::vector<double> t;
  std::vector<std::vector<const SimRecord*>> rows;
};

Grid platoon_grid(const SimLog& log) {
  Grid g;
  for (const SimRecord& r : log.records) {
    if (r.id < 0 || r.id >= log.vehicles) continue;
    if (g.t.empty() || r.t != g.t.back()) {
      g.t.push_back(r.t);
      g.rows.emplace_back(static_cast<size_t>(log.vehicles), nullptr);
    }
    g.rows.back()[static_cast<size_t>(r.id)] = &r;
  }
  for (const auto& row : g.rows)
    for (const SimRecord* p : row)
      if (!p) throw std::invalid_argument("compute_metrics: incomplete time sample in log");
  return g;
}

double s_bar(const std::vector<const SimRecord*>& row, int i, double gap) {
  return row[static_cast<size_t>(i - 1)]->state.X - row[static_cast<size_t>(i)]->state.X - gap;
}

}  // namespace

Metrics compute_metrics(const SimLog& log) {
  const Grid g = platoon_grid(log);
  const int n = log.vehicles;
  Metrics m;
  m.vehicles = n;
  m.error_norms.assign(static_cast<size_t>(std::max(n - 1, 0)), 0.0);
  for (const auto& row : g.rows) {
    for (int i = 1; i < n; ++i) {
      m.error_norms[i - 1] = std::max(m.error_norms[i - 1], std::abs(s_bar(row, i, log.gap)));
      m.max_abs_s_hat = std::max(m.max_abs_s_hat, std::abs(row[i]->s_hat));
    }
  }
  for (size_t i = 1; i < m.error_norms.size(); ++i) {
    const double num = m.error_norms[i], den = m.error_norms[i - 1];
    if (num == 0.0 && den == 0.0)
      m.ratios.push_back(std::nullopt);
    else
      m.ratios.push_back(den == 0.0 ? std::numeric_limits<double>::infinity() : num / den);
  }
  m.max_error = m.error_norms.empty() ? 0.0 : *std::max_element(m.error_norms.begin(), m.error_norms.end());

  // convergence: the sample after the last one with any |s_hat| >= threshold
  std::optional<size_t> last_bad;
  for (size_t k = 0; k < g.rows.size(); ++k) {
    for (int i = 1; i < n; ++i) {
      if (std::abs(g.rows[k][i]->s_hat) >= kConverged) last_bad = k;
    }
  }
  if (!last_bad)
    m.convergence_time = g.t.empty() ? std::nullopt : std::optional<double>(g.t.front());
  else if (*last_bad + 1 < g.t.size())
    m.convergence_time = g.t[*last_bad + 1];

  m.min_clearance = log.min_clearance;
  m.min_center_distance = log.min_center_distance;
  if (!g.t.empty()) {
    m.duration = g.t.back();
    for (int i = 0; i < n; ++i)
      m.final_lane_offset = std::max(m.final_lane_offset, std::abs(g.rows.back()[i]->state.Y - log.lane_y));
    for (int i = 1; i < n; ++i) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (size_t k = 0; k < g.rows.size(); ++k) {
        if (g.t[k] < g.t.back() - kFinalWindow) continue;
        lo = std::min(lo, g.rows[k][i]->s_hat);
        hi = std::max(hi, g.rows[k][i]->s_hat);
      }
      m.final_window_spread = std::max(m.final_window_spread, hi - lo);
    }
  }
  m.qp_faults = static_cast<int>(std::count_if(log.events.begin(), log.events.end(),
                                               [](const SimEvent& e) { return e.kind == "qp_fault"; }));
  m.collision = log.status == RunStatus::Collision;
  return m;
}

double max_abs_s_hat_after(const SimLog& log, double t0) {
  double v = 0.0;
  for (const SimRecord& r : log.records)
    if (r.id >= 1 && r.id < log.vehicles && r.t >= t0) v = std::max(v, std::abs(r.s_hat));
  return v;
}

double max_inter_follower_error_after(const SimLog& log, double t0) {
  const Grid g = platoon_grid(log);
  double v = 0.0;
  for (size_t k = 0; k < g.rows.size(); ++k) {
    if (g.t[k] < t0) continue;
    for (int i = 2; i < log.vehicles; ++i) v = std::max(v, std::abs(s_bar(g.rows[k], i, log.gap)));
  }
  return v;
}

DelayContract check_delay_contract(const SimLog& log, double lo, double hi, double mu) {
  DelayContract c;
  c.min = std::numeric_limits<double>::infinity();
  c.max = -c.min;
  std::map<int, const SimRecord*> last;
  for (const SimRecord& r : log.records) {
    if (r.id < 1 || r.id >= log.vehicles) continue;
    c.min = std::min(c.min, r.lambda);
    c.max = std::max(c.max, r.lambda);
    auto it = last.find(r.id);
    if (it != last.end() && r.t > it->second->t)
      c.max_slope = std::max(c.max_slope, std::abs(r.lambda - it->second->lambda) / (r.t - it->second->t));
    last[r.id] = &r;
  }
  if (last.empty()) c.min = c.max = 0.0;
  c.ok = c.min >= lo && c.max <= hi && c.max_slope <= mu * (1.0 + 1e-9);
  return c;
}

TimingSummary timing_summary(const SimLog& log) {
  TimingSummary s;
  s.solves = log.solve_seconds.size();
  if (s.solves == 0) return s;
  s.mean_solve = std::accumulate(log.solve_seconds.begin(), log.solve_seconds.end(), 0.0) / static_cast<double>(s.solves);
  s.max_solve = *std::max_element(log.solve_seconds.begin(), log.solve_seconds.end());
  return s;
}

}  // namespace platoon::sim
