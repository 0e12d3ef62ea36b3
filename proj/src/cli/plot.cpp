#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

#include "platoon/cli.hpp"

namespace platoon::cli {

Bitmap::Bitmap(int width, int height) : w_(width), h_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("Bitmap: empty size");
  px_.assign(static_cast<size_t>(width) * static_cast<size_t>(height), 0);
}

void Bitmap::set(int x, int y) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  px_[static_cast<size_t>(y) * static_cast<size_t>(w_) + static_cast<size_t>(x)] = 1;
}

bool Bitmap::get(int x, int y) const {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return false;
  return px_[static_cast<size_t>(y) * static_cast<size_t>(w_) + static_cast<size_t>(x)] != 0;
}

void Bitmap::line(int x0, int y0, int x1, int y1, std::uint16_t pattern) { line_from(x0, y0, x1, y1, pattern, 0); }

int Bitmap::line_from(int x0, int y0, int x1, int y1, std::uint16_t pattern, int phase) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int e = dx + dy;
  for (;;) {
    if (pattern >> (phase & 15) & 1u) set(x0, y0);
    ++phase;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * e;
    if (e2 >= dy) {
      e += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      e += dx;
      y0 += sy;
    }
  }
  return phase;
}

void Bitmap::write_pbm(std::ostream& os) const {
  os << "P4\n" << w_ << ' ' << h_ << '\n';
  const int row_bytes = (w_ + 7) / 8;
  std::vector<char> row(static_cast<size_t>(row_bytes));
  for (int y = 0; y < h_; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < w_; ++x)
      if (get(x, y)) row[static_cast<size_t>(x / 8)] |= static_cast<char>(0x80 >> (x % 8));
    os.write(row.data(), row_bytes);
  }
}

namespace {

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(double pad) {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double p = pad * (hi - lo);
    lo -= p;
    hi += p;
  }
};

}  // namespace

Bitmap render_plot(const std::vector<Series>& series, int width, int height) {
  constexpr int kLeft = 50, kRight = 15, kTop = 15, kBottom = 35;
  Bitmap bm(width, height);
  const int x0 = kLeft, x1 = width - kRight, y0 = kTop, y1 = height - kBottom;
  if (x1 - x0 < 10 || y1 - y0 < 10) throw std::invalid_argument("render_plot: canvas too small");

  Range rx, ry;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_plot: x and y differ in length");
    for (size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      rx.add(s.x[k]);
      ry.add(s.y[k]);
    }
  }
  rx.finish(0.0);
  ry.finish(0.05);
  auto px = [&](double x) { return x0 + static_cast<int>(std::lround((x - rx.lo) / (rx.hi - rx.lo) * (x1 - x0))); };
  auto py = [&](double y) { return y1 - static_cast<int>(std::lround((y - ry.lo) / (ry.hi - ry.lo) * (y1 - y0))); };

  bm.line(x0, y0, x1, y0);
  bm.line(x1, y0, x1, y1);
  bm.line(x1, y1, x0, y1);
  bm.line(x0, y1, x0, y0);
  const double sx = nice_step(rx.hi - rx.lo, 6), sy = nice_step(ry.hi - ry.lo, 5);
  for (double v = std::ceil(rx.lo / sx) * sx; v <= rx.hi + 1e-9 * sx; v += sx) bm.line(px(v), y1, px(v), y1 + 5);
  for (double v = std::ceil(ry.lo / sy) * sy; v <= ry.hi + 1e-9 * sy; v += sy) bm.line(x0 - 5, py(v), x0, py(v));
  if (ry.lo < 0.0 && ry.hi > 0.0) bm.line(x0, py(0.0), x1, py(0.0), 0x0303);

  static const std::uint16_t patterns[] = {0xFFFF, 0x00FF, 0x3333, 0x0FFF, 0x1111, 0x33FF, 0x0F0F};
  for (size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const std::uint16_t pat = patterns[i % (sizeof patterns / sizeof patterns[0])];
    int phase = 0;
    bool have = false;
    int lx = 0, ly = 0;
    for (size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
        have = false;
        continue;
      }
      const int cx = px(s.x[k]), cy = py(s.y[k]);
      if (have && (cx != lx || cy != ly)) phase = bm.line_from(lx, ly, cx, cy, pat, phase) - 1;
      if (!have) bm.set(cx, cy);
      have = true;
      lx = cx;
      ly = cy;
    }
  }
  return bm;
}

std::vector<Figure> standard_figures(const sim::SimLog& log) {
  std::map<int, std::vector<const sim::SimRecord*>> by_id;
  for (const auto& r : log.records) by_id[r.id].push_back(&r);

  auto label = [&](int id) {
    if (id == 0) return std::string("leader");
    if (id >= sim::kObstacleIdBase) return "obstacle " + std::to_string(id - sim::kObstacleIdBase);
    return "follower " + std::to_string(id);
  };
  auto make = [&](const std::string& name, bool followers_only, bool obstacles, auto xf, auto yf) {
    Figure f{name, {}};
    for (const auto& [id, recs] : by_id) {
      const bool obstacle = id >= sim::kObstacleIdBase;
      if (obstacle && !obstacles) continue;
      if (!obstacle && followers_only && id == 0) continue;
      Series s{label(id), {}, {}};
      for (const auto* r : recs) {
        s.x.push_back(xf(*r));
        s.y.push_back(yf(*r));
      }
      f.series.push_back(std::move(s));
    }
    return f;
  };
  auto t = [](const sim::SimRecord& r) { return r.t; };
  std::vector<Figure> out;
  out.push_back(make("position_error", true, false, t, [](const sim::SimRecord& r) { return r.s_hat; }));
  out.push_back(make("velocity", false, false, t, [](const sim::SimRecord& r) { return r.state.u_bar; }));
  out.push_back(make("trajectories", false, true, [](const sim::SimRecord& r) { return r.state.X; },
                     [](const sim::SimRecord& r) { return r.state.Y; }));
  out.push_back(make("commands", false, false, t, [](const sim::SimRecord& r) { return r.command.FxT / 1000.0; }));
  out.push_back(make("q_ref", false, false, t, [](const sim::SimRecord& r) { return r.q_ref; }));
  out.push_back(make("delay", true, false, t, [](const sim::SimRecord& r) { return r.lambda; }));
  return out;
}

void write_plot_data(std::ostream& os, const std::vector<Figure>& figures) {
  os << "figure,series,x,y\n";
  for (const auto& f : figures)
    for (const auto& s : f.series)
      for (size_t k = 0; k < s.x.size(); ++k)
        os << f.name << ',' << s.label << ',' << numerics::format_exact(s.x[k]) << ','
           << numerics::format_exact(s.y[k]) << '\n';
}

}  // namespace platoon::cli
