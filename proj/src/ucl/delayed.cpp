#include <algorithm>
#include <cmath>

#include "platoon/ucl.hpp"

namespace platoon::ucl {

void StateHistory::push(double t, const Vector& x) {
  if (size() > 0 && t < times_.back()) throw std::invalid_argument("StateHistory::push: time went backwards");
  times_.push_back(t);
  values_.push_back(x);
  while (size() > 2 && times_[head_ + 1] < t - span_) ++head_;
  // compact once the dead prefix dominates
  if (head_ > 1024 && head_ * 2 > times_.size()) {
    times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(head_));
    values_.erase(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
}

Vector StateHistory::at(double t) const {
  if (size() == 0) throw std::logic_error("StateHistory::at on empty history");
  if (t <= times_[head_]) return values_[head_];
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin() + static_cast<std::ptrdiff_t>(head_), times_.end(), t);
  const size_t hi = static_cast<size_t>(it - times_.begin());
  const size_t lo = hi - 1;
  const double span = times_[hi] - times_[lo];
  const double w = span > 0.0 ? (t - times_[lo]) / span : 1.0;
  return (1.0 - w) * values_[lo] + w * values_[hi];
}

DelayedRun simulate_delayed(const PlatoonSystem& sys, const GainSet& gains, const Vector& x0,
                            const std::function<double(double)>& delay, double horizon, double dt) {
  if (x0.size() != sys.A.rows()) throw std::invalid_argument("simulate_delayed: initial state has wrong size");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("simulate_delayed: bad time step or horizon");
  const Matrix bk = sys.Bu * gains.stacked();
  StateHistory hist(sys.h1 + 10.0 * dt);
  Vector x = x0;
  hist.push(0.0, x);
  DelayedRun run;
  run.t.push_back(0.0);
  run.norm.push_back(x.norm());

  // The delayed argument inside a step is taken from the stored history;
  // when t - lambda falls inside the current step the newest sample is used.
  auto f = [&](double t, const Vector& xs) -> Vector {
    const double lag = std::clamp(delay(t), 0.0, sys.h1);
    return sys.A * xs + bk * hist.at(t - lag);
  };
  const int steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vector k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vector k4 = f(t + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    hist.push(t + dt, x);
    run.t.push_back(t + dt);
    run.norm.push_back(x.norm());
  }
  return run;
}

}  // namespace platoon::ucl
