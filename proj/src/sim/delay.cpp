#include <algorithm>
#include <cmath>

#include "platoon/detail/omp.hpp"
#include "platoon/sim.hpp"

namespace platoon::sim {

DelayChannel::DelayChannel(double lo, double hi, double mu, std::uint64_t seed, double hold)
    : lo_(lo), hi_(hi), mu_(mu), hold_(hold), rng_(seed) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw ConfigError("DelayChannel: need 0 <= lo <= hi");
  if (!(mu >= 0.0)) throw ConfigError("DelayChannel: slope bound must be non-negative");
  if (!(hold > 0.0)) throw ConfigError("DelayChannel: hold must be positive");
  lambda_ = std::uniform_real_distribution<double>(lo_, hi_)(rng_);
  eta_ = std::uniform_real_distribution<double>(-mu_, mu_)(rng_);
  next_draw_ = hold_;
}

double DelayChannel::sample(double t) {
  if (hi_ == lo_) return lo_;
  while (t_ < t) {
    const double until = std::min(t, next_draw_);
    lambda_ = std::clamp(lambda_ + eta_ * (until - t_), lo_, hi_);
    t_ = until;
    if (t_ >= next_draw_) {
      eta_ = std::uniform_real_distribution<double>(-mu_, mu_)(rng_);
      next_draw_ += hold_;
    }
  }
  return lambda_;
}

Vector delayed_read(const ucl::StateHistory& history, double t, double lambda) { return history.at(t - lambda); }

std::vector<DelayTraceResult> monte_carlo_delays(const ucl::PlatoonSystem& sys, const ucl::GainSet& gains,
                                                 const Vector& x0, int traces, std::uint64_t seed, double lo,
                                                 double hi, double mu, double horizon, double dt, bool parallel) {
  if (traces < 0) throw std::invalid_argument("monte_carlo_delays: negative trace count");
  std::vector<DelayTraceResult> out(static_cast<size_t>(traces));
  const double n0 = x0.norm();
  auto one = [&](int i) {
    const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    DelayChannel ch(lo, hi, mu, s);
    const ucl::DelayedRun run = ucl::simulate_delayed(sys, gains, x0, [&](double t) { return ch.sample(t); }, horizon, dt);
    DelayTraceResult r;
    r.seed = s;
    r.final_ratio = n0 > 0.0 ? run.norm.back() / n0 : 0.0;
    // last sample at or above 1%; everything after it stays below
    std::ptrdiff_t last_above = -1;
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(run.norm.size()) - 1; k >= 0; --k) {
      if (run.norm[static_cast<size_t>(k)] >= 0.01 * n0) {
        last_above = k;
        break;
      }
    }
    if (last_above + 1 < static_cast<std::ptrdiff_t>(run.norm.size())) r.time_to_1pct = run.t[static_cast<size_t>(last_above + 1)];
    out[static_cast<size_t>(i)] = r;
  };
  if (parallel) {
    PLATOON_OMP(omp parallel for schedule(dynamic))
    for (int i = 0; i < traces; ++i) one(i);
  } else {
    for (int i = 0; i < traces; ++i) one(i);
  }
  return out;
}

}  // namespace platoon::sim
