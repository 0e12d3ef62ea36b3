#include <algorithm>
#include <cmath>

#include "platoon/ucl.hpp"

namespace platoon::ucl {

ErrorState build_error_state(const LongitudinalState& leader, const LongitudinalState& follower, int index,
                             double desired_gap) {
  if (index < 1) throw std::invalid_argument("build_error_state: follower index must be >= 1");
  return {leader.s - follower.s - index * desired_gap, leader.v - follower.v, leader.a - follower.a};
}

PlatoonSystem assemble_platoon(int n, double tau, double h1, double mu1, double gamma) {
  if (n < 1) throw std::invalid_argument("assemble_platoon: n must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("assemble_platoon: tau must be positive");
  if (!(h1 > 0.0)) throw std::invalid_argument("assemble_platoon: h1 must be positive");
  if (!(mu1 > 0.0 && mu1 < 1.0)) throw std::invalid_argument("assemble_platoon: mu1 must lie in (0, 1)");
  if (!(gamma > 0.0)) throw std::invalid_argument("assemble_platoon: gamma must be positive");

  Matrix a(3, 3), bu(3, 1), bw(3, 2), c(1, 3);
  a << 0, 1, 0,
       0, 0, 1,
       0, 0, -1.0 / tau;
  bu << 0, 0, -1.0 / tau;
  bw << 0, 0,
        0, 0,
        1.0 / tau, 1.0;
  c << 1, 0, 0;

  PlatoonSystem sys;
  sys.n = n;
  sys.tau = tau;
  sys.h1 = h1;
  sys.mu1 = mu1;
  sys.gamma = gamma;
  const Matrix eye = Matrix::Identity(n, n);
  sys.A = numerics::kron(eye, a);
  sys.Bu = numerics::kron(eye, bu);
  sys.Bw = numerics::kron(eye, bw);
  sys.C = numerics::kron(eye, c);
  return sys;
}

Matrix GainSet::stacked() const {
  const int m = n();
  if (static_cast<int>(k2.size()) != m) throw std::invalid_argument("GainSet: k1 and k2 differ in length");
  Matrix k = Matrix::Zero(m, 3 * m);
  for (int i = 0; i < m; ++i) {
    k.block(i, 3 * i, 1, 3) = k1[static_cast<size_t>(i)];
    if (i > 0) k.block(i, 3 * (i - 1), 1, 3) = k2[static_cast<size_t>(i)];
  }
  return k;
}

GainSet GainSet::from_stacked(const Matrix& k) {
  const int m = static_cast<int>(k.rows());
  if (k.cols() != 3 * m) throw std::invalid_argument("GainSet::from_stacked: expected n x 3n");
  GainSet g;
  for (int i = 0; i < m; ++i) {
    g.k1.emplace_back(k.block(i, 3 * i, 1, 3));
    g.k2.emplace_back(i > 0 ? Gain(k.block(i, 3 * (i - 1), 1, 3)) : Gain::Zero());
  }
  return g;
}

GainSet GainSet::uniform(int n, const Gain& k1, const Gain& k2) {
  GainSet g;
  g.k1.assign(static_cast<size_t>(n), k1);
  g.k2.assign(static_cast<size_t>(n), k2);
  return g;
}

GainSet default_gains(int n) { return GainSet::uniform(n, Gain(2.156, 3.175, 0.998), Gain(0.306, 0.239, 0.065)); }

double feedback_command(const GainSet& gains, const ErrorState& own_delayed, const std::optional<ErrorState>& pred_delayed,
                        int index) {
  if (index < 1 || index > gains.n()) throw std::out_of_range("feedback_command: follower index out of range");
  const size_t i = static_cast<size_t>(index - 1);
  double u = gains.k1[i].dot(own_delayed.vec());
  if (index > 1 && pred_delayed) u += gains.k2[i].dot(pred_delayed->vec());
  return u;
}

double reference_velocity(const LongitudinalState& follower, double command, double dt_ref, double v_max) {
  if (!(dt_ref > 0.0)) throw std::invalid_argument("reference_velocity: dt_ref must be positive");
  return std::clamp(follower.v + command * dt_ref, 0.0, v_max);
}

double StabilityCertificate::worst_margin() const {
  return margins.empty() ? 0.0 : *std::max_element(margins.begin(), margins.end());
}

SynthesisInfeasible::SynthesisInfeasible(double h, double mu, double g, const std::string& why)
    : std::runtime_error("synthesis infeasible at h1=" + std::to_string(h) + " mu1=" + std::to_string(mu) +
                         " gamma=" + std::to_string(g) + ": " + why),
      h1(h),
      mu1(mu),
      gamma(g) {}

VerificationFailed::VerificationFailed(std::string b, double m, const std::string& why)
    : std::runtime_error("verification failed (worst block '" + b + "', margin " + std::to_string(m) + "): " + why),
      block(std::move(b)),
      margin(m) {}

}  // namespace platoon::ucl
