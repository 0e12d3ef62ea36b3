#include "platoon/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace platoon::dynamics {

void VehicleParams::validate() const {
  const double fields[] = {m, Iz, lf, lr, Caf, Car, delta_max, FxT_max};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("VehicleParams: every field must be positive");
  }
}

StateVec VehicleState::vec() const {
  StateVec x;
  x << u_bar, v, r, phi, X, Y;
  return x;
}

VehicleState VehicleState::from(const StateVec& x) { return {x[0], x[1], x[2], x[3], x[4], x[5]}; }

VelocityFloorViolated::VelocityFloorViolated(double u)
    : std::runtime_error("longitudinal speed " + std::to_string(u) + " m/s is below the model floor"), u_bar(u) {}

TireForces tire_forces(const VehicleState& s, double delta, const VehicleParams& p) {
  if (!(s.u_bar >= kVelocityFloor)) throw VelocityFloorViolated(s.u_bar);
  return {p.Caf * (delta - (s.v + p.lf * s.r) / s.u_bar), p.Car * (-(s.v - p.lr * s.r) / s.u_bar)};
}

StateVec derivatives(const VehicleState& s, const ControlCommand& cmd, const VehicleParams& p) {
  const TireForces f = tire_forces(s, cmd.delta, p);
  const double c = std::cos(s.phi), sn = std::sin(s.phi);
  StateVec d;
  d[0] = s.v * s.r + cmd.FxT / p.m;
  d[1] = -s.u_bar * s.r + (f.Fyf + f.Fyr) / p.m;
  d[2] = (p.lf * f.Fyf - p.lr * f.Fyr) / p.Iz;
  d[3] = s.r;
  d[4] = s.u_bar * c - s.v * sn;
  d[5] = s.u_bar * sn + s.v * c;
  return d;
}

Jacobians jacobians(const VehicleState& s, const ControlCommand& /*cmd*/, const VehicleParams& p) {
  if (!(s.u_bar >= kVelocityFloor)) throw VelocityFloorViolated(s.u_bar);
  const double u = s.u_bar, u2 = u * u;
  // partials of the tire forces w.r.t. (u, v, r, delta)
  const double ff_u = p.Caf * (s.v + p.lf * s.r) / u2;
  const double ff_v = -p.Caf / u;
  const double ff_r = -p.Caf * p.lf / u;
  const double ff_d = p.Caf;
  const double fr_u = p.Car * (s.v - p.lr * s.r) / u2;
  const double fr_v = -p.Car / u;
  const double fr_r = p.Car * p.lr / u;

  Jacobians j;
  j.A.setZero();
  j.B.setZero();
  const double c = std::cos(s.phi), sn = std::sin(s.phi);

  j.A(0, 1) = s.r;
  j.A(0, 2) = s.v;
  j.B(0, 0) = 1.0 / p.m;

  j.A(1, 0) = -s.r + (ff_u + fr_u) / p.m;
  j.A(1, 1) = (ff_v + fr_v) / p.m;
  j.A(1, 2) = -u + (ff_r + fr_r) / p.m;
  j.B(1, 1) = ff_d / p.m;

  j.A(2, 0) = (p.lf * ff_u - p.lr * fr_u) / p.Iz;
  j.A(2, 1) = (p.lf * ff_v - p.lr * fr_v) / p.Iz;
  j.A(2, 2) = (p.lf * ff_r - p.lr * fr_r) / p.Iz;
  j.B(2, 1) = p.lf * ff_d / p.Iz;

  j.A(3, 2) = 1.0;

  j.A(4, 0) = c;
  j.A(4, 1) = -sn;
  j.A(4, 3) = -u * sn - s.v * c;

  j.A(5, 0) = sn;
  j.A(5, 1) = c;
  j.A(5, 3) = u * c - s.v * sn;
  return j;
}

VehicleState step(const VehicleState& s, const ControlCommand& cmd, double dt, const VehicleParams& p) {
  if (!(dt > 0.0) || dt > 0.02) throw std::invalid_argument("dynamics::step: dt must lie in (0, 0.02]");
  const StateVec x = s.vec();
  const StateVec k1 = derivatives(s, cmd, p);
  const StateVec k2 = derivatives(VehicleState::from(x + 0.5 * dt * k1), cmd, p);
  const StateVec k3 = derivatives(VehicleState::from(x + 0.5 * dt * k2), cmd, p);
  const StateVec k4 = derivatives(VehicleState::from(x + dt * k3), cmd, p);
  const VehicleState out = VehicleState::from(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  if (!(out.u_bar >= kVelocityFloor)) throw VelocityFloorViolated(out.u_bar);
  return out;
}

ControlCommand saturate(const ControlCommand& cmd, const VehicleParams& p) {
  return {std::clamp(cmd.FxT, -p.FxT_max, p.FxT_max), std::clamp(cmd.delta, -p.delta_max, p.delta_max)};
}

LinearModel linearize_discretize(const VehicleState& s, const ControlCommand& cmd, const VehicleParams& p, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("linearize_discretize: Ts must be positive");
  const Jacobians j = jacobians(s, cmd, p);
  const Matrix ac = j.A;
  const Matrix i = Matrix::Identity(kStateDim, kStateDim);
  const Matrix ac2 = ac * ac;
  const Matrix ac3 = ac2 * ac;

  LinearModel lm;
  lm.Ts = Ts;
  lm.x0 = s;
  lm.u0 = cmd;
  lm.A_M = i + ac * Ts + ac2 * (Ts * Ts / 2.0) + ac3 * (Ts * Ts * Ts / 6.0);
  const Matrix gamma = i * Ts + ac * (Ts * Ts / 2.0) + ac2 * (Ts * Ts * Ts / 6.0);
  lm.B_M = gamma * j.B;
  const Vector f0 = derivatives(s, cmd, p);
  lm.c = (i - lm.A_M) * Vector(s.vec()) - lm.B_M * Vector(cmd.vec()) + gamma * f0;
  lm.C_M = Matrix::Zero(2, kStateDim);
  lm.C_M(kOutY, 5) = 1.0;
  lm.C_M(kOutU, 0) = 1.0;
  return lm;
}

}  // namespace platoon::dynamics
