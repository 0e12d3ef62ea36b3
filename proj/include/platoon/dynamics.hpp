#pragma once

// Planar single-track (bicycle) truck model with linear tires:
//
//   m (du/dt - v r) = FxT
//   m (dv/dt + u r) = Fyf + Fyr
//   Iz dr/dt        = lf Fyf - lr Fyr
//   dphi/dt = r,  dX/dt = u cos(phi) - v sin(phi),  dY/dt = u sin(phi) + v cos(phi)
//
// State order everywhere is [u_bar, v, r, phi, X, Y], input order [FxT, delta].

#include <stdexcept>

#include <Eigen/Dense>

#include "platoon/numerics.hpp"

namespace platoon::dynamics {

using numerics::Matrix;
using numerics::Vector;

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;
/// Below this longitudinal speed the slip-angle formulas blow up.
inline constexpr double kVelocityFloor = 0.1;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using InputVec = Eigen::Matrix<double, kInputDim, 1>;

struct VehicleParams {
  double m = 5760.0;       // kg
  double Iz = 34802.6;     // kg m^2
  double lf = 1.11;        // m
  double lr = 3.89;        // m
  double Caf = 259752.0;   // N/rad
  double Car = 260000.0;   // N/rad
  double delta_max = 0.5;  // rad
  double FxT_max = 20000.0;  // N

  /// Throws std::invalid_argument unless every field is positive.
  void validate() const;
};

struct VehicleState {
  double u_bar = 0.0;  // longitudinal speed, m/s
  double v = 0.0;      // lateral speed, m/s
  double r = 0.0;      // yaw rate, rad/s
  double phi = 0.0;    // heading, rad
  double X = 0.0;      // m
  double Y = 0.0;      // m

  StateVec vec() const;
  static VehicleState from(const StateVec& x);
};

struct ControlCommand {
  double FxT = 0.0;    // total longitudinal tire force, N
  double delta = 0.0;  // front steer angle, rad

  InputVec vec() const { return {FxT, delta}; }
  static ControlCommand from(const InputVec& u) { return {u[0], u[1]}; }
};

class VelocityFloorViolated : public std::runtime_error {
 public:
  explicit VelocityFloorViolated(double u_bar);
  double u_bar;
};

struct TireForces {
  double Fyf = 0.0;
  double Fyr = 0.0;
};

TireForces tire_forces(const VehicleState& s, double delta, const VehicleParams& p);

/// Time derivative of the state. Throws VelocityFloorViolated below the floor.
StateVec derivatives(const VehicleState& s, const ControlCommand& cmd, const VehicleParams& p);

/// Continuous-time Jacobians of derivatives() at (s, cmd).
struct Jacobians {
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, kInputDim> B;
};
Jacobians jacobians(const VehicleState& s, const ControlCommand& cmd, const VehicleParams& p);

/// One classical RK4 step with dt in (0, 0.02]. The command is held over the
/// step and used as given (saturate first). Throws VelocityFloorViolated if
/// the result drops below the floor, std::invalid_argument on a bad dt.
VehicleState step(const VehicleState& s, const ControlCommand& cmd, double dt, const VehicleParams& p);

ControlCommand saturate(const ControlCommand& cmd, const VehicleParams& p);

/// Discrete affine prediction model around (x0, u0):
///
///   x[k+1] = A_M x[k] + B_M u[k] + c,   y = C_M x = (Y, u_bar)
///
/// A_M is the exponential series truncated after the cubic term, B_M and c
/// use the matching integral series Gamma = Ts (I + Ac Ts/2 + Ac^2 Ts^2/6).
/// c absorbs the non-zero drift f(x0, u0) so the model is exact to first
/// order around an operating point that is not an equilibrium.
struct LinearModel {
  Matrix A_M;
  Matrix B_M;
  Matrix C_M;
  Vector c;
  double Ts = 0.1;
  VehicleState x0;
  ControlCommand u0;

  Vector next(const Vector& x, const Vector& u) const { return A_M * x + B_M * u + c; }
};

LinearModel linearize_discretize(const VehicleState& s, const ControlCommand& cmd, const VehicleParams& p, double Ts);

/// Output row indices in C_M.
inline constexpr int kOutY = 0;
inline constexpr int kOutU = 1;

}  // namespace platoon::dynamics
