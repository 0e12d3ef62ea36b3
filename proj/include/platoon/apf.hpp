#pragma once

// Repulsive potential around non-crossable obstacles (other vehicles):
//
//   U = a * s^-b,   s = |(dX / Xs, dY / Ys)|
//
// where (dX, dY) is the ego position relative to the obstacle and Xs, Ys are
// speed-dependent safety distances. convexify() turns U into one convex
// quadratic per obstacle per horizon step for the motion planner.

#include <vector>

#include <Eigen/Dense>

#include "platoon/dynamics.hpp"

namespace platoon::apf {

struct ApfParams {
  double a = 10000.0;  // field density (value at s = 1)
  double b = 1.23;     // shape exponent
  double X0 = 10.0;    // standstill longitudinal distance, m
  double Y0 = 2.0;     // standstill lateral distance, m
  double T0 = 1.0;     // time headway, s
  double a_n = 2.0;    // comfortable deceleration, m/s^2
  double s_min = 0.05; // clamp radius; U is flat inside
  /// Directly behind or ahead of an obstacle the field has no lateral
  /// gradient, so a planner would never start to pass. Expansions behind an
  /// obstacle and within pass_band of its Y are moved pass_offset to the side
  /// that faces pass_side_y (the middle of the drivable road), m.
  double pass_offset = 0.5;
  double pass_band = 1.0;
  double pass_side_y = 1.875;

  void validate() const;
};

struct ObstacleState {
  double X = 0.0;
  double Y = 0.0;
  double u_bar_o = 0.0;  // longitudinal speed, m/s
  double v_o = 0.0;      // lateral speed, m/s
  double heading = 0.0;  // rad

  /// Velocity in the global frame.
  Eigen::Vector2d velocity() const;
  /// Position after `dt` seconds at constant velocity and heading.
  ObstacleState advanced(double dt) const;
};

struct SafetyDistances {
  double Xs = 0.0;
  double Ys = 0.0;
};

/// Xs = X0 + u T0 + du_a^2 / (2 a_n)
/// Ys = Y0 + (u + u_o) |sin theta| T0 + dv_a^2 / (2 a_n)
/// with theta the ego heading relative to the obstacle's and du_a, dv_a the
/// non-negative closing rates along X and Y.
SafetyDistances safety_distances(const dynamics::VehicleState& ego, const ObstacleState& obs, const ApfParams& p);

/// The rotation by theta_bar is norm-preserving, so the result equals
/// |(dX / Xs, dY / Ys)| for any angle; it is evaluated as written anyway.
double normalized_distance(double dX, double dY, double Xs, double Ys, double theta_bar);

/// a * max(s, s_min)^-b
double potential(double s, const ApfParams& p);

/// U at ego position relative to one obstacle.
double potential_at(const dynamics::VehicleState& ego, const ObstacleState& obs, const ApfParams& p);

/// Exact value and gradient of U over the ego position (X, Y) with the
/// safety distances frozen. Hessian is returned unmodified (indefinite in
/// general).
struct PotentialDerivatives {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};
PotentialDerivatives potential_derivatives(const Eigen::Vector2d& ego_xy, const Eigen::Vector2d& obs_xy,
                                           const SafetyDistances& d, const ApfParams& p);

/// U(p) ~ value + gradient'(p - point) + 0.5 (p - point)' hessian (p - point)
struct QuadraticPenalty {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  Eigen::Vector2d point = Eigen::Vector2d::Zero();

  double evaluate(const Eigen::Vector2d& q) const;
};

/// Second-order expansion made convex: negative Hessian eigenvalues are
/// clamped to zero, then a rank-one term along the gradient is added only if
/// needed so the model never drops below zero.
QuadraticPenalty convexify_at(const Eigen::Vector2d& ego_xy, const Eigen::Vector2d& obs_xy, const SafetyDistances& d,
                              const ApfParams& p);

/// One penalty per obstacle per step: result[k][j] expands obstacle j at
/// horizon step k+1. `ego_predicted[k]` is the ego state predicted for step
/// k+1; obstacles are advanced at constant velocity by (k+1) * Ts. Expansion
/// points behind an obstacle and within pass_band of its Y are shifted to the
/// pass side.
std::vector<std::vector<QuadraticPenalty>> convexify(const std::vector<dynamics::VehicleState>& ego_predicted,
                                                     const std::vector<ObstacleState>& obstacles, double Ts,
                                                     const ApfParams& p);

}  // namespace platoon::apf
