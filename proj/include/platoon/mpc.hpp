#pragma once

// Per-vehicle motion planner. Each control period the vehicle model is
// linearized at the current state, the obstacle field is convexified along
// the previous prediction, and one dense QP is solved over
//
//   z = [FxT_0 (kN), delta_0, ..., FxT_{Nc-1}, delta_{Nc-1}, eps_1, ..., eps_Np]
//
// with the cost
//
//   sum_k  Q_Y (Y_k - Y_des)^2 + Q_ref (u_k - u_des)^2 + Q_obs U_k
//        + |u_c(k-1)|_S^2 + H eps_k^2 + |u_c(k-1) - u_c(k-2)|_R^2
//
// Inputs beyond the control horizon repeat the last free one. The lane
// corridor (and a trust region on Y around the previous prediction when
// obstacles are present) is softened by eps_k; actuator and rate limits are
// hard. Forces are carried in kN inside the QP so S and R act on
// comparable magnitudes.

#include <optional>
#include <vector>

#include "platoon/apf.hpp"
#include "platoon/convex/qp.hpp"
#include "platoon/dynamics.hpp"

namespace platoon::mpc {

using numerics::Matrix;
using numerics::Vector;

struct MpcConfig {
  int Np = 25;
  int Nc = 5;
  double Ts = 0.1;
  double Q_Y = 300.0;
  double Q0 = 375.0;
  double sigma0 = 2.0;
  double sigma_j = 4.0;
  double S_F = 0.001;     // on FxT in kN
  double S_delta = 1.0;
  double R_F = 100.0;     // on FxT increments in kN
  double R_delta = 2000.0;
  double H = 1e5;         // slack weight
  double Q_obs = 2.0;
  double dFxT_max = 5000.0;    // N per step
  double ddelta_max = 0.05;    // rad per step
  double y_min = -0.625;       // road edges for the vehicle centre (two 3.75 m lanes, 2.5 m wide body), m
  double y_max = 4.375;
  double trust_radius = 2.5;   // |Y_k - previous prediction| when obstacles exist, m

  /// Throws std::invalid_argument on a malformed configuration.
  void validate() const;
  int num_inputs() const { return 2 * Nc; }
  int num_vars() const { return 2 * Nc + Np; }
};

/// Q0 (1/sigma0 + sum_j 1/(sigma_j + U_j))
double adaptive_qref(const std::vector<double>& potentials, double Q0, double sigma0, double sigma_j);

struct MpcStepInput {
  dynamics::VehicleState state;
  double Y_des = 0.0;
  double u_bar_des = 0.0;
  std::vector<apf::ObstacleState> obstacles;
  dynamics::ControlCommand previous;
  /// States predicted for steps 1..Np by the previous solve; empty means
  /// coast in a straight line from `state`.
  std::vector<dynamics::VehicleState> previous_prediction;
};

struct CostBreakdown {
  double tracking_Y = 0.0;
  double tracking_u = 0.0;
  double obstacle = 0.0;
  double input = 0.0;
  double slack = 0.0;
  double rate = 0.0;

  double total() const { return tracking_Y + tracking_u + obstacle + input + slack + rate; }
};

/// One quadratic cost term 0.5 z'Hz + f'z + c.
struct QuadTerm {
  Matrix H;
  Vector f;
  double c = 0.0;

  double evaluate(const Vector& z) const { return 0.5 * z.dot(H * z) + f.dot(z) + c; }
};

struct MpcQp {
  convex::QpProblem qp;
  QuadTerm tracking_Y, tracking_u, obstacle, input, slack, rate;
  /// x_k = x_const[k] + x_map[k] z for k = 1..Np (index k-1).
  std::vector<Vector> x_const;
  std::vector<Matrix> x_map;
  double q_ref = 0.0;

  CostBreakdown breakdown(const Vector& z) const;
  std::vector<dynamics::VehicleState> predict(const Vector& z) const;
};

/// Straight-line coast used to seed the first convexification.
std::vector<dynamics::VehicleState> coast_prediction(const dynamics::VehicleState& s, int Np, double Ts);

MpcQp build_problem(const MpcStepInput& input, const dynamics::LinearModel& model, const MpcConfig& cfg,
                    const dynamics::VehicleParams& params,
                    const std::vector<std::vector<apf::QuadraticPenalty>>& penalties, double q_ref);

struct MpcStepOutput {
  dynamics::ControlCommand command;
  std::vector<dynamics::VehicleState> prediction;  // steps 1..Np
  std::vector<dynamics::ControlCommand> inputs;    // the Nc planned inputs
  CostBreakdown cost;
  double objective = 0.0;
  double q_ref = 0.0;
  double apf_max = 0.0;  // largest obstacle potential at the current state
  convex::QpStatus status = convex::QpStatus::MaxIter;
  int qp_iterations = 0;
  double solve_seconds = 0.0;
  convex::QpWarmStart warm;
};

/// Linearize, convexify, build, solve. The applied command is clipped to the
/// actuator and rate limits. Throws MpcInfeasible if the QP is infeasible.
MpcStepOutput solve_step(const MpcStepInput& input, const MpcConfig& cfg, const dynamics::VehicleParams& params,
                         const apf::ApfParams& apf_params,
                         const std::optional<convex::QpWarmStart>& warm = std::nullopt,
                         const convex::QpSettings& qp_settings = {});

class MpcInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Keeps the previous command, prediction and QP warm start between calls.
/// On an infeasible QP it holds the previous command and marks the output.
class MotionPlanner {
 public:
  MotionPlanner(MpcConfig cfg, dynamics::VehicleParams params, apf::ApfParams apf_params);

  struct Result {
    MpcStepOutput out;
    bool fault = false;
  };

  Result step(const dynamics::VehicleState& state, double Y_des, double u_bar_des,
              const std::vector<apf::ObstacleState>& obstacles);

  const dynamics::ControlCommand& last_command() const { return previous_; }
  void reset(const dynamics::ControlCommand& command = {});
  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  dynamics::VehicleParams params_;
  apf::ApfParams apf_;
  dynamics::ControlCommand previous_;
  std::vector<dynamics::VehicleState> prediction_;
  std::optional<convex::QpWarmStart> warm_;
};

}  // namespace platoon::mpc
