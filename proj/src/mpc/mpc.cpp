#include "platoon/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace platoon::mpc {

using dynamics::ControlCommand;
using dynamics::VehicleState;

namespace {

constexpr double kForceScale = 1000.0;  // N per QP force unit
constexpr int kX = 4;
constexpr int kY = 5;
constexpr int kU = 0;

QuadTerm zero_term(int n) { return {Matrix::Zero(n, n), Vector::Zero(n), 0.0}; }

// term += w (a'z + b)^2
void add_square(QuadTerm& t, double w, const Vector& a, double b) {
  t.H.noalias() += (2.0 * w) * a * a.transpose();
  t.f += (2.0 * w * b) * a;
  t.c += w * b * b;
}

}  // namespace

void MpcConfig::validate() const {
  if (Np < 1 || Nc < 1 || Nc > Np) throw std::invalid_argument("MpcConfig: need 1 <= Nc <= Np");
  if (!(Ts > 0.0)) throw std::invalid_argument("MpcConfig: Ts must be positive");
  if (!(Q_Y > 0.0)) throw std::invalid_argument("MpcConfig: Q_Y must be positive");
  const double w[] = {Q0, sigma0, sigma_j, S_F, S_delta, R_F, R_delta, H, Q_obs};
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("MpcConfig: weights must be non-negative");
  }
  if (!(sigma0 > 0.0) || !(sigma_j > 0.0)) throw std::invalid_argument("MpcConfig: sigma values must be positive");
  if (!(dFxT_max > 0.0) || !(ddelta_max > 0.0)) throw std::invalid_argument("MpcConfig: rate bounds must be positive");
  if (!(y_max > y_min)) throw std::invalid_argument("MpcConfig: empty lane corridor");
  if (!(trust_radius > 0.0)) throw std::invalid_argument("MpcConfig: trust radius must be positive");
}

double adaptive_qref(const std::vector<double>& potentials, double Q0, double sigma0, double sigma_j) {
  double sum = 1.0 / sigma0;
  for (double u : potentials) {
    if (!(u >= 0.0)) throw std::invalid_argument("adaptive_qref: potentials must be non-negative");
    sum += 1.0 / (sigma_j + u);
  }
  return Q0 * sum;
}

CostBreakdown MpcQp::breakdown(const Vector& z) const {
  return {tracking_Y.evaluate(z), tracking_u.evaluate(z), obstacle.evaluate(z),
          input.evaluate(z),      slack.evaluate(z),      rate.evaluate(z)};
}

std::vector<VehicleState> MpcQp::predict(const Vector& z) const {
  std::vector<VehicleState> out;
  out.reserve(x_const.size());
  for (size_t k = 0; k < x_const.size(); ++k) {
    const Vector x = x_const[k] + x_map[k] * z;
    out.push_back(VehicleState::from(dynamics::StateVec(x)));
  }
  return out;
}

std::vector<VehicleState> coast_prediction(const VehicleState& s, int Np, double Ts) {
  std::vector<VehicleState> out(static_cast<size_t>(Np), s);
  const double c = std::cos(s.phi), sn = std::sin(s.phi);
  for (int k = 0; k < Np; ++k) {
    const double t = (k + 1) * Ts;
    out[k].X = s.X + t * (s.u_bar * c - s.v * sn);
    out[k].Y = s.Y + t * (s.u_bar * sn + s.v * c);
  }
  return out;
}

MpcQp build_problem(const MpcStepInput& in, const dynamics::LinearModel& model, const MpcConfig& cfg,
                    const dynamics::VehicleParams& params,
                    const std::vector<std::vector<apf::QuadraticPenalty>>& penalties, double q_ref) {
  cfg.validate();
  if (model.A_M.rows() != dynamics::kStateDim || model.B_M.cols() != dynamics::kInputDim) {
    throw std::invalid_argument("build_problem: model has the wrong dimensions");
  }
  if (!penalties.empty() && static_cast<int>(penalties.size()) != cfg.Np) {
    throw std::invalid_argument("build_problem: need one penalty list per horizon step");
  }
  const bool have_obstacles = !penalties.empty() && !penalties.front().empty();
  if (have_obstacles && static_cast<int>(in.previous_prediction.size()) != cfg.Np) {
    throw std::invalid_argument("build_problem: previous prediction must cover the horizon");
  }

  const int np = cfg.Np, nc = cfg.Nc, nu = cfg.num_inputs(), n = cfg.num_vars();
  MpcQp out;
  out.q_ref = q_ref;
  out.tracking_Y = out.tracking_u = out.obstacle = out.input = out.slack = out.rate = zero_term(n);

  Matrix b = model.B_M;
  b.col(0) *= kForceScale;

  // stacked prediction
  Vector s = in.state.vec();
  Matrix g = Matrix::Zero(dynamics::kStateDim, n);
  out.x_const.reserve(np);
  out.x_map.reserve(np);
  for (int k = 0; k < np; ++k) {
    const int i = std::min(k, nc - 1);
    s = model.A_M * s + model.c;
    g = model.A_M * g;
    g.middleCols(2 * i, 2) += b;
    out.x_const.push_back(s);
    out.x_map.push_back(g);
  }

  for (int k = 0; k < np; ++k) {
    const Vector& sk = out.x_const[k];
    const Matrix& gk = out.x_map[k];
    add_square(out.tracking_Y, cfg.Q_Y, gk.row(kY).transpose(), sk[kY] - in.Y_des);
    add_square(out.tracking_u, q_ref, gk.row(kU).transpose(), sk[kU] - in.u_bar_des);

    if (have_obstacles) {
      // p = P x_k, model: v + g'(p - p0) + 0.5 (p - p0)' H (p - p0)
      Matrix pm(2, n);
      pm.row(0) = gk.row(kX);
      pm.row(1) = gk.row(kY);
      for (const apf::QuadraticPenalty& q : penalties[k]) {
        const Eigen::Vector2d e0 = Eigen::Vector2d(sk[kX], sk[kY]) - q.point;  // p - p0 at z = 0
        const Matrix hp = q.hessian * pm;
        out.obstacle.H.noalias() += cfg.Q_obs * pm.transpose() * hp;
        out.obstacle.f += cfg.Q_obs * pm.transpose() * (q.gradient + q.hessian * e0);
        out.obstacle.c += cfg.Q_obs * q.evaluate(q.point + e0);
      }
    }

    const int e = nu + k;
    out.slack.H(e, e) += 2.0 * cfg.H;
  }

  // inputs, held beyond Nc
  for (int i = 0; i < nc; ++i) {
    const double count = (i == nc - 1) ? static_cast<double>(np - nc + 1) : 1.0;
    out.input.H(2 * i, 2 * i) += 2.0 * cfg.S_F * count;
    out.input.H(2 * i + 1, 2 * i + 1) += 2.0 * cfg.S_delta * count;
  }
  // increments, starting from the previously applied command
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < 2; ++j) {
      Vector a = Vector::Zero(n);
      a[2 * i + j] = 1.0;
      double b0 = 0.0;
      if (i == 0) {
        b0 = -(j == 0 ? in.previous.FxT / kForceScale : in.previous.delta);
      } else {
        a[2 * (i - 1) + j] = -1.0;
      }
      add_square(out.rate, j == 0 ? cfg.R_F : cfg.R_delta, a, b0);
    }
  }

  convex::QpProblem& qp = out.qp;
  qp.hessian = out.tracking_Y.H + out.tracking_u.H + out.obstacle.H + out.input.H + out.slack.H + out.rate.H;
  qp.hessian = numerics::symmetrize(qp.hessian);
  qp.linear = out.tracking_Y.f + out.tracking_u.f + out.obstacle.f + out.input.f + out.slack.f + out.rate.f;
  qp.constant = out.tracking_Y.c + out.tracking_u.c + out.obstacle.c + out.input.c + out.slack.c + out.rate.c;

  // hard actuator bounds, non-negative slacks
  qp.lower = Vector::Zero(n);
  qp.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < nc; ++i) {
    qp.lower[2 * i] = -params.FxT_max / kForceScale;
    qp.upper[2 * i] = params.FxT_max / kForceScale;
    qp.lower[2 * i + 1] = -params.delta_max;
    qp.upper[2 * i + 1] = params.delta_max;
  }

  // rows: rate limits (4 per input), corridor (2 per step), trust region (2 per step)
  const int rows = 4 * nc + 2 * np + (have_obstacles ? 2 * np : 0);
  qp.a_in = Matrix::Zero(rows, n);
  qp.b_in = Vector::Zero(rows);
  int r = 0;
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double lim = j == 0 ? cfg.dFxT_max / kForceScale : cfg.ddelta_max;
      const double prev = j == 0 ? in.previous.FxT / kForceScale : in.previous.delta;
      for (double sign : {1.0, -1.0}) {
        qp.a_in(r, 2 * i + j) = sign;
        if (i == 0) {
          qp.b_in[r] = lim + sign * prev;
        } else {
          qp.a_in(r, 2 * (i - 1) + j) = -sign;
          qp.b_in[r] = lim;
        }
        ++r;
      }
    }
  }
  for (int k = 0; k < np; ++k) {
    const Eigen::RowVectorXd gy = out.x_map[k].row(kY);
    const double sy = out.x_const[k][kY];
    qp.a_in.row(r) = gy;
    qp.a_in(r, nu + k) -= 1.0;
    qp.b_in[r++] = cfg.y_max - sy;
    qp.a_in.row(r) = -gy;
    qp.a_in(r, nu + k) -= 1.0;
    qp.b_in[r++] = sy - cfg.y_min;
    if (have_obstacles) {
      const double yp = in.previous_prediction[k].Y;
      qp.a_in.row(r) = gy;
      qp.a_in(r, nu + k) -= 1.0;
      qp.b_in[r++] = yp + cfg.trust_radius - sy;
      qp.a_in.row(r) = -gy;
      qp.a_in(r, nu + k) -= 1.0;
      qp.b_in[r++] = sy - (yp - cfg.trust_radius);
    }
  }
  return out;
}

MpcStepOutput solve_step(const MpcStepInput& input, const MpcConfig& cfg, const dynamics::VehicleParams& params,
                         const apf::ApfParams& apf_params, const std::optional<convex::QpWarmStart>& warm,
                         const convex::QpSettings& qp_settings) {
  const auto t0 = std::chrono::steady_clock::now();
  MpcStepOutput out;

  std::vector<double> potentials;
  potentials.reserve(input.obstacles.size());
  for (const auto& o : input.obstacles) potentials.push_back(apf::potential_at(input.state, o, apf_params));
  out.apf_max = potentials.empty() ? 0.0 : *std::max_element(potentials.begin(), potentials.end());
  out.q_ref = adaptive_qref(potentials, cfg.Q0, cfg.sigma0, cfg.sigma_j);

  const dynamics::LinearModel model = dynamics::linearize_discretize(input.state, input.previous, params, cfg.Ts);

  MpcStepInput in = input;
  if (static_cast<int>(in.previous_prediction.size()) != cfg.Np) {
    in.previous_prediction = coast_prediction(in.state, cfg.Np, cfg.Ts);
  }
  std::vector<std::vector<apf::QuadraticPenalty>> penalties;
  if (!in.obstacles.empty()) penalties = apf::convexify(in.previous_prediction, in.obstacles, cfg.Ts, apf_params);

  const MpcQp problem = build_problem(in, model, cfg, params, penalties, out.q_ref);
  std::optional<convex::QpWarmStart> ws;
  if (warm && warm->x.size() == problem.qp.num_vars()) ws = warm;
  const convex::QpSolution sol = convex::solve_qp(problem.qp, qp_settings, ws);
  out.status = sol.status;
  out.qp_iterations = sol.iterations;
  if (sol.status == convex::QpStatus::Infeasible) throw MpcInfeasible("motion planner QP is infeasible");

  const Vector& z = sol.x;
  out.objective = sol.objective;
  out.cost = problem.breakdown(z);
  out.prediction = problem.predict(z);
  out.warm = sol.warm;
  out.inputs.reserve(cfg.Nc);
  for (int i = 0; i < cfg.Nc; ++i) out.inputs.push_back({z[2 * i] * kForceScale, z[2 * i + 1]});

  // enforce the hard limits exactly on the applied command
  ControlCommand c = dynamics::saturate(out.inputs.front(), params);
  c.FxT = std::clamp(c.FxT, input.previous.FxT - cfg.dFxT_max, input.previous.FxT + cfg.dFxT_max);
  c.delta = std::clamp(c.delta, input.previous.delta - cfg.ddelta_max, input.previous.delta + cfg.ddelta_max);
  out.command = c;
  out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

MotionPlanner::MotionPlanner(MpcConfig cfg, dynamics::VehicleParams params, apf::ApfParams apf_params)
    : cfg_(cfg), params_(params), apf_(apf_params) {
  cfg_.validate();
  params_.validate();
  apf_.validate();
}

void MotionPlanner::reset(const ControlCommand& command) {
  previous_ = command;
  prediction_.clear();
  warm_.reset();
}

MotionPlanner::Result MotionPlanner::step(const VehicleState& state, double Y_des, double u_bar_des,
                                          const std::vector<apf::ObstacleState>& obstacles) {
  MpcStepInput in;
  in.state = state;
  in.Y_des = Y_des;
  in.u_bar_des = u_bar_des;
  in.obstacles = obstacles;
  in.previous = previous_;
  in.previous_prediction = prediction_;
  Result res;
  try {
    res.out = solve_step(in, cfg_, params_, apf_, warm_);
  } catch (const MpcInfeasible&) {
    res.fault = true;
    res.out.command = previous_;
    res.out.status = convex::QpStatus::Infeasible;
    prediction_.clear();
    warm_.reset();
    return res;
  }
  previous_ = res.out.command;
  prediction_ = res.out.prediction;
  warm_ = res.out.warm;
  return res;
}

}  // namespace platoon::mpc
