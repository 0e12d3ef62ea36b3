#include "platoon/apf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace platoon::apf {

void ApfParams::validate() const {
  const double fields[] = {a, b, X0, Y0, T0, a_n, s_min};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("ApfParams: every field must be positive");
  }
  if (!(pass_offset >= 0.0) || !std::isfinite(pass_offset) || !(pass_band >= 0.0) || !std::isfinite(pass_band) ||
      !std::isfinite(pass_side_y))
    throw std::invalid_argument("ApfParams: bad pass-side parameters");
}

Eigen::Vector2d ObstacleState::velocity() const {
  const double c = std::cos(heading), s = std::sin(heading);
  return {u_bar_o * c - v_o * s, u_bar_o * s + v_o * c};
}

ObstacleState ObstacleState::advanced(double dt) const {
  ObstacleState o = *this;
  const Eigen::Vector2d w = velocity();
  o.X += w.x() * dt;
  o.Y += w.y() * dt;
  return o;
}

namespace {

Eigen::Vector2d ego_velocity(const dynamics::VehicleState& e) {
  const double c = std::cos(e.phi), s = std::sin(e.phi);
  return {e.u_bar * c - e.v * s, e.u_bar * s + e.v * c};
}

// rate at which |q| shrinks, zero when opening
double closing_rate(double q, double w) {
  if (q == 0.0) return std::abs(w);
  return std::max(0.0, q > 0.0 ? -w : w);
}

}  // namespace

SafetyDistances safety_distances(const dynamics::VehicleState& ego, const ObstacleState& obs, const ApfParams& p) {
  const Eigen::Vector2d w = ego_velocity(ego) - obs.velocity();
  const double du = closing_rate(ego.X - obs.X, w.x());
  const double dv = closing_rate(ego.Y - obs.Y, w.y());
  const double st = std::abs(std::sin(ego.phi - obs.heading));
  SafetyDistances d;
  d.Xs = p.X0 + ego.u_bar * p.T0 + du * du / (2.0 * p.a_n);
  d.Ys = p.Y0 + (ego.u_bar * st + obs.u_bar_o * st) * p.T0 + dv * dv / (2.0 * p.a_n);
  return d;
}

double normalized_distance(double dX, double dY, double Xs, double Ys, double theta_bar) {
  if (!(Xs > 0.0) || !(Ys > 0.0)) throw std::invalid_argument("normalized_distance: safety distances must be positive");
  const double x = dX / Xs, y = dY / Ys;
  const double c = std::cos(theta_bar), s = std::sin(theta_bar);
  const double a = x * c + y * s;
  const double b = -x * s + y * c;
  return std::sqrt(a * a + b * b);
}

double potential(double s, const ApfParams& p) { return p.a * std::pow(std::max(s, p.s_min), -p.b); }

double potential_at(const dynamics::VehicleState& ego, const ObstacleState& obs, const ApfParams& p) {
  const SafetyDistances d = safety_distances(ego, obs, p);
  return potential(normalized_distance(ego.X - obs.X, ego.Y - obs.Y, d.Xs, d.Ys, 0.0), p);
}

PotentialDerivatives potential_derivatives(const Eigen::Vector2d& ego_xy, const Eigen::Vector2d& obs_xy,
                                           const SafetyDistances& d, const ApfParams& p) {
  const Eigen::Vector2d q = ego_xy - obs_xy;
  const Eigen::Vector2d dq(q.x() / (d.Xs * d.Xs), q.y() / (d.Ys * d.Ys));  // D q
  const double s = std::sqrt(q.dot(dq));
  PotentialDerivatives out;
  out.value = potential(s, p);
  if (s <= p.s_min) return out;  // flat inside the clamp radius
  const double k = -p.a * p.b * std::pow(s, -p.b - 2.0);
  out.gradient = k * dq;
  Eigen::Matrix2d dm = Eigen::Matrix2d::Zero();
  dm(0, 0) = 1.0 / (d.Xs * d.Xs);
  dm(1, 1) = 1.0 / (d.Ys * d.Ys);
  out.hessian = k * (dm - (p.b + 2.0) * dq * dq.transpose() / (s * s));
  return out;
}

double QuadraticPenalty::evaluate(const Eigen::Vector2d& q) const {
  const Eigen::Vector2d e = q - point;
  return value + gradient.dot(e) + 0.5 * e.dot(hessian * e);
}

QuadraticPenalty convexify_at(const Eigen::Vector2d& ego_xy, const Eigen::Vector2d& obs_xy, const SafetyDistances& d,
                              const ApfParams& p) {
  const PotentialDerivatives pd = potential_derivatives(ego_xy, obs_xy, d, p);
  QuadraticPenalty out;
  out.value = pd.value;
  out.gradient = pd.gradient;
  out.point = ego_xy;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (pd.hessian + pd.hessian.transpose()));
  Eigen::Vector2d lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix2d& v = es.eigenvectors();
  out.hessian = v * lam.asDiagonal() * v.transpose();

  // min of the model is value - g' H^+ g / 2; keep it >= 0 with the smallest
  // rank-one bump along g
  const double g2 = pd.gradient.squaredNorm();
  if (g2 == 0.0 || out.value <= 0.0) {
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return out;
  }
  const double scale = std::max(lam.maxCoeff(), 1e-300);
  double kappa = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double gi = v.col(i).dot(pd.gradient);
    if (lam[i] <= 1e-12 * scale) {
      if (gi * gi > 1e-24 * g2) kappa = std::numeric_limits<double>::infinity();
    } else {
      kappa += gi * gi / lam[i];
    }
    if (std::isinf(kappa)) break;
  }
  if (kappa > 2.0 * out.value) {
    const double c = 1.0 / (2.0 * out.value) - (std::isinf(kappa) ? 0.0 : 1.0 / kappa);
    out.hessian += c * pd.gradient * pd.gradient.transpose();
  }
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  return out;
}

std::vector<std::vector<QuadraticPenalty>> convexify(const std::vector<dynamics::VehicleState>& ego_predicted,
                                                     const std::vector<ObstacleState>& obstacles, double Ts,
                                                     const ApfParams& p) {
  std::vector<std::vector<QuadraticPenalty>> out(ego_predicted.size());
  for (size_t k = 0; k < ego_predicted.size(); ++k) {
    const dynamics::VehicleState& e = ego_predicted[k];
    out[k].reserve(obstacles.size());
    for (const ObstacleState& o0 : obstacles) {
      const ObstacleState o = o0.advanced(static_cast<double>(k + 1) * Ts);
      const SafetyDistances d = safety_distances(e, o, p);
      Eigen::Vector2d at(e.X, e.Y);
      if (e.X < o.X && std::abs(e.Y - o.Y) < p.pass_band) at.y() = o.Y + (p.pass_side_y >= o.Y ? p.pass_offset : -p.pass_offset);
      out[k].push_back(convexify_at(at, {o.X, o.Y}, d, p));
    }
  }
  return out;
}

}  // namespace platoon::apf
