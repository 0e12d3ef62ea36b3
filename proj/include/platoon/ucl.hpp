#pragma once

// Upper coordination layer: leader-relative error states, the stacked
// delayed-feedback platoon model, H-infinity gain synthesis for the
// predecessor-leader-following controller
//
//   u_i = K1_i x_i(t - lambda) + K2_i x_{i-1}(t - lambda),
//
// its independent verification, and the reference velocity handed to the
// motion planner.

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/convex/lmi.hpp"
#include "platoon/numerics.hpp"

namespace platoon::ucl {

using numerics::Matrix;
using numerics::Vector;
using Gain = Eigen::RowVector3d;

struct LongitudinalState {
  double s = 0.0;  // position along the road, m
  double v = 0.0;  // m/s
  double a = 0.0;  // m/s^2
};

/// Leader-relative error of one follower: (s0 - s_i - i D, v0 - v_i, a0 - a_i).
struct ErrorState {
  double s_hat = 0.0;
  double v_hat = 0.0;
  double a_hat = 0.0;

  Eigen::Vector3d vec() const { return {s_hat, v_hat, a_hat}; }
  static ErrorState from(const Eigen::Vector3d& x) { return {x[0], x[1], x[2]}; }
};

/// `index` is the follower's 1-based position behind the leader.
ErrorState build_error_state(const LongitudinalState& leader, const LongitudinalState& follower, int index,
                             double desired_gap);

/// Stacked error dynamics of n identical followers
///   dX/dt = A X + Bu U + Bw W,  Z = C X,
/// with per-follower disturbance W_i = (a0, da0/dt).
struct PlatoonSystem {
  int n = 0;
  double tau = 0.5;   // propulsion lag, s
  double h1 = 0.25;   // delay upper bound, s
  double mu1 = 0.9;   // bound on the delay rate
  double gamma = 1.0; // H-infinity level
  Matrix A;
  Matrix Bu;
  Matrix Bw;
  Matrix C;
};

PlatoonSystem assemble_platoon(int n, double tau, double h1, double mu1, double gamma);

struct GainSet {
  std::vector<Gain> k1;  // own-error gain per follower
  std::vector<Gain> k2;  // predecessor-error gain per follower (unused for follower 1)

  int n() const { return static_cast<int>(k1.size()); }
  /// Stacked n x 3n lower block-bidiagonal K.
  Matrix stacked() const;
  static GainSet from_stacked(const Matrix& k);
  /// Same (k1, k2) pair for every follower.
  static GainSet uniform(int n, const Gain& k1, const Gain& k2);
};

/// Gains deployed by the bundled scenarios:
/// K1 = [2.156, 3.175, 0.998], K2 = [0.306, 0.239, 0.065] for every follower.
GainSet default_gains(int n);

/// u = K1 x_own + K2 x_pred (acceleration command, m/s^2). Follower 1 has
/// the leader as predecessor, whose error to itself is zero, so `pred` is
/// ignored there.
double feedback_command(const GainSet& gains, const ErrorState& own_delayed, const std::optional<ErrorState>& pred_delayed,
                        int index);

/// Velocity reference for the motion planner: v + u * dt_ref clamped to
/// [0, v_max].
double reference_velocity(const LongitudinalState& follower, double command, double dt_ref, double v_max);

struct StabilityCertificate {
  Matrix P;
  Matrix Q;
  Matrix Z;
  double gamma = 0.0;
  std::vector<std::string> labels;
  std::vector<double> margins;  // lambda_max of each "< 0" block

  double worst_margin() const;
};

class SynthesisInfeasible : public std::runtime_error {
 public:
  SynthesisInfeasible(double h1, double mu1, double gamma, const std::string& why);
  double h1, mu1, gamma;
};

class VerificationFailed : public std::runtime_error {
 public:
  VerificationFailed(std::string block, double margin, const std::string& why);
  std::string block;  // label of the worst block
  double margin;
};

struct SynthesisOptions {
  convex::CclSettings ccl;
  /// Stop the CCL loop as soon as the current iterate satisfies the
  /// original nonlinear condition and its gains verify.
  bool early_exit = true;
  /// Strict margin used for every "< 0" block.
  double strict_margin = 1e-6;
};

struct SynthesisResult {
  GainSet gains;
  StabilityCertificate certificate;
  convex::CclStatus ccl_status = convex::CclStatus::MaxIter;
  int ccl_iterations = 0;
  double final_gap = 0.0;
};

/// Solves the delay-dependent H-infinity condition for the stacked PLF
/// controller by cone complementarity linearization, recovers K = Y Pbar^-1
/// and re-verifies it. Throws SynthesisInfeasible.
SynthesisResult synthesize_gains(const PlatoonSystem& sys, const SynthesisOptions& options = {});

/// With K fixed the condition is an LMI in (P, Q1, Z1). Throws
/// VerificationFailed naming the worst block.
StabilityCertificate verify_gains(const PlatoonSystem& sys, const GainSet& gains,
                                const convex::LmiSettings& settings = {}, double strict_margin = 1e-6);

struct GammaSearch {
  SynthesisResult best;
  double gamma = 0.0;
  int evaluations = 0;
  std::vector<std::pair<double, bool>> trace;  // (gamma, feasible)
};

/// Bisection for the smallest feasible gamma in [lo, hi] to within `tol`.
/// Throws SynthesisInfeasible if hi itself is infeasible.
GammaSearch synthesize_min_gamma(int n, double tau, double h1, double mu1, double lo = 0.1, double hi = 100.0,
                                 double tol = 0.05, const SynthesisOptions& options = {});

// ---------------------------------------------------------------------------
// Gain files

class GainFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GainFile {
  int version = 1;
  double tau = 0.5;
  double h1 = 0.25;
  double mu1 = 0.9;
  double gamma = 0.0;
  GainSet gains;
};

void write_gains(std::ostream& os, const GainFile& file);
GainFile read_gains(std::istream& is);
void save_gains(const std::string& path, const GainFile& file);
GainFile load_gains(const std::string& path);

// ---------------------------------------------------------------------------
// Delayed closed loop

/// Time-stamped history of vectors sampled at non-decreasing times, with
/// linear interpolation. Queries before the first sample return the first
/// sample; queries after the last return the last. Old samples beyond
/// `span` seconds behind the newest are dropped.
class StateHistory {
 public:
  explicit StateHistory(double span = 1.0) : span_(span) {}
  void push(double t, const Vector& x);
  Vector at(double t) const;
  bool empty() const { return times_.empty(); }
  size_t size() const { return times_.size() - head_; }

 private:
  double span_;
  std::vector<double> times_;
  std::vector<Vector> values_;
  size_t head_ = 0;
};

struct DelayedRun {
  std::vector<double> t;
  std::vector<double> norm;  // |X(t)|
};

/// Integrates dX/dt = A X + Bu K X(t - lambda(t)) with classical RK4 and a
/// constant pre-history X(t<=0) = x0.
DelayedRun simulate_delayed(const PlatoonSystem& sys, const GainSet& gains, const Vector& x0,
                            const std::function<double(double)>& delay, double horizon, double dt = 1e-3);

}  // namespace platoon::ucl
