#pragma once

// Dense convex QP solver used by the motion planner.
//
//   minimize   0.5 x'Hx + f'x + constant
//   subject to A_in x <= b_in,  A_eq x = b_eq,  lo <= x <= hi
//
// Internally the problem is rewritten as l <= Cx <= u and solved with an
// operator-splitting (ADMM) iteration in the style of OSQP: Ruiz
// equilibration, over-relaxation, adaptive penalty, infeasibility
// certificates, and a final active-set polish that sharpens the solution to
// near machine precision when the active set is identified correctly.

#include <optional>

#include "platoon/numerics.hpp"

namespace platoon::convex {

using numerics::Matrix;
using numerics::Vector;

struct QpProblem {
  Matrix hessian;   // H, symmetric PSD
  Vector linear;    // f
  Matrix a_in;      // rows may be empty
  Vector b_in;
  Matrix a_eq;
  Vector b_eq;
  Vector lower;     // empty => unbounded; entries may be -inf
  Vector upper;     // empty => unbounded; entries may be +inf
  double constant = 0.0;

  int num_vars() const { return static_cast<int>(hessian.rows()); }
  /// Throws std::invalid_argument on inconsistent dimensions or a Hessian
  /// that is not PSD up to noise.
  void validate() const;
  double objective(const Vector& x) const { return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant; }
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

const char* to_string(QpStatus s);

/// Multipliers for the stacked constraint rows [A_in; A_eq; bounded vars].
/// Sign convention: positive on an active upper side, negative on an
/// active lower side.
struct QpWarmStart {
  Vector x;
  Vector y;
};

struct QpSolution {
  Vector x;
  double objective = 0.0;
  double kkt_residual = 0.0;  // max of scaled primal and dual residuals
  int iterations = 0;
  QpStatus status = QpStatus::MaxIter;
  bool polished = false;
  Vector y_in;      // multipliers of A_in rows (>= 0 when active)
  Vector y_eq;      // multipliers of A_eq rows
  Vector y_bounds;  // per-variable bound multipliers (signed)
  QpWarmStart warm;
};

struct QpSettings {
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  double eps_prim_inf = 1e-6;
  double eps_dual_inf = 1e-6;
  int check_every = 10;
  bool adaptive_rho = true;
  bool scaling = true;
  int scaling_iter = 10;
  bool polish = true;
  int polish_refine = 3;
};

/// Deterministic: identical inputs (including warm start) give
/// bit-identical outputs within one build.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {},
                    const std::optional<QpWarmStart>& warm = std::nullopt);

/// Scaled KKT residual of a candidate primal-dual pair, using the same
/// stacked-row convention as QpWarmStart::y. Exposed for tests.
double kkt_residual(const QpProblem& problem, const Vector& x, const Vector& y);

}  // namespace platoon::convex
