#pragma once

// LMI feasibility / linear-objective solver.
//
// Constraints are symmetric affine matrices F_k(x) required to be negative
// definite or positive semidefinite. Everything is mapped to the standard
// form S_k(x) >= 0:
//
//   F < 0   ->  S = -F - eps_strict I
//   F >= 0  ->  S = F
//
// and solved with a log-det barrier method: a phase-I problem
// (min s : S_k(x) + sI >= 0) finds a strictly feasible point, then phase II
// follows the central path of  t c'x - sum log det S_k(x) - log(R^2 - |x|^2).
// Steps are clipped with eigenvalues of L^-1 dS L^-T so iterates stay
// interior, followed by backtracking on the barrier objective.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "platoon/convex/affine.hpp"

namespace platoon::convex {

enum class LmiSense { NegativeDefinite, PositiveSemidefinite };

struct LmiVariable {
  std::string name;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;
  int offset = 0;  // first scalar index
  int count = 0;   // number of scalars
};

struct LmiConstraint {
  std::string label;
  AffineMatrix expr;
  LmiSense sense = LmiSense::NegativeDefinite;
  double strict_margin = 0.0;  // resolved at add time for NegativeDefinite
};

class LmiProblem {
 public:
  /// Symmetric d x d matrix variable, d(d+1)/2 scalars. Returns its id.
  int add_symmetric(const std::string& name, int dim);
  /// General r x c matrix variable.
  int add_full(const std::string& name, int rows, int cols);

  /// The variable as an affine expression (one scalar per free entry).
  AffineMatrix var(int id) const;
  Matrix value(int id, const Vector& x) const;
  const LmiVariable& variable(int id) const { return vars_.at(static_cast<size_t>(id)); }
  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_scalars() const { return num_scalars_; }

  /// `strict_margin` overrides the default 1e-6 * max(1, |F0|_F / sqrt(dim))
  /// used to turn F < 0 into F <= -eps I.
  void add_constraint(const std::string& label, AffineMatrix expr, LmiSense sense,
                      std::optional<double> strict_margin = std::nullopt);
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }

  /// Objective c'x + c0. Adds coefficients; repeated calls accumulate.
  void add_linear_objective(int scalar_index, double coef);
  /// Adds trace(M E) to the objective.
  void add_trace_objective(const Matrix& m, const AffineMatrix& e);
  void clear_objective();
  Vector objective_vector() const;
  double objective_constant() const { return objective_constant_; }
  bool has_objective() const;

  /// Throws std::invalid_argument if a constraint is not square, not
  /// symmetric, or references unknown scalars.
  void validate() const;

 private:
  std::vector<LmiVariable> vars_;
  std::vector<LmiConstraint> constraints_;
  int num_scalars_ = 0;
  std::vector<double> objective_;
  double objective_constant_ = 0.0;
};

enum class LmiStatus { Feasible, Infeasible, MaxIter, NumericalBreakdown };

const char* to_string(LmiStatus s);

struct LmiSolution {
  LmiStatus status = LmiStatus::MaxIter;
  Vector x;
  double objective = 0.0;
  /// Per constraint: lambda_max(F) for negative-definite constraints and
  /// -lambda_min(F) for semidefinite ones, so smaller is safer in both cases.
  /// Computed with numerics::eig_sym on the returned point.
  std::vector<double> margins;
  int newton_iterations = 0;
  int phase1_iterations = 0;
  std::string message;
};

struct LmiSettings {
  double eps_feas = 1e-7;
  double radius = 1e6;          // norm-ball bound on x keeps phase I bounded
  double gap_rel = 1e-7;        // stop phase II when nu/t <= gap_rel*max(1,|obj|)
  double gap_abs = 1e-9;
  double mu = 20.0;             // barrier parameter growth
  double newton_tol = 1e-9;     // lambda^2/2 centering tolerance
  int max_newton = 600;         // total across phases
  bool serial_kernel = false;   // use the reference Hessian assembly
};

/// Solves the problem. `x0` is a warm start; if it is strictly feasible
/// phase I is skipped.
LmiSolution solve_lmi(const LmiProblem& problem, const LmiSettings& settings = {},
                      const std::optional<Vector>& x0 = std::nullopt);

/// Recomputes margins on x with eig_sym and checks them against eps_feas.
bool certify(const LmiProblem& problem, const Vector& x, double eps_feas, std::vector<double>* margins = nullptr);

enum class HessianKernel { Serial, Parallel };

/// Gradient and Hessian of  -sum_k log det S_k(x)  (no norm-ball term).
/// Holds precomputed sparse structure; exposed for tests and benchmarks.
class BarrierKernel {
 public:
  explicit BarrierKernel(const LmiProblem& problem);
  /// Extra scalar appended to x that shifts every S_k by s*I (phase I).
  BarrierKernel(const LmiProblem& problem, bool with_shift);

  int num_scalars() const { return n_; }
  /// S_k(x) in standard form.
  Matrix slack(int k, const Vector& x) const;
  int num_constraints() const { return static_cast<int>(blocks_.size()); }

  /// Returns false if some S_k is not positive definite at x.
  bool evaluate(const Vector& x, HessianKernel kernel, double* value, Vector* grad, Matrix* hess) const;
  /// Largest step alpha such that S_k(x + alpha dx) stays positive definite
  /// (infinity if unbounded). Requires S_k(x) > 0.
  double max_step(const Vector& x, const Vector& dx) const;

  struct Entry {
    int row;
    int col;
    double coef;
  };
  struct VarBlock {
    int var;                 // scalar index
    std::vector<Entry> entries;
    std::vector<int> rows;   // distinct rows touched, sorted
    std::vector<int> pos;    // row -> position in `rows`, -1 if absent
  };
  struct Block {
    int dim = 0;
    Matrix constant;
    std::vector<VarBlock> vars;
  };

 private:
  void build(const LmiProblem& problem, bool with_shift);
  int n_ = 0;
  std::vector<Block> blocks_;
};

/// Objective coefficients for trace(M E): returns c with trace(M E(x)) = c'x + c0.
Vector trace_coefficients(const Matrix& m, const AffineMatrix& e, int num_scalars, double* c0);

// Cone complementarity linearization: minimizes sum_i trace(X_i Y_i) over
// the LMI feasible set augmented with [[X_i, I], [I, Y_i]] >= 0, by
// repeatedly solving the linearization  min sum trace(Y_i^k X_i + X_i^k Y_i).
// trace(X_i Y_i) >= dim_i on that set, so driving the gap to zero recovers
// X_i = Y_i^-1.

struct CclPair {
  AffineMatrix x;
  AffineMatrix y;
};

enum class CclStatus { Converged, EarlyExit, NoProgress, MaxIter, Infeasible, SolverFailure };

const char* to_string(CclStatus s);

struct CclSettings {
  int max_outer = 100;
  double rel_decrease_tol = 1e-6;
  double gap_tol = 1e-4;
  LmiSettings lmi;
};

struct CclResult {
  CclStatus status = CclStatus::MaxIter;
  LmiSolution solution;                     // last strictly feasible iterate
  int outer_iterations = 0;
  std::vector<double> linearized_objective;  // per outer iteration
  std::vector<double> gap;                   // sum(trace(X Y) - dim) per iteration
};

/// `accept`, if given, is evaluated on every iterate; returning true stops
/// early with status EarlyExit (used to test the original nonlinear
/// condition, which often holds long before the gap closes).
CclResult ccl_minimize(const LmiProblem& problem, const std::vector<CclPair>& pairs, const CclSettings& settings = {},
                       const std::function<bool(const Vector&)>& accept = {});

}  // namespace platoon::convex
