#include "platoon/convex/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "platoon/detail/omp.hpp"

namespace platoon::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double default_strict_margin(const AffineMatrix& e) {
  const double dim = std::max(1, e.rows());
  return 1e-6 * std::max(1.0, e.constant().norm() / std::sqrt(dim));
}

}  // namespace

const char* to_string(LmiStatus s) {
  switch (s) {
    case LmiStatus::Feasible: return "Feasible";
    case LmiStatus::Infeasible: return "Infeasible";
    case LmiStatus::MaxIter: return "MaxIter";
    case LmiStatus::NumericalBreakdown: return "NumericalBreakdown";
  }
  return "?";
}

const char* to_string(CclStatus s) {
  switch (s) {
    case CclStatus::Converged: return "Converged";
    case CclStatus::EarlyExit: return "EarlyExit";
    case CclStatus::NoProgress: return "NoProgress";
    case CclStatus::MaxIter: return "MaxIter";
    case CclStatus::Infeasible: return "Infeasible";
    case CclStatus::SolverFailure: return "SolverFailure";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// LmiProblem

int LmiProblem::add_symmetric(const std::string& name, int dim) {
  if (dim <= 0) throw std::invalid_argument("add_symmetric: dimension must be positive");
  LmiVariable v{name, dim, dim, true, num_scalars_, dim * (dim + 1) / 2};
  num_scalars_ += v.count;
  vars_.push_back(v);
  return static_cast<int>(vars_.size()) - 1;
}

int LmiProblem::add_full(const std::string& name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("add_full: dimensions must be positive");
  LmiVariable v{name, rows, cols, false, num_scalars_, rows * cols};
  num_scalars_ += v.count;
  vars_.push_back(v);
  return static_cast<int>(vars_.size()) - 1;
}

AffineMatrix LmiProblem::var(int id) const {
  const LmiVariable& v = variable(id);
  AffineMatrix out(v.rows, v.cols);
  int k = v.offset;
  if (v.symmetric) {
    for (int j = 0; j < v.cols; ++j) {
      for (int i = 0; i <= j; ++i, ++k) {
        out.add_term(i, j, k, 1.0);
        if (i != j) out.add_term(j, i, k, 1.0);
      }
    }
  } else {
    for (int j = 0; j < v.cols; ++j) {
      for (int i = 0; i < v.rows; ++i, ++k) out.add_term(i, j, k, 1.0);
    }
  }
  return out;
}

Matrix LmiProblem::value(int id, const Vector& x) const { return var(id).evaluate(x); }

void LmiProblem::add_constraint(const std::string& label, AffineMatrix expr, LmiSense sense,
                                std::optional<double> strict_margin) {
  expr.compress();
  double margin = 0.0;
  if (sense == LmiSense::NegativeDefinite) margin = strict_margin.value_or(default_strict_margin(expr));
  constraints_.push_back({label, std::move(expr), sense, margin});
}

void LmiProblem::add_linear_objective(int scalar_index, double coef) {
  if (scalar_index < 0 || scalar_index >= num_scalars_) throw std::out_of_range("add_linear_objective");
  if (objective_.size() < static_cast<size_t>(num_scalars_)) objective_.resize(static_cast<size_t>(num_scalars_), 0.0);
  objective_[static_cast<size_t>(scalar_index)] += coef;
}

void LmiProblem::add_trace_objective(const Matrix& m, const AffineMatrix& e) {
  double c0 = 0.0;
  const Vector c = trace_coefficients(m, e, num_scalars_, &c0);
  if (objective_.size() < static_cast<size_t>(num_scalars_)) objective_.resize(static_cast<size_t>(num_scalars_), 0.0);
  for (int i = 0; i < num_scalars_; ++i) objective_[static_cast<size_t>(i)] += c[i];
  objective_constant_ += c0;
}

void LmiProblem::clear_objective() {
  objective_.clear();
  objective_constant_ = 0.0;
}

Vector LmiProblem::objective_vector() const {
  Vector c = Vector::Zero(num_scalars_);
  for (size_t i = 0; i < objective_.size() && i < static_cast<size_t>(num_scalars_); ++i) {
    c[static_cast<Eigen::Index>(i)] = objective_[i];
  }
  return c;
}

bool LmiProblem::has_objective() const {
  return std::any_of(objective_.begin(), objective_.end(), [](double v) { return v != 0.0; });
}

void LmiProblem::validate() const {
  for (const auto& c : constraints_) {
    const AffineMatrix& e = c.expr;
    if (e.rows() != e.cols() || e.rows() == 0) {
      throw std::invalid_argument("LMI constraint '" + c.label + "' is not square");
    }
    const Matrix& f0 = e.constant();
    if ((f0 - f0.transpose()).norm() > 1e-10 * std::max(1.0, f0.norm())) {
      throw std::invalid_argument("LMI constraint '" + c.label + "' has a non-symmetric constant part");
    }
    // Terms are compressed (sorted by var,row,col), so symmetry is a lookup.
    const auto& terms = e.terms();
    for (const auto& t : terms) {
      if (t.var < 0 || t.var >= num_scalars_) {
        throw std::invalid_argument("LMI constraint '" + c.label + "' references unknown scalar " +
                                    std::to_string(t.var));
      }
      if (t.row == t.col) continue;
      const AffineTerm mirror{t.col, t.row, t.var, 0.0};
      const auto jt = std::lower_bound(terms.begin(), terms.end(), mirror,
                                       [](const AffineTerm& a, const AffineTerm& b) {
                                         return std::tie(a.var, a.row, a.col) < std::tie(b.var, b.row, b.col);
                                       });
      if (jt == terms.end() || jt->var != t.var || jt->row != t.col || jt->col != t.row ||
          std::abs(jt->coef - t.coef) > 1e-10 * std::max(1.0, std::abs(t.coef))) {
        throw std::invalid_argument("LMI constraint '" + c.label + "' is not symmetric in scalar " +
                                    std::to_string(t.var));
      }
    }
  }
}

Vector trace_coefficients(const Matrix& m, const AffineMatrix& e, int num_scalars, double* c0) {
  if (m.rows() != e.cols() || m.cols() != e.rows()) throw std::invalid_argument("trace_coefficients: size mismatch");
  Vector c = Vector::Zero(num_scalars);
  // trace(M E) = sum_{ij} M(j,i) E(i,j)
  for (const auto& t : e.terms()) c[t.var] += m(t.col, t.row) * t.coef;
  if (c0 != nullptr) *c0 = (m * e.constant()).trace();
  return c;
}

// ---------------------------------------------------------------------------
// Barrier kernel

BarrierKernel::BarrierKernel(const LmiProblem& problem) { build(problem, false); }

BarrierKernel::BarrierKernel(const LmiProblem& problem, bool with_shift) { build(problem, with_shift); }

void BarrierKernel::build(const LmiProblem& problem, bool with_shift) {
  n_ = problem.num_scalars() + (with_shift ? 1 : 0);
  for (const auto& c : problem.constraints()) {
    AffineMatrix e = c.expr;
    e.compress();
    const double sign = c.sense == LmiSense::NegativeDefinite ? -1.0 : 1.0;
    Block b;
    b.dim = e.rows();
    b.constant = sign * numerics::symmetrize(e.constant()) - c.strict_margin * Matrix::Identity(b.dim, b.dim);
    for (const auto& t : e.terms()) {
      if (b.vars.empty() || b.vars.back().var != t.var) b.vars.push_back(VarBlock{t.var, {}, {}, {}});
      b.vars.back().entries.push_back({t.row, t.col, sign * t.coef});
    }
    if (with_shift) {
      VarBlock s{n_ - 1, {}, {}, {}};
      for (int i = 0; i < b.dim; ++i) s.entries.push_back({i, i, 1.0});
      b.vars.push_back(std::move(s));
    }
    for (auto& v : b.vars) {
      v.pos.assign(static_cast<size_t>(b.dim), -1);
      for (const auto& en : v.entries) v.pos[static_cast<size_t>(en.row)] = 0;
      for (int r = 0; r < b.dim; ++r) {
        if (v.pos[static_cast<size_t>(r)] == 0) {
          v.pos[static_cast<size_t>(r)] = static_cast<int>(v.rows.size());
          v.rows.push_back(r);
        }
      }
    }
    blocks_.push_back(std::move(b));
  }
}

Matrix BarrierKernel::slack(int k, const Vector& x) const {
  const Block& b = blocks_.at(static_cast<size_t>(k));
  Matrix s = b.constant;
  for (const auto& v : b.vars) {
    const double xv = x[v.var];
    if (xv == 0.0) continue;
    for (const auto& en : v.entries) s(en.row, en.col) += en.coef * xv;
  }
  return s;
}

namespace {

// H_ij += trace(W F_i W F_j) through M_i = W F_i W. Straightforward and
// cubic per variable; kept as the reference the fast kernel is tested against.
void hessian_serial(const BarrierKernel::Block& b, const Matrix& w, Matrix& h) {
  const int nv = static_cast<int>(b.vars.size());
  Matrix t(b.dim, b.dim);
  for (int i = 0; i < nv; ++i) {
    t.setZero();
    for (const auto& en : b.vars[static_cast<size_t>(i)].entries) t.col(en.col) += en.coef * w.col(en.row);
    const Matrix m = t * w;
    const int vi = b.vars[static_cast<size_t>(i)].var;
    for (int j = 0; j < nv; ++j) {
      double acc = 0.0;
      for (const auto& en : b.vars[static_cast<size_t>(j)].entries) acc += en.coef * m(en.col, en.row);
      h(vi, b.vars[static_cast<size_t>(j)].var) += acc;
    }
  }
}

// Same quantity from the row-compressed products U_i = (F_i W)[rows_i, :]:
//   trace(F_i W F_j W) = sum_{a in rows_i} sum_{c in rows_j} U_i(a, c) U_j(c, a)
// Work per pair is |rows_i| * |rows_j| instead of dim^2.
void hessian_parallel(const BarrierKernel::Block& b, const Matrix& w, Matrix& h) {
  const int nv = static_cast<int>(b.vars.size());
  std::vector<Matrix> u(static_cast<size_t>(nv));
  PLATOON_OMP(omp parallel for schedule(dynamic))
  for (int i = 0; i < nv; ++i) {
    const auto& v = b.vars[static_cast<size_t>(i)];
    Matrix ui = Matrix::Zero(static_cast<Eigen::Index>(v.rows.size()), b.dim);
    for (const auto& en : v.entries) ui.row(v.pos[static_cast<size_t>(en.row)]) += en.coef * w.row(en.col);
    u[static_cast<size_t>(i)] = std::move(ui);
  }
  Matrix local = Matrix::Zero(nv, nv);
  PLATOON_OMP(omp parallel for schedule(dynamic))
  for (int i = 0; i < nv; ++i) {
    const auto& vi = b.vars[static_cast<size_t>(i)];
    const Matrix& ui = u[static_cast<size_t>(i)];
    for (int j = i; j < nv; ++j) {
      const auto& vj = b.vars[static_cast<size_t>(j)];
      const Matrix& uj = u[static_cast<size_t>(j)];
      double acc = 0.0;
      for (size_t a = 0; a < vi.rows.size(); ++a) {
        for (size_t c = 0; c < vj.rows.size(); ++c) {
          acc += ui(static_cast<Eigen::Index>(a), vj.rows[c]) * uj(static_cast<Eigen::Index>(c), vi.rows[a]);
        }
      }
      local(i, j) = acc;
      local(j, i) = acc;
    }
  }
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < nv; ++j) h(b.vars[static_cast<size_t>(i)].var, b.vars[static_cast<size_t>(j)].var) += local(i, j);
  }
}

}  // namespace

bool BarrierKernel::evaluate(const Vector& x, HessianKernel kernel, double* value, Vector* grad, Matrix* hess) const {
  if (x.size() != n_) throw std::invalid_argument("BarrierKernel::evaluate: wrong dimension");
  double val = 0.0;
  if (grad != nullptr) *grad = Vector::Zero(n_);
  if (hess != nullptr) *hess = Matrix::Zero(n_, n_);
  for (int k = 0; k < num_constraints(); ++k) {
    const Block& b = blocks_[static_cast<size_t>(k)];
    const Matrix s = slack(k, x);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) return false;
    const Matrix& l = llt.matrixLLT();
    double logdet = 0.0;
    for (int i = 0; i < b.dim; ++i) {
      const double d = l(i, i);
      if (!(d > 0.0)) return false;
      logdet += 2.0 * std::log(d);
    }
    val -= logdet;
    if (grad == nullptr && hess == nullptr) continue;
    const Matrix w = llt.solve(Matrix::Identity(b.dim, b.dim));
    if (grad != nullptr) {
      for (const auto& v : b.vars) {
        double acc = 0.0;
        for (const auto& en : v.entries) acc += en.coef * w(en.col, en.row);
        (*grad)[v.var] -= acc;
      }
    }
    if (hess != nullptr) {
      if (kernel == HessianKernel::Serial) {
        hessian_serial(b, w, *hess);
      } else {
        hessian_parallel(b, w, *hess);
      }
    }
  }
  if (value != nullptr) *value = val;
  return true;
}

double BarrierKernel::max_step(const Vector& x, const Vector& dx) const {
  double alpha = kInf;
  for (int k = 0; k < num_constraints(); ++k) {
    const Block& b = blocks_[static_cast<size_t>(k)];
    Matrix ds = Matrix::Zero(b.dim, b.dim);
    for (const auto& v : b.vars) {
      const double d = dx[v.var];
      if (d == 0.0) continue;
      for (const auto& en : v.entries) ds(en.row, en.col) += en.coef * d;
    }
    Eigen::LLT<Matrix> llt(slack(k, x));
    if (llt.info() != Eigen::Success) return 0.0;
    Matrix m = llt.matrixL().solve(ds);
    m = llt.matrixL().solve(m.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrize(m), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()[0];
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

// ---------------------------------------------------------------------------
// Certificate

bool certify(const LmiProblem& problem, const Vector& x, double eps_feas, std::vector<double>* margins) {
  bool ok = true;
  if (margins != nullptr) margins->clear();
  for (const auto& c : problem.constraints()) {
    const Matrix f = numerics::symmetrize(c.expr.evaluate(x));
    const Vector ev = numerics::eigvals_sym(f);
    double margin = 0.0;
    if (c.sense == LmiSense::NegativeDefinite) {
      margin = ev[ev.size() - 1];
      ok = ok && margin < -eps_feas;
    } else {
      margin = -ev[0];
      ok = ok && margin < eps_feas;
    }
    if (margins != nullptr) margins->push_back(margin);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// Barrier method

namespace {

enum class CenterResult { Centered, Stopped, Breakdown, Budget };

struct BarrierRun {
  const BarrierKernel& kernel;
  HessianKernel mode;
  int ball_dims;      // leading scalars covered by the norm ball
  double radius2;
  int* newton_used;
  int newton_budget;
  double newton_tol;

  double ball_value(const Vector& x) const {
    const double r = radius2 - x.head(ball_dims).squaredNorm();
    return r > 0.0 ? -std::log(r) : kInf;
  }

  // Barrier value, gradient and Hessian including the norm ball.
  bool derivatives(const Vector& x, double* value, Vector* g, Matrix* h) const {
    if (!kernel.evaluate(x, mode, value, g, h)) return false;
    const double r = radius2 - x.head(ball_dims).squaredNorm();
    if (!(r > 0.0)) return false;
    if (value != nullptr) *value -= std::log(r);
    if (g != nullptr) g->head(ball_dims) += (2.0 / r) * x.head(ball_dims);
    if (h != nullptr) {
      const Vector xb = x.head(ball_dims);
      h->topLeftCorner(ball_dims, ball_dims).diagonal().array() += 2.0 / r;
      h->topLeftCorner(ball_dims, ball_dims) += (4.0 / (r * r)) * xb * xb.transpose();
    }
    return true;
  }

  static Vector newton_direction(const Matrix& h, const Vector& rhs) {
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() == Eigen::Success) {
      Vector d = llt.solve(rhs);
      if (d.allFinite()) return d;
    }
    const double scale = std::max(1e-12, h.diagonal().cwiseAbs().maxCoeff());
    for (double reg = 1e-12; reg < 1e2; reg *= 100.0) {
      Matrix hr = h;
      hr.diagonal().array() += reg * scale;
      Eigen::LLT<Matrix> l2(hr);
      if (l2.info() == Eigen::Success) return l2.solve(rhs);
    }
    return Vector::Zero(rhs.size());
  }

  // Minimizes t c'x + barrier(x) from a strictly feasible x. `stop` is
  // consulted after every accepted step.
  CenterResult center(Vector& x, const Vector& c, double t, const std::function<bool(const Vector&)>& stop) const {
    // Near the end of the path t c'x dominates and rounding puts a floor
    // under the Newton decrement; a long stall at a small decrement counts
    // as centered.
    constexpr int kStallSteps = 40;
    constexpr double kStallDecrement = 1e-4;
    int steps = 0;
    while (true) {
      if (*newton_used >= newton_budget) return CenterResult::Budget;
      double phi = 0.0;
      Vector g;
      Matrix h;
      if (!derivatives(x, &phi, &g, &h)) return CenterResult::Breakdown;
      const Vector grad = t * c + g;
      const Vector dx = newton_direction(h, -grad);
      const double lambda2 = -grad.dot(dx);
      ++*newton_used;
      if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) return CenterResult::Breakdown;
      if (lambda2 / 2.0 <= newton_tol) return CenterResult::Centered;
      if (++steps > kStallSteps && lambda2 / 2.0 <= kStallDecrement) return CenterResult::Centered;

      double amax = kernel.max_step(x, dx);
      // norm ball: |x + a dx|^2 < R^2
      {
        const Vector xb = x.head(ball_dims);
        const Vector db = dx.head(ball_dims);
        const double qa = db.squaredNorm();
        if (qa > 0.0) {
          const double qb = 2.0 * xb.dot(db);
          const double qc = xb.squaredNorm() - radius2;
          const double root = (-qb + std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc))) / (2.0 * qa);
          amax = std::min(amax, root);
        }
      }
      double alpha = std::min(1.0, 0.99 * amax);
      const double slope = grad.dot(dx);
      bool accepted = false;
      while (alpha > 1e-14) {
        const Vector xn = x + alpha * dx;
        double phin = 0.0;
        if (derivatives(xn, &phin, nullptr, nullptr)) {
          // Objective change from the step directly; the barrier change from
          // values. Keeps the test meaningful when t c'x is large.
          const double change = t * c.dot(alpha * dx) + (phin - phi);
          if (change <= 0.25 * alpha * slope) {
            x = xn;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Treat a stalled line search close to the center as convergence.
        return lambda2 < 1e-6 ? CenterResult::Centered : CenterResult::Breakdown;
      }
      if (stop && stop(x)) return CenterResult::Stopped;
    }
  }

  // Initial t minimizing the dual residual norm |t c + g|_{H^-1}.
  double initial_t(const Vector& x, const Vector& c) const {
    Vector g;
    Matrix h;
    if (!derivatives(x, nullptr, &g, &h)) return 1.0;
    const Vector hc = newton_direction(h, c);
    const Vector hg = newton_direction(h, g);
    const double den = c.dot(hc);
    if (!(den > 0.0)) return 1.0;
    const double t = -c.dot(hg) / den;
    if (!std::isfinite(t) || t <= 0.0) return 1.0;
    return std::clamp(t, 1e-8, 1e8);
  }
};

bool strictly_feasible(const BarrierKernel& kernel, const Vector& x, double radius2) {
  if (!(x.squaredNorm() < radius2)) return false;
  return kernel.evaluate(x, HessianKernel::Parallel, nullptr, nullptr, nullptr);
}

}  // namespace

LmiSolution solve_lmi(const LmiProblem& problem, const LmiSettings& settings, const std::optional<Vector>& x0) {
  problem.validate();
  const int m = problem.num_scalars();
  const double radius2 = settings.radius * settings.radius;
  const HessianKernel mode = settings.serial_kernel ? HessianKernel::Serial : HessianKernel::Parallel;
  int nu_dims = 1;  // ball
  for (const auto& c : problem.constraints()) nu_dims += c.expr.rows();
  const double nu = nu_dims;

  LmiSolution sol;
  int newton = 0;
  const BarrierKernel kernel(problem);
  Vector x = Vector::Zero(m);
  if (x0 && x0->size() == m && x0->allFinite()) x = *x0;

  auto finish = [&](LmiStatus status, const std::string& msg) {
    sol.x = x;
    sol.newton_iterations = newton;
    sol.objective = problem.objective_vector().dot(x) + problem.objective_constant();
    const bool ok = certify(problem, x, settings.eps_feas, &sol.margins);
    sol.status = status;
    sol.message = msg;
    if (status == LmiStatus::Feasible && !ok) {
      sol.status = LmiStatus::NumericalBreakdown;
      sol.message = "certificate failed independent eigenvalue check";
    }
    return sol;
  };

  // Phase I
  if (!strictly_feasible(kernel, x, radius2)) {
    if (!(x.squaredNorm() < radius2)) x.setZero();
    const BarrierKernel shifted(problem, true);
    double worst = 0.0;
    for (int k = 0; k < kernel.num_constraints(); ++k) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrize(kernel.slack(k, x)), Eigen::EigenvaluesOnly);
      worst = std::min(worst, es.eigenvalues()[0]);
    }
    Vector y(m + 1);
    y.head(m) = x;
    y[m] = -worst * 1.1 + 1.0;
    Vector c1 = Vector::Zero(m + 1);
    c1[m] = 1.0;
    const BarrierRun run{shifted, mode, m, radius2, &newton, settings.max_newton, settings.newton_tol};
    const auto stop = [m](const Vector& v) { return v[m] < 0.0; };
    // Small t would send the first centering towards the analytic center of
    // the shifted set, which is far out on cone-like problems.
    double t = std::max(run.initial_t(y, c1), nu / std::max(1.0, y[m]));
    bool found = y[m] < 0.0;
    while (!found) {
      const CenterResult r = run.center(y, c1, t, stop);
      if (r == CenterResult::Stopped) {
        found = true;
        break;
      }
      if (r == CenterResult::Budget) {
        x = y.head(m);
        sol.phase1_iterations = newton;
        return finish(LmiStatus::MaxIter, "phase I iteration budget exhausted");
      }
      if (r == CenterResult::Breakdown) {
        x = y.head(m);
        sol.phase1_iterations = newton;
        return finish(LmiStatus::NumericalBreakdown, "phase I line search collapsed");
      }
      // Lower bound on min s from the central path.
      const double bound = y[m] - nu / t;
      if (bound > 0.0 || nu / t < 1e-13 * std::max(1.0, std::abs(y[m]))) {
        x = y.head(m);
        sol.phase1_iterations = newton;
        return finish(LmiStatus::Infeasible, "no strictly feasible point (phase I bound " + std::to_string(bound) + ")");
      }
      t *= settings.mu;
    }
    x = y.head(m);
    sol.phase1_iterations = newton;
  }

  if (!problem.has_objective()) return finish(LmiStatus::Feasible, "feasible");

  // Phase II
  const Vector c = problem.objective_vector();
  const BarrierRun run{kernel, mode, m, radius2, &newton, settings.max_newton, settings.newton_tol};
  double t = std::max(run.initial_t(x, c), nu / std::max(1.0, std::abs(c.dot(x))));
  while (true) {
    const CenterResult r = run.center(x, c, t, {});
    if (r == CenterResult::Budget) return finish(LmiStatus::MaxIter, "phase II iteration budget exhausted");
    if (r == CenterResult::Breakdown) {
      // The last accepted point is still strictly feasible; report it if
      // the duality gap there is already small.
      const double obj = c.dot(x);
      if (nu / t <= 1e-4 * std::max(1.0, std::abs(obj))) return finish(LmiStatus::Feasible, "stalled near optimum");
      return finish(LmiStatus::NumericalBreakdown, "phase II line search collapsed");
    }
    const double obj = c.dot(x);
    if (nu / t <= std::max(settings.gap_abs, settings.gap_rel * std::max(1.0, std::abs(obj)))) break;
    t *= settings.mu;
  }
  return finish(LmiStatus::Feasible, "optimal");
}

// ---------------------------------------------------------------------------
// Cone complementarity linearization

CclResult ccl_minimize(const LmiProblem& problem, const std::vector<CclPair>& pairs, const CclSettings& settings,
                       const std::function<bool(const Vector&)>& accept) {
  CclResult res;
  LmiProblem aug = problem;
  aug.clear_objective();
  for (size_t i = 0; i < pairs.size(); ++i) {
    const int d = pairs[i].x.rows();
    if (pairs[i].x.cols() != d || pairs[i].y.rows() != d || pairs[i].y.cols() != d) {
      throw std::invalid_argument("ccl_minimize: pair " + std::to_string(i) + " has inconsistent sizes");
    }
    SymmetricBlocks blk({d, d});
    blk.set(0, 0, pairs[i].x);
    blk.set(0, 1, AffineMatrix::identity(d));
    blk.set(1, 1, pairs[i].y);
    aug.add_constraint("ccl_coupling_" + std::to_string(i), blk.build(), LmiSense::PositiveSemidefinite);
  }

  auto gap_at = [&](const Vector& x) {
    double g = 0.0;
    for (const auto& p : pairs) g += (p.x.evaluate(x) * p.y.evaluate(x)).trace() - p.x.rows();
    return g;
  };
  auto finish = [&](CclStatus status, const LmiSolution& s) {
    res.status = status;
    res.solution = s;
    res.solution.objective = gap_at(s.x);
    certify(problem, s.x, settings.lmi.eps_feas, &res.solution.margins);
    return res;
  };

  LmiSolution cur = solve_lmi(aug, settings.lmi);
  if (cur.status == LmiStatus::Infeasible) return finish(CclStatus::Infeasible, cur);
  if (cur.status != LmiStatus::Feasible) return finish(CclStatus::SolverFailure, cur);
  if (accept && accept(cur.x)) return finish(CclStatus::EarlyExit, cur);
  if (gap_at(cur.x) < settings.gap_tol) return finish(CclStatus::Converged, cur);

  double prev = kInf;
  for (int k = 0; k < settings.max_outer; ++k) {
    LmiProblem lin = aug;
    for (const auto& p : pairs) {
      lin.add_trace_objective(p.y.evaluate(cur.x), p.x);
      lin.add_trace_objective(p.x.evaluate(cur.x), p.y);
    }
    LmiSolution next = solve_lmi(lin, settings.lmi, cur.x);
    res.outer_iterations = k + 1;
    if (next.status != LmiStatus::Feasible) {
      CclResult failed = finish(next.status == LmiStatus::Infeasible ? CclStatus::Infeasible : CclStatus::SolverFailure, cur);
      failed.solution.message = std::string("outer iteration ") + std::to_string(k + 1) + ": " + to_string(next.status) +
                                " (" + next.message + ")";
      return failed;
    }
    cur = next;
    const double obj = cur.objective;
    const double gap = gap_at(cur.x);
    res.linearized_objective.push_back(obj);
    res.gap.push_back(gap);
    if (accept && accept(cur.x)) return finish(CclStatus::EarlyExit, cur);
    if (gap < settings.gap_tol) return finish(CclStatus::Converged, cur);
    if (std::isfinite(prev) && prev - obj < settings.rel_decrease_tol * std::abs(prev)) {
      return finish(CclStatus::NoProgress, cur);
    }
    prev = obj;
  }
  return finish(CclStatus::MaxIter, cur);
}

}  // namespace platoon::convex
