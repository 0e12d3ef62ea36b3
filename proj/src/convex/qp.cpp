#include "platoon/convex/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace platoon::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqScale = 1e3;
constexpr double kScalingMin = 1e-4;
constexpr double kScalingMax = 1e4;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Stacked representation l <= C x <= u.
struct Stacked {
  Matrix c;
  Vector l;
  Vector u;
  int n_in = 0;
  int n_eq = 0;
  std::vector<int> bounded_vars;  // variable index for each bound row
};

Stacked stack(const QpProblem& p) {
  const int n = p.num_vars();
  Stacked s;
  s.n_in = static_cast<int>(p.a_in.rows());
  s.n_eq = static_cast<int>(p.a_eq.rows());
  for (int i = 0; i < n; ++i) {
    const double lo = p.lower.size() ? p.lower[i] : -kInf;
    const double hi = p.upper.size() ? p.upper[i] : kInf;
    if (std::isfinite(lo) || std::isfinite(hi)) s.bounded_vars.push_back(i);
  }
  const int m = s.n_in + s.n_eq + static_cast<int>(s.bounded_vars.size());
  s.c = Matrix::Zero(m, n);
  s.l.resize(m);
  s.u.resize(m);
  int row = 0;
  if (s.n_in) {
    s.c.topRows(s.n_in) = p.a_in;
    s.l.head(s.n_in).setConstant(-kInf);
    s.u.head(s.n_in) = p.b_in;
    row = s.n_in;
  }
  if (s.n_eq) {
    s.c.middleRows(row, s.n_eq) = p.a_eq;
    s.l.segment(row, s.n_eq) = p.b_eq;
    s.u.segment(row, s.n_eq) = p.b_eq;
    row += s.n_eq;
  }
  for (int var : s.bounded_vars) {
    s.c(row, var) = 1.0;
    s.l[row] = p.lower.size() ? p.lower[var] : -kInf;
    s.u[row] = p.upper.size() ? p.upper[var] : kInf;
    ++row;
  }
  return s;
}

struct Residuals {
  double prim = 0.0;
  double dual = 0.0;
  double prim_scale = 0.0;
  double dual_scale = 0.0;
};

Residuals residuals(const Matrix& p, const Vector& q, const Matrix& a, const Vector& x, const Vector& z,
                    const Vector& y) {
  Residuals r;
  const Vector ax = a * x;
  const Vector px = p * x;
  const Vector aty = a.transpose() * y;
  r.prim = inf_norm(ax - z);
  r.dual = inf_norm(px + q + aty);
  r.prim_scale = std::max(inf_norm(ax), inf_norm(z));
  r.dual_scale = std::max({inf_norm(px), inf_norm(aty), inf_norm(q)});
  return r;
}

Vector project(const Vector& v, const Vector& l, const Vector& u) { return v.cwiseMax(l).cwiseMin(u); }

// Candidate polished solution: solve the equality-constrained KKT system on
// the guessed active set with iterative refinement.
bool polish(const Matrix& p, const Vector& q, const Matrix& a, const Vector& l, const Vector& u, const Vector& z,
            const Vector& y, int refine, Vector& x_out, Vector& y_out) {
  const int n = static_cast<int>(p.rows());
  const int m = static_cast<int>(a.rows());
  std::vector<int> active;
  std::vector<double> rhs_b;
  for (int i = 0; i < m; ++i) {
    const bool low = std::isfinite(l[i]) && (z[i] - l[i] < -y[i]);
    const bool upp = std::isfinite(u[i]) && (u[i] - z[i] < y[i]);
    if (low || upp) {
      active.push_back(i);
      rhs_b.push_back(low ? l[i] : u[i]);
    }
  }
  const int na = static_cast<int>(active.size());
  if (na > n) return false;
  constexpr double delta = 1e-9;
  Matrix kkt = Matrix::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) = p;
  for (int k = 0; k < na; ++k) {
    kkt.block(n + k, 0, 1, n) = a.row(active[k]);
    kkt.block(0, n + k, n, 1) = a.row(active[k]).transpose();
  }
  Matrix kkt_reg = kkt;
  kkt_reg.topLeftCorner(n, n).diagonal().array() += delta;
  kkt_reg.bottomRightCorner(na, na).diagonal().array() -= delta;
  Vector rhs(n + na);
  rhs.head(n) = -q;
  for (int k = 0; k < na; ++k) rhs[n + k] = rhs_b[static_cast<size_t>(k)];

  Eigen::PartialPivLU<Matrix> lu(kkt_reg);
  Vector sol = lu.solve(rhs);
  for (int it = 0; it < refine; ++it) {
    const Vector res = rhs - kkt * sol;
    sol += lu.solve(res);
  }
  if (!sol.allFinite()) return false;
  x_out = sol.head(n);
  y_out = Vector::Zero(m);
  for (int k = 0; k < na; ++k) y_out[active[k]] = sol[n + k];
  // Multiplier signs must match the side that was activated.
  for (int k = 0; k < na; ++k) {
    const int i = active[k];
    const bool low = std::isfinite(l[i]) && (z[i] - l[i] < -y[i]);
    const bool eq = std::isfinite(l[i]) && std::isfinite(u[i]) && l[i] == u[i];
    if (eq) continue;
    if (low && y_out[i] > 1e-9 * (1.0 + std::abs(y_out[i]))) return false;
    if (!low && y_out[i] < -1e-9 * (1.0 + std::abs(y_out[i]))) return false;
  }
  return true;
}

double scaled_kkt(const Matrix& p, const Vector& q, const Matrix& a, const Vector& l, const Vector& u,
                  const Vector& x, const Vector& y) {
  const Vector ax = a * x;
  const Vector z = project(ax, l, u);
  Residuals r = residuals(p, q, a, x, z, y);
  double comp = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double slack = 0.0;
    if (y[i] > 0.0) slack = std::isfinite(u[i]) ? u[i] - ax[i] : kInf;
    if (y[i] < 0.0) slack = std::isfinite(l[i]) ? ax[i] - l[i] : kInf;
    if (y[i] != 0.0 && std::isfinite(slack)) comp = std::max(comp, std::abs(y[i] * slack));
  }
  // Wrong-signed multipliers count as dual infeasibility.
  double sign_violation = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(u[i]) && y[i] > 0.0) sign_violation = std::max(sign_violation, y[i]);
    if (!std::isfinite(l[i]) && y[i] < 0.0) sign_violation = std::max(sign_violation, -y[i]);
  }
  const double ps = 1.0 + r.prim_scale;
  const double ds = 1.0 + r.dual_scale;
  return std::max({r.prim / ps, r.dual / ds, comp / (ps * ds), sign_violation / ds});
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const auto n = hessian.rows();
  if (hessian.cols() != n) throw std::invalid_argument("QpProblem: Hessian must be square");
  if (linear.size() != n) throw std::invalid_argument("QpProblem: linear term size mismatch");
  if (a_in.rows() != b_in.size() || (a_in.rows() > 0 && a_in.cols() != n))
    throw std::invalid_argument("QpProblem: inequality block size mismatch");
  if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != n))
    throw std::invalid_argument("QpProblem: equality block size mismatch");
  if ((lower.size() != 0 && lower.size() != n) || (upper.size() != 0 && upper.size() != n))
    throw std::invalid_argument("QpProblem: bound size mismatch");
  const double scale = std::max(hessian.norm(), numerics::kAbsoluteFloor);
  if ((hessian - hessian.transpose()).norm() > 1e-10 * scale)
    throw std::invalid_argument("QpProblem: Hessian is not symmetric");
  if (n > 0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrize(hessian), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] < -1e-8 * scale) throw std::invalid_argument("QpProblem: Hessian is not PSD");
  }
  if (!hessian.allFinite() || !linear.allFinite()) throw std::invalid_argument("QpProblem: non-finite data");
}

double kkt_residual(const QpProblem& problem, const Vector& x, const Vector& y) {
  const Stacked s = stack(problem);
  return scaled_kkt(problem.hessian, problem.linear, s.c, s.l, s.u, x, y);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings, const std::optional<QpWarmStart>& warm) {
  problem.validate();
  const int n = problem.num_vars();
  const Stacked st = stack(problem);
  const int m = static_cast<int>(st.c.rows());

  for (int i = 0; i < m; ++i) {
    if (st.l[i] > st.u[i]) {
      QpSolution out;
      out.status = QpStatus::Infeasible;
      out.x = Vector::Zero(n);
      return out;
    }
  }

  // Ruiz equilibration of the KKT matrix, then cost scaling.
  Vector d = Vector::Ones(n);
  Vector e = Vector::Ones(m);
  Matrix p = numerics::symmetrize(problem.hessian);
  Vector q = problem.linear;
  Matrix a = st.c;
  double cost_scale = 1.0;
  if (settings.scaling) {
    for (int it = 0; it < settings.scaling_iter; ++it) {
      Vector dt(n);
      for (int j = 0; j < n; ++j) {
        double nrm = p.col(j).lpNorm<Eigen::Infinity>();
        if (m) nrm = std::max(nrm, a.col(j).lpNorm<Eigen::Infinity>());
        dt[j] = nrm < kScalingMin ? 1.0 : 1.0 / std::sqrt(std::min(nrm, kScalingMax));
      }
      Vector et(m);
      for (int i = 0; i < m; ++i) {
        const double nrm = a.row(i).lpNorm<Eigen::Infinity>();
        et[i] = nrm < kScalingMin ? 1.0 : 1.0 / std::sqrt(std::min(nrm, kScalingMax));
      }
      p = dt.asDiagonal() * p * dt.asDiagonal();
      q = dt.asDiagonal() * q;
      a = et.asDiagonal() * a * dt.asDiagonal();
      d = d.cwiseProduct(dt);
      e = e.cwiseProduct(et);
    }
    double mean_col = 0.0;
    for (int j = 0; j < n; ++j) mean_col += p.col(j).lpNorm<Eigen::Infinity>();
    mean_col = n ? mean_col / n : 0.0;
    double cnorm = std::max(mean_col, inf_norm(q));
    cnorm = cnorm < kScalingMin ? 1.0 : std::min(cnorm, kScalingMax);
    cost_scale = 1.0 / cnorm;
    p *= cost_scale;
    q *= cost_scale;
  }
  const Vector l = e.cwiseProduct(st.l);
  const Vector u = e.cwiseProduct(st.u);

  // Per-row penalty: stiff on equalities, soft on free rows.
  double rho = settings.rho;
  auto make_rho_vec = [&](double base) {
    Vector r(m);
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(l[i]) && !std::isfinite(u[i])) r[i] = kRhoMin;
      else if (l[i] == u[i]) r[i] = kRhoEqScale * base;
      else r[i] = base;
    }
    return r;
  };
  Vector rho_vec = make_rho_vec(rho);
  const double sigma = settings.sigma;

  Eigen::LLT<Matrix> factor;
  auto refactor = [&]() {
    Matrix k = p + sigma * Matrix::Identity(n, n);
    if (m) k.noalias() += a.transpose() * rho_vec.asDiagonal() * a;
    factor.compute(k);
  };
  refactor();

  Vector x = Vector::Zero(n);
  Vector z = Vector::Zero(m);
  Vector y = Vector::Zero(m);
  if (warm && warm->x.size() == n) {
    x = warm->x.cwiseQuotient(d);
    if (warm->y.size() == m) y = cost_scale * warm->y.cwiseQuotient(e);
  }
  z = project(a * x, l, u);

  QpSolution out;
  out.status = QpStatus::MaxIter;

  auto unscale_x = [&](const Vector& xs) -> Vector { return d.cwiseProduct(xs); };
  auto unscale_y = [&](const Vector& ys) -> Vector { return e.cwiseProduct(ys) / cost_scale; };

  const Matrix h_orig = numerics::symmetrize(problem.hessian);

  Vector best_x, best_y;
  double best_kkt = kInf;
  bool have_polished = false;
  int last_polish_iter = -1000;

  auto try_polish = [&](int iter) {
    last_polish_iter = iter;
    Vector xp, yp;
    // Polish in original units so the reported residual is exact.
    if (!polish(h_orig, problem.linear, st.c, st.l, st.u, z.cwiseQuotient(e), unscale_y(y), settings.polish_refine,
                xp, yp)) {
      return false;
    }
    const double k = scaled_kkt(h_orig, problem.linear, st.c, st.l, st.u, xp, yp);
    if (k < best_kkt) {
      best_kkt = k;
      best_x = xp;
      best_y = yp;
      have_polished = true;
    }
    return k <= 1e-9;
  };

  Vector x_prev, z_prev, y_prev;
  int iter = 0;
  for (iter = 1; iter <= settings.max_iter; ++iter) {
    x_prev = x;
    z_prev = z;
    y_prev = y;

    Vector rhs = sigma * x - q;
    if (m) rhs.noalias() += a.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Vector x_tilde = factor.solve(rhs);
    const Vector z_tilde = a * x_tilde;

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x_prev;
    const Vector z_relaxed = settings.alpha * z_tilde + (1.0 - settings.alpha) * z_prev;
    z = project(z_relaxed + y.cwiseQuotient(rho_vec), l, u);
    y = y + rho_vec.cwiseProduct(z_relaxed - z);

    if (iter % settings.check_every != 0 && iter != settings.max_iter) continue;

    // Residuals in original units.
    const Vector xu = unscale_x(x);
    const Vector zu = z.cwiseQuotient(e);
    const Vector yu = unscale_y(y);
    const Residuals r = residuals(h_orig, problem.linear, st.c, xu, zu, yu);
    const double eps_prim = settings.eps_abs + settings.eps_rel * r.prim_scale;
    const double eps_dual = settings.eps_abs + settings.eps_rel * r.dual_scale;

    if (r.prim <= eps_prim && r.dual <= eps_dual) {
      const double k = scaled_kkt(h_orig, problem.linear, st.c, st.l, st.u, xu, yu);
      if (k < best_kkt) {
        best_kkt = k;
        best_x = xu;
        best_y = yu;
      }
      if (settings.polish) try_polish(iter);
      out.status = QpStatus::Optimal;
      break;
    }

    // Early polish once the iterate is close; exits if the active set is right.
    const double rel = std::max(r.prim / (1.0 + r.prim_scale), r.dual / (1.0 + r.dual_scale));
    if (settings.polish && rel < 1e-3 && iter - last_polish_iter >= 5 * settings.check_every) {
      if (try_polish(iter)) {
        out.status = QpStatus::Optimal;
        break;
      }
    }

    // Primal infeasibility certificate.
    if (m) {
      const Vector dy = unscale_y(y - y_prev);
      const double dy_norm = inf_norm(dy);
      if (dy_norm > 1e-12) {
        const double at_dy = inf_norm(st.c.transpose() * dy);
        double support = 0.0;
        bool valid = true;
        for (int i = 0; i < m; ++i) {
          if (dy[i] > 0.0) {
            if (!std::isfinite(st.u[i])) { valid = dy[i] <= settings.eps_prim_inf * dy_norm; if (!valid) break; }
            else support += st.u[i] * dy[i];
          } else if (dy[i] < 0.0) {
            if (!std::isfinite(st.l[i])) { valid = -dy[i] <= settings.eps_prim_inf * dy_norm; if (!valid) break; }
            else support += st.l[i] * dy[i];
          }
        }
        if (valid && at_dy <= settings.eps_prim_inf * dy_norm && support < -settings.eps_prim_inf * dy_norm) {
          out.status = QpStatus::Infeasible;
          out.x = xu;
          out.iterations = iter;
          out.kkt_residual = kInf;
          out.objective = problem.objective(xu);
          return out;
        }
      }
    }

    if (settings.adaptive_rho && m) {
      const Vector ax = a * x;
      const Vector px = p * x;
      const Vector aty = a.transpose() * y;
      const double prim_n = inf_norm(ax - z) / std::max({inf_norm(ax), inf_norm(z), 1e-12});
      const double dual_n =
          inf_norm(px + q + aty) / std::max({inf_norm(px), inf_norm(aty), inf_norm(q), 1e-12});
      if (prim_n > 0.0 && dual_n > 0.0) {
        const double new_rho = std::clamp(rho * std::sqrt(prim_n / dual_n), kRhoMin, kRhoMax);
        if (new_rho > 5.0 * rho || new_rho < 0.2 * rho) {
          rho = new_rho;
          rho_vec = make_rho_vec(rho);
          refactor();
        }
      }
    }
  }
  out.iterations = std::min(iter, settings.max_iter);

  if (out.status != QpStatus::Optimal) {
    const Vector xu = unscale_x(x);
    const Vector yu = unscale_y(y);
    const double k = scaled_kkt(h_orig, problem.linear, st.c, st.l, st.u, xu, yu);
    if (k < best_kkt) {
      best_kkt = k;
      best_x = xu;
      best_y = yu;
      have_polished = false;
    }
    if (settings.polish) try_polish(out.iterations);
    if (best_kkt <= 1e-6) out.status = QpStatus::Optimal;
  }

  out.x = best_x;
  out.polished = have_polished;
  out.kkt_residual = best_kkt;
  out.objective = problem.objective(best_x);
  out.y_in = best_y.head(st.n_in);
  out.y_eq = best_y.segment(st.n_in, st.n_eq);
  out.y_bounds = Vector::Zero(n);
  for (size_t k = 0; k < st.bounded_vars.size(); ++k) {
    out.y_bounds[st.bounded_vars[k]] = best_y[st.n_in + st.n_eq + static_cast<int>(k)];
  }
  out.warm = QpWarmStart{best_x, best_y};
  if (out.status == QpStatus::Optimal && best_kkt > 1e-6) out.status = QpStatus::MaxIter;
  return out;
}

}  // namespace platoon::convex
