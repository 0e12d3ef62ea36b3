#include "platoon/ucl.hpp"

#include <algorithm>
#include <cmath>

namespace platoon::ucl {

using convex::AffineMatrix;
using convex::LmiProblem;
using convex::LmiSense;
using convex::SymmetricBlocks;

namespace {

AffineMatrix constant(const Matrix& m) { return AffineMatrix(m); }

AffineMatrix block_diag(const std::vector<AffineMatrix>& blocks) {
  int rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  AffineMatrix out(rows, cols);
  int r = 0, c = 0;
  for (const auto& b : blocks) {
    out += convex::embed(b, rows, cols, r, c);
    r += b.rows();
    c += b.cols();
  }
  out.compress();
  return out;
}

// Decision variables of the synthesis problem. Every N x N matrix is
// block-diagonal with one 3x3 block per follower; Y has the PLF pattern
// (own block on the diagonal, predecessor block one to the left).
struct SynthesisVars {
  int n = 0;
  std::vector<int> p, q, z, s, t, j, r;  // per-follower 3x3 symmetric
  std::vector<int> y1, y2;               // 1x3 rows; y2[0] unused (-1)
};

struct Assembled {
  LmiProblem problem;
  SynthesisVars v;
  AffineMatrix phi;  // the linearized condition with Sbar in the (4,4) block
  std::vector<convex::CclPair> pairs;
};

AffineMatrix stack_blocks(const LmiProblem& p, const std::vector<int>& ids) {
  std::vector<AffineMatrix> b;
  for (int id : ids) b.push_back(p.var(id));
  return block_diag(b);
}

AffineMatrix y_matrix(const LmiProblem& p, const SynthesisVars& v) {
  const int n = v.n;
  AffineMatrix y(n, 3 * n);
  for (int i = 0; i < n; ++i) {
    y += convex::embed(p.var(v.y1[static_cast<size_t>(i)]), n, 3 * n, i, 3 * i);
    if (i > 0) y += convex::embed(p.var(v.y2[static_cast<size_t>(i)]), n, 3 * n, i, 3 * (i - 1));
  }
  y.compress();
  return y;
}

Assembled assemble(const PlatoonSystem& sys, double strict_margin) {
  Assembled out;
  LmiProblem& p = out.problem;
  SynthesisVars& v = out.v;
  const int n = sys.n;
  v.n = n;
  for (int i = 0; i < n; ++i) {
    const std::string k = std::to_string(i + 1);
    v.p.push_back(p.add_symmetric("Pbar" + k, 3));
    v.q.push_back(p.add_symmetric("Qbar" + k, 3));
    v.z.push_back(p.add_symmetric("Zbar" + k, 3));
    v.s.push_back(p.add_symmetric("Sbar" + k, 3));
    v.t.push_back(p.add_symmetric("Tbar" + k, 3));
    v.j.push_back(p.add_symmetric("Jbar" + k, 3));
    v.r.push_back(p.add_symmetric("Rbar" + k, 3));
    v.y1.push_back(p.add_full("Y1_" + k, 1, 3));
    v.y2.push_back(i > 0 ? p.add_full("Y2_" + k, 1, 3) : -1);
  }
  const int nn = 3 * n;
  const AffineMatrix pb = stack_blocks(p, v.p);
  const AffineMatrix qb = stack_blocks(p, v.q);
  const AffineMatrix zb = stack_blocks(p, v.z);
  const AffineMatrix sb = stack_blocks(p, v.s);
  const AffineMatrix y = y_matrix(p, v);
  const double h = sys.h1;
  const AffineMatrix buy = sys.Bu * y;
  const AffineMatrix pat = pb * Matrix(sys.A.transpose());

  SymmetricBlocks phi({nn, nn, 2 * n, nn, n});
  phi.set(0, 0, sys.A * pb + pat + (1.0 / (1.0 - sys.mu1)) * qb - (1.0 / h) * zb);
  phi.set(0, 1, buy + (1.0 / h) * zb);
  phi.set(0, 2, constant(sys.Bw));
  phi.set(0, 3, pat);
  phi.set(0, 4, pb * Matrix(sys.C.transpose()));
  phi.set(1, 1, -qb - (1.0 / h) * zb);
  phi.set(1, 3, buy.transpose());
  phi.set(2, 2, constant(-sys.gamma * sys.gamma * Matrix::Identity(2 * n, 2 * n)));
  phi.set(2, 3, constant(sys.Bw.transpose()));
  phi.set(3, 3, -(1.0 / h) * sb);
  phi.set(4, 4, constant(-Matrix::Identity(n, n)));
  out.phi = phi.build();

  p.add_constraint("Phi2", out.phi, LmiSense::NegativeDefinite, strict_margin);
  for (int i = 0; i < n; ++i) {
    const std::string k = std::to_string(i + 1);
    const size_t u = static_cast<size_t>(i);
    p.add_constraint("Pbar" + k + ">0", -p.var(v.p[u]), LmiSense::NegativeDefinite, strict_margin);
    p.add_constraint("Qbar" + k + ">0", -p.var(v.q[u]), LmiSense::NegativeDefinite, strict_margin);
    p.add_constraint("Zbar" + k + ">0", -p.var(v.z[u]), LmiSense::NegativeDefinite, strict_margin);
    SymmetricBlocks tjr({3, 3});
    tjr.set(0, 0, p.var(v.t[u]));
    tjr.set(0, 1, p.var(v.j[u]));
    tjr.set(1, 1, p.var(v.r[u]));
    p.add_constraint("[T J; J R]" + k + ">=0", tjr.build(), LmiSense::PositiveSemidefinite);
    out.pairs.push_back({p.var(v.s[u]), p.var(v.t[u])});
    out.pairs.push_back({p.var(v.p[u]), p.var(v.j[u])});
    out.pairs.push_back({p.var(v.z[u]), p.var(v.r[u])});
  }
  return out;
}

Matrix value_block_diag(const LmiProblem& p, const std::vector<int>& ids, const Vector& x) {
  const int n = static_cast<int>(ids.size());
  Matrix m = Matrix::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) m.block(3 * i, 3 * i, 3, 3) = p.value(ids[static_cast<size_t>(i)], x);
  return m;
}

GainSet recover_gains(const Assembled& a, const Vector& x) {
  const LmiProblem& p = a.problem;
  const int n = a.v.n;
  GainSet g;
  for (int i = 0; i < n; ++i) {
    const size_t u = static_cast<size_t>(i);
    const Matrix pi_inv = numerics::solve_linear(p.value(a.v.p[u], x), Matrix::Identity(3, 3));
    g.k1.emplace_back(Gain(p.value(a.v.y1[u], x) * pi_inv));
    if (i > 0) {
      const Matrix prev_inv = numerics::solve_linear(p.value(a.v.p[u - 1], x), Matrix::Identity(3, 3));
      g.k2.emplace_back(Gain(p.value(a.v.y2[u], x) * prev_inv));
    } else {
      g.k2.emplace_back(Gain::Zero());
    }
  }
  return g;
}

// The original condition with Pbar Zbar^-1 Pbar in place of Sbar.
bool nonlinear_condition_holds(const Assembled& a, const PlatoonSystem& sys, const Vector& x, double margin) {
  const int n = sys.n;
  const int nn = 3 * n;
  Matrix phi = a.phi.evaluate(x);
  const Matrix pb = value_block_diag(a.problem, a.v.p, x);
  const Matrix zb = value_block_diag(a.problem, a.v.z, x);
  Eigen::LLT<Matrix> llt(zb);
  if (llt.info() != Eigen::Success) return false;
  const int off = 2 * nn + 2 * n;
  phi.block(off, off, nn, nn) = -(pb * llt.solve(pb)) / sys.h1;
  Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrize(phi), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() < -margin;
}

}  // namespace

StabilityCertificate verify_gains(const PlatoonSystem& sys, const GainSet& gains, const convex::LmiSettings& settings,
                                  double strict_margin) {
  if (gains.n() != sys.n || static_cast<int>(gains.k2.size()) != sys.n) {
    throw std::invalid_argument("verify_gains: gain set size does not match the platoon");
  }
  const int n = sys.n;
  const int nn = 3 * n;
  const Matrix k = gains.stacked();
  const Matrix buk = sys.Bu * k;
  const double h = sys.h1;

  LmiProblem p;
  const int pid = p.add_symmetric("P", nn);
  const int qid = p.add_symmetric("Q1", nn);
  const int zid = p.add_symmetric("Z1", nn);
  const AffineMatrix pv = p.var(pid), qv = p.var(qid), zv = p.var(zid);

  // Congruence with diag(I, I, I, Z1, I) turns the -Z1^-1/h block into -Z1/h.
  const AffineMatrix pa = pv * sys.A;
  SymmetricBlocks phi({nn, nn, 2 * n, nn, n});
  phi.set(0, 0, pa + pa.transpose() + (1.0 / (1.0 - sys.mu1)) * qv - (1.0 / h) * zv);
  phi.set(0, 1, pv * buk + (1.0 / h) * zv);
  phi.set(0, 2, pv * sys.Bw);
  phi.set(0, 3, Matrix(sys.A.transpose()) * zv);
  phi.set(0, 4, AffineMatrix(Matrix(sys.C.transpose())));
  phi.set(1, 1, -qv - (1.0 / h) * zv);
  phi.set(1, 3, Matrix(buk.transpose()) * zv);
  phi.set(2, 2, AffineMatrix(Matrix(-sys.gamma * sys.gamma * Matrix::Identity(2 * n, 2 * n))));
  phi.set(2, 3, Matrix(sys.Bw.transpose()) * zv);
  phi.set(3, 3, -(1.0 / h) * zv);
  phi.set(4, 4, AffineMatrix(Matrix(-Matrix::Identity(n, n))));
  p.add_constraint("Phi1", phi.build(), LmiSense::NegativeDefinite, strict_margin);
  p.add_constraint("P>0", -pv, LmiSense::NegativeDefinite, strict_margin);
  p.add_constraint("Q1>0", -qv, LmiSense::NegativeDefinite, strict_margin);
  p.add_constraint("Z1>0", -zv, LmiSense::NegativeDefinite, strict_margin);

  const convex::LmiSolution sol = convex::solve_lmi(p, settings);
  StabilityCertificate cert;
  cert.gamma = sys.gamma;
  for (const auto& c : p.constraints()) cert.labels.push_back(c.label);
  cert.margins = sol.margins;
  if (sol.status != convex::LmiStatus::Feasible) {
    size_t worst = 0;
    for (size_t i = 1; i < cert.margins.size(); ++i) {
      if (cert.margins[i] > cert.margins[worst]) worst = i;
    }
    throw VerificationFailed(cert.labels.empty() ? "" : cert.labels[worst],
                             cert.margins.empty() ? 0.0 : cert.margins[worst],
                             std::string("LMI solver returned ") + convex::to_string(sol.status) + " (" + sol.message + ")");
  }
  cert.P = p.value(pid, sol.x);
  cert.Q = p.value(qid, sol.x);
  cert.Z = p.value(zid, sol.x);
  // Independent re-check of the returned blocks (eig_sym, not the solver).
  std::vector<double> check;
  if (!convex::certify(p, sol.x, settings.eps_feas, &check)) {
    throw VerificationFailed("Phi1", check.empty() ? 0.0 : check[0], "certificate failed eigenvalue re-check");
  }
  return cert;
}

SynthesisResult synthesize_gains(const PlatoonSystem& sys, const SynthesisOptions& options) {
  const Assembled a = assemble(sys, options.strict_margin);

  std::optional<SynthesisResult> accepted;
  auto try_accept = [&](const Vector& x) -> bool {
    if (!nonlinear_condition_holds(a, sys, x, options.strict_margin)) return false;
    try {
      SynthesisResult r;
      r.gains = recover_gains(a, x);
      r.certificate = verify_gains(sys, r.gains, options.ccl.lmi, options.strict_margin);
      accepted = std::move(r);
      return true;
    } catch (const VerificationFailed&) {
      return false;
    } catch (const numerics::SingularMatrix&) {
      return false;
    }
  };

  std::function<bool(const Vector&)> predicate;
  if (options.early_exit) predicate = try_accept;
  const convex::CclResult ccl = convex::ccl_minimize(a.problem, a.pairs, options.ccl, predicate);

  if (ccl.status == convex::CclStatus::Infeasible) {
    throw SynthesisInfeasible(sys.h1, sys.mu1, sys.gamma, "linearized LMI set is empty");
  }
  if (!accepted && ccl.solution.x.size() == a.problem.num_scalars()) try_accept(ccl.solution.x);
  if (!accepted) {
    throw SynthesisInfeasible(sys.h1, sys.mu1, sys.gamma,
                              std::string("cone complementarity ended with ") + convex::to_string(ccl.status) +
                                  " and the gains did not verify (" + ccl.solution.message + ")");
  }
  accepted->ccl_status = ccl.status;
  accepted->ccl_iterations = ccl.outer_iterations;
  accepted->final_gap = ccl.gap.empty() ? 0.0 : ccl.gap.back();
  return *accepted;
}

GammaSearch synthesize_min_gamma(int n, double tau, double h1, double mu1, double lo, double hi, double tol,
                                 const SynthesisOptions& options) {
  if (!(lo > 0.0 && hi > lo && tol > 0.0)) throw std::invalid_argument("synthesize_min_gamma: bad bracket");
  GammaSearch out;
  auto attempt = [&](double g) -> std::optional<SynthesisResult> {
    ++out.evaluations;
    try {
      SynthesisResult r = synthesize_gains(assemble_platoon(n, tau, h1, mu1, g), options);
      out.trace.emplace_back(g, true);
      return r;
    } catch (const SynthesisInfeasible&) {
      out.trace.emplace_back(g, false);
      return std::nullopt;
    }
  };
  auto top = attempt(hi);
  if (!top) throw SynthesisInfeasible(h1, mu1, hi, "upper end of the gamma bracket is infeasible");
  out.best = std::move(*top);
  out.gamma = hi;
  if (auto bottom = attempt(lo)) {
    out.best = std::move(*bottom);
    out.gamma = lo;
    return out;
  }
  double a = lo, b = hi;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (auto r = attempt(mid)) {
      out.best = std::move(*r);
      b = mid;
    } else {
      a = mid;
    }
  }
  out.gamma = b;
  return out;
}

}  // namespace platoon::ucl
