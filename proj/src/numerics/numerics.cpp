#include "platoon/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <vector>

namespace platoon::numerics {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", expected square");
  }
}

double tol_scale(const Matrix& m) { return std::max(m.norm(), kAbsoluteFloor); }

}  // namespace

Matrix kron(const Matrix& a, const Matrix& b) {
  require_finite(a, "kron");
  require_finite(b, "kron");
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

SymEigResult eig_sym(const Matrix& m) {
  require_square(m, "eig_sym");
  require_finite(m, "eig_sym");
  const Eigen::Index n = m.rows();
  const double scale = tol_scale(m);
  if ((m - m.transpose()).norm() > 1e-10 * scale) {
    throw std::invalid_argument("eig_sym: input is not symmetric");
  }

  Matrix a = symmetrize(m);
  Matrix v = Matrix::Identity(n, n);

  // Cyclic-by-row Jacobi with the classical stable rotation formulas.
  // Converges quadratically once off-diagonal mass is small.
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = akp - s * (akq + tau * akp);
          a(p, k) = a(k, p);
          a(k, q) = akq + s * (akp - tau * akq);
          a(q, k) = a(k, q);
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SymEigResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    result.eigenvalues[k] = a(order[k], order[k]);
    result.eigenvectors.col(k) = v.col(order[k]);
  }
  return result;
}

Vector eigvals_sym(const Matrix& m) { return eig_sym(m).eigenvalues; }

bool is_neg_def(const Matrix& m, double margin) {
  if (m.size() == 0) return true;
  const Vector ev = eigvals_sym(m);
  return ev[ev.size() - 1] < -margin;
}

Matrix chol(const Matrix& m) {
  require_square(m, "chol");
  require_finite(m, "chol");
  const Eigen::Index n = m.rows();
  const double scale = tol_scale(m);
  if ((m - m.transpose()).norm() > 1e-10 * scale) {
    throw std::invalid_argument("chol: input is not symmetric");
  }
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) throw NotPositiveDefinite(static_cast<int>(j) + 1);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_linear");
  require_finite(a, "solve_linear");
  require_finite(b, "solve_linear");
  if (b.rows() != a.rows()) throw std::invalid_argument("solve_linear: dimension mismatch");
  Eigen::PartialPivLU<Matrix> lu(a);
  double rcond = 1.0;
  if (a.size() > 0) {
    // rcond() can miss an exactly zero pivot, so also use the pivot ratio.
    const Vector piv = lu.matrixLU().diagonal().cwiseAbs();
    const double pmax = piv.maxCoeff();
    rcond = pmax > 0.0 ? std::min(lu.rcond(), piv.minCoeff() / pmax) : 0.0;
  }
  if (!(rcond >= 1e-12)) throw SingularMatrix(rcond);
  return lu.solve(b);
}

Matrix block_diag_repeat(const Matrix& block, int n) {
  return kron(Matrix::Identity(n, n), block);
}

std::string format_exact(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace platoon::numerics
