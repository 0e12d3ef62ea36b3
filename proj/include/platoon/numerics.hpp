#pragma once

// Dense real matrix kernel shared by the LMI solver, the QP solver and the
// prediction models. Storage and BLAS-level arithmetic come from Eigen; the
// symmetric eigensolver is a cyclic Jacobi implementation so that certificate
// checks stay independent of the factorizations used inside the solvers.

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace platoon::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised by chol() when a pivot is not strictly positive.
class NotPositiveDefinite : public std::runtime_error {
 public:
  /// `pivot` is the 1-based order of the first leading minor that fails.
  explicit NotPositiveDefinite(int pivot)
      : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

class SingularMatrix : public std::runtime_error {
 public:
  explicit SingularMatrix(double rcond)
      : std::runtime_error("matrix is numerically singular (rcond " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

struct SymEigResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column k pairs with eigenvalues[k]
};

/// Relative tolerances in this module scale with the Frobenius norm of the
/// input and never drop below this absolute floor.
inline constexpr double kAbsoluteFloor = 1e-12;

Matrix kron(const Matrix& a, const Matrix& b);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. The input is
/// symmetrized as (M + M^T)/2 before rotating; inputs further than 1e-10
/// (relative) from symmetric are rejected.
SymEigResult eig_sym(const Matrix& m);

/// Eigenvalues only; same algorithm as eig_sym.
Vector eigvals_sym(const Matrix& m);

/// True iff lambda_max(m) < -margin.
bool is_neg_def(const Matrix& m, double margin);

/// Lower-triangular Cholesky factor L with L L^T = m.
/// Throws NotPositiveDefinite carrying the failing pivot.
Matrix chol(const Matrix& m);

/// Solves a x = b by LU with partial pivoting. Throws SingularMatrix when the
/// reciprocal condition estimate is below 1e-12.
Matrix solve_linear(const Matrix& a, const Matrix& b);

/// Block-diagonal stack of n copies of `block`.
Matrix block_diag_repeat(const Matrix& block, int n);

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Shortest decimal text that reads back to exactly `v`; "NA", "inf", "-inf"
/// for non-finite values.
std::string format_exact(double v);

}  // namespace platoon::numerics
