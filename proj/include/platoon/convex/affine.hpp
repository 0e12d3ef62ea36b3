#pragma once

// Affine matrix expressions over scalar decision variables:
//
//   F(x) = F0 + sum_i x_i F_i
//
// stored as a dense constant plus a list of (row, col, var, coef) terms.
// Products with constant matrices, sums, transposes and block assembly keep
// the expression affine, which is all an LMI builder needs.

#include <vector>

#include "platoon/numerics.hpp"

namespace platoon::convex {

using numerics::Matrix;
using numerics::Vector;

struct AffineTerm {
  int row;
  int col;
  int var;
  double coef;
};

class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols);
  explicit AffineMatrix(Matrix constant);

  static AffineMatrix zero(int rows, int cols) { return AffineMatrix(rows, cols); }
  static AffineMatrix identity(int n) { return AffineMatrix(Matrix::Identity(n, n)); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Matrix& constant() const { return constant_; }
  const std::vector<AffineTerm>& terms() const { return terms_; }

  void add_term(int row, int col, int var, double coef);
  /// Merges duplicate (row, col, var) entries and drops exact zeros.
  void compress();

  Matrix evaluate(const Vector& x) const;
  AffineMatrix transpose() const;

  AffineMatrix& operator+=(const AffineMatrix& other);
  AffineMatrix& operator-=(const AffineMatrix& other);
  AffineMatrix& operator*=(double s);

 private:
  int rows_ = 0;
  int cols_ = 0;
  Matrix constant_;
  std::vector<AffineTerm> terms_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator*(const Matrix& left, const AffineMatrix& a);
AffineMatrix operator*(const AffineMatrix& a, const Matrix& right);

/// Symmetric block matrix assembled from its upper-triangular blocks; the
/// lower triangle is filled with transposes. Unset blocks are zero.
class SymmetricBlocks {
 public:
  explicit SymmetricBlocks(std::vector<int> sizes);
  void set(int i, int j, const AffineMatrix& block);
  AffineMatrix build() const;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<std::vector<AffineMatrix>> blocks_;
  std::vector<std::vector<bool>> present_;
};

/// Places `block` inside a zero matrix of size rows x cols at (r0, c0).
AffineMatrix embed(const AffineMatrix& block, int rows, int cols, int r0, int c0);

}  // namespace platoon::convex
