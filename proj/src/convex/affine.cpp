#include "platoon/convex/affine.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace platoon::convex {

AffineMatrix::AffineMatrix(int rows, int cols) : rows_(rows), cols_(cols), constant_(Matrix::Zero(rows, cols)) {}

AffineMatrix::AffineMatrix(Matrix constant)
    : rows_(static_cast<int>(constant.rows())), cols_(static_cast<int>(constant.cols())), constant_(std::move(constant)) {}

void AffineMatrix::add_term(int row, int col, int var, double coef) {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_) throw std::out_of_range("AffineMatrix::add_term");
  if (coef != 0.0) terms_.push_back({row, col, var, coef});
}

void AffineMatrix::compress() {
  std::sort(terms_.begin(), terms_.end(), [](const AffineTerm& a, const AffineTerm& b) {
    return std::tie(a.var, a.row, a.col) < std::tie(b.var, b.row, b.col);
  });
  std::vector<AffineTerm> merged;
  merged.reserve(terms_.size());
  for (const auto& t : terms_) {
    if (!merged.empty() && merged.back().var == t.var && merged.back().row == t.row && merged.back().col == t.col) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const AffineTerm& t) { return t.coef == 0.0; });
  terms_ = std::move(merged);
}

Matrix AffineMatrix::evaluate(const Vector& x) const {
  Matrix out = constant_;
  for (const auto& t : terms_) out(t.row, t.col) += t.coef * x[t.var];
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix out(constant_.transpose());
  out.terms_.reserve(terms_.size());
  for (const auto& t : terms_) out.terms_.push_back({t.col, t.row, t.var, t.coef});
  return out;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw std::invalid_argument("AffineMatrix: size mismatch in +");
  constant_ += other.constant_;
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw std::invalid_argument("AffineMatrix: size mismatch in -");
  constant_ -= other.constant_;
  terms_.reserve(terms_.size() + other.terms_.size());
  for (const auto& t : other.terms_) terms_.push_back({t.row, t.col, t.var, -t.coef});
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  constant_ *= s;
  for (auto& t : terms_) t.coef *= s;
  return *this;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

AffineMatrix operator*(const Matrix& left, const AffineMatrix& a) {
  if (left.cols() != a.rows()) throw std::invalid_argument("AffineMatrix: size mismatch in left product");
  AffineMatrix out(Matrix(left * a.constant()));
  for (const auto& t : a.terms()) {
    for (Eigen::Index r = 0; r < left.rows(); ++r) {
      const double l = left(r, t.row);
      if (l != 0.0) out.add_term(static_cast<int>(r), t.col, t.var, l * t.coef);
    }
  }
  out.compress();
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Matrix& right) {
  if (a.cols() != right.rows()) throw std::invalid_argument("AffineMatrix: size mismatch in right product");
  AffineMatrix out(Matrix(a.constant() * right));
  for (const auto& t : a.terms()) {
    for (Eigen::Index c = 0; c < right.cols(); ++c) {
      const double r = right(t.col, c);
      if (r != 0.0) out.add_term(t.row, static_cast<int>(c), t.var, t.coef * r);
    }
  }
  out.compress();
  return out;
}

SymmetricBlocks::SymmetricBlocks(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  const size_t n = sizes_.size();
  offsets_.resize(n + 1, 0);
  for (size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + sizes_[i];
  blocks_.assign(n, std::vector<AffineMatrix>(n));
  present_.assign(n, std::vector<bool>(n, false));
}

void SymmetricBlocks::set(int i, int j, const AffineMatrix& block) {
  if (i > j) throw std::invalid_argument("SymmetricBlocks::set expects an upper-triangular block (i <= j)");
  if (block.rows() != sizes_[i] || block.cols() != sizes_[j]) {
    throw std::invalid_argument("SymmetricBlocks::set: block (" + std::to_string(i) + "," + std::to_string(j) +
                                ") has wrong size");
  }
  blocks_[i][j] = block;
  present_[i][j] = true;
}

AffineMatrix SymmetricBlocks::build() const {
  const int total = offsets_.back();
  AffineMatrix out(total, total);
  Matrix constant = Matrix::Zero(total, total);
  const int n = static_cast<int>(sizes_.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (!present_[i][j]) continue;
      const AffineMatrix& b = blocks_[i][j];
      constant.block(offsets_[i], offsets_[j], sizes_[i], sizes_[j]) += b.constant();
      if (i != j) constant.block(offsets_[j], offsets_[i], sizes_[j], sizes_[i]) += b.constant().transpose();
      for (const auto& t : b.terms()) {
        out.add_term(offsets_[i] + t.row, offsets_[j] + t.col, t.var, t.coef);
        if (i != j) out.add_term(offsets_[j] + t.col, offsets_[i] + t.row, t.var, t.coef);
      }
    }
  }
  AffineMatrix result(constant);
  result += out;
  result.compress();
  return result;
}

AffineMatrix embed(const AffineMatrix& block, int rows, int cols, int r0, int c0) {
  Matrix constant = Matrix::Zero(rows, cols);
  constant.block(r0, c0, block.rows(), block.cols()) = block.constant();
  AffineMatrix out(constant);
  for (const auto& t : block.terms()) out.add_term(r0 + t.row, c0 + t.col, t.var, t.coef);
  return out;
}

}  // namespace platoon::convex
