#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace braindec::linalg {

// Dense row-major matrix of doubles. Value type: copy/move as expected.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const double& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Fixed-order dot product (4-way unrolled; the accumulation order is part of
// the contract so results are identical no matter where the call runs).
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* dst, double a, const double* src, std::size_t n);

Matrix transpose(const Matrix& m);

// c = a * b. Accumulates over k in ascending order per output row.
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a * b^T (rows of both operands are contiguous, so this is the fast form).
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// x * x^T, exploiting symmetry.
Matrix gram(const Matrix& x);

void add_diagonal(Matrix& m, double value);

// In-place lower Cholesky factor; returns false when the matrix is not
// numerically positive definite. The upper triangle is zeroed.
bool cholesky_inplace(Matrix& m);
// Solves (L L^T) X = rhs given the lower factor.
void cholesky_solve_inplace(const Matrix& chol, Matrix& rhs);
Matrix cholesky_solve(const Matrix& chol, const Matrix& rhs);

// Per-dimension z-scoring; zero-variance dimensions map to 0 exactly.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_scale;

  bool identity() const { return mean.empty(); }
  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  void apply_inplace(Matrix& x) const;
};

// Reference implementations without OpenMP. Kept for tests and the kernel
// benchmark; bitwise-identical to the parallel entry points above.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_bt(const Matrix& a, const Matrix& b);
Matrix gram(const Matrix& x);
bool cholesky_inplace(Matrix& m);
}  // namespace serial

}  // namespace braindec::linalg
