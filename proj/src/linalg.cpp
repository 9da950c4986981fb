#include "braindec/linalg.hpp"

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace braindec::linalg {

namespace {

inline bool use_omp(std::size_t work) {
#ifdef _OPENMP
  return work >= 4096 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}

// One output row of c = a * b: accumulate rank-1 updates over k ascending.
// Each row is produced by exactly one thread, so the parallel and serial
// paths are bitwise identical.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  double* ci = c.row(i);
  const std::size_t kk = a.cols();
  for (std::size_t k = 0; k < kk; ++k) {
    const double aik = a(i, k);
    if (aik != 0.0) axpy(ci, aik, b.row(k), b.cols());
  }
}

inline void matmul_bt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  double* ci = c.row(i);
  const double* ai = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) ci[j] = dot(ai, b.row(j), a.cols());
}

inline void gram_row(const Matrix& x, Matrix& k, std::size_t i) {
  const double* xi = x.row(i);
  for (std::size_t j = 0; j <= i; ++j) k(i, j) = dot(xi, x.row(j), x.cols());
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    c0 += a[i] * b[i];
    c1 += a[i + 1] * b[i + 1];
    c2 += a[i + 2] * b[i + 2];
    c3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) c0 += a[i] * b[i];
  return (c0 + c1) + (c2 + c3);
}

void axpy(double* dst, double a, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a * src[i];
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (use_omp(a.size() * b.cols()))
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (use_omp(a.size() * b.rows()))
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_bt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix gram(const Matrix& x) {
  Matrix k(x.rows(), x.rows());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(dynamic, 8) if (use_omp(x.size() * x.rows()))
  for (std::ptrdiff_t i = 0; i < n; ++i) gram_row(x, k, static_cast<std::size_t>(i));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) k(i, j) = k(j, i);
  return k;
}

void add_diagonal(Matrix& m, double value) {
  for (std::size_t i = 0; i < m.rows() && i < m.cols(); ++i) m(i, i) += value;
}

bool cholesky_inplace(Matrix& m) {
  const std::size_t n = m.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double* rk = m.row(k);
    const double d = m(k, k) - dot(rk, rk, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double lkk = std::sqrt(d);
    m(k, k) = lkk;
    const double inv = 1.0 / lkk;
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(k) + 1;
    const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (use_omp((n - k) * k))
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      m(ii, k) = (m(ii, k) - dot(m.row(ii), rk, k)) * inv;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = 0.0;
  return true;
}

void cholesky_solve_inplace(const Matrix& chol, Matrix& rhs) {
  const std::size_t n = chol.rows();
  const std::size_t p = rhs.cols();
  // Forward: L z = b.
  for (std::size_t i = 0; i < n; ++i) {
    double* ri = rhs.row(i);
    const double* li = chol.row(i);
    for (std::size_t k = 0; k < i; ++k) axpy(ri, -li[k], rhs.row(k), p);
    const double inv = 1.0 / chol(i, i);
    for (std::size_t j = 0; j < p; ++j) ri[j] *= inv;
  }
  // Backward: L^T x = z.
  for (std::size_t ip = n; ip-- > 0;) {
    double* ri = rhs.row(ip);
    for (std::size_t k = ip + 1; k < n; ++k) axpy(ri, -chol(k, ip), rhs.row(k), p);
    const double inv = 1.0 / chol(ip, ip);
    for (std::size_t j = 0; j < p; ++j) ri[j] *= inv;
  }
}

Matrix cholesky_solve(const Matrix& chol, const Matrix& rhs) {
  Matrix x = rhs;
  cholesky_solve_inplace(chol, x);
  return x;
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const std::size_t n = x.rows(), d = x.cols();
  s.mean.assign(d, 0.0);
  s.inv_scale.assign(d, 0.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) axpy(s.mean.data(), 1.0, x.row(i), d);
  for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xi[j] - s.mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double v = var[j] / static_cast<double>(n);
    s.inv_scale[j] = v > 0.0 ? 1.0 / std::sqrt(v) : 0.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out = x;
  apply_inplace(out);
  return out;
}

void Standardizer::apply_inplace(Matrix& x) const {
  if (identity()) return;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* xi = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) xi[j] = (xi[j] - mean[j]) * inv_scale[j];
  }
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_bt_row(a, b, c, i);
  return c;
}

Matrix gram(const Matrix& x) {
  Matrix k(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) gram_row(x, k, i);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) k(i, j) = k(j, i);
  return k;
}

bool cholesky_inplace(Matrix& m) {
  const std::size_t n = m.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double* rk = m.row(k);
    const double d = m(k, k) - dot(rk, rk, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double lkk = std::sqrt(d);
    m(k, k) = lkk;
    const double inv = 1.0 / lkk;
    for (std::size_t i = k + 1; i < n; ++i)
      m(i, k) = (m(i, k) - dot(m.row(i), rk, k)) * inv;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = 0.0;
  return true;
}

}  // namespace serial

}  // namespace braindec::linalg
