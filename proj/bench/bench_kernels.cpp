// Times the OpenMP kernels against the serial reference path and checks that
// the two produce bitwise-identical results (the kernels fix the accumulation
// order per output element, so thread count must not change a single bit).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "braindec/linalg.hpp"

using braindec::linalg::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int run_bench(std::size_t n, std::size_t d) {
  const Matrix x = random_matrix(n, d, 7);
  const Matrix y = random_matrix(d, n, 8);

  int failures = 0;
  auto report = [&](const char* name, double t_serial, double t_parallel, bool same) {
    std::printf("%-12s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  bitwise %s\n", name,
                t_serial, t_parallel, t_serial / t_parallel, same ? "equal" : "DIFFERENT");
    if (!same) ++failures;
  };

  {
    auto t0 = std::chrono::steady_clock::now();
    const Matrix a = braindec::linalg::serial::matmul(x, y);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Matrix b = braindec::linalg::matmul(x, y);
    report("matmul", ts, seconds_since(t0), bitwise_equal(a, b));
  }
  {
    auto t0 = std::chrono::steady_clock::now();
    const Matrix a = braindec::linalg::serial::matmul_bt(x, x);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Matrix b = braindec::linalg::matmul_bt(x, x);
    report("matmul_bt", ts, seconds_since(t0), bitwise_equal(a, b));
  }
  {
    auto t0 = std::chrono::steady_clock::now();
    const Matrix a = braindec::linalg::serial::gram(x);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Matrix b = braindec::linalg::gram(x);
    report("gram", ts, seconds_since(t0), bitwise_equal(a, b));
  }
  {
    Matrix a = braindec::linalg::gram(x);
    braindec::linalg::add_diagonal(a, static_cast<double>(d));
    Matrix b = a;
    auto t0 = std::chrono::steady_clock::now();
    const bool ok_a = braindec::linalg::serial::cholesky_inplace(a);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const bool ok_b = braindec::linalg::cholesky_inplace(b);
    report("cholesky", ts, seconds_since(t0), ok_a && ok_b && bitwise_equal(a, b));
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 512, d = 1024;
  if (argc > 1) n = std::stoul(argv[1]);
  if (argc > 2) d = std::stoul(argv[2]);
#ifdef _OPENMP
  std::printf("threads: %d, n=%zu, d=%zu\n", omp_get_max_threads(), n, d);
#else
  std::printf("OpenMP disabled, n=%zu, d=%zu\n", n, d);
#endif
  const int failures = run_bench(n, d);
  if (failures) {
    std::printf("FAIL: %d kernel(s) diverged between serial and parallel paths\n", failures);
    return 1;
  }
  std::printf("all kernels bitwise-identical across paths\n");
  return 0;
}
