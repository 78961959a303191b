#include "rote/tensor.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rote {

namespace {
std::atomic<int> g_thread_override{0};
}

void set_thread_override(int n) { g_thread_override.store(n); }

int max_threads() {
  if (const int ov = g_thread_override.load(); ov > 0) return ov;
  static const int cached = [] {
    int n = 0;
#ifdef _OPENMP
    n = omp_get_max_threads();
#else
    n = 1;
#endif
    if (const char* env = std::getenv("ROTE_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1 && cap < n) n = cap;
    }
    return n;
  }();
  return cached;
}

namespace kernels {

void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const double* a, const double* b, double* c) {
  // op(A) is m x k, op(B) is k x n. Leading dims follow from the stored layout:
  // A is (m x k) or (k x m), B is (k x n) or (n x k).
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c) {
#ifdef _OPENMP
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(max_threads()) \
    if (m * n * k > 16384)
  for (long ii = 0; ii < rows; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
#else
  gemm_serial(trans_a, trans_b, m, n, k, a, b, c);
#endif
}

}  // namespace kernels

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("matmul: inner dimension mismatch in ") + what);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_inner(a.cols, b.rows, "A*B");
  Tensor c(a.rows, b.cols);
  kernels::gemm(false, false, a.rows, b.cols, a.cols, a.data.data(), b.data.data(),
                c.data.data());
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_inner(a.cols, b.cols, "A*B^T");
  Tensor c(a.rows, b.rows);
  kernels::gemm(false, true, a.rows, b.rows, a.cols, a.data.data(), b.data.data(),
                c.data.data());
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_inner(a.rows, b.rows, "A^T*B");
  Tensor c(a.cols, b.cols);
  kernels::gemm(true, false, a.cols, b.cols, a.rows, a.data.data(), b.data.data(),
                c.data.data());
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace rote
