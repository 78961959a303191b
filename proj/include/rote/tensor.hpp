#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rote {

// Dense row-major 2D tensor of doubles. Scalars are 1x1, vectors 1xN.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  std::size_t size() const { return rows * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

namespace kernels {

// C (m x n) = op(A) * op(B), overwriting C. Serial reference implementation.
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c);

// OpenMP-parallel GEMM; bitwise-identical to gemm_serial (rows are
// independent and each output element is accumulated in the same order).
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c);

}  // namespace kernels

// C = A * B
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A * B^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A^T * B
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// Worker-thread cap for the parallel kernels; reads ROTE_THREADS once.
int max_threads();

// Process-wide override of the thread cap (0 = none). Used by latency
// measurement to pin execution to one thread.
void set_thread_override(int n);

}  // namespace rote
