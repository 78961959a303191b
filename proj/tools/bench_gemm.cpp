// Benchmarks the serial GEMM kernel against the OpenMP one and verifies they
// stay bitwise identical, since training determinism depends on that.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <vector>

#include "rote/tensor.hpp"

namespace {

double run_ms(void (*fn)(bool, bool, std::size_t, std::size_t, std::size_t,
                         const double*, const double*, double*),
              std::size_t n, const std::vector<double>& a, const std::vector<double>& b,
              std::vector<double>& c, int reps) {
  fn(false, false, n, n, n, a.data(), b.data(), c.data());  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r)
    fn(false, false, n, n, n, a.data(), b.data(), c.data());
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads available: %d\n", rote::max_threads());
  std::printf("%8s %12s %12s %8s %10s\n", "size", "serial_ms", "openmp_ms", "speedup",
              "identical");
  for (std::size_t n : {64, 128, 256, 512}) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
    for (double& x : a) x = dist(rng);
    for (double& x : b) x = dist(rng);
    const double ms_serial = run_ms(rote::kernels::gemm_serial, n, a, b, c1, reps);
    const double ms_omp = run_ms(rote::kernels::gemm, n, a, b, c2, reps);
    const bool same = std::memcmp(c1.data(), c2.data(), n * n * sizeof(double)) == 0;
    std::printf("%8zu %12.3f %12.3f %7.2fx %10s\n", n, ms_serial, ms_omp,
                ms_serial / ms_omp, same ? "yes" : "NO");
    if (!same) return 1;
  }
  return 0;
}
