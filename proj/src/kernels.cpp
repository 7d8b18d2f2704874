#include "marl/kernels.hpp"

#include <omp.h>

#include <cstdint>

#include "marl/errors.hpp"

namespace marl::kernels {

namespace {

void check_sizes(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t a_len, std::size_t b_len, std::size_t c_len) {
  require(a.size() == a_len && b.size() == b_len && c.size() == c_len, "gemm operand size mismatch");
}

// One output row of a * b^T. Four interleaved partial sums over k give the
// compiler independent chains to vectorize; both paths call this, so the
// summation order is the same everywhere.
inline void nt_row(const double* arow, const double* b, double* crow, std::size_t n, std::size_t k) {
  const std::size_t k4 = k - k % 4;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t p = 0; p < k4; p += 4) {
      s0 += arow[p] * brow[p];
      s1 += arow[p + 1] * brow[p + 1];
      s2 += arow[p + 2] * brow[p + 2];
      s3 += arow[p + 3] * brow[p + 3];
    }
    for (std::size_t p = k4; p < k; ++p) s0 += arow[p] * brow[p];
    crow[j] += (s0 + s1) + (s2 + s3);
  }
}

}  // namespace

namespace serial {

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, m * k, n * k, m * n);
  for (std::size_t i = 0; i < m; ++i) nt_row(a.data() + i * k, b.data(), c.data() + i * n, n, k);
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, m * k, k * n, m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aip * b[p * n + j];
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, k * m, k * n, m * n);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += api * b[p * n + j];
    }
  }
}

}  // namespace serial

// The parallel kernels keep the serial summation order within each output
// element, so both paths produce bit-identical results.

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, m * k, n * k, m * n);
  const bool parallel = m * n * k >= kParallelMinWork;
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for if (parallel) schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    nt_row(a.data() + i * k, b.data(), c.data() + i * n, n, k);
  }
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, m * k, k * n, m * n);
  const bool parallel = m * n * k >= kParallelMinWork;
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for if (parallel) schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  check_sizes(a, b, c, k * m, k * n, m * n);
  const bool parallel = m * n * k >= kParallelMinWork;
  const auto rows = static_cast<std::int64_t>(m);
  // Parallel over output rows i; the reduction over p stays in serial order.
#pragma omp parallel for if (parallel) schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

void use_single_thread() { omp_set_num_threads(1); }

}  // namespace marl::kernels
