#pragma once

#include <cstddef>
#include <span>

// Dense matrix kernels behind the autodiff tape. The default entry points are
// OpenMP-parallel over output rows once the work is large enough to pay for a
// thread team; the `serial` namespace keeps the plain reference loops that the
// tests compare against. All matrices are row-major and all kernels accumulate
// into `c` (callers zero it first when they want assignment).
namespace marl::kernels {

// Below this many multiply-adds the parallel kernels run on the calling thread.
inline constexpr std::size_t kParallelMinWork = std::size_t{1} << 16;

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);
// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);
// c[m x n] += a[k x m]^T * b[k x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

namespace serial {

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

}  // namespace serial

// Restrict OpenMP to the calling thread. Worker threads that already run in
// parallel (one training run each) call this to avoid nested oversubscription.
void use_single_thread();

}  // namespace marl::kernels
