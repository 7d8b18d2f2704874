// Serial reference vs OpenMP kernels: wall-clock per call.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "marl/evalstats.hpp"
#include "marl/kernels.hpp"
#include "marl/rng.hpp"

using namespace marl;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

int main() {
  std::printf("omp threads: %d\n", omp_get_max_threads());
  std::printf("%-28s %12s %12s %8s\n", "kernel", "serial ms", "openmp ms", "speedup");
  Rng rng(7);
  for (std::size_t dim : {32, 64, 128, 256}) {
    const std::size_t m = dim, n = dim, k = dim;
    const auto a = random_vec(m * k, rng), b = random_vec(n * k, rng);
    std::vector<double> c(m * n);
    const int reps = dim <= 64 ? 200 : 10;
    const double s = time_ms([&] { kernels::serial::gemm_nt(a, b, c, m, n, k); }, reps);
    const double p = time_ms([&] { kernels::gemm_nt(a, b, c, m, n, k); }, reps);
    char name[64];
    std::snprintf(name, sizeof name, "gemm_nt %zux%zux%zu", m, n, k);
    std::printf("%-28s %12.4f %12.4f %8.2f\n", name, s, p, s / p);
  }

  std::vector<std::vector<double>> strata{random_vec(40, rng), random_vec(40, rng)};
  const evalstats::Statistic stat = [](std::span<const std::vector<double>> d) {
    return evalstats::probability_of_improvement(d[0], d[1]);
  };
  const evalstats::BootstrapOptions opts;
  const double s = time_ms([&] { evalstats::serial::bootstrap_distribution(strata, stat, opts); }, 3);
  const double p = time_ms([&] { evalstats::bootstrap_distribution(strata, stat, opts); }, 3);
  std::printf("%-28s %12.4f %12.4f %8.2f\n", "bootstrap PoI 40v40 x2000", s, p, s / p);
  return 0;
}
