#include <doctest.h>

#include <vector>

#include "marl/errors.hpp"
#include "marl/kernels.hpp"
#include "marl/rng.hpp"
#include "marl/tensor.hpp"

using namespace marl;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("tensor shape and access") {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({0, 2}, 0.0), ContractViolation);
}

TEST_CASE("gemm kernels match serial reference bit for bit") {
  Rng rng(11);
  for (std::size_t dim : {3, 17, 64, 90}) {
    const std::size_t m = dim, n = dim + 1, k = dim + 2;
    const auto a_nt = random_vec(m * k, rng), b_nt = random_vec(n * k, rng);
    std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
    kernels::gemm_nt(a_nt, b_nt, c1, m, n, k);
    kernels::serial::gemm_nt(a_nt, b_nt, c2, m, n, k);
    CHECK(c1 == c2);

    const auto b_nn = random_vec(k * n, rng);
    std::fill(c1.begin(), c1.end(), 0.0);
    std::fill(c2.begin(), c2.end(), 0.0);
    kernels::gemm_nn(a_nt, b_nn, c1, m, n, k);
    kernels::serial::gemm_nn(a_nt, b_nn, c2, m, n, k);
    CHECK(c1 == c2);

    const auto a_tn = random_vec(k * m, rng);
    std::fill(c1.begin(), c1.end(), 0.0);
    std::fill(c2.begin(), c2.end(), 0.0);
    kernels::gemm_tn(a_tn, b_nn, c1, m, n, k);
    kernels::serial::gemm_tn(a_tn, b_nn, c2, m, n, k);
    CHECK(c1 == c2);
  }
}

TEST_CASE("gemm_nt agrees with a naive triple loop") {
  Rng rng(3);
  const std::size_t m = 4, n = 5, k = 6;
  const auto a = random_vec(m * k, rng), b = random_vec(n * k, rng);
  std::vector<double> c(m * n, 0.0);
  kernels::gemm_nt(a, b, c, m, n, k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("rng is reproducible and index is in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.index(7) < 7);
  }
  CHECK(derive_seed(5, 1) != derive_seed(5, 2));
}
