#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dutd/kernels.hpp"
#include "dutd/rng.hpp"

using namespace dutd;
namespace k = dutd::kernels;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

// The AVX2 table is only exercised on machines that can run it.
const k::KernelTable* vector_table() {
  return k::cpu_supports(k::Backend::avx2) ? k::avx2_table() : nullptr;
}

}  // namespace

TEST_CASE("scalar reference kernels") {
  const auto& s = k::scalar_table();
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(s.dot(a, b, 3) == 12.0);
  CHECK(s.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
  double y[] = {1, 1, 1};
  s.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  // 2 rows, fin 2, fout 3
  const double x[] = {1, 2, -1, 0};
  const double wt[] = {1, 0, 2, 0, 1, -1};
  const double bias[] = {0.5, 0.5, 0.5};
  double out[6];
  s.dense_forward(x, 2, 2, wt, bias, 3, out);
  CHECK(std::vector<double>(out, out + 6) == std::vector<double>{1.5, 2.5, 0.5, -0.5, 0.5, -1.5});
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const auto* v = vector_table();
  if (v == nullptr) {
    MESSAGE("AVX2 not available; equivalence not exercised");
    return;
  }
  const auto& s = k::scalar_table();
  Rng rng(1);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto a = randv(rng, n), b = randv(rng, n);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) <=
          1e-14 * (mag + 1e-300));
    const double d1 = s.squared_distance(a.data(), b.data(), n);
    CHECK(std::abs(d1 - v->squared_distance(a.data(), b.data(), n)) <= 1e-14 * (d1 + 1e-300));
    auto y1 = randv(rng, n), y2 = y1;
    s.axpy(0.7, a.data(), y1.data(), n);
    v->axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y1[i]) + 1.0));
  }
  for (std::size_t fout : {1u, 3u, 4u, 7u, 16u, 20u, 33u}) {
    for (std::size_t fin : {1u, 4u, 5u, 32u}) {
      const std::size_t rows = 9;
      const auto x = randv(rng, rows * fin), wt = randv(rng, fin * fout), b = randv(rng, fout);
      std::vector<double> y1(rows * fout), y2(rows * fout);
      s.dense_forward(x.data(), rows, fin, wt.data(), b.data(), fout, y1.data());
      v->dense_forward(x.data(), rows, fin, wt.data(), b.data(), fout, y2.data());
      for (std::size_t i = 0; i < y1.size(); ++i) REQUIRE(std::abs(y1[i] - y2[i]) <= 1e-12);
    }
  }
}

TEST_CASE("vector tanh") {
  const auto* v = vector_table();
  if (v == nullptr) return;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> xs = {0.0, -0.0, 1e-300, -1e-300, 1e-8, 0.624999, 0.625, -0.625, 0.625001,
                            1.0, 5.0, 19.0, 21.9, 22.0, 22.1, 40.0, 700.0, -700.0, inf, -inf};
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) xs.push_back(rng.uniform(-25.0, 25.0));
  for (int i = 0; i < 2000; ++i) xs.push_back(rng.uniform(-1.0, 1.0) * 1e-3);
  std::vector<double> got = xs;
  v->tanh_inplace(got.data(), got.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double want = std::tanh(xs[i]);
    worst = std::max(worst, std::abs(got[i] - want) / std::max(std::abs(want), 1e-300));
    REQUIRE(std::signbit(got[i]) == std::signbit(want));
  }
  CHECK(worst < 1e-14);
  double nan = std::numeric_limits<double>::quiet_NaN();
  v->tanh_inplace(&nan, 1);
  CHECK(std::isnan(nan));
}

TEST_CASE("backend selection") {
  const auto original = k::active().backend;
  k::select(k::Backend::scalar);
  CHECK(k::active().backend == k::Backend::scalar);
  if (vector_table() != nullptr) {
    k::select(k::Backend::avx2);
    CHECK(k::active().backend == k::Backend::avx2);
  } else {
    CHECK_THROWS_AS(k::select(k::Backend::avx2), std::invalid_argument);
  }
  k::select(original);
  CHECK(k::name(k::Backend::scalar) == "scalar");
}
