#include <algorithm>
#include <cmath>

#include "dutd/kernels.hpp"

namespace dutd::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void dense_forward_scalar(const double* x, std::size_t rows, std::size_t fin, const double* wt,
                          const double* b, std::size_t fout, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* yr = y + r * fout;
    const double* xr = x + r * fin;
    std::copy(b, b + fout, yr);
    for (std::size_t j = 0; j < fin; ++j) {
      const double xj = xr[j];
      const double* w = wt + j * fout;
      for (std::size_t o = 0; o < fout; ++o) yr[o] += xj * w[o];
    }
  }
}

void tanh_scalar(double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

constexpr KernelTable kScalar{Backend::scalar,        dot_scalar,           axpy_scalar,
                              squared_distance_scalar, dense_forward_scalar, tanh_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace dutd::kernels
