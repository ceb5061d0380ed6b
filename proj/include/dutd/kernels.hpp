#pragma once

// Dense double-precision kernels behind the learner. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant. The variant
// is chosen once at startup from cpuid; DUTD_KERNELS=scalar|avx2|auto
// overrides the choice.
//
// The variants are not bitwise identical (different summation order and
// fused multiply-add), so a given machine always uses one table for a whole
// process and results are reproducible per machine.

#include <cstddef>
#include <span>
#include <string_view>

namespace dutd::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// y[r, :] = b + x[r, :] * wt for r < rows; x is rows x fin, wt is
  /// fin x fout (row-major), y is rows x fout.
  void (*dense_forward)(const double* x, std::size_t rows, std::size_t fin, const double* wt,
                        const double* b, std::size_t fout, double* y);
  /// v[i] = tanh(v[i])
  void (*tanh_inplace)(double* v, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the variant was not compiled in.
const KernelTable* avx2_table() noexcept;

bool cpu_supports(Backend b) noexcept;

/// Table in effect for this process.
const KernelTable& active() noexcept;

/// Switch backends; throws std::invalid_argument if unsupported here.
void select(Backend b);

std::string_view name(Backend b) noexcept;

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace dutd::kernels
