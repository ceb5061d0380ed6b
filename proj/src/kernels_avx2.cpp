// Compiled with -mavx2 -mfma. Only reached after a cpuid check.

#include <immintrin.h>

#include "dutd/kernels.hpp"

namespace dutd::kernels {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void dense_forward_avx2(const double* x, std::size_t rows, std::size_t fin, const double* wt,
                        const double* b, std::size_t fout, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * fin;
    double* yr = y + r * fout;
    std::size_t o = 0;
    for (; o + 16 <= fout; o += 16) {
      __m256d a0 = _mm256_loadu_pd(b + o);
      __m256d a1 = _mm256_loadu_pd(b + o + 4);
      __m256d a2 = _mm256_loadu_pd(b + o + 8);
      __m256d a3 = _mm256_loadu_pd(b + o + 12);
      for (std::size_t j = 0; j < fin; ++j) {
        const __m256d xj = _mm256_set1_pd(xr[j]);
        const double* w = wt + j * fout + o;
        a0 = _mm256_fmadd_pd(xj, _mm256_loadu_pd(w), a0);
        a1 = _mm256_fmadd_pd(xj, _mm256_loadu_pd(w + 4), a1);
        a2 = _mm256_fmadd_pd(xj, _mm256_loadu_pd(w + 8), a2);
        a3 = _mm256_fmadd_pd(xj, _mm256_loadu_pd(w + 12), a3);
      }
      _mm256_storeu_pd(yr + o, a0);
      _mm256_storeu_pd(yr + o + 4, a1);
      _mm256_storeu_pd(yr + o + 8, a2);
      _mm256_storeu_pd(yr + o + 12, a3);
    }
    for (; o + 4 <= fout; o += 4) {
      __m256d a0 = _mm256_loadu_pd(b + o);
      for (std::size_t j = 0; j < fin; ++j) {
        a0 = _mm256_fmadd_pd(_mm256_set1_pd(xr[j]), _mm256_loadu_pd(wt + j * fout + o), a0);
      }
      _mm256_storeu_pd(yr + o, a0);
    }
    for (; o < fout; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < fin; ++j) s += xr[j] * wt[j * fout + o];
      yr[o] = s;
    }
  }
}

inline __m256d poly(__m256d z, const double* c, int deg) {
  __m256d acc = _mm256_set1_pd(c[0]);
  for (int i = 1; i <= deg; ++i) acc = _mm256_fmadd_pd(acc, z, _mm256_set1_pd(c[i]));
  return acc;
}

// exp(x) - 1 for x in [0, 50]: x = n ln2 + r with |r| <= ln2 / 2 and a Pade
// form for exp(r) - 1, which keeps full relative accuracy near zero.
inline __m256d expm1_pos(__m256d x) {
  static constexpr double P[] = {1.26177193074810590878E-4, 3.02994407707441961300E-2,
                                 9.99999999999999999910E-1};
  static constexpr double Q[] = {3.00198505138664455042E-6, 2.52448340349684104192E-3,
                                 2.27265548208155028766E-1, 2.00000000000000000009E0};
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), r);
  const __m256d rr = _mm256_mul_pd(r, r);
  const __m256d px = _mm256_mul_pd(r, poly(rr, P, 2));
  const __m256d qx = poly(rr, Q, 3);
  const __m256d frac = _mm256_div_pd(_mm256_add_pd(px, px), _mm256_sub_pd(qx, px));
  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52));
  // frac * 2^n + (2^n - 1); exact subtraction for n >= 0
  return _mm256_fmadd_pd(frac, scale, _mm256_sub_pd(scale, _mm256_set1_pd(1.0)));
}

inline __m256d tanh4(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  // tanh saturates to 1 in double precision well before 22
  const __m256d ax = _mm256_min_pd(_mm256_andnot_pd(sign_mask, x), _mm256_set1_pd(22.0));
  const __m256d m = expm1_pos(_mm256_add_pd(ax, ax));
  __m256d res = _mm256_div_pd(m, _mm256_add_pd(m, _mm256_set1_pd(2.0)));
  res = _mm256_or_pd(res, _mm256_and_pd(x, sign_mask));
  const __m256d is_nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  return _mm256_blendv_pd(res, x, is_nan);
}

void tanh_avx2(double* v, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(v + i, tanh4(_mm256_loadu_pd(v + i)));
  if (i < n) {
    double tmp[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = i; j < n; ++j) tmp[j - i] = v[j];
    _mm256_storeu_pd(tmp, tanh4(_mm256_loadu_pd(tmp)));
    for (std::size_t j = i; j < n; ++j) v[j] = tmp[j - i];
  }
}

constexpr KernelTable kAvx2{Backend::avx2,        dot_avx2,           axpy_avx2,
                            squared_distance_avx2, dense_forward_avx2, tanh_avx2};

}  // namespace

const KernelTable* avx2_table_impl() noexcept { return &kAvx2; }

}  // namespace dutd::kernels
