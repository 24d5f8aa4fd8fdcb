// AVX2+FMA variants of the inner-loop kernels. This translation unit is
// compiled with -mavx2 -mfma on x86-64; callers must check avx2_supported()
// before routing through it (the dispatcher does).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "aquadem/kernels.hpp"

namespace aquadem::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline double dot_avx2_impl(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void affine_avx2(std::size_t rows, std::size_t cols, const double* w,
                 const double* x, const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_avx2_impl(cols, w + r * cols, x) + b[r];
  }
}

void matvec_t_avx2(std::size_t rows, std::size_t cols, const double* w,
                   const double* dy, double* dx) {
  std::size_t c = 0;
  for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(dx + c, _mm256_setzero_pd());
  for (; c < cols; ++c) dx[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    std::size_t i = 0;
    for (; i + 4 <= cols; i += 4) {
      __m256d acc = _mm256_loadu_pd(dx + i);
      acc = _mm256_fmadd_pd(g, _mm256_loadu_pd(wr + i), acc);
      _mm256_storeu_pd(dx + i, acc);
    }
    const double gs = dy[r];
    for (; i < cols; ++i) dx[i] += gs * wr[i];
  }
}

void rank1_update_avx2(std::size_t rows, std::size_t cols, double* w,
                       const double* dy, const double* x, double alpha) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* wr = w + r * cols;
    const double gs = alpha * dy[r];
    const __m256d g = _mm256_set1_pd(gs);
    std::size_t i = 0;
    for (; i + 4 <= cols; i += 4) {
      __m256d acc = _mm256_loadu_pd(wr + i);
      acc = _mm256_fmadd_pd(g, _mm256_loadu_pd(x + i), acc);
      _mm256_storeu_pd(wr + i, acc);
    }
    for (; i < cols; ++i) wr[i] += gs * x[i];
  }
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  return dot_avx2_impl(n, x, y);
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double squared_distance_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

double max_element_avx2(std::size_t n, const double* x) {
  if (n < 4) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
  }
  __m256d mv = _mm256_loadu_pd(x);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
  __m128d lo = _mm256_castpd256_pd128(mv);
  __m128d hi = _mm256_extractf128_pd(mv, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  double m = _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double sum_avx2(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void adam_update_avx2(std::size_t n, double* p, const double* g, double* m,
                      double* v, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(omb1, gv));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(omb2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1v);
    const __m256d vhat = _mm256_div_pd(vv, bc2v);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    __m256d pv = _mm256_loadu_pd(p + i);
    pv = _mm256_sub_pd(pv, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom));
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Backend& avx2_backend() {
  static const Backend backend = {
      "avx2",          affine_avx2,       matvec_t_avx2,
      rank1_update_avx2, dot_avx2,        axpy_avx2,
      squared_distance_avx2, max_element_avx2, sum_avx2,
      adam_update_avx2,
  };
  return backend;
}

}  // namespace aquadem::kernels

#endif  // x86-64
