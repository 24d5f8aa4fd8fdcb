#pragma once

#include <cstddef>
#include <string_view>

namespace aquadem::kernels {

// Inner-loop kernels behind every learned model in the repo. Each operation
// has a scalar reference implementation and, on x86-64 hosts with AVX2+FMA,
// a vectorized variant selected once at startup. The two are equivalence
// tested; reductions may differ by summation order within ~1e-13 relative.

struct Backend {
  const char* name;

  // y = W x + b. W row-major, rows x cols.
  void (*affine)(std::size_t rows, std::size_t cols, const double* w,
                 const double* x, const double* b, double* y);
  // dx = W^T dy.
  void (*matvec_t)(std::size_t rows, std::size_t cols, const double* w,
                   const double* dy, double* dx);
  // W += alpha * dy x^T.
  void (*rank1_update)(std::size_t rows, std::size_t cols, double* w,
                       const double* dy, const double* x, double alpha);
  double (*dot)(std::size_t n, const double* x, const double* y);
  // y += a x.
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  double (*squared_distance)(std::size_t n, const double* x, const double* y);
  double (*max_element)(std::size_t n, const double* x);
  double (*sum)(std::size_t n, const double* x);
  // Bias-corrected Adam on a flat parameter block:
  //   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
  //   p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
  // with bc1 = 1 - b1^t, bc2 = 1 - b2^t supplied by the caller.
  void (*adam_update)(std::size_t n, double* p, const double* g, double* m,
                      double* v, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2);
};

const Backend& scalar_backend();

#if defined(__x86_64__) || defined(_M_X64)
const Backend& avx2_backend();
bool avx2_supported();
#endif

// The process-wide active backend. Defaults to AVX2 when the CPU supports it;
// the AQUADEM_KERNELS environment variable (scalar|avx2) overrides.
const Backend& active();

// Forces a backend by name. Throws DomainError on unknown or unsupported
// names. Intended for tests and benchmarking.
void set_backend(std::string_view name);

inline void affine(std::size_t rows, std::size_t cols, const double* w,
                   const double* x, const double* b, double* y) {
  active().affine(rows, cols, w, x, b, y);
}
inline void matvec_t(std::size_t rows, std::size_t cols, const double* w,
                     const double* dy, double* dx) {
  active().matvec_t(rows, cols, w, dy, dx);
}
inline void rank1_update(std::size_t rows, std::size_t cols, double* w,
                         const double* dy, const double* x, double alpha) {
  active().rank1_update(rows, cols, w, dy, x, alpha);
}
inline double dot(std::size_t n, const double* x, const double* y) {
  return active().dot(n, x, y);
}
inline void axpy(std::size_t n, double a, const double* x, double* y) {
  active().axpy(n, a, x, y);
}
inline double squared_distance(std::size_t n, const double* x,
                               const double* y) {
  return active().squared_distance(n, x, y);
}
inline double max_element(std::size_t n, const double* x) {
  return active().max_element(n, x);
}
inline double sum(std::size_t n, const double* x) {
  return active().sum(n, x);
}
inline void adam_update(std::size_t n, double* p, const double* g, double* m,
                        double* v, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2) {
  active().adam_update(n, p, g, m, v, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace aquadem::kernels
