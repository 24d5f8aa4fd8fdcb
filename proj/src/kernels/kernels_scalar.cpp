#include <cmath>
#include <cstddef>

#include "aquadem/kernels.hpp"

namespace aquadem::kernels {
namespace {

void affine_scalar(std::size_t rows, std::size_t cols, const double* w,
                   const double* x, const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc + b[r];
  }
}

void matvec_t_scalar(std::size_t rows, std::size_t cols, const double* w,
                     const double* dy, double* dx) {
  for (std::size_t c = 0; c < cols; ++c) dx[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    const double g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) dx[c] += g * wr[c];
  }
}

void rank1_update_scalar(std::size_t rows, std::size_t cols, double* w,
                         const double* dy, const double* x, double alpha) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* wr = w + r * cols;
    const double g = alpha * dy[r];
    for (std::size_t c = 0; c < cols; ++c) wr[c] += g * x[c];
  }
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double squared_distance_scalar(std::size_t n, const double* x,
                               const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

double max_element_scalar(std::size_t n, const double* x) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double sum_scalar(std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void adam_update_scalar(std::size_t n, double* p, const double* g, double* m,
                        double* v, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend = {
      "scalar",        affine_scalar,       matvec_t_scalar,
      rank1_update_scalar, dot_scalar,      axpy_scalar,
      squared_distance_scalar, max_element_scalar, sum_scalar,
      adam_update_scalar,
  };
  return backend;
}

}  // namespace aquadem::kernels
