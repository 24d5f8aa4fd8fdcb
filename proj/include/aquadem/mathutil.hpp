#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "aquadem/kernels.hpp"

namespace aquadem {

// log(sum_i exp(x_i)) with max-subtraction.
inline double logsumexp(std::span<const double> x) {
  const double m = kernels::max_element(x.size(), x.data());
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

// out_i = exp(x_i - logsumexp(x)).
inline void stable_softmax(std::span<const double> x, std::span<double> out) {
  const double m = kernels::max_element(x.size(), x.data());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    acc += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= acc;
}

inline std::vector<double> stable_softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  stable_softmax(x, out);
  return out;
}

// log softmax(x)_i, stable for arbitrarily peaked inputs.
inline void stable_log_softmax(std::span<const double> x,
                               std::span<double> out) {
  const double lse = logsumexp(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// -log sigmoid(z) = softplus(-z), computed without overflow.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace aquadem
