// Test-only oracles, independent of the library implementation paths they
// check.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracles {

using Vec = std::vector<double>;

// Exact optimal transport between equal-size uniform clouds by brute force
// over permutations (min-cost perfect matching). Cost = squared Euclidean.
inline double exact_ot_uniform(const std::vector<Vec>& x,
                               const std::vector<Vec>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < x[i].size(); ++d) {
        const double diff = x[i][d] - y[perm[i]][d];
        cost += diff * diff;
      }
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;  // each match carries mass 1/n
}

// Munchausen DQN target evaluated literally from its formula with plain
// scalar arithmetic: softmax via direct exp sums (fine for moderate q/tau).
inline double mdqn_target_literal(double reward, double gamma_n,
                                  const Vec& q_state, int action,
                                  const Vec& q_next, bool done, double tau,
                                  double alpha, double l0) {
  auto softmax = [&](const Vec& q) {
    Vec p(q.size());
    double z = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      p[i] = std::exp(q[i] / tau);
      z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
  };
  double target = reward;
  if (alpha != 0.0) {
    const Vec pi = softmax(q_state);
    double log_pi = std::log(pi[action]);
    log_pi = std::min(0.0, std::max(l0, log_pi));
    target += alpha * tau * log_pi;
  }
  if (!done) {
    const Vec pi = softmax(q_next);
    double soft = 0.0;
    for (std::size_t a = 0; a < q_next.size(); ++a) {
      soft += pi[a] * (q_next[a] - tau * std::log(pi[a]));
    }
    target += gamma_n * soft;
  }
  return target;
}

}  // namespace oracles
