#include "aquadem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aquadem/errors.hpp"
#include "aquadem/kernels.hpp"
#include "aquadem/mathutil.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

RolloutStats evaluate_policy(const ContinuousEnv& env,
                             const ContinuousPolicy& policy, int n_episodes,
                             std::uint64_t seed, bool collect_states) {
  if (n_episodes < 1) throw DomainError("evaluate_policy: n_episodes >= 1");
  auto eval_env = env.clone();
  Rng rng(seed);
  RolloutStats stats;
  for (int e = 0; e < n_episodes; ++e) {
    Vec state = eval_env->reset(rng);
    if (collect_states) stats.visited_states.push_back(state);
    double ret = 0.0;
    bool success = false;
    while (true) {
      StepResult r = eval_env->step(policy(state));
      const double reward = r.reward.value();
      ret += reward;
      success = success || reward == 1.0;
      state = r.next;
      if (collect_states) stats.visited_states.push_back(state);
      if (r.done) break;
    }
    stats.mean_return += ret;
    stats.success_rate += success ? 1.0 : 0.0;
  }
  stats.mean_return /= n_episodes;
  stats.success_rate /= n_episodes;
  return stats;
}

double success_rate(const ContinuousEnv& env, const ContinuousPolicy& policy,
                    const EvalProtocol& protocol, std::uint64_t seed) {
  if (!protocol.greedy) {
    throw DomainError("success_rate: evaluation protocol must be greedy");
  }
  return evaluate_policy(env, policy, protocol.n_episodes, seed).success_rate;
}

PointCloud PointCloud::uniform(std::vector<Vec> pts) {
  PointCloud c;
  c.points = std::move(pts);
  c.weights.assign(c.points.size(), 1.0 / c.points.size());
  return c;
}

PointCloud PointCloud::subsampled(std::size_t cap, std::uint64_t seed) const {
  if (points.size() <= cap) return *this;
  // Seeded Fisher-Yates prefix, uniform without replacement.
  std::vector<std::size_t> idx(points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<Vec> pts;
  pts.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) pts.push_back(points[idx[i]]);
  return uniform(std::move(pts));
}

void PointCloud::validate() const {
  if (points.empty()) throw InputError("point cloud is empty");
  if (weights.size() != points.size()) {
    throw StructuralError("point cloud: weights/points size mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DomainError("point cloud: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("point cloud: weights must sum to 1");
  }
}

namespace {

// Zero-weight points would put -inf into the log-domain potentials; they
// carry no mass, so drop them up front.
PointCloud strip_zero_weights(const PointCloud& c) {
  PointCloud out;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (c.weights[i] > 0.0) {
      out.points.push_back(c.points[i]);
      out.weights.push_back(c.weights[i]);
    }
  }
  return out;
}

}  // namespace

namespace {

// Total order on clouds; swapping arguments into canonical order makes the
// alternating iteration exactly symmetric in (X, Y).
bool cloud_less(const PointCloud& a, const PointCloud& b) {
  if (a.points != b.points) return a.points < b.points;
  return a.weights < b.weights;
}

}  // namespace

SinkhornResult sinkhorn_distance(const PointCloud& x_in,
                                 const PointCloud& y_in, double epsilon,
                                 int max_iters, double tol) {
  if (!(epsilon > 0.0)) throw DomainError("sinkhorn: epsilon must be positive");
  x_in.validate();
  y_in.validate();
  if (cloud_less(y_in, x_in)) {
    return sinkhorn_distance(y_in, x_in, epsilon, max_iters, tol);
  }
  const PointCloud x = strip_zero_weights(x_in);
  const PointCloud y = strip_zero_weights(y_in);
  const std::size_t n = x.points.size();
  const std::size_t m = y.points.size();
  const std::size_t dim = x.points[0].size();
  if (dim != y.points[0].size()) {
    throw StructuralError("sinkhorn: dimension mismatch between clouds");
  }

  std::vector<double> cost(n * m);
  double cost_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = kernels::squared_distance(dim, x.points[i].data(),
                                                 y.points[j].data());
      cost[i * m + j] = c;
      cost_max = std::max(cost_max, c);
    }
  }

  std::vector<double> log_a(n), log_b(m);
  for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(x.weights[i]);
  for (std::size_t j = 0; j < m; ++j) log_b[j] = std::log(y.weights[j]);

  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> scratch(std::max(n, m));

  auto update_f = [&](double eps) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        scratch[j] = (g[j] - cost[i * m + j]) / eps + log_b[j];
      }
      f[i] = -eps * logsumexp(std::span(scratch.data(), m));
    }
  };
  auto update_g = [&](double eps) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        scratch[i] = (f[i] - cost[i * m + j]) / eps + log_a[i];
      }
      g[j] = -eps * logsumexp(std::span(scratch.data(), n));
    }
  };

  // L1 violation of both marginals of the implied plan.
  auto marginal_error = [&](double eps) {
    double err = 0.0;
    std::vector<double> col(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double p = std::exp((f[i] + g[j] - cost[i * m + j]) / eps +
                                  log_a[i] + log_b[j]);
        row += p;
        col[j] += p;
      }
      err += std::abs(row - x.weights[i]);
    }
    for (std::size_t j = 0; j < m; ++j) err += std::abs(col[j] - y.weights[j]);
    return err;
  };

  SinkhornResult result;
  int iters = 0;

  // Epsilon scaling: anneal from the cost scale down to the target with warm
  // started potentials; plain iterations stall for epsilon << cost scale.
  std::vector<double> stages;
  double eps_stage =
      std::max(epsilon, cost_max > 0.0 ? cost_max / 2.0 : epsilon);
  while (eps_stage > epsilon * 1.0001) {
    stages.push_back(eps_stage);
    eps_stage *= 0.5;
  }
  stages.push_back(epsilon);

  for (std::size_t s = 0; s < stages.size() && iters < max_iters; ++s) {
    const double eps = stages[s];
    const bool final_stage = s + 1 == stages.size();
    const int stage_iters = final_stage ? max_iters - iters : 12;
    for (int it = 0; it < stage_iters; ++it) {
      update_f(eps);
      update_g(eps);
      ++iters;
      if (final_stage && (it % 5 == 4 || it == stage_iters - 1)) {
        result.marginal_error = marginal_error(eps);
        if (result.marginal_error < tol) {
          result.converged = true;
          break;
        }
      }
    }
    if (result.converged) break;
  }
  if (!result.converged) result.marginal_error = marginal_error(epsilon);

  double cost_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double p = std::exp((f[i] + g[j] - cost[i * m + j]) / epsilon +
                                log_a[i] + log_b[j]);
      cost_total += p * cost[i * m + j];
    }
  }
  result.cost = cost_total;
  result.iterations = iters;
  return result;
}

PointCloud demo_state_cloud(const DemoDataset& demos) {
  std::vector<Vec> pts;
  for (const auto& ep : demos.episodes) {
    for (const auto& st : ep) pts.push_back(st.state);
  }
  return PointCloud::uniform(std::move(pts));
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

HoldoutSummary demo_holdout_distance(const DemoDataset& demos, int k_holdout,
                                     int n_repeats, std::uint64_t seed,
                                     double epsilon) {
  const int n_eps = static_cast<int>(demos.episodes.size());
  if (k_holdout < 1 || k_holdout >= n_eps) {
    throw DomainError(
        "demo_holdout_distance: k_holdout must be in [1, episodes)");
  }
  if (n_repeats < 1) throw DomainError("demo_holdout_distance: n_repeats >= 1");

  Rng rng(seed);
  std::vector<double> distances;
  distances.reserve(n_repeats);
  std::vector<int> idx(n_eps);
  for (int i = 0; i < n_eps; ++i) idx[i] = i;
  for (int rep = 0; rep < n_repeats; ++rep) {
    for (int i = 0; i < k_holdout; ++i) {
      const int j = i + static_cast<int>(rng.uniform_index(n_eps - i));
      std::swap(idx[i], idx[j]);
    }
    std::vector<Vec> held, rest;
    for (int i = 0; i < n_eps; ++i) {
      for (const auto& st : demos.episodes[idx[i]]) {
        (i < k_holdout ? held : rest).push_back(st.state);
      }
    }
    auto r = sinkhorn_distance(PointCloud::uniform(std::move(held)),
                               PointCloud::uniform(std::move(rest)), epsilon);
    distances.push_back(r.cost);
  }
  return {quantile(distances, 0.5), quantile(distances, 0.25),
          quantile(distances, 0.75)};
}

std::vector<ActionFieldRecord> action_field_export(
    const CandidateGenerator& gen, const std::vector<Vec>& probe_grid) {
  std::vector<ActionFieldRecord> records;
  records.reserve(probe_grid.size() * gen.k());
  for (const Vec& s : probe_grid) {
    CandidateSet cs = gen.candidates(s);
    for (int h = 0; h < gen.k(); ++h) {
      records.push_back({s, h, cs.actions[h]});
    }
  }
  return records;
}

std::vector<Vec> make_probe_grid(int n) {
  if (n < 1) throw DomainError("probe grid needs n >= 1");
  std::vector<Vec> grid;
  grid.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      grid.push_back({(i + 0.5) / n, (j + 0.5) / n});
    }
  }
  return grid;
}

std::vector<Vec> restrict_to_demo_support(const std::vector<Vec>& grid,
                                          const DemoDataset& demos,
                                          double radius) {
  std::vector<Vec> out;
  const double r2 = radius * radius;
  for (const Vec& p : grid) {
    bool near = false;
    for (const auto& ep : demos.episodes) {
      for (const auto& st : ep) {
        if (kernels::squared_distance(p.size(), p.data(), st.state.data()) <=
            r2) {
          near = true;
          break;
        }
      }
      if (near) break;
    }
    if (near) out.push_back(p);
  }
  return out;
}

std::string action_field_csv(const std::vector<ActionFieldRecord>& records) {
  std::ostringstream os;
  os << "x,y,head,ax,ay\n";
  for (const auto& r : records) {
    os << format_double(r.state[0]) << ',' << format_double(r.state[1]) << ','
       << r.head << ',' << format_double(r.action[0]) << ','
       << format_double(r.action[1]) << '\n';
  }
  return os.str();
}

std::string action_field_svg(const std::vector<ActionFieldRecord>& records,
                             int n_heads) {
  // Fixed palette, one color per head, consistent across states.
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                   "#bcbd22", "#17becf"};
  const int size = 560;
  const double margin = 30.0;
  const double span = size - 2.0 * margin;
  auto px = [&](double v) { return margin + v * span; };
  auto py = [&](double v) { return size - margin - v * span; };
  char buf[256];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
     << "\" height=\"" << size << "\">\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << span
     << "\" height=\"" << span << "\" fill=\"white\" stroke=\"black\"/>\n";
  const double arrow = 11.0;
  for (const auto& r : records) {
    const double norm =
        std::sqrt(r.action[0] * r.action[0] + r.action[1] * r.action[1]);
    if (norm < 1e-9) continue;
    const double ux = r.action[0] / norm;
    const double uy = r.action[1] / norm;
    const double x0 = px(r.state[0]);
    const double y0 = py(r.state[1]);
    const double x1 = x0 + arrow * ux;
    const double y1 = y0 - arrow * uy;
    const char* color = kPalette[r.head % 10];
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                  "stroke=\"%s\" stroke-width=\"1.4\"/>\n",
                  x0, y0, x1, y1, color);
    os << buf;
    const double bx = -uy, by = ux;
    std::snprintf(buf, sizeof(buf),
                  "<path d=\"M %.2f %.2f L %.2f %.2f L %.2f %.2f Z\" "
                  "fill=\"%s\"/>\n",
                  x1, y1, x1 - 4.0 * ux + 2.0 * bx, y1 + 4.0 * uy - 2.0 * by,
                  x1 - 4.0 * ux - 2.0 * bx, y1 + 4.0 * uy + 2.0 * by, color);
    os << buf;
  }
  for (int h = 0; h < n_heads && h < 10; ++h) {
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"10\" height=\"10\" "
                  "fill=\"%s\"/>\n",
                  margin + 16.0 * h, 8.0, kPalette[h % 10]);
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace aquadem
