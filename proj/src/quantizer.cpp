#include "aquadem/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "aquadem/errors.hpp"
#include "aquadem/kernels.hpp"
#include "aquadem/mathutil.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem {

namespace {

void check_temperature(double t) {
  if (!(t > 0.0)) throw DomainError("temperature must be positive");
}

// Softmin weights w_k = exp(-(x_k - x_min)/T) / sum, plus the stabilized loss
// value x_min - T log(sum).
double softmin_core(const std::vector<double>& sq_dists, double temperature,
                    std::vector<double>* weights) {
  const double x_min =
      *std::min_element(sq_dists.begin(), sq_dists.end());
  double denom = 0.0;
  std::vector<double> expd(sq_dists.size());
  for (std::size_t k = 0; k < sq_dists.size(); ++k) {
    expd[k] = std::exp(-(sq_dists[k] - x_min) / temperature);
    denom += expd[k];
  }
  if (weights != nullptr) {
    weights->resize(sq_dists.size());
    for (std::size_t k = 0; k < sq_dists.size(); ++k) {
      (*weights)[k] = expd[k] / denom;
    }
  }
  return x_min - temperature * std::log(denom);
}

std::vector<double> candidate_sq_dists(const std::vector<Vec>& candidates,
                                       std::span<const double> action) {
  std::vector<double> x(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates[k].size() != action.size()) {
      throw StructuralError("candidate/action dimension mismatch");
    }
    if (!all_finite(candidates[k])) {
      throw NumericalError("non-finite candidate action");
    }
    x[k] = kernels::squared_distance(action.size(), candidates[k].data(),
                                     action.data());
  }
  return x;
}

}  // namespace

double aquadem_loss(const std::vector<Vec>& candidates,
                    std::span<const double> action, double temperature,
                    std::vector<Vec>* dcand) {
  check_temperature(temperature);
  if (candidates.empty()) throw StructuralError("need at least one candidate");
  if (!all_finite(action)) throw NumericalError("non-finite action");
  const std::vector<double> x = candidate_sq_dists(candidates, action);

  std::vector<double> weights;
  const double loss =
      softmin_core(x, temperature, dcand != nullptr ? &weights : nullptr);
  if (dcand != nullptr) {
    dcand->assign(candidates.size(), Vec(action.size(), 0.0));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      for (std::size_t d = 0; d < action.size(); ++d) {
        (*dcand)[k][d] = weights[k] * 2.0 * (candidates[k][d] - action[d]);
      }
    }
  }
  return loss;
}

double soft_aggregate(std::span<const double> x, double temperature) {
  check_temperature(temperature);
  if (x.empty()) throw StructuralError("soft_aggregate needs at least one value");
  const std::vector<double> v(x.begin(), x.end());
  const double base = softmin_core(v, temperature, nullptr);
  return base + temperature * std::log(static_cast<double>(x.size()));
}

int project_action(const CandidateSet& candidates,
                   std::span<const double> action) {
  if (candidates.actions.empty()) {
    throw StructuralError("project_action: empty candidate set");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.actions.size(); ++k) {
    if (candidates.actions[k].size() != action.size()) {
      throw StructuralError("project_action: dimension mismatch");
    }
    const double d = kernels::squared_distance(
        action.size(), candidates.actions[k].data(), action.data());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

QuantizerModel::QuantizerModel(int state_dim, int action_dim, Bounds bounds,
                               int K, double temperature, int trunk_hidden,
                               int head_hidden, nn::Activation hidden_act,
                               Rng& rng)
    : action_dim_(action_dim),
      temperature_(temperature),
      bounds_(std::move(bounds)) {
  check_temperature(temperature);
  if (K < 1) throw DomainError("quantizer needs K >= 1");
  if (static_cast<int>(bounds_.size()) != action_dim) {
    throw StructuralError("quantizer: bounds must match action_dim");
  }
  trunk_ = nn::Mlp({state_dim, trunk_hidden}, {hidden_act}, rng);
  heads_.reserve(K);
  for (int i = 0; i < K; ++i) {
    heads_.emplace_back(std::vector<int>{trunk_hidden, head_hidden, action_dim},
                        std::vector<nn::Activation>{hidden_act,
                                                    nn::Activation::kTanh},
                        rng);
  }
}

CandidateSet QuantizerModel::candidates(std::span<const double> state) const {
  if (static_cast<int>(state.size()) != state_dim()) {
    throw StructuralError("quantizer: state dimension mismatch");
  }
  CandidateSet cs;
  cs.state.assign(state.begin(), state.end());
  const Vec trunk_out = trunk_.forward(state);
  cs.actions.reserve(heads_.size());
  for (const nn::Mlp& head : heads_) {
    Vec raw = head.forward(trunk_out);
    Vec a(action_dim_);
    for (int d = 0; d < action_dim_; ++d) {
      const double center = 0.5 * (bounds_[d].first + bounds_[d].second);
      const double half = 0.5 * (bounds_[d].second - bounds_[d].first);
      a[d] = center + half * raw[d];
    }
    cs.actions.push_back(std::move(a));
  }
  return cs;
}

const std::vector<Vec>& QuantizerModel::forward_train(
    std::span<const double> state, const nn::DropoutConfig& dropout, Rng& rng,
    TrainForward& fwd) const {
  const int K = k();
  fwd.head_caches.resize(K);
  fwd.raw.resize(K);
  fwd.candidate_set.resize(K);

  nn::DropoutConfig trunk_drop{dropout.input_rate, 0.0};
  fwd.trunk_out = trunk_.forward_train(state, trunk_drop, rng,
                                       fwd.trunk_cache);
  // One shared mask on the trunk output, so every head sees the same dropped
  // features.
  fwd.trunk_out_mask.clear();
  if (dropout.hidden_rate > 0.0) {
    const double keep = 1.0 - dropout.hidden_rate;
    fwd.trunk_out_mask.resize(fwd.trunk_out.size());
    for (std::size_t i = 0; i < fwd.trunk_out.size(); ++i) {
      fwd.trunk_out_mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
      fwd.trunk_out[i] *= fwd.trunk_out_mask[i];
    }
  }

  nn::DropoutConfig head_drop{0.0, dropout.hidden_rate};
  for (int h = 0; h < K; ++h) {
    fwd.raw[h] = heads_[h].forward_train(fwd.trunk_out, head_drop, rng,
                                         fwd.head_caches[h]);
    Vec& a = fwd.candidate_set[h];
    a.resize(action_dim_);
    for (int d = 0; d < action_dim_; ++d) {
      const double center = 0.5 * (bounds_[d].first + bounds_[d].second);
      const double half = 0.5 * (bounds_[d].second - bounds_[d].first);
      a[d] = center + half * fwd.raw[h][d];
    }
  }
  return fwd.candidate_set;
}

std::size_t QuantizerModel::param_count() const {
  std::size_t n = trunk_.param_count();
  for (const nn::Mlp& head : heads_) n += head.param_count();
  return n;
}

std::vector<std::span<double>> QuantizerModel::param_segments() {
  std::vector<std::span<double>> segs;
  segs.push_back(trunk_.params());
  for (nn::Mlp& head : heads_) segs.push_back(head.params());
  return segs;
}

void QuantizerModel::backward(const TrainForward& fwd,
                              const std::vector<Vec>& dcandidates,
                              std::span<double> grad, double scale) const {
  const int K = k();
  if (static_cast<int>(dcandidates.size()) != K) {
    throw StructuralError("quantizer backward: dcandidates size mismatch");
  }
  if (grad.size() != param_count()) {
    throw StructuralError("quantizer backward: gradient buffer mismatch");
  }
  Vec dtrunk_out(fwd.trunk_out.size(), 0.0);
  std::size_t offset = trunk_.param_count();
  Vec draw(action_dim_);
  Vec dhead_in;
  for (int h = 0; h < K; ++h) {
    for (int d = 0; d < action_dim_; ++d) {
      const double half = 0.5 * (bounds_[d].second - bounds_[d].first);
      draw[d] = dcandidates[h][d] * half;
    }
    heads_[h].backward(fwd.head_caches[h], draw,
                       grad.subspan(offset, heads_[h].param_count()),
                       &dhead_in, scale);
    for (std::size_t i = 0; i < dtrunk_out.size(); ++i) {
      dtrunk_out[i] += dhead_in[i];
    }
    offset += heads_[h].param_count();
  }
  if (!fwd.trunk_out_mask.empty()) {
    for (std::size_t i = 0; i < dtrunk_out.size(); ++i) {
      dtrunk_out[i] *= fwd.trunk_out_mask[i];
    }
  }
  trunk_.backward(fwd.trunk_cache, dtrunk_out,
                  grad.subspan(0, trunk_.param_count()), nullptr, scale);
}

void QuantizerModel::save(std::ostream& os) const {
  os << "aquadem-quantizer v1\n";
  os << "trait " << trait_ << '\n';
  os << "K " << k() << '\n';
  os << "temperature " << format_double(temperature_) << '\n';
  os << "state_dim " << state_dim() << '\n';
  os << "action_dim " << action_dim_ << '\n';
  os << "bounds";
  for (const auto& [lo, hi] : bounds_) {
    os << ' ' << format_double(lo) << ' ' << format_double(hi);
  }
  os << '\n';
  save_networks(os);
}

void QuantizerModel::save_networks(std::ostream& os) const {
  os << "trunk\n";
  trunk_.save(os);
  for (const nn::Mlp& head : heads_) {
    os << "head\n";
    head.save(os);
  }
}

QuantizerModel QuantizerModel::load_body(std::istream& is, std::string trait,
                                         int K, double temperature,
                                         int action_dim, Bounds bounds) {
  std::string word;
  is >> word;
  if (word != "trunk") throw InputError("quantizer checkpoint: expected trunk");
  QuantizerModel model;
  model.trait_ = std::move(trait);
  model.temperature_ = temperature;
  model.action_dim_ = action_dim;
  model.bounds_ = std::move(bounds);
  model.trunk_ = nn::Mlp::load(is);
  for (int i = 0; i < K; ++i) {
    is >> word;
    if (word != "head") throw InputError("quantizer checkpoint: expected head");
    model.heads_.push_back(nn::Mlp::load(is));
  }
  return model;
}

namespace {

struct SampledBatchTrainer {
  const std::vector<const DemoStep*>& steps;
  const QuantizerTrainConfig& cfg;

  std::size_t draw(Rng& rng) const { return rng.uniform_index(steps.size()); }
};

}  // namespace

QuantizerTrainResult train_quantizer(const DemoDataset& dataset,
                                     const QuantizerTrainConfig& cfg) {
  if (dataset.episodes.empty() || dataset.transition_count() == 0) {
    throw InputError("train_quantizer: empty dataset");
  }
  if (cfg.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (cfg.gradient_steps < 0) throw DomainError("gradient_steps must be >= 0");
  check_temperature(cfg.temperature);

  const auto steps = dataset.flat_steps();
  const int state_dim = dataset.state_dim();
  const int action_dim = dataset.action_dim();
  for (const DemoStep* st : steps) {
    if (static_cast<int>(st->action.size()) != action_dim ||
        static_cast<int>(st->state.size()) != state_dim) {
      throw InputError("train_quantizer: inconsistent dimensions in dataset");
    }
  }

  Rng rng(cfg.seed);
  QuantizerTrainResult result{
      QuantizerModel(state_dim, action_dim, dataset.action_bounds(), cfg.K,
                     cfg.temperature, cfg.trunk_hidden, cfg.head_hidden,
                     cfg.hidden_activation, rng),
      {}};
  QuantizerModel& model = result.model;

  auto segments = model.param_segments();
  Vec flat_params(model.param_count());
  auto gather = [&] {
    std::size_t o = 0;
    for (auto seg : segments) {
      std::copy(seg.begin(), seg.end(), flat_params.begin() + o);
      o += seg.size();
    }
  };
  auto scatter = [&] {
    std::size_t o = 0;
    for (auto seg : segments) {
      std::copy(flat_params.begin() + o, flat_params.begin() + o + seg.size(),
                seg.begin());
      o += seg.size();
    }
  };
  gather();

  auto adam = nn::AdamState::for_params(flat_params.size(), cfg.learning_rate);
  Vec grad(flat_params.size());
  QuantizerModel::TrainForward fwd;
  std::vector<Vec> dcand;
  result.loss_trace.reserve(cfg.gradient_steps);

  const double inv_batch = 1.0 / cfg.batch_size;
  for (long step = 0; step < cfg.gradient_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const DemoStep& st = *steps[rng.uniform_index(steps.size())];
      const auto& cands = model.forward_train(st.state, cfg.dropout, rng, fwd);
      batch_loss +=
          aquadem_loss(cands, st.action, cfg.temperature, &dcand);
      model.backward(fwd, dcand, grad, inv_batch);
    }
    batch_loss *= inv_batch;
    if (!std::isfinite(batch_loss)) {
      throw NumericalError("train_quantizer: loss diverged at step " +
                           std::to_string(step));
    }
    result.loss_trace.push_back(batch_loss);
    nn::adam_step(flat_params, grad, adam);
    scatter();
  }
  return result;
}

Vec MdnModel::logits(std::span<const double> state) const {
  const Vec trunk_out = base.trunk().forward(state);
  return logit_head.forward(trunk_out);
}

Vec MdnModel::mixture_weights(std::span<const double> state) const {
  return stable_softmax(logits(state));
}

int MdnModel::sample_index(std::span<const double> state, Rng& rng) const {
  const Vec w = mixture_weights(state);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(w.size()) - 1;
}

Vec MdnModel::sample_action(std::span<const double> state, Rng& rng) const {
  const int idx = sample_index(state, rng);
  return base.candidates(state).actions[idx];
}

void MdnModel::save(std::ostream& os) const {
  os << "aquadem-quantizer v1\n";
  os << "trait mdn\n";
  os << "K " << base.k() << '\n';
  os << "temperature " << format_double(base.temperature()) << '\n';
  os << "state_dim " << base.state_dim() << '\n';
  os << "action_dim " << base.action_dim() << '\n';
  os << "bounds";
  for (const auto& [lo, hi] : base.bounds()) {
    os << ' ' << format_double(lo) << ' ' << format_double(hi);
  }
  os << '\n';
  base.save_networks(os);
  os << "logit_head\n";
  logit_head.save(os);
}

MdnLossValue mdn_loss(const MdnModel& model, std::span<const double> state,
                      std::span<const double> action) {
  const double t = model.base.temperature();
  check_temperature(t);
  const CandidateSet cs = model.base.candidates(state);
  MdnLossValue out;
  out.psi_loss = aquadem_loss(cs.actions, action, t);
  const std::vector<double> x = candidate_sq_dists(cs.actions, action);
  const Vec w = model.mixture_weights(state);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    acc += w[k] * std::exp(-x[k] / t);
  }
  out.logit_loss = -acc;
  return out;
}

MdnTrainResult train_mdn(const DemoDataset& dataset,
                         const QuantizerTrainConfig& cfg) {
  if (dataset.episodes.empty() || dataset.transition_count() == 0) {
    throw InputError("train_mdn: empty dataset");
  }
  check_temperature(cfg.temperature);
  const auto steps = dataset.flat_steps();
  const int state_dim = dataset.state_dim();
  const int action_dim = dataset.action_dim();

  Rng rng(cfg.seed);
  MdnTrainResult result;
  result.model.base =
      QuantizerModel(state_dim, action_dim, dataset.action_bounds(), cfg.K,
                     cfg.temperature, cfg.trunk_hidden, cfg.head_hidden,
                     cfg.hidden_activation, rng);
  result.model.logit_head =
      nn::Mlp({cfg.trunk_hidden, cfg.head_hidden, cfg.K},
              {cfg.hidden_activation, nn::Activation::kLinear}, rng);
  QuantizerModel& base = result.model.base;
  nn::Mlp& logit_head = result.model.logit_head;

  auto segments = base.param_segments();
  Vec flat_params(base.param_count());
  auto gather = [&] {
    std::size_t o = 0;
    for (auto seg : segments) {
      std::copy(seg.begin(), seg.end(), flat_params.begin() + o);
      o += seg.size();
    }
  };
  auto scatter = [&] {
    std::size_t o = 0;
    for (auto seg : segments) {
      std::copy(flat_params.begin() + o, flat_params.begin() + o + seg.size(),
                seg.begin());
      o += seg.size();
    }
  };
  gather();

  auto adam_psi =
      nn::AdamState::for_params(flat_params.size(), cfg.learning_rate);
  auto adam_logit =
      nn::AdamState::for_params(logit_head.param_count(), cfg.learning_rate);
  Vec grad_psi(flat_params.size());
  Vec grad_logit(logit_head.param_count());
  QuantizerModel::TrainForward fwd;
  nn::ForwardCache logit_cache;
  std::vector<Vec> dcand;

  const double t = cfg.temperature;
  const double inv_batch = 1.0 / cfg.batch_size;
  nn::DropoutConfig head_drop{0.0, cfg.dropout.hidden_rate};
  for (long step = 0; step < cfg.gradient_steps; ++step) {
    std::fill(grad_psi.begin(), grad_psi.end(), 0.0);
    std::fill(grad_logit.begin(), grad_logit.end(), 0.0);
    double psi_loss = 0.0, logit_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const DemoStep& st = *steps[rng.uniform_index(steps.size())];
      const auto& cands = base.forward_train(st.state, cfg.dropout, rng, fwd);
      psi_loss += aquadem_loss(cands, st.action, t, &dcand);
      base.backward(fwd, dcand, grad_psi, inv_batch);

      // The mixture objective sees the candidates as constants; its gradient
      // flows only through the logit head.
      const Vec logits =
          logit_head.forward_train(fwd.trunk_out, head_drop, rng, logit_cache);
      const Vec q = stable_softmax(logits);
      std::vector<double> e(cands.size());
      double qe = 0.0;
      for (std::size_t k = 0; k < cands.size(); ++k) {
        e[k] = std::exp(-kernels::squared_distance(st.action.size(),
                                                   cands[k].data(),
                                                   st.action.data()) /
                        t);
        qe += q[k] * e[k];
      }
      logit_loss += -qe;
      Vec dlogits(q.size());
      for (std::size_t k = 0; k < q.size(); ++k) {
        dlogits[k] = -q[k] * (e[k] - qe);
      }
      logit_head.backward(logit_cache, dlogits, grad_logit, nullptr,
                          inv_batch);
    }
    psi_loss *= inv_batch;
    logit_loss *= inv_batch;
    if (!std::isfinite(psi_loss) || !std::isfinite(logit_loss)) {
      throw NumericalError("train_mdn: loss diverged at step " +
                           std::to_string(step));
    }
    result.psi_trace.push_back(psi_loss);
    result.logit_trace.push_back(logit_loss);
    nn::adam_step(flat_params, grad_psi, adam_psi);
    scatter();
    nn::adam_step(logit_head.params(), grad_logit, adam_logit);
  }
  return result;
}

KmeansGenerator::KmeansGenerator(std::vector<Vec> centers, int state_dim,
                                 Bounds bounds)
    : centers_(std::move(centers)), bounds_(std::move(bounds)) {
  (void)state_dim;
  if (centers_.empty()) throw StructuralError("kmeans: no centers");
}

CandidateSet KmeansGenerator::candidates(std::span<const double> state) const {
  return {Vec(state.begin(), state.end()), centers_};
}

void KmeansGenerator::save(std::ostream& os) const {
  os << "aquadem-quantizer v1\n";
  os << "trait kmeans\n";
  os << "K " << k() << '\n';
  os << "temperature 0\n";
  os << "state_dim -1\n";
  os << "action_dim " << action_dim() << '\n';
  os << "bounds";
  for (const auto& [lo, hi] : bounds_) {
    os << ' ' << format_double(lo) << ' ' << format_double(hi);
  }
  os << '\n';
  os << "centers\n";
  for (const Vec& c : centers_) {
    for (std::size_t d = 0; d < c.size(); ++d) {
      os << (d > 0 ? " " : "") << format_double(c[d]);
    }
    os << '\n';
  }
}

KmeansGenerator KmeansGenerator::load_body(std::istream& is, int K,
                                           int action_dim, Bounds bounds) {
  std::string word;
  is >> word;
  if (word != "centers") throw InputError("kmeans checkpoint: expected centers");
  std::vector<Vec> centers(K, Vec(action_dim));
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < action_dim; ++d) {
      if (!(is >> centers[k][d])) {
        throw InputError("kmeans checkpoint: truncated centers");
      }
    }
  }
  return KmeansGenerator(std::move(centers), -1, std::move(bounds));
}

KmeansGenerator kmeans_candidates(const DemoDataset& dataset, int K,
                                  std::uint64_t seed) {
  if (dataset.episodes.empty() || dataset.transition_count() == 0) {
    throw InputError("kmeans_candidates: empty dataset");
  }
  if (K < 1) throw DomainError("kmeans_candidates: K must be >= 1");
  const auto steps = dataset.flat_steps();
  std::vector<Vec> actions;
  actions.reserve(steps.size());
  for (const DemoStep* st : steps) actions.push_back(st->action);
  const std::size_t dim = actions[0].size();

  std::set<Vec> distinct(actions.begin(), actions.end());
  if (static_cast<std::size_t>(K) > distinct.size()) {
    throw InputError("kmeans_candidates: K exceeds the " +
                     std::to_string(distinct.size()) +
                     " distinct demonstration actions (degenerate clusters)");
  }

  Rng rng(seed);
  // k-means++ seeding: D^2-weighted draws.
  std::vector<Vec> centers;
  centers.push_back(actions[rng.uniform_index(actions.size())]);
  std::vector<double> d2(actions.size());
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& c : centers) {
        best = std::min(best, kernels::squared_distance(dim, actions[i].data(),
                                                        c.data()));
      }
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining points coincide with existing centers; distinct-count
      // guard above makes this unreachable, but stay safe.
      centers.push_back(actions[rng.uniform_index(actions.size())]);
      continue;
    }
    double u = rng.uniform01() * total;
    std::size_t pick = actions.size() - 1;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      u -= d2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(actions[pick]);
  }

  std::vector<int> assign(actions.size(), 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < actions.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < K; ++c) {
        const double d = kernels::squared_distance(dim, actions[i].data(),
                                                   centers[c].data());
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    std::vector<Vec> next(K, Vec(dim, 0.0));
    std::vector<int> counts(K, 0);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      counts[assign[i]] += 1;
      for (std::size_t d = 0; d < dim; ++d) next[assign[i]][d] += actions[i][d];
    }
    for (int c = 0; c < K; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster from the point farthest from its center.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < actions.size(); ++i) {
          const double d = kernels::squared_distance(
              dim, actions[i].data(), centers[assign[i]].data());
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next[c] = actions[far];
      } else {
        for (std::size_t d = 0; d < dim; ++d) next[c][d] /= counts[c];
      }
    }
    double movement = 0.0;
    for (int c = 0; c < K; ++c) {
      movement += kernels::squared_distance(dim, centers[c].data(),
                                            next[c].data());
    }
    centers = std::move(next);
    if (movement < 1e-9 * 1e-9) break;
  }
  return KmeansGenerator(std::move(centers), -1, dataset.action_bounds());
}

QuantizerModel random_candidates(int state_dim, int action_dim, int K,
                                 const Bounds& bounds, std::uint64_t seed,
                                 int trunk_hidden, int head_hidden) {
  Rng rng(seed);
  QuantizerModel model(state_dim, action_dim, bounds, K, 1.0, trunk_hidden,
                       head_hidden, nn::Activation::kRelu, rng);
  model.set_trait("random");
  return model;
}

GmmIdentity gmm_nll_identity_check(const QuantizerModel& model,
                                   std::span<const double> state,
                                   std::span<const double> action) {
  const double t = model.temperature();
  check_temperature(t);
  const CandidateSet cs = model.candidates(state);
  const std::vector<double> x = candidate_sq_dists(cs.actions, action);
  const double log_k = std::log(static_cast<double>(x.size()));

  // Direct route: -log((1/K) sum exp(-x_k/T)) via the generic logsumexp.
  std::vector<double> scaled(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = -x[i] / t;
  GmmIdentity out;
  out.lhs = log_k - logsumexp(scaled);
  out.rhs = aquadem_loss(cs.actions, action, t) / t + log_k;
  out.constant = log_k;
  return out;
}

}  // namespace aquadem
