#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aquadem/discretizer.hpp"
#include "aquadem/envs.hpp"
#include "aquadem/nn.hpp"
#include "aquadem/rng.hpp"

namespace aquadem {

// Soft-min reconstruction loss between K candidate actions and a demonstrated
// action:
//   -T log sum_k exp(-||c_k - a||^2 / T)
// evaluated with max-shift stabilization. With K = 1 this is exactly the
// squared-error behavioral-cloning loss. If dcand is non-null it receives
// dloss/dc_k.
double aquadem_loss(const std::vector<Vec>& candidates,
                    std::span<const double> action, double temperature,
                    std::vector<Vec>* dcand = nullptr);

// f_T(x) = -T log((1/K) sum_k exp(-x_k / T)); squeezed between min(x) as
// T -> 0 and mean(x) as T -> infinity.
double soft_aggregate(std::span<const double> x, double temperature);

// Index of the closest candidate in Euclidean norm; ties go to the lowest
// index.
int project_action(const CandidateSet& candidates,
                   std::span<const double> action);

// Multi-head quantizer: a shared trunk followed by K heads, each emitting an
// action squashed into the per-dimension bounds via tanh.
class QuantizerModel : public CandidateGenerator {
 public:
  QuantizerModel() = default;
  QuantizerModel(int state_dim, int action_dim, Bounds bounds, int K,
                 double temperature, int trunk_hidden, int head_hidden,
                 nn::Activation hidden_act, Rng& rng);

  int k() const override { return static_cast<int>(heads_.size()); }
  int state_dim() const override { return trunk_.input_dim(); }
  int action_dim() const override { return action_dim_; }
  std::string trait() const override { return trait_; }
  void set_trait(std::string trait) { trait_ = std::move(trait); }
  double temperature() const { return temperature_; }
  const Bounds& bounds() const { return bounds_; }

  CandidateSet candidates(std::span<const double> state) const override;

  // Train-mode rollout; caches everything backward needs. One shared dropout
  // mask on the trunk output feeds every head.
  struct TrainForward {
    nn::ForwardCache trunk_cache;
    std::vector<nn::ForwardCache> head_caches;
    Vec trunk_out;       // post shared-dropout
    Vec trunk_out_mask;  // empty when no hidden dropout
    std::vector<Vec> raw;            // head outputs in (-1,1)
    std::vector<Vec> candidate_set;  // squashed into bounds
  };
  const std::vector<Vec>& forward_train(std::span<const double> state,
                                        const nn::DropoutConfig& dropout,
                                        Rng& rng, TrainForward& fwd) const;

  // Accumulates scale * dL/dparams into grad (flat layout: trunk then heads
  // in order) given dL/dcandidates.
  void backward(const TrainForward& fwd, const std::vector<Vec>& dcandidates,
                std::span<double> grad, double scale = 1.0) const;

  std::size_t param_count() const;
  // Mutable parameter segments in flat-gradient order.
  std::vector<std::span<double>> param_segments();

  nn::Mlp& trunk() { return trunk_; }
  const nn::Mlp& trunk() const { return trunk_; }
  std::vector<nn::Mlp>& heads() { return heads_; }
  const std::vector<nn::Mlp>& heads() const { return heads_; }

  void save(std::ostream& os) const override;
  void save_networks(std::ostream& os) const;
  static QuantizerModel load_body(std::istream& is, std::string trait, int K,
                                  double temperature, int action_dim,
                                  Bounds bounds);

 private:
  nn::Mlp trunk_;
  std::vector<nn::Mlp> heads_;
  int action_dim_ = 0;
  double temperature_ = 0.0;
  Bounds bounds_;
  std::string trait_ = "aquadem";
};

struct QuantizerTrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 64;
  long gradient_steps = 5000;
  nn::DropoutConfig dropout{0.1, 0.1};
  double temperature = 0.01;
  int K = 10;
  std::uint64_t seed = 1;
  int trunk_hidden = 64;
  int head_hidden = 64;
  nn::Activation hidden_activation = nn::Activation::kRelu;
};

struct QuantizerTrainResult {
  QuantizerModel model;
  std::vector<double> loss_trace;  // mean minibatch loss per gradient step
};

// Adam on the empirical soft-min loss over minibatches sampled with the
// config seed. Deterministic given (dataset, config).
QuantizerTrainResult train_quantizer(const DemoDataset& dataset,
                                     const QuantizerTrainConfig& cfg);

// Quantizer plus a logit head over the trunk defining mixture weights. The
// two objectives are optimized separately: the soft-min loss trains trunk and
// heads, the mixture fit trains the logit head only.
struct MdnModel {
  QuantizerModel base;
  nn::Mlp logit_head;

  Vec logits(std::span<const double> state) const;
  // Mixture probabilities softmax(logits(state)).
  Vec mixture_weights(std::span<const double> state) const;
  int sample_index(std::span<const double> state, Rng& rng) const;
  Vec sample_action(std::span<const double> state, Rng& rng) const;

  void save(std::ostream& os) const;
};

struct MdnLossValue {
  double psi_loss = 0.0;
  double logit_loss = 0.0;
};

// psi_loss is the soft-min loss; logit_loss is
//   -sum_k softmax(p)_k exp(-||c_k - a||^2 / T)
// with the candidates treated as constants.
MdnLossValue mdn_loss(const MdnModel& model, std::span<const double> state,
                      std::span<const double> action);

struct MdnTrainResult {
  MdnModel model;
  std::vector<double> psi_trace;
  std::vector<double> logit_trace;
};

MdnTrainResult train_mdn(const DemoDataset& dataset,
                         const QuantizerTrainConfig& cfg);

MdnModel load_mdn(std::istream& is);
MdnModel load_mdn_file(const std::filesystem::path& path);

// State-independent candidates from Lloyd's algorithm with k-means++ seeding
// over the demonstration actions.
class KmeansGenerator : public CandidateGenerator {
 public:
  KmeansGenerator(std::vector<Vec> centers, int state_dim, Bounds bounds);

  int k() const override { return static_cast<int>(centers_.size()); }
  int state_dim() const override { return -1; }  // serves any state
  int action_dim() const override {
    return static_cast<int>(centers_[0].size());
  }
  std::string trait() const override { return "kmeans"; }
  CandidateSet candidates(std::span<const double> state) const override;
  void save(std::ostream& os) const override;
  static KmeansGenerator load_body(std::istream& is, int K, int action_dim,
                                   Bounds bounds);

  const std::vector<Vec>& centers() const { return centers_; }

 private:
  std::vector<Vec> centers_;
  Bounds bounds_;
};

KmeansGenerator kmeans_candidates(const DemoDataset& dataset, int K,
                                  std::uint64_t seed);

// Appendix-D ablation: a randomly initialized quantizer served untrained.
QuantizerModel random_candidates(int state_dim, int action_dim, int K,
                                 const Bounds& bounds, std::uint64_t seed,
                                 int trunk_hidden = 64, int head_hidden = 64);

struct GmmIdentity {
  double lhs = 0.0;       // -log((1/K) sum_k exp(-x_k / T))
  double rhs = 0.0;       // aquadem_loss / T + log K
  double constant = 0.0;  // log K
};

// Numerical check of the mixture-of-Gaussians reading of the loss: with
// uniform mixture weights and variance T the two sides agree exactly.
GmmIdentity gmm_nll_identity_check(const QuantizerModel& model,
                                   std::span<const double> state,
                                   std::span<const double> action);

}  // namespace aquadem
