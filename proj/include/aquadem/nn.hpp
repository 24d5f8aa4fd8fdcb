#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "aquadem/rng.hpp"

namespace aquadem::nn {

using Vec = std::vector<double>;

enum class Activation { kLinear, kRelu, kTanh, kElu, kLayerNormTanh };

const char* activation_name(Activation a);
Activation activation_from_name(std::string_view name);

struct DropoutConfig {
  double input_rate = 0.0;   // applied to the network input, train mode only
  double hidden_rate = 0.0;  // applied to every hidden activation
};

// Per-layer records captured by a train-mode forward and consumed by
// backward. Inverted dropout stores the scale-or-zero mask directly.
struct ForwardCache {
  std::uint64_t shape_sig = 0;
  std::vector<Vec> inputs;  // layer input after dropout
  std::vector<Vec> masks;   // empty when no dropout on that input
  std::vector<Vec> pre;     // affine output z
  std::vector<Vec> post;    // activation output y
  std::vector<Vec> ln_xhat;
  std::vector<double> ln_inv_std;
};

// Fully-connected network with a flat parameter vector. Layer weights are
// row-major (out x in); kLayerNormTanh layers carry learned gain/bias for a
// layer normalization (epsilon 1e-5) applied before the tanh.
class Mlp {
 public:
  Mlp() = default;
  // He-uniform init for relu/elu layers, Glorot-uniform otherwise; biases
  // zero, layer-norm gain 1 / bias 0.
  Mlp(std::vector<int> dims, std::vector<Activation> acts, Rng& rng);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int layer_count() const { return static_cast<int>(acts_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Activation>& activations() const { return acts_; }

  // Eval mode: deterministic, no dropout.
  Vec forward(std::span<const double> input) const;

  // Train mode: applies inverted dropout and records everything backward
  // needs. Zero dropout rates make it the eval forward plus a cache.
  Vec forward_train(std::span<const double> input,
                    const DropoutConfig& dropout, Rng& rng,
                    ForwardCache& cache) const;

  // Accumulates scale * dL/dparams into `grad` (flat, param_count()) and, if
  // requested, writes dL/dinput. The cache must come from forward_train on a
  // network of this exact shape.
  void backward(const ForwardCache& cache, std::span<const double> output_grad,
                std::span<double> grad, Vec* input_grad,
                double scale = 1.0) const;

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::uint64_t shape_signature() const { return shape_sig_; }

  void save(std::ostream& os) const;
  static Mlp load(std::istream& is);

 private:
  struct LayerView {
    std::size_t w = 0, b = 0, ln_gain = 0, ln_bias = 0;
    int in = 0, out = 0;
    Activation act = Activation::kLinear;
  };

  void build_views();

  std::vector<int> dims_;
  std::vector<Activation> acts_;
  std::vector<LayerView> layers_;
  Vec params_;
  std::uint64_t shape_sig_ = 0;
};

struct AdamState {
  long step_count = 0;
  Vec first_moment, second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(std::size_t n, double lr);
};

// Standard bias-corrected Adam update, in place. Throws NumericalError with
// the offending flat index when a gradient is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

// Central finite differences against an analytic gradient. `loss` must be a
// deterministic function of the parameters; they are perturbed in place and
// restored.
FdReport finite_difference_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic_grad,
    double tolerance = 1e-4, double step = 1e-5);

}  // namespace aquadem::nn
