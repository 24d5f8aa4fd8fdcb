#include "aquadem/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "aquadem/errors.hpp"
#include "aquadem/kernels.hpp"
#include "aquadem/text_io.hpp"

namespace aquadem::nn {

namespace {

constexpr double kLayerNormEps = 1e-5;

std::uint64_t shape_hash(const std::vector<int>& dims,
                         const std::vector<Activation>& acts) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  for (int d : dims) mix(static_cast<std::uint64_t>(d));
  mix(0xabcdull);
  for (Activation a : acts) mix(static_cast<std::uint64_t>(a));
  return h;
}

bool uses_he_init(Activation a) {
  return a == Activation::kRelu || a == Activation::kElu;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kElu: return "elu";
    case Activation::kLayerNormTanh: return "layer_norm_tanh";
  }
  throw StructuralError("unknown activation tag");
}

Activation activation_from_name(std::string_view name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "elu") return Activation::kElu;
  if (name == "layer_norm_tanh") return Activation::kLayerNormTanh;
  throw InputError("unknown activation name: " + std::string(name));
}

Mlp::Mlp(std::vector<int> dims, std::vector<Activation> acts, Rng& rng)
    : dims_(std::move(dims)), acts_(std::move(acts)) {
  if (dims_.size() < 2) throw StructuralError("mlp needs at least two dims");
  if (acts_.size() != dims_.size() - 1) {
    throw StructuralError("mlp needs one activation per layer");
  }
  for (int d : dims_) {
    if (d <= 0) throw StructuralError("mlp layer dims must be positive");
  }
  build_views();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerView& lv = layers_[l];
    const double fan_in = lv.in;
    const double fan_out = lv.out;
    const double limit = uses_he_init(lv.act)
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    double* w = params_.data() + lv.w;
    for (int i = 0; i < lv.in * lv.out; ++i) w[i] = rng.uniform(-limit, limit);
    if (lv.act == Activation::kLayerNormTanh) {
      double* g = params_.data() + lv.ln_gain;
      for (int i = 0; i < lv.out; ++i) g[i] = 1.0;
    }
  }
}

void Mlp::build_views() {
  layers_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    LayerView lv;
    lv.in = dims_[l];
    lv.out = dims_[l + 1];
    lv.act = acts_[l];
    lv.w = offset;
    offset += static_cast<std::size_t>(lv.in) * lv.out;
    lv.b = offset;
    offset += lv.out;
    if (lv.act == Activation::kLayerNormTanh) {
      lv.ln_gain = offset;
      offset += lv.out;
      lv.ln_bias = offset;
      offset += lv.out;
    }
    layers_.push_back(lv);
  }
  params_.assign(offset, 0.0);
  shape_sig_ = shape_hash(dims_, acts_);
}

Vec Mlp::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw StructuralError("mlp forward: input dimension mismatch");
  }
  Vec cur(input.begin(), input.end());
  Vec next;
  for (const LayerView& lv : layers_) {
    next.assign(lv.out, 0.0);
    kernels::affine(lv.out, lv.in, params_.data() + lv.w, cur.data(),
                    params_.data() + lv.b, next.data());
    switch (lv.act) {
      case Activation::kLinear:
        break;
      case Activation::kRelu:
        for (double& v : next) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::kTanh:
        for (double& v : next) v = std::tanh(v);
        break;
      case Activation::kElu:
        for (double& v : next) v = v > 0.0 ? v : std::expm1(v);
        break;
      case Activation::kLayerNormTanh: {
        const double mean = kernels::sum(next.size(), next.data()) / lv.out;
        double var = 0.0;
        for (double v : next) var += (v - mean) * (v - mean);
        var /= lv.out;
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        const double* gain = params_.data() + lv.ln_gain;
        const double* bias = params_.data() + lv.ln_bias;
        for (int i = 0; i < lv.out; ++i) {
          const double xhat = (next[i] - mean) * inv_std;
          next[i] = std::tanh(gain[i] * xhat + bias[i]);
        }
        break;
      }
    }
    cur.swap(next);
  }
  return cur;
}

Vec Mlp::forward_train(std::span<const double> input,
                       const DropoutConfig& dropout, Rng& rng,
                       ForwardCache& cache) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw StructuralError("mlp forward: input dimension mismatch");
  }
  const std::size_t n_layers = layers_.size();
  cache.shape_sig = shape_sig_;
  cache.inputs.assign(n_layers, {});
  cache.masks.assign(n_layers, {});
  cache.pre.assign(n_layers, {});
  cache.post.assign(n_layers, {});
  cache.ln_xhat.assign(n_layers, {});
  cache.ln_inv_std.assign(n_layers, 0.0);

  Vec cur(input.begin(), input.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerView& lv = layers_[l];
    const double rate = l == 0 ? dropout.input_rate : dropout.hidden_rate;
    if (rate > 0.0) {
      const double keep = 1.0 - rate;
      Vec& mask = cache.masks[l];
      mask.resize(cur.size());
      for (std::size_t i = 0; i < cur.size(); ++i) {
        mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        cur[i] *= mask[i];
      }
    }
    cache.inputs[l] = cur;

    Vec z(lv.out, 0.0);
    kernels::affine(lv.out, lv.in, params_.data() + lv.w, cur.data(),
                    params_.data() + lv.b, z.data());
    cache.pre[l] = z;

    Vec y(lv.out);
    switch (lv.act) {
      case Activation::kLinear:
        y = z;
        break;
      case Activation::kRelu:
        for (int i = 0; i < lv.out; ++i) y[i] = z[i] > 0.0 ? z[i] : 0.0;
        break;
      case Activation::kTanh:
        for (int i = 0; i < lv.out; ++i) y[i] = std::tanh(z[i]);
        break;
      case Activation::kElu:
        for (int i = 0; i < lv.out; ++i)
          y[i] = z[i] > 0.0 ? z[i] : std::expm1(z[i]);
        break;
      case Activation::kLayerNormTanh: {
        const double mean = kernels::sum(z.size(), z.data()) / lv.out;
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= lv.out;
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.ln_inv_std[l] = inv_std;
        Vec& xhat = cache.ln_xhat[l];
        xhat.resize(lv.out);
        const double* gain = params_.data() + lv.ln_gain;
        const double* bias = params_.data() + lv.ln_bias;
        for (int i = 0; i < lv.out; ++i) {
          xhat[i] = (z[i] - mean) * inv_std;
          y[i] = std::tanh(gain[i] * xhat[i] + bias[i]);
        }
        break;
      }
    }
    cache.post[l] = y;
    cur.swap(y);
  }
  return cur;
}

void Mlp::backward(const ForwardCache& cache,
                   std::span<const double> output_grad, std::span<double> grad,
                   Vec* input_grad, double scale) const {
  if (cache.shape_sig != shape_sig_ || cache.inputs.size() != layers_.size()) {
    throw StructuralError("mlp backward: cache does not match this network");
  }
  if (static_cast<int>(output_grad.size()) != output_dim()) {
    throw StructuralError("mlp backward: output gradient dimension mismatch");
  }
  if (grad.size() != params_.size()) {
    throw StructuralError("mlp backward: gradient buffer size mismatch");
  }

  Vec dy(output_grad.begin(), output_grad.end());
  Vec dz, dprev;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerView& lv = layers_[l];
    const Vec& z = cache.pre[l];
    const Vec& y = cache.post[l];
    dz.assign(lv.out, 0.0);
    switch (lv.act) {
      case Activation::kLinear:
        dz = dy;
        break;
      case Activation::kRelu:
        for (int i = 0; i < lv.out; ++i) dz[i] = z[i] > 0.0 ? dy[i] : 0.0;
        break;
      case Activation::kTanh:
        for (int i = 0; i < lv.out; ++i) dz[i] = dy[i] * (1.0 - y[i] * y[i]);
        break;
      case Activation::kElu:
        for (int i = 0; i < lv.out; ++i)
          dz[i] = z[i] > 0.0 ? dy[i] : dy[i] * (y[i] + 1.0);
        break;
      case Activation::kLayerNormTanh: {
        const Vec& xhat = cache.ln_xhat[l];
        const double inv_std = cache.ln_inv_std[l];
        const double* gain = params_.data() + lv.ln_gain;
        double* dgain = grad.data() + lv.ln_gain;
        double* dbias = grad.data() + lv.ln_bias;
        Vec dxhat(lv.out);
        for (int i = 0; i < lv.out; ++i) {
          const double du = dy[i] * (1.0 - y[i] * y[i]);
          dgain[i] += scale * du * xhat[i];
          dbias[i] += scale * du;
          dxhat[i] = du * gain[i];
        }
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int i = 0; i < lv.out; ++i) {
          mean_dxhat += dxhat[i];
          mean_dxhat_xhat += dxhat[i] * xhat[i];
        }
        mean_dxhat /= lv.out;
        mean_dxhat_xhat /= lv.out;
        for (int i = 0; i < lv.out; ++i) {
          dz[i] = inv_std * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
        }
        break;
      }
    }

    double* db = grad.data() + lv.b;
    for (int i = 0; i < lv.out; ++i) db[i] += scale * dz[i];
    kernels::rank1_update(lv.out, lv.in, grad.data() + lv.w, dz.data(),
                          cache.inputs[l].data(), scale);

    const bool need_dprev = l > 0 || input_grad != nullptr;
    if (need_dprev) {
      dprev.assign(lv.in, 0.0);
      kernels::matvec_t(lv.out, lv.in, params_.data() + lv.w, dz.data(),
                        dprev.data());
      const Vec& mask = cache.masks[l];
      if (!mask.empty()) {
        for (int i = 0; i < lv.in; ++i) dprev[i] *= mask[i];
      }
      dy.swap(dprev);
    }
  }
  if (input_grad != nullptr) *input_grad = dy;
}

void Mlp::save(std::ostream& os) const {
  os << "mlp v1\n";
  os << "dims";
  for (int d : dims_) os << ' ' << d;
  os << "\nacts";
  for (Activation a : acts_) os << ' ' << activation_name(a);
  os << "\nparams " << params_.size() << '\n';
  for (std::size_t i = 0; i < params_.size(); ++i) {
    os << format_double(params_[i]);
    os << (((i + 1) % 8 == 0 || i + 1 == params_.size()) ? '\n' : ' ');
  }
}

Mlp Mlp::load(std::istream& is) {
  std::string word, version;
  is >> word >> version;
  if (word != "mlp" || version != "v1") {
    throw InputError("bad mlp checkpoint header");
  }
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  auto dim_tokens = split_whitespace(line);
  if (dim_tokens.empty() || dim_tokens[0] != "dims") {
    throw InputError("mlp checkpoint: expected dims line");
  }
  std::vector<int> dims;
  for (std::size_t i = 1; i < dim_tokens.size(); ++i) {
    dims.push_back(static_cast<int>(parse_long(dim_tokens[i])));
  }
  std::getline(is, line);
  auto act_tokens = split_whitespace(line);
  if (act_tokens.empty() || act_tokens[0] != "acts") {
    throw InputError("mlp checkpoint: expected acts line");
  }
  std::vector<Activation> acts;
  for (std::size_t i = 1; i < act_tokens.size(); ++i) {
    acts.push_back(activation_from_name(act_tokens[i]));
  }
  std::size_t n_params = 0;
  is >> word >> n_params;
  if (word != "params") throw InputError("mlp checkpoint: expected params");

  Mlp mlp;
  mlp.dims_ = std::move(dims);
  mlp.acts_ = std::move(acts);
  if (mlp.dims_.size() < 2 || mlp.acts_.size() != mlp.dims_.size() - 1) {
    throw InputError("mlp checkpoint: inconsistent shape");
  }
  mlp.build_views();
  if (mlp.params_.size() != n_params) {
    throw InputError("mlp checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    if (!(is >> mlp.params_[i])) {
      throw InputError("mlp checkpoint: truncated parameters");
    }
  }
  std::getline(is, line);  // consume trailing newline
  return mlp;
}

AdamState AdamState::for_params(std::size_t n, double lr) {
  AdamState st;
  st.first_moment.assign(n, 0.0);
  st.second_moment.assign(n, 0.0);
  st.learning_rate = lr;
  return st;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size()) {
    throw StructuralError("adam_step: shape mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("adam_step: non-finite gradient at parameter " +
                           std::to_string(i));
    }
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  kernels::adam_update(params.size(), params.data(), grads.data(),
                       state.first_moment.data(), state.second_moment.data(),
                       state.learning_rate, state.beta1, state.beta2,
                       state.epsilon, bc1, bc2);
}

FdReport finite_difference_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic_grad,
    double tolerance, double step) {
  if (params.size() != analytic_grad.size()) {
    throw StructuralError("finite_difference_check: gradient size mismatch");
  }
  FdReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double plus = loss(params);
    params[i] = saved - step;
    const double minus = loss(params);
    params[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double analytic = analytic_grad[i];
    // The 1e-6 floor turns the test absolute for near-zero coordinates,
    // where central differences bottom out at their ~1e-11 roundoff noise.
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace aquadem::nn
