#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "aquadem/errors.hpp"
#include "aquadem/nn.hpp"
#include "aquadem/rng.hpp"

using namespace aquadem;
using nn::Activation;
using nn::Mlp;
using nn::Vec;

namespace {

// Mean squared error of a network output against a fixed target, with
// analytic gradients; the workhorse for the finite-difference checks here.
struct NetLoss {
  Mlp* net;
  Vec input;
  Vec target;

  double value() const {
    Vec out = net->forward(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = out[i] - target[i];
      acc += d * d;
    }
    return acc;
  }

  Vec gradient() const {
    nn::ForwardCache cache;
    Rng rng(0);
    Vec out = net->forward_train(input, {}, rng, cache);
    Vec dout(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      dout[i] = 2.0 * (out[i] - target[i]);
    }
    Vec grad(net->param_count(), 0.0);
    net->backward(cache, dout, grad, nullptr);
    return grad;
  }
};

}  // namespace

TEST_CASE("single linear layer is the affine map") {
  Rng rng(1);
  Mlp net({1, 1}, {Activation::kLinear}, rng);
  net.params()[0] = 2.0;  // weight
  net.params()[1] = 1.0;  // bias
  Vec out = net.forward(Vec{3.0});
  CHECK(out[0] == doctest::Approx(7.0));
}

TEST_CASE("relu zeroes negative pre-activations") {
  Rng rng(1);
  Mlp net({2, 2}, {Activation::kRelu}, rng);
  auto p = net.params();
  p[0] = -1.0; p[1] = 0.0; p[2] = 0.0; p[3] = -1.0;  // W = -I
  p[4] = -0.5; p[5] = -0.5;                          // b
  Vec out = net.forward(Vec{1.0, 2.0});
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("train-mode forward is deterministic under a fixed seed") {
  Rng init(3);
  Mlp net({3, 8, 2}, {Activation::kRelu, Activation::kLinear}, init);
  nn::DropoutConfig drop{0.3, 0.3};
  Vec input{0.2, -0.4, 0.9};

  nn::ForwardCache c1, c2;
  Rng r1(77), r2(77);
  Vec o1 = net.forward_train(input, drop, r1, c1);
  Vec o2 = net.forward_train(input, drop, r2, c2);
  CHECK(o1 == o2);
}

TEST_CASE("forward rejects dimension mismatch") {
  Rng rng(1);
  Mlp net({3, 2}, {Activation::kLinear}, rng);
  CHECK_THROWS_AS(net.forward(Vec{1.0, 2.0}), StructuralError);
}

TEST_CASE("backward rejects a cache from another network") {
  Rng rng(1);
  Mlp a({2, 4, 1}, {Activation::kTanh, Activation::kLinear}, rng);
  Mlp b({2, 5, 1}, {Activation::kTanh, Activation::kLinear}, rng);
  nn::ForwardCache cache;
  Rng fwd(0);
  a.forward_train(Vec{0.1, 0.2}, {}, fwd, cache);
  Vec grad(b.param_count(), 0.0);
  CHECK_THROWS_AS(b.backward(cache, Vec{1.0}, grad, nullptr), StructuralError);
}

TEST_CASE("chain rule on f(w) = w * x") {
  Rng rng(1);
  Mlp net({1, 1}, {Activation::kLinear}, rng);
  net.params()[0] = 0.5;
  net.params()[1] = 0.0;
  nn::ForwardCache cache;
  Rng fwd(0);
  net.forward_train(Vec{3.0}, {}, fwd, cache);
  Vec grad(net.param_count(), 0.0);
  net.backward(cache, Vec{1.0}, grad, nullptr);
  CHECK(grad[0] == doctest::Approx(3.0));  // dL/dw = x
  CHECK(grad[1] == doctest::Approx(1.0));  // dL/db
}

TEST_CASE("zero output gradient gives all-zero gradients") {
  Rng rng(5);
  Mlp net({2, 6, 2}, {Activation::kElu, Activation::kLinear}, rng);
  nn::ForwardCache cache;
  Rng fwd(0);
  net.forward_train(Vec{0.3, -0.1}, {}, fwd, cache);
  Vec grad(net.param_count(), 0.0);
  net.backward(cache, Vec{0.0, 0.0}, grad, nullptr);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("analytic gradients match central differences across activations") {
  const std::vector<std::vector<Activation>> stacks = {
      {Activation::kTanh, Activation::kLinear},
      {Activation::kElu, Activation::kTanh, Activation::kLinear},
      {Activation::kLayerNormTanh, Activation::kElu, Activation::kLinear},
  };
  int draw = 0;
  for (const auto& acts : stacks) {
    std::vector<int> dims(acts.size() + 1, 6);
    dims.front() = 3;
    dims.back() = 2;
    for (int rep = 0; rep < 7; ++rep) {
      Rng rng(100 + draw++);
      Mlp net(dims, acts, rng);
      NetLoss loss{&net, {rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1)},
                   {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
      Vec grad = loss.gradient();
      auto report = nn::finite_difference_check(
          [&](std::span<const double>) { return loss.value(); }, net.params(),
          grad, 1e-4);
      CHECK_MESSAGE(report.pass, "max rel err ", report.max_rel_error,
                    " at index ", report.worst_index);
    }
  }
}

TEST_CASE("relu gradients match central differences away from kinks") {
  // Redraw until no pre-activation sits within reach of the probe step.
  for (int rep = 0; rep < 5; ++rep) {
    for (int attempt = 0;; ++attempt) {
      REQUIRE(attempt < 50);
      Rng rng(4000 + 97 * rep + attempt);
      Mlp net({3, 8, 2}, {Activation::kRelu, Activation::kLinear}, rng);
      Vec input{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      nn::ForwardCache cache;
      Rng fwd(0);
      net.forward_train(input, {}, fwd, cache);
      bool near_kink = false;
      for (double z : cache.pre[0]) near_kink |= std::abs(z) < 1e-3;
      if (near_kink) continue;

      NetLoss loss{&net, input, {0.3, -0.4}};
      Vec grad = loss.gradient();
      auto report = nn::finite_difference_check(
          [&](std::span<const double>) { return loss.value(); }, net.params(),
          grad, 1e-4);
      CHECK_MESSAGE(report.pass, "max rel err ", report.max_rel_error);
      break;
    }
  }
}

TEST_CASE("quadratic loss passes the fd check at 1e-8") {
  Vec params{1.3, -0.7, 0.2};
  auto loss = [](std::span<const double> p) {
    double acc = 0.0;
    for (double v : p) acc += (v - 0.5) * (v - 0.5);
    return acc;
  };
  Vec grad(3);
  for (int i = 0; i < 3; ++i) grad[i] = 2.0 * (params[i] - 0.5);
  auto report = nn::finite_difference_check(loss, params, grad, 1e-8);
  CHECK_MESSAGE(report.pass, "max rel err ", report.max_rel_error);
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  Vec params{0.0};
  Vec grads{0.37};
  auto st = nn::AdamState::for_params(1, 0.1);
  nn::adam_step(params, grads, st);
  CHECK(st.step_count == 1);
  CHECK(params[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Vec params{0.8};
  auto st = nn::AdamState::for_params(1, 0.1);
  nn::adam_step(params, Vec{0.0}, st);
  CHECK(params[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(st.first_moment[0] == 0.0);
  CHECK(st.second_moment[0] == 0.0);

  // From a warm state the moments only decay.
  st.first_moment[0] = 0.2;
  st.second_moment[0] = 0.4;
  nn::adam_step(params, Vec{0.0}, st);
  CHECK(st.first_moment[0] == doctest::Approx(0.18));
  CHECK(st.second_moment[0] == doctest::Approx(0.3996));
}

TEST_CASE("adam rejects non-finite gradients") {
  Vec params{0.0, 0.0};
  auto st = nn::AdamState::for_params(2, 0.1);
  CHECK_THROWS_AS(nn::adam_step(params, Vec{0.0, std::nan("")}, st),
                  NumericalError);
}

TEST_CASE("adam matches an independent oracle loop on (w-2)^2") {
  // Oracle: textbook Adam recursion evaluated with plain scalar arithmetic.
  double w_oracle = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Vec params{0.0};
  auto st = nn::AdamState::for_params(1, lr);
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * (w_oracle - 2.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    w_oracle -= lr * mhat / (std::sqrt(vhat) + eps);

    nn::adam_step(params, Vec{2.0 * (params[0] - 2.0)}, st);
    CHECK(params[0] == doctest::Approx(w_oracle).epsilon(1e-10));
  }
  CHECK(std::abs(w_oracle - 2.0) < 0.05);
  CHECK(std::abs(params[0] - 2.0) < 0.05);
}

TEST_CASE("inverted dropout preserves expected activations within 2 percent") {
  Rng init(11);
  Mlp net({4, 5}, {Activation::kLinear}, init);
  // Positive weights and inputs keep eval outputs well away from zero.
  for (auto& p : net.params()) p = std::abs(p) + 0.1;
  Vec input{0.8, 1.1, 0.6, 0.9};
  Vec eval_out = net.forward(input);

  nn::DropoutConfig drop{0.4, 0.0};
  Rng rng(123);
  Vec mean(eval_out.size(), 0.0);
  const int n = 20000;
  nn::ForwardCache cache;
  for (int i = 0; i < n; ++i) {
    Vec out = net.forward_train(input, drop, rng, cache);
    for (std::size_t j = 0; j < out.size(); ++j) mean[j] += out[j];
  }
  for (std::size_t j = 0; j < mean.size(); ++j) {
    mean[j] /= n;
    CHECK(std::abs(mean[j] - eval_out[j]) / std::abs(eval_out[j]) < 0.02);
  }
}

TEST_CASE("eval forward ignores dropout and rng") {
  Rng init(42);
  Mlp net({2, 8, 1}, {Activation::kTanh, Activation::kLinear}, init);
  Vec a = net.forward(Vec{0.5, -0.5});
  Vec b = net.forward(Vec{0.5, -0.5});
  CHECK(a == b);
}

TEST_CASE("checkpoint round-trip is byte identical") {
  Rng rng(2024);
  Mlp net({3, 7, 7, 2},
          {Activation::kLayerNormTanh, Activation::kRelu, Activation::kLinear},
          rng);
  std::ostringstream first;
  net.save(first);
  std::istringstream in(first.str());
  Mlp loaded = Mlp::load(in);
  std::ostringstream second;
  loaded.save(second);
  CHECK(first.str() == second.str());
  CHECK(loaded.forward(Vec{0.1, 0.2, 0.3}) == net.forward(Vec{0.1, 0.2, 0.3}));
}

TEST_CASE("checkpoint load rejects malformed input") {
  std::istringstream bad("mlp v9\ndims 2 2\n");
  CHECK_THROWS_AS(Mlp::load(bad), InputError);
}
