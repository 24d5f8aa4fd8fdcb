#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "aquadem/kernels.hpp"
#include "aquadem/mathutil.hpp"
#include "aquadem/rng.hpp"

using aquadem::Rng;
namespace kernels = aquadem::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Sizes straddling the vector width to exercise remainder handling.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 13, 16, 31, 33, 64, 67};

}  // namespace

TEST_CASE("scalar kernels match hand results") {
  const auto& k = kernels::scalar_backend();
  const double w[] = {2.0, 0.0, 1.0, -1.0};  // 2x2 row-major
  const double x[] = {3.0, 4.0};
  const double b[] = {1.0, 0.0};
  double y[2];
  k.affine(2, 2, w, x, b, y);
  CHECK(y[0] == doctest::Approx(7.0));
  CHECK(y[1] == doctest::Approx(-1.0));

  double dx[2];
  const double dy[] = {1.0, 1.0};
  k.matvec_t(2, 2, w, dy, dx);
  CHECK(dx[0] == doctest::Approx(3.0));
  CHECK(dx[1] == doctest::Approx(-1.0));

  CHECK(k.dot(2, x, x) == doctest::Approx(25.0));
  CHECK(k.squared_distance(2, x, b) == doctest::Approx(4.0 + 16.0));
  CHECK(k.max_element(2, x) == doctest::Approx(4.0));
  CHECK(k.sum(2, x) == doctest::Approx(7.0));
}

#if defined(__x86_64__) || defined(_M_X64)

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!kernels::avx2_supported()) return;
  const auto& s = kernels::scalar_backend();
  const auto& a = kernels::avx2_backend();
  Rng rng(1234);

  for (std::size_t n : kSizes) {
    auto x = random_vec(rng, n);
    auto y = random_vec(rng, n);

    CHECK(a.dot(n, x.data(), y.data()) ==
          doctest::Approx(s.dot(n, x.data(), y.data())).epsilon(1e-13));
    CHECK(a.squared_distance(n, x.data(), y.data()) ==
          doctest::Approx(s.squared_distance(n, x.data(), y.data()))
              .epsilon(1e-13));
    CHECK(a.sum(n, x.data()) ==
          doctest::Approx(s.sum(n, x.data())).epsilon(1e-13));
    CHECK(a.max_element(n, x.data()) == s.max_element(n, x.data()));

    auto ys = y;
    auto ya = y;
    s.axpy(n, 0.7, x.data(), ys.data());
    a.axpy(n, 0.7, x.data(), ya.data());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ya[i] == doctest::Approx(ys[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("avx2 matrix kernels agree with scalar reference") {
  if (!kernels::avx2_supported()) return;
  const auto& s = kernels::scalar_backend();
  const auto& a = kernels::avx2_backend();
  Rng rng(99);

  for (std::size_t rows : {1u, 3u, 8u, 17u}) {
    for (std::size_t cols : {1u, 2u, 5u, 16u, 33u}) {
      auto w = random_vec(rng, rows * cols);
      auto x = random_vec(rng, cols);
      auto b = random_vec(rng, rows);
      auto dy = random_vec(rng, rows);

      std::vector<double> y_s(rows), y_a(rows);
      s.affine(rows, cols, w.data(), x.data(), b.data(), y_s.data());
      a.affine(rows, cols, w.data(), x.data(), b.data(), y_a.data());
      for (std::size_t i = 0; i < rows; ++i) {
        CHECK(y_a[i] == doctest::Approx(y_s[i]).epsilon(1e-13));
      }

      std::vector<double> dx_s(cols), dx_a(cols);
      s.matvec_t(rows, cols, w.data(), dy.data(), dx_s.data());
      a.matvec_t(rows, cols, w.data(), dy.data(), dx_a.data());
      for (std::size_t i = 0; i < cols; ++i) {
        CHECK(dx_a[i] == doctest::Approx(dx_s[i]).epsilon(1e-13));
      }

      auto w_s = w;
      auto w_a = w;
      s.rank1_update(rows, cols, w_s.data(), dy.data(), x.data(), 0.3);
      a.rank1_update(rows, cols, w_a.data(), dy.data(), x.data(), 0.3);
      for (std::size_t i = 0; i < rows * cols; ++i) {
        CHECK(w_a[i] == doctest::Approx(w_s[i]).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("avx2 adam update agrees with scalar reference") {
  if (!kernels::avx2_supported()) return;
  const auto& s = kernels::scalar_backend();
  const auto& a = kernels::avx2_backend();
  Rng rng(7);

  for (std::size_t n : kSizes) {
    auto g = random_vec(rng, n);
    auto p0 = random_vec(rng, n);
    auto m0 = random_vec(rng, n, 0.0, 0.5);
    auto v0 = random_vec(rng, n, 0.0, 0.5);

    auto ps = p0, ms = m0, vs = v0;
    auto pa = p0, ma = m0, va = v0;
    s.adam_update(n, ps.data(), g.data(), ms.data(), vs.data(), 1e-3, 0.9,
                  0.999, 1e-8, 0.1, 0.001999);
    a.adam_update(n, pa.data(), g.data(), ma.data(), va.data(), 1e-3, 0.9,
                  0.999, 1e-8, 0.1, 0.001999);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(pa[i] == doctest::Approx(ps[i]).epsilon(1e-14));
      CHECK(ma[i] == doctest::Approx(ms[i]).epsilon(1e-14));
      CHECK(va[i] == doctest::Approx(vs[i]).epsilon(1e-14));
    }
  }
}

#endif  // x86-64

TEST_CASE("active backend is selectable") {
  kernels::set_backend("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
#if defined(__x86_64__) || defined(_M_X64)
  if (kernels::avx2_supported()) {
    kernels::set_backend("avx2");
    CHECK(std::string(kernels::active().name) == "avx2");
  }
#endif
  CHECK_THROWS(kernels::set_backend("sse9"));
}

TEST_CASE("logsumexp is stable for extreme inputs") {
  const std::vector<double> big = {1000.0, 1000.0};
  CHECK(aquadem::logsumexp(big) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  const std::vector<double> tiny = {-100000.0, -100000.0};
  CHECK(aquadem::logsumexp(tiny) ==
        doctest::Approx(-100000.0 + std::log(2.0)).epsilon(1e-12));

  auto p = aquadem::stable_softmax(std::vector<double>{1e8, 0.0, -1e8});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
}
