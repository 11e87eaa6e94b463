#include <cmath>
#include <vector>

#include "doctest.h"
#include "lg/error.hpp"
#include "lg/jet.hpp"
#include "lg/linalg.hpp"
#include "lg/parallel.hpp"
#include "lg/rng.hpp"
#include "lg/simd/kernels.hpp"

using namespace lg;

TEST_CASE("jet first derivative matches calculus") {
  auto f = [](const JVec& x) { return JVec{sin(x[0]) * exp(x[1]), log(x[0] + 2.0) / sqrt(x[1] + 3.0)}; };
  const Vec x0{0.3, -0.4};
  const auto J = jacobian(f, x0);
  CHECK(J[0][0] == doctest::Approx(std::cos(0.3) * std::exp(-0.4)).epsilon(1e-14));
  CHECK(J[0][1] == doctest::Approx(std::sin(0.3) * std::exp(-0.4)).epsilon(1e-14));
  CHECK(J[1][0] == doctest::Approx(1.0 / 2.3 / std::sqrt(2.6)).epsilon(1e-14));
  CHECK(J[1][1] == doctest::Approx(-0.5 * std::log(2.3) * std::pow(2.6, -1.5)).epsilon(1e-14));
}

TEST_CASE("nested directional derivatives give mixed partials") {
  // d/dx d/dy of x^2 y^3 = 6 x y^2
  const auto g = [](const JVec& v) { return JVec{v[0] * v[0] * v[1] * v[1] * v[1]}; };
  const JVec x{Jet(1.5), Jet(-0.7)};
  const auto dy = [&](const JVec& p) { return directional(g, p, JVec{Jet(0.0), Jet(1.0)}); };
  const JVec dxy = directional(dy, x, JVec{Jet(1.0), Jet(0.0)});
  CHECK(dxy[0].value() == doctest::Approx(6 * 1.5 * 0.49).epsilon(1e-14));
}

TEST_CASE("fourth-order nesting works and a fifth level is refused") {
  const auto f = [](const JVec& v) { return JVec{exp(v[0])}; };
  std::function<JVec(const JVec&)> d = f;
  for (int i = 0; i < 4; ++i) {
    auto inner = d;
    d = [inner](const JVec& v) { return directional(inner, v, JVec{Jet(1.0)}); };
  }
  CHECK(d(JVec{Jet(0.2)})[0].value() == doctest::Approx(std::exp(0.2)).epsilon(1e-13));
  auto too_deep = [d](const JVec& v) { return directional(d, v, JVec{Jet(1.0)}); };
  CHECK_THROWS_AS(too_deep(JVec{Jet(0.2)}), Error);
}

TEST_CASE("jet reciprocal and sqrt carry higher-order terms") {
  // second derivative of 1/sqrt(x) at 2: 3/4 x^{-5/2}
  const auto f = [](const JVec& v) { return JVec{1.0 / sqrt(v[0])}; };
  const auto df = [&](const JVec& v) { return directional(f, v, JVec{Jet(1.0)}); };
  const JVec d2 = directional(df, JVec{Jet(2.0)}, JVec{Jet(1.0)});
  CHECK(d2[0].value() == doctest::Approx(0.75 * std::pow(2.0, -2.5)).epsilon(1e-13));
}

TEST_CASE("jet square solve differentiates through the solution") {
  // x(s) solves [[2+s, 1],[1, 3]] x = [1, 2]; compare dx/ds with the
  // implicit derivative -A^{-1} A' x.
  const auto f = [](const JVec& s) {
    return solve_square({{2.0 + s[0], Jet(1.0)}, {Jet(1.0), Jet(3.0)}}, JVec{Jet(1.0), Jet(2.0)});
  };
  const JVec dx = directional(f, JVec{Jet(0.0)}, JVec{Jet(1.0)});
  // x = (0.2, 0.6); A' x = (0.2, 0); A^{-1} = [[3,-1],[-1,2]]/5
  CHECK(dx[0].value() == doctest::Approx(-3 * 0.2 / 5).epsilon(1e-14));
  CHECK(dx[1].value() == doctest::Approx(0.2 / 5).epsilon(1e-14));
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 5; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x != c.uniform());
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (const char* threads : {"1", "4"}) {
    setenv("LG_THREADS", threads, 1);
    try {
      parallel_for(64, [](std::size_t i) {
        if (i == 9 || i == 40) throw Error(ErrorKind::Sampling, std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(": 9") != std::string::npos);
    }
  }
  unsetenv("LG_THREADS");
}

TEST_CASE("simd kernels agree with the scalar reference") {
  Rng rng(5);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 16u, 37u, 1000u}) {
    Vec w(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = rng.uniform(0, 1);
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const double ref_dot = simd::scalar::weighted_dot3(w.data(), a.data(), b.data(), n);
    const double ref_sum = simd::scalar::weighted_sum(w.data(), a.data(), n);
    const double ref_max = simd::scalar::max_abs_diff(a.data(), b.data(), n);
    CHECK(simd::weighted_dot3(w, a, b) == doctest::Approx(ref_dot).epsilon(1e-13).scale(1.0));
    CHECK(simd::weighted_sum(w, a) == doctest::Approx(ref_sum).epsilon(1e-13).scale(1.0));
    CHECK(simd::max_abs_diff(a, b) == ref_max);
#if LG_HAVE_AVX2_KERNELS
    if (simd::isa_available(simd::Isa::Avx2)) {
      CHECK(simd::avx2::weighted_dot3(w.data(), a.data(), b.data(), n) ==
            doctest::Approx(ref_dot).epsilon(1e-13).scale(1.0));
      CHECK(simd::avx2::weighted_sum(w.data(), a.data(), n) == doctest::Approx(ref_sum).epsilon(1e-13).scale(1.0));
      CHECK(simd::avx2::max_abs_diff(a.data(), b.data(), n) == ref_max);
    }
#endif
  }
}

TEST_CASE("max_abs_diff propagates NaN on every path") {
  Vec a(11, 0.0), b(11, 0.0);
  a[2] = NAN;
  CHECK(std::isnan(simd::scalar::max_abs_diff(a.data(), b.data(), a.size())));
  CHECK(std::isnan(simd::max_abs_diff(a, b)));
#if LG_HAVE_AVX2_KERNELS
  if (simd::isa_available(simd::Isa::Avx2)) CHECK(std::isnan(simd::avx2::max_abs_diff(a.data(), b.data(), a.size())));
#endif
}
