#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lg/convolution.hpp"
#include "lg/error.hpp"

using namespace lg;

namespace {

double normal_pdf(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var); }

// Heat-type kernel on pair(R): arrow (r, d).
Kernel heat(double var, const std::string& name) {
  return Kernel{name, [var](const Point& g) { return normal_pdf(g.x[0] - g.x[1], var); }};
}

// Composite Simpson on [-a, a] with m (even) panels, as an oracle independent
// of Gauss-Legendre.
template <class F>
double simpson(F f, double a, int m) {
  const double h = 2 * a / m;
  double s = f(-a) + f(a);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(-a + i * h);
  return s * h / 3;
}

ConvolutionPlan arrows_in(double box, std::size_t count) {
  ConvolutionPlan p;
  p.count = count;
  p.arrows = [box](Rng& rng, std::size_t) { return Point{0, {rng.uniform(-box, box), rng.uniform(-box, box)}}; };
  return p;
}

double composition_error(int order, double v1, double v2) {
  const auto P = pair_groupoid(euclidean(1));
  const auto q = fiber_quadrature(P, order, 8.0);
  const Kernel c = convolve(heat(v1, "a"), heat(v2, "b"), q);
  double err = 0.0;
  for (double x : {-2.0, -0.7, 0.0, 0.4, 1.9})
    for (double z : {-1.5, 0.0, 0.3, 2.0}) err = std::max(err, std::fabs(c.eval(Point{0, {x, z}}) - normal_pdf(x - z, v1 + v2)));
  return err;
}

}  // namespace

TEST_CASE("Gauss-Legendre rule") {
  const auto r2 = gauss_legendre(2);
  CHECK(std::fabs(r2.nodes[1] - 1 / std::sqrt(3.0)) < 1e-15);
  CHECK(std::fabs(r2.weights[0] - 1.0) < 1e-15);
  for (int n : {1, 5, 16, 64}) {
    const auto r = gauss_legendre(n);
    double wsum = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      wsum += w;
    }
    CHECK(std::fabs(wsum - 2.0) < 1e-13);
    // Exact for degree 2n - 1: int x^{2m} = 2 / (2m + 1).
    for (int m = 0; 2 * m <= 2 * n - 1; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * m);
      CHECK(std::fabs(s - 2.0 / (2 * m + 1)) < 1e-13);
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), Error);
}

TEST_CASE("quadrature weights and truncated volume") {
  const auto P = pair_groupoid(euclidean(2));
  const auto q = fiber_quadrature(P, 12, 3.0);
  CHECK(q.coords.size() == 144);
  for (double w : q.base_weights) CHECK(w > 0.0);
  CHECK(std::fabs(q.volume(Point{0, {0.2, -1.0}}) - 36.0) < 1e-12);
  // R+* in log coordinates: the fiber of the dilation groupoid truncates to [-R, R].
  const auto T = dilation_action_groupoid();
  CHECK(std::fabs(fiber_quadrature(T, 8, 5.0).volume(Point{0, {0.7}}) - 10.0) < 1e-12);
  // Semidirect products carry no chart.
  CHECK_THROWS_AS(fiber_quadrature(std::make_shared<LieGroupoid>(), 4, 1.0), Error);
}

TEST_CASE("pair(R): Gaussian kernels compose to the closed form") {
  CHECK(composition_error(64, 0.5, 0.8) < 1e-6);
  // The composition is the integral kernel product: compare with Simpson.
  const auto P = pair_groupoid(euclidean(1));
  const auto q = fiber_quadrature(P, 64, 8.0);
  const Kernel a{"a", [](const Point& g) { return std::exp(-g.x[0] * g.x[0] - (g.x[0] - g.x[1]) * (g.x[0] - g.x[1])); }};
  const Kernel b{"b", [](const Point& g) { return std::cos(g.x[0]) * normal_pdf(g.x[0] - 0.5 * g.x[1], 0.7); }};
  const Kernel c = convolve(a, b, q);
  for (double x : {-1.0, 0.3})
    for (double z : {-0.5, 1.2}) {
      const double ref = simpson([&](double y) { return a.eval(Point{0, {x, y}}) * b.eval(Point{0, {y, z}}); }, 8.0, 4000);
      CHECK(std::fabs(c.eval(Point{0, {x, z}}) - ref) < 1e-9);
    }
}

TEST_CASE("composition error drops at least 4x per doubling of the order") {
  const double e8 = composition_error(8, 0.5, 0.8), e16 = composition_error(16, 0.5, 0.8),
               e32 = composition_error(32, 0.5, 0.8);
  MESSAGE("errors at order 8/16/32: " << e8 << " " << e16 << " " << e32);
  CHECK(e16 * 4 <= e8);
  CHECK(e32 * 4 <= e16);
}

TEST_CASE("associativity on pair(R) against a brute-force triple integral") {
  const auto P = pair_groupoid(euclidean(1));
  const auto q = fiber_quadrature(P, 64, 8.0);
  const Kernel a = heat(0.4, "a"), b = heat(0.9, "b");
  const Kernel c{"c", [](const Point& g) { return normal_pdf(g.x[0] - g.x[1], 0.6) * (1 + 0.2 * std::sin(g.x[1])); }};
  const auto rep = associativity_check(a, b, c, q, arrows_in(2.0, 30));
  CHECK(rep.passed);
  CHECK(rep.max_residual < 1e-6);

  const Kernel left = convolve(convolve(a, b, q), c, q);
  const double x = 0.4, z = -0.9;
  const double brute = simpson(
      [&](double y) {
        return simpson([&](double w) { return a.eval(Point{0, {x, y}}) * b.eval(Point{0, {y, w}}) * c.eval(Point{0, {w, z}}); },
                       8.0, 800);
      },
      8.0, 800);
  CHECK(std::fabs(left.eval(Point{0, {x, z}}) - brute) < 1e-6);
}

TEST_CASE("space groupoid: convolution is the pointwise product") {
  const auto S = space_groupoid(euclidean(2));
  const auto q = fiber_quadrature(S, 32, 4.0);
  CHECK(q.coords.size() == 1);
  const Kernel f{"f", [](const Point& x) { return std::sin(x.x[0]) + x.x[1]; }};
  const Kernel g{"g", [](const Point& x) { return std::exp(x.x[0] * x.x[1]); }};
  const Kernel fg = convolve(f, g, q);
  for (const Point p : {Point{0, {0.3, -1.2}}, Point{0, {2.0, 0.5}}}) CHECK(fg.eval(p) == f.eval(p) * g.eval(p));
  // Dyadic values keep every product exact, so the residual is exactly zero.
  auto dyadic = [](double a, double b) {
    return Kernel{"d", [a, b](const Point& x) { return std::round(8 * (a * x.x[0] + b * x.x[1])) / 8; }};
  };
  const Kernel d1 = dyadic(1.0, 0.5), d2 = dyadic(-0.5, 2.0), d3 = dyadic(0.25, 1.0);
  const auto rep = associativity_check(d1, d2, d3, q, ConvolutionPlan{42, 40, 0.0, {}});
  CHECK(rep.passed);
  CHECK(rep.max_residual == 0.0);
}

TEST_CASE("bundle R^2: fiberwise convolution of Gaussians") {
  const auto B = group_bundle(euclidean(1), 2);
  const auto q = fiber_quadrature(B, 80, 6.0);
  // Anisotropic Gaussians whose variances depend on the base point.
  auto gaussian = [](double v0, double v1) {
    return Kernel{"N", [v0, v1](const Point& g) {
                    const double s = 1 + 0.1 * g.x[0] * g.x[0];
                    return normal_pdf(g.x[1], v0 * s) * normal_pdf(g.x[2], v1);
                  }};
  };
  const Kernel c = convolve(gaussian(0.3, 0.5), gaussian(0.6, 0.2), q);
  for (const Point g : {Point{0, {0.0, 0.1, -0.4}}, Point{0, {1.3, -1.0, 0.8}}}) {
    const double s = 1 + 0.1 * g.x[0] * g.x[0];
    CHECK(std::fabs(c.eval(g) - normal_pdf(g.x[1], 0.9 * s) * normal_pdf(g.x[2], 0.7)) < 1e-9);
  }
  // Associativity on the line bundle, where the nested sums stay cheap.
  auto line = [](double v) {
    return Kernel{"N", [v](const Point& g) { return normal_pdf(g.x[1], v * (1 + 0.1 * g.x[0] * g.x[0])); }};
  };
  ConvolutionPlan p;
  p.count = 8;
  const auto q1 = fiber_quadrature(group_bundle(euclidean(1), 1), 64, 8.0);
  const auto rep = associativity_check(line(0.3), line(0.6), line(0.4), q1, p);
  CHECK(rep.passed);
  CHECK(rep.max_residual < 1e-8);
}

TEST_CASE("fiber measures are right invariant") {
  ConvolutionPlan p;
  p.count = 20;
  p.tol = 1e-8;
  CHECK(right_invariance_check(fiber_quadrature(pair_groupoid(euclidean(2)), 40, 8.0), p).passed);
  CHECK(right_invariance_check(fiber_quadrature(group_bundle(euclidean(1), 2), 40, 8.0), p).passed);
  // dv d(log s) on R^k x| R+*.
  CHECK(right_invariance_check(fiber_quadrature(group_bundle(euclidean(1), 1, true), 64, 9.0), p).passed);
  CHECK(right_invariance_check(fiber_quadrature(dilation_action_groupoid(), 64, 9.0), p).passed);
  // The edge model over S: pullback of R x| R+* along S^1 x R -> R.
  {
    auto L = euclidean(1, "R");
    auto S = make_manifold({ModelBlock{{Factor::sphere(1), Factor::line()}}}, "S1xR");
    auto model = pullback_groupoid(block_projection(S, L, {1}, "pi_S"), group_bundle(L, 1, true), true);
    ConvolutionPlan few = p;
    few.count = 6;
    CHECK(right_invariance_check(fiber_quadrature(model, 48, 9.0), few).passed);
  }
  // ds instead of ds/s is not invariant under dilations.
  auto q = fiber_quadrature(group_bundle(euclidean(1), 1, true), 64, 9.0);
  q.chart.density = [](const Point&, const Vec& c) { return std::exp(c[1]); };
  CHECK_FALSE(right_invariance_check(q, p).passed);
}

TEST_CASE("compact kernels: truncation and declared support") {
  const auto P = pair_groupoid(euclidean(1));
  const auto q = fiber_quadrature(P, 32, 3.0);
  auto bump = [](double rad) {
    Kernel k{"bump", [rad](const Point& g) {
               const double u = g.x[0] / rad;
               return std::fabs(u) < 1 ? std::exp(-1 / (1 - u * u)) : 0.0;
             }};
    k.compact = true;
    k.support_radius = rad;
    return k;
  };
  CHECK_NOTHROW(convolve(heat(0.5, "h"), bump(2.5), q));
  try {
    convolve(heat(0.5, "h"), bump(4.0), q);
    FAIL("expected a truncation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Truncation);
  }
  CHECK(check_kernel_support(bump(2.0), q).passed);
  Kernel lying = bump(2.0);
  lying.support_radius = 1.0;
  CHECK_FALSE(check_kernel_support(lying, q).passed);
  // Compact psi is integrated without the cutoff.
  CHECK(cutoff_budget(heat(0.5, "h"), bump(2.0), q, Point{0, {0.0, 0.0}}) == 0.0);
  CHECK(cutoff_budget(heat(0.5, "h"), heat(0.5, "h"), q, Point{0, {0.0, 2.5}}) > 0.0);
}

TEST_CASE("edge operator demo") {
  EdgeDemoPlan plan;
  plan.count = 6;
  const auto rep = edge_operator_demo(2, 1, plan);
  CHECK_MESSAGE(rep.passed, rep.witness);
  CHECK(rep.max_residual < 1e-10);
  plan.order = 15;
  CHECK_THROWS_AS(edge_operator_demo(2, 1, plan), Error);
}
