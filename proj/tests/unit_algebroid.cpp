#include <cmath>

#include "doctest.h"
#include "lg/algebroid.hpp"
#include "lg/error.hpp"
#include "oracles/finite_difference.hpp"

using namespace lg;

namespace {

const AlgebroidPlan kPlan{42, 40, 1e-8};

double max_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

Vec vals(const JVec& v) { return values(std::span<const Jet>(v)); }

JVec take(const JVec& v, std::size_t from, std::size_t n) {
  return JVec(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + n));
}

// Right-invariant bracket of a Lie algebra from its multiplication, by
// nested finite differences: X^R(g) = d/de (e X) g.
Vec oracle_lie_bracket(const oracle::Field& mul2, std::size_t dim, const Vec& X, const Vec& Y) {
  auto right = [&](const Vec& Z) {
    return oracle::Field([&, Z](const Vec& g) {
      oracle::Field curve = [&](const Vec& e) {
        Vec a(dim);
        for (std::size_t i = 0; i < dim; ++i) a[i] = e[0] * Z[i];
        Vec ag = a;
        ag.insert(ag.end(), g.begin(), g.end());
        return mul2(ag);
      };
      return oracle::directional(curve, {0.0}, {1.0}, 1e-3);
    });
  };
  return oracle::bracket(right(X), right(Y), Vec(dim, 0.0), 1e-3);
}

}  // namespace

TEST_CASE("vector field bracket agrees with finite differences") {
  VectorField V = [](const JPoint& p) { return JVec{p.x[0] * p.x[1], sin(p.x[0])}; };
  VectorField W = [](const JPoint& p) { return JVec{cos(p.x[1]), p.x[0] * p.x[0]}; };
  oracle::Field Vo = [](const Vec& x) { return Vec{x[0] * x[1], std::sin(x[0])}; };
  oracle::Field Wo = [](const Vec& x) { return Vec{std::cos(x[1]), x[0] * x[0]}; };
  for (const Vec& x : {Vec{0.3, -0.7}, Vec{1.2, 0.4}, Vec{-1.5, 2.0}})
    CHECK(max_diff(vals(vector_field_bracket(V, W, lift(Point{0, x}))), oracle::bracket(Vo, Wo, x)) < 1e-8);
}

TEST_CASE("the algebroid of a pair groupoid is the tangent bundle") {
  auto M = euclidean(2);
  auto A = lie_algebroid_of(pair_groupoid(M));
  auto T = tangent_algebroid(M);
  CHECK(A->rank == 2);
  const FiberMap first_half = [](const JPoint&, const JVec& v) { return take(v, 0, v.size() / 2); };
  const auto rep = check_algebroid_morphism(A, T, first_half, {42, 60, 1e-10});
  CHECK(rep.passed);

  // Brackets of (V, 0) sections against the finite-difference oracle.
  Section X = [](const JPoint& p) { return JVec{sin(p.x[1]), p.x[0], Jet(0.0), Jet(0.0)}; };
  Section Y = [](const JPoint& p) { return JVec{p.x[0] * p.x[1], Jet(1.0), Jet(0.0), Jet(0.0)}; };
  oracle::Field Xo = [](const Vec& x) { return Vec{std::sin(x[1]), x[0]}; };
  oracle::Field Yo = [](const Vec& x) { return Vec{x[0] * x[1], 1.0}; };
  const Vec x{0.4, -1.1};
  const Vec got = vals(A->bracket(X, Y, lift(Point{0, x})));
  const Vec want = oracle::bracket(Xo, Yo, x);
  CHECK(max_diff(Vec(got.begin(), got.begin() + 2), want) < 1e-8);
  CHECK(std::fabs(got[2]) + std::fabs(got[3]) < 1e-14);
}

TEST_CASE("affine group bundle: [e_v, e_s] = e_v from the multiplication") {
  auto G = group_bundle(euclidean(1), 1, true);
  auto A = lie_algebroid_of(G);
  const auto frame = A->local_frame(Point{0, {0.3}});
  REQUIRE(frame.size() == 2);
  const Vec got = vals(A->bracket(frame[0], frame[1], lift(Point{0, {0.3}})));
  // Oracle: the group law of the fiber on (v, log s) pairs.
  oracle::Field mul2 = [](const Vec& ab) { return Vec{ab[0] + std::exp(ab[1]) * ab[2], ab[1] + ab[3]}; };
  const Vec want = oracle_lie_bracket(mul2, 2, {1.0, 0.0}, {0.0, 1.0});
  CHECK(max_diff({got[1], got[2]}, want) < 1e-6);
  CHECK(got[1] == doctest::Approx(1.0));
  // Anchor of a bundle of groups vanishes.
  CHECK(max_abs(A->anchor(lift(Point{0, {0.3}}), frame[1](lift(Point{0, {0.3}})))) == 0.0);
}

TEST_CASE("the dilation action groupoid integrates the b-tangent bundle") {
  auto A = lie_algebroid_of(dilation_action_groupoid());
  auto B = b_tangent_half_line();
  const FiberMap phi = [](const JPoint&, const JVec& v) { return JVec{-v[1]}; };
  CHECK(check_algebroid_morphism(A, B, phi, {42, 60, 1e-10}).passed);
  CHECK(A->anchor(lift(Point{0, {0.0}}), JVec{Jet(0.0), Jet(1.0)})[0].value() == 0.0);
}

TEST_CASE("algebroid axioms on the basic constructions") {
  auto S2R = make_manifold({ModelBlock{{Factor::sphere(2), Factor::line()}}}, "S2xR");
  CHECK(check_algebroid_axioms(tangent_algebroid(S2R), kPlan).passed);
  CHECK(check_algebroid_axioms(lie_algebroid_of(pair_groupoid(euclidean(2))), kPlan).passed);
  CHECK(check_algebroid_axioms(b_tangent_half_line(), kPlan).passed);
  CHECK(check_algebroid_axioms(adiabatic_algebroid(tangent_algebroid(euclidean(2))), kPlan).passed);
  CHECK(check_algebroid_axioms(external_product(tangent_algebroid(euclidean(1)), b_tangent_half_line()), kPlan)
            .passed);
  auto M = make_manifold({ModelBlock{{Factor::sphere(1), Factor::half()}}}, "S1xH");
  auto f = block_projection(M, half_line(), {1});
  CHECK(check_algebroid_axioms(pullback_algebroid(f, b_tangent_half_line()), kPlan).passed);
}

TEST_CASE("algebroid of a pull-back groupoid is the pull-back algebroid") {
  auto M = make_manifold({ModelBlock{{Factor::half(), Factor::line()}}}, "HxR");
  auto f = block_projection(M, half_line(), {0});
  auto G = pullback_groupoid(f, dilation_action_groupoid());
  auto A = lie_algebroid_of(G);
  auto P = pullback_algebroid(f, lie_algebroid_of(dilation_action_groupoid()));
  // Arrow vectors (fiber_r, t, s, fiber_d) -> (t, s, fiber_r).
  const FiberMap phi = [](const JPoint&, const JVec& v) { return JVec{v[1], v[2], v[0]}; };
  CHECK(check_algebroid_morphism(A, P, phi, {42, 60, 1e-10}).passed);
}

TEST_CASE("adiabatic anchor vanishes at t = 0") {
  auto A = adiabatic_algebroid(tangent_algebroid(euclidean(1)));
  const JPoint x0{0, {Jet(0.5), Jet(0.0)}};
  const JPoint x1{0, {Jet(0.5), Jet(0.25)}};
  const JVec e{Jet(1.0)};
  CHECK(max_abs(A->anchor(x0, e)) == 0.0);
  CHECK(A->anchor(x1, e)[0].value() == 0.25);
}

TEST_CASE("sections outside the frame span are rejected") {
  auto T = tangent_algebroid(make_manifold({ModelBlock{{Factor::sphere(1)}}}));
  const Point p{0, {1.0, 0.0}};
  Section radial = [](const JPoint& q) { return q.x; };
  try {
    frame_coefficients(T->local_frame(p), radial, lift(p));
    FAIL("expected a section error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Section);
  }
  Section tangential = [](const JPoint& q) { return JVec{-q.x[1], q.x[0]}; };
  CHECK_NOTHROW(frame_coefficients(T->local_frame(p), tangential, lift(p)));
}

TEST_CASE("a bracket that breaks the Leibniz rule is caught") {
  auto T = tangent_algebroid(euclidean(2));
  auto bad = std::make_shared<LieAlgebroid>(*T);
  bad->name = "2[.,.]";
  bad->bracket = [](const Section& X, const Section& Y, const JPoint& x) {
    return scaled(Jet(2.0), vector_field_bracket(X, Y, x));
  };
  const auto rep = check_algebroid_axioms(bad, kPlan);
  CHECK_FALSE(rep.passed);
  CHECK(rep.witness.find("x=(") != std::string::npos);
}

TEST_CASE("algebroid of a space is the zero bundle") {
  auto A = lie_algebroid_of(space_groupoid(euclidean(2)));
  CHECK(A->rank == 0);
  CHECK(A->local_frame(Point{0, {0.0, 0.0}}).empty());
}

TEST_CASE("a frame outside ker d_* is a rank error") {
  auto G = std::make_shared<LieGroupoid>(*pair_groupoid(euclidean(1)));
  G->algebroid_frame = [](const Point&) {
    return std::vector<VectorField>{[](const JPoint&) { return JVec{Jet(0.0), Jet(1.0)}; }};
  };
  try {
    lie_algebroid_of(G);
    FAIL("expected a rank error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Rank);
  }
}

TEST_CASE("rescaling") {
  auto T = tangent_algebroid(half_line());
  auto one = rescale(T, [](const JPoint&) { return Jet(1.0); }, "1T");
  Section X = [](const JPoint&) { return JVec{Jet(1.0)}; };
  Section Y = [](const JPoint& p) { return JVec{p.x[0]}; };
  const JPoint x = lift(Point{0, {0.7}});
  CHECK(one->bracket(X, Y, x)[0].value() == T->bracket(X, Y, x)[0].value());

  // In rT the sections d/dx and x d/dx act as x d/dx and x^2 d/dx.
  auto rT = rescale(T, [](const JPoint& p) { return p.x[0]; }, "rT");
  oracle::Field rX = [](const Vec& p) { return Vec{p[0]}; };
  oracle::Field rY = [](const Vec& p) { return Vec{p[0] * p[0]}; };
  for (double t : {0.3, 1.1, 1.9}) {
    const JPoint p = lift(Point{0, {t}});
    const double got = rT->anchor(p, rT->bracket(X, Y, p))[0].value();
    CHECK(std::fabs(got - oracle::bracket(rX, rY, {t})[0]) < 1e-5);
  }
  // [r d/dr, r d/dr] = 0 in bT.
  CHECK(b_tangent_half_line()->bracket(X, X, x)[0].value() == 0.0);
  CHECK(b_tangent_half_line()->anchor(lift(Point{0, {0.0}}), JVec{Jet(1.0)})[0].value() == 0.0);
  CHECK(b_tangent_half_line()->anchor(lift(Point{0, {2.0}}), JVec{Jet(1.0)})[0].value() == 2.0);

  try {
    rescale(T, [](const JPoint&) { return Jet(0.0); }, "0T");
    FAIL("expected a degeneracy error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degeneracy);
  }
}

TEST_CASE("direct product: factor sections commute") {
  auto P = external_product(tangent_algebroid(euclidean(1)), b_tangent_half_line());
  Section X = [](const JPoint& p) { return JVec{sin(p.x[0]), Jet(0.0)}; };
  Section Y = [](const JPoint& p) { return JVec{Jet(0.0), p.x[1] * p.x[1]}; };
  const JPoint x = lift(Point{0, {0.4, 1.3}});
  CHECK(max_abs(P->bracket(X, Y, x)) < 1e-14);
  // [f (x) X, g (x) Y] = fg (x) [X, Y] for constant-family sections.
  Section X1 = [](const JPoint&) { return JVec{Jet(1.0), Jet(0.0)}; };
  Section X2 = [](const JPoint& p) { return JVec{p.x[0], Jet(0.0)}; };
  Section gX1 = [](const JPoint& p) { return JVec{p.x[1], Jet(0.0)}; };
  Section hX2 = [](const JPoint& p) { return JVec{exp(p.x[1]) * p.x[0], Jet(0.0)}; };
  const double fg = 1.3 * std::exp(1.3);
  CHECK(P->bracket(gX1, hX2, x)[0].value() == doctest::Approx(fg * P->bracket(X1, X2, x)[0].value()));
  CHECK(check_algebroid_axioms(P, {42, 100, 1e-5}).passed);
}

TEST_CASE("thick pull-back: rank and vertical subalgebroid") {
  auto M = make_manifold({ModelBlock{{Factor::sphere(2), Factor::half()}}}, "S2xH");
  auto f = block_projection(M, half_line(), {1});
  auto P = pullback_algebroid(f, b_tangent_half_line());
  CHECK(P->rank == 1 + 3 - 1);
  const Point p{0, {0.0, 0.6, 0.8, 0.5}};
  const auto frame = P->local_frame(p);
  REQUIRE(frame.size() == 3);
  // Vertical sections (0, V) bracket to vertical sections.
  const JVec b = P->bracket(frame[1], frame[2], lift(p));
  CHECK(std::fabs(b[0].value()) < 1e-14);
  CHECK(check_isotropy_closure(P, {42, 100, 1e-8}).passed);
}

TEST_CASE("isotropy closure where the anchor degenerates") {
  CHECK(check_isotropy_closure(lie_algebroid_of(group_bundle(euclidean(1), 1, true)), {42, 100, 1e-8}).passed);
  CHECK(check_isotropy_closure(adiabatic_algebroid(tangent_algebroid(euclidean(2))), {42, 100, 1e-8}).passed);
}
