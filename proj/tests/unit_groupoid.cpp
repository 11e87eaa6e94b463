#include <cmath>

#include "doctest.h"
#include "lg/error.hpp"
#include "lg/groupoid.hpp"

using namespace lg;

namespace {

const AxiomPlan kQuick{42, 120, 60, 1e-10};

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Constraint;
}

GroupAction log_scaling() {
  GroupAction a;
  a.name = "R+*";
  a.dim = 1;
  a.on_units = [](const JVec& s, const JPoint& t) { return JPoint{0, {exp(s[0]) * t.x[0]}}; };
  a.on_arrows = a.on_units;
  return a;
}

}  // namespace

TEST_CASE("pair groupoid of R^3 satisfies the axioms") {
  auto G = pair_groupoid(euclidean(3));
  const auto rep = axiom_suite(G);
  CHECK(rep.passed);
  CHECK(rep.samples == 700);
  CHECK(rep.max_residual <= 1e-10);
}

TEST_CASE("pair groupoid structure maps") {
  auto G = pair_groupoid(euclidean(2));
  const Point g{0, {1, 2, 3, 4}};
  CHECK(G->source(g).x == Vec{3, 4});
  CHECK(G->target(g).x == Vec{1, 2});
  CHECK(G->inverse(g).x == Vec{3, 4, 1, 2});
  CHECK(G->mul(g, Point{0, {3, 4, 5, 6}}).x == Vec{1, 2, 5, 6});
  CHECK(kind_of([&] { G->mul(g, g); }) == ErrorKind::Composability);
}

TEST_CASE("corrupted multiplication is caught with a witness") {
  auto bad = corrupt_multiplication(pair_groupoid(euclidean(3)), 1e-6);
  const auto rep = axiom_suite(bad, kQuick);
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_residual >= 1e-7);
  CHECK(rep.witness.find("g=(") != std::string::npos);
}

TEST_CASE("pair groupoid of a manifold with corners needs an opt-in") {
  CHECK(kind_of([] { pair_groupoid(half_line()); }) == ErrorKind::Rank);
  auto G = pair_groupoid(half_line(), true);
  CHECK(axiom_suite(G, kQuick).passed);
  // An open subset of a half-space away from the boundary is fine.
  auto open = with_inside(*half_line(), [](const Point& p) { return p.x[0] > 0.5; });
  CHECK_NOTHROW(pair_groupoid(open));
}

TEST_CASE("space groupoid and group bundles") {
  CHECK(axiom_suite(space_groupoid(euclidean(2)), kQuick).passed);
  CHECK(axiom_suite(group_bundle(euclidean(2), 3), kQuick).passed);
  auto D = group_bundle(euclidean(1), 2, true);
  CHECK(axiom_suite(D, kQuick).passed);
  // (v, log s)(w, log t) = (v + s w, log st)
  const Point g{0, {0.5, 1.0, -1.0, std::log(2.0)}};
  const Point h{0, {0.5, 3.0, 4.0, std::log(3.0)}};
  const Point gh = D->mul(g, h);
  CHECK(gh.x[1] == doctest::Approx(7.0));
  CHECK(gh.x[2] == doctest::Approx(7.0));
  CHECK(gh.x[3] == doctest::Approx(std::log(6.0)));
}

TEST_CASE("dilation action groupoid") {
  auto T = dilation_action_groupoid();
  CHECK(axiom_suite(T).passed);
  const Point g{0, {2.0, std::log(4.0)}};
  CHECK(T->source(g).x[0] == 2.0);
  CHECK(T->target(g).x[0] == doctest::Approx(0.5));
  CHECK(structure_tameness(T, {3, 100}).passed);
}

TEST_CASE("semidirect product of the space [0,inf) by R+* is the dilation groupoid") {
  auto S = semidirect_product(space_groupoid(half_line()), log_scaling());
  CHECK(axiom_suite(S, kQuick).passed);
  GroupoidMorphism phi;
  phi.name = "(t, a) -> (e^-a t, -a)";
  phi.source = S;
  phi.target = dilation_action_groupoid();
  phi.on_arrows = [](const JPoint& g) { return JPoint{0, {exp(-g.x[1]) * g.x[0], -g.x[1]}}; };
  phi.on_units = [](const JPoint& x) { return x; };
  CHECK(morphism_suite(phi, kQuick).passed);
}

TEST_CASE("an action that is not by automorphisms is rejected") {
  GroupAction bad;
  bad.name = "t + a^2";
  bad.dim = 1;
  bad.on_units = [](const JVec& s, const JPoint& t) { return JPoint{0, {t.x[0] + s[0] * s[0]}}; };
  bad.on_arrows = bad.on_units;
  CHECK(kind_of([&] { semidirect_product(space_groupoid(half_line()), bad); }) == ErrorKind::Action);
}

TEST_CASE("product groupoid") {
  auto P = product_groupoid(pair_groupoid(euclidean(1)), dilation_action_groupoid());
  CHECK(axiom_suite(P, kQuick).passed);
  CHECK(P->units->describe() == "RxH");
  CHECK(P->algebroid_rank == 2);
}

TEST_CASE("pull-back along a projection") {
  auto M = make_manifold({ModelBlock{{Factor::half(), Factor::line()}}}, "M");
  auto f = block_projection(M, half_line(), {0});
  auto G = pullback_groupoid(f, dilation_action_groupoid());
  CHECK(axiom_suite(G, kQuick).passed);
  CHECK(structure_tameness(G, {5, 100}).passed);
  CHECK(G->algebroid_rank == 2);
  // (fiber_r, t, log s, fiber_d): d = (t, fiber_d), r = (e^-log s t, fiber_r)
  const Point g{0, {0.7, 2.0, std::log(2.0), -0.3}};
  CHECK(G->source(g).x == Vec{2.0, -0.3});
  CHECK(G->target(g).x[0] == doctest::Approx(1.0));
  CHECK(G->target(g).x[1] == 0.7);
}

TEST_CASE("pull-back along a non-tame map is refused") {
  auto M = make_manifold({ModelBlock{{Factor::half(), Factor::half()}}});
  SmoothMap sum;
  sum.domain = M;
  sum.codomain = half_line();
  sum.value = [](const JPoint& p) { return JPoint{0, {p.x[0] + p.x[1]}}; };
  sum.name = "x+y";
  CHECK(kind_of([&] { pullback_groupoid(sum, dilation_action_groupoid()); }) == ErrorKind::Tameness);
}

TEST_CASE("open reduction of a pair groupoid") {
  auto G = pair_groupoid(euclidean(2));
  auto in_disc = [](const Point& p) { return p.x[0] * p.x[0] + p.x[1] * p.x[1] < 1.0; };
  const auto red = reduction(G, {SubsetSpec::Kind::Open, in_disc, {}, "disc"});
  CHECK_FALSE(red.invariant);
  CHECK(axiom_suite(red.groupoid, kQuick).passed);
  CHECK(reduction_compatibility(G, red, in_disc, kQuick).passed);
}

TEST_CASE("closed reductions") {
  // A slice of a pair groupoid is again a pair groupoid.
  auto G = pair_groupoid(euclidean(2));
  SubsetSpec slice{SubsetSpec::Kind::Closed, {}, {{{0, 0.25}}}, "x=1/4"};
  const auto red = reduction(G, slice);
  CHECK(axiom_suite(red.groupoid, kQuick).passed);
  CHECK(reduction_compatibility(G, red, [](const Point& p) { return p.x[0] == 0.25; }, kQuick).passed);

  // {t = 0} is invariant under dilations, {t = 1} is not.
  auto T = dilation_action_groupoid();
  const auto zero = reduction(T, {SubsetSpec::Kind::Closed, {}, {{{0, 0.0}}}, "t=0"});
  CHECK(zero.invariant);
  CHECK(axiom_suite(zero.groupoid, kQuick).passed);
  CHECK(kind_of([&] { reduction(T, {SubsetSpec::Kind::Closed, {}, {{{0, 1.0}}}, "t=1"}); }) ==
        ErrorKind::Unsupported);
}

TEST_CASE("composable samples chain sources to targets") {
  auto G = product_groupoid(pair_groupoid(euclidean(1)), dilation_action_groupoid());
  for (std::size_t i = 0; i < 20; ++i) {
    const auto s = sample_composable(*G, 9, i, 4);
    CHECK(point_distance(G->source(s.arrows[3]), s.x) == 0.0);
    for (std::size_t k = 0; k + 1 < 4; ++k)
      CHECK(point_distance(G->source(s.arrows[k]), G->target(s.arrows[k + 1])) <= 1e-12);
  }
}

TEST_CASE("transported units") {
  auto G = pair_groupoid(euclidean(1));
  auto T = transport_units(
      G, euclidean(1), [](const JPoint& x) { return JPoint{0, {2.0 * x.x[0] + 1.0}}; },
      [](const JPoint& y) { return JPoint{0, {0.5 * (y.x[0] - 1.0)}}; });
  CHECK(axiom_suite(T, kQuick).passed);
  CHECK(T->source(Point{0, {0.0, 3.0}}).x[0] == 7.0);
}
