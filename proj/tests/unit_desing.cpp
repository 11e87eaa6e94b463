#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lg/desing.hpp"
#include "lg/error.hpp"

using namespace lg;

namespace {

const AxiomPlan kQuick{42, 120, 60, 1e-10};

// pair(R^{n+k}) with L = {x_1 = ... = x_n = 0}.
struct Setup {
  GroupoidPtr G;
  TameSubmanifold L;
};

Setup linear(int n, int k) {
  Setup s;
  s.G = pair_groupoid(euclidean(n + k, "R" + std::to_string(n + k)));
  SliceSpec spec;
  for (int i = 0; i < n; ++i) spec.normal_factors.push_back(i);
  s.L = tame_submanifold(s.G, spec);
  return s;
}

GroupoidPtr open_interval(double a, double b, bool pair) {
  auto I = with_inside(*euclidean(1), [a, b](const Point& p) { return p.x[0] > a && p.x[0] < b; },
                       "(" + format_double(a) + "," + format_double(b) + ")");
  return pair ? pair_groupoid(I) : space_groupoid(I);
}

GlueData interval_glue(bool pair) {
  GlueData g;
  g.name = pair ? "pair_glue" : "space_glue";
  g.G1 = open_interval(0.0, 2.0, pair);
  g.G2 = open_interval(-1.0, 1.0, pair);
  g.units = with_inside(*euclidean(1), [](const Point& p) { return p.x[0] > -1.0 && p.x[0] < 2.0; }, "(-1,2)");
  g.in_M1 = [](const Point& p) { return p.x[0] > 0.0 && p.x[0] < 2.0; };
  g.in_M2 = [](const Point& p) { return p.x[0] > -1.0 && p.x[0] < 1.0; };
  g.to1 = g.from1 = g.to2 = g.from2 = [](const JPoint& x) { return x; };
  g.in_U1 = g.in_U2 = [](const Point& p) { return p.x[0] > 0.0 && p.x[0] < 1.0; };
  g.phi.name = "id";
  g.phi.source = g.G1;
  g.phi.target = g.G2;
  g.phi.on_arrows = g.phi.on_units = g.to1;
  g.phi_inverse = g.to1;
  return g;
}

}  // namespace

TEST_CASE("synthesized tube of a linear slice") {
  const auto s = linear(2, 1);
  CHECK(s.L.locus->dim() == 1);
  const Point z{0, {0.3, -0.4, 1.5}};
  CHECK(s.L.tube(z).x == Vec{1.5});
  CHECK(std::fabs(s.L.radius(lift(z)).value() - 0.5) < 1e-15);
  CHECK(check_tame_submanifold(s.L, tangent_algebroid(s.G->units), {42, 40, 1e-7}).passed);
}

TEST_CASE("gluing: space groupoids glue, pair groupoids over a shared interval do not") {
  const auto ok = glue(interval_glue(false));
  CHECK(ok->kind == "glued");
  CHECK(axiom_suite(ok, kQuick).passed);
  const auto rep = check_gluing_hypothesis(interval_glue(true));
  CHECK_FALSE(rep.passed);
  CHECK_FALSE(rep.witness.empty());
  try {
    glue(interval_glue(true));
    FAIL("expected a gluing-hypothesis error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GluingHypothesis);
    CHECK_FALSE(e.witness().empty());
  }
}

TEST_CASE("gluing: phi must agree with the unit charts") {
  auto g = interval_glue(false);
  g.phi.on_units = [](const JPoint& x) { return JPoint{0, {x.x[0] * 0.5}}; };
  CHECK_FALSE(check_gluing_hypothesis(g).passed);
}

TEST_CASE("desingularization of pair(R^3) along a line") {
  const auto s = linear(2, 1);
  const auto D = desingularize(s.G, s.L);
  CHECK(D.groupoid->units == s.L.blow.total);
  CHECK(D.groupoid->units->describe() == blow_up(s.G->units, s.L.slice).total->describe());
  CHECK(D.hypothesis.passed);
  CHECK(std::find(D.hypothesis.notes.begin(), D.hypothesis.notes.end(), "sampled") != D.hypothesis.notes.end());
  CHECK(axiom_suite(D.groupoid, kQuick).passed);
  CHECK(check_desing_structure(D, kQuick).passed);

  SubsetSpec S;
  S.kind = SubsetSpec::Kind::Closed;
  S.pins = {{Pin{2, 0.0}}};
  CHECK(reduction(D.groupoid, S).invariant);

  // An arrow from the far region to the tube region is stored as a G2 arrow;
  // one with both ends in the tube, in edge form.
  const auto& G = *D.groupoid;
  const Point x{0, {1.0, 0.0, 0.5, 0.2}};   // rho = 0.5
  const Point y{0, {0.0, 1.0, 1.5, -0.3}};  // rho = 1.5
  const Point far = G.canonical(Point{1, {0.0, 1.5, -0.3, 0.5, 0.0, 0.2}});
  CHECK(far.block == 1);
  CHECK(point_distance(G.source(far), x) < 1e-14);
  CHECK(point_distance(G.target(far), y) < 1e-14);
  const Point near = G.canonical(Point{1, {0.0, 0.25, 0.7, 0.5, 0.0, 0.2}});
  CHECK(near.block == 0);
  // (w_r, y_d, X, t, log s, w_d) = ((0,1), 0.2, (0.7-0.2)/0.25, 0.25, log 2, (1,0))
  CHECK(point_distance(near, Point{0, {0.0, 1.0, 0.2, 2.0, 0.25, std::log(2.0), 1.0, 0.0}}) < 1e-14);
}

TEST_CASE("anisotropic desingularization and the comparison morphism") {
  const auto s = linear(2, 1);
  const auto N = desingularize_ni(s.G, s.L);
  CHECK(N.desing.anisotropic);
  CHECK(N.desing.groupoid->units->describe() == s.L.blow.total->describe());
  CHECK(axiom_suite(N.desing.groupoid, kQuick).passed);
  CHECK(check_desing_structure(N.desing, kQuick).passed);
  CHECK(morphism_suite(N.psi, kQuick).passed);
}

TEST_CASE("canonical form on the tube") {
  const auto s = linear(2, 1);
  const SmoothMap emb = s.L.embedding, pi = s.L.tube;
  const PointMap section = [emb, pi](const JPoint& u) {
    JPoint p = emb.value(pi.value(u));
    p.x.insert(p.x.end(), u.x.begin(), u.x.end());
    return p;
  };
  CHECK(canonical_form_check(s.G, s.L, section, kQuick).passed);
  const PointMap unit = [](const JPoint& u) {
    JPoint p = u;
    p.x.insert(p.x.end(), u.x.begin(), u.x.end());
    return p;
  };
  CHECK_THROWS_AS(canonical_form_check(s.G, s.L, unit, kQuick), Error);
}

TEST_CASE("algebroid of the desingularization") {
  const auto s = linear(2, 1);
  const auto D = desingularize(s.G, s.L);
  IsoPlan plan;
  plan.count = 40;
  const auto rep = check_desing_algebroid_iso(D, plan);
  CHECK_MESSAGE(rep.passed, rep.witness);
  // Against the anisotropic algebroid the fiber map degenerates on S.
  const auto bad = check_algebroid_iso(lie_algebroid_of(D.groupoid), desing_algebroid_ni(s.L), s.L, plan);
  CHECK_FALSE(bad.passed);
  // A bracket perturbed by 1e-3 X is caught away from the anchors.
  auto skew = std::make_shared<LieAlgebroid>(*desing_algebroid(s.L));
  const auto D0 = desing_algebroid(s.L);
  skew->bracket = [D0](const Section& X, const Section& Y, const JPoint& x) {
    return axpy(Jet(1e-3), X(x), D0->bracket(X, Y, x));
  };
  CHECK_FALSE(check_algebroid_iso(lie_algebroid_of(D.groupoid), skew, s.L, plan).passed);
  const auto N = desingularize_ni(s.G, s.L);
  const auto rep_ni = check_desing_algebroid_iso(N.desing, plan);
  CHECK_MESSAGE(rep_ni.passed, rep_ni.witness);
}

TEST_CASE("desingularized algebroids: axioms, closure and the ideal property") {
  const auto s = linear(2, 1);
  const AlgebroidPlan plan{42, 30, 1e-7};
  CHECK(check_algebroid_axioms(desing_algebroid(s.L), plan).passed);
  CHECK(check_algebroid_axioms(desing_algebroid_ni(s.L), plan).passed);
  CHECK(check_bracket_closure(desing_algebroid(s.L), s.L, plan).passed);
  CHECK(check_bracket_closure(desing_algebroid_ni(s.L), s.L, plan).passed);
  // Sphere-direction parts of X differentiate the B-coefficients of Y, so the
  // full bracket keeps a B-component on S; without them it vanishes.
  CHECK_FALSE(check_ideal_property(s.L, {42, 30, 1e-6}).passed);
  const auto ideal = check_ideal_property(s.L, {42, 30, 1e-6}, false);
  CHECK_MESSAGE(ideal.passed, ideal.witness);
  // r d/dy and d/dr: [d/dr, r d/dy] = (1/r) r d/dy.
  auto gens = [](const Point&) {
    std::vector<VectorField> out;
    out.push_back([](const JPoint& x) {
      JVec v(x.x.size(), Jet(0.0));
      v[3] = x.x[2];
      return v;
    });
    out.push_back([](const JPoint& x) {
      JVec v(x.x.size(), Jet(0.0));
      v[2] = Jet(1.0);
      return v;
    });
    return out;
  };
  CHECK_FALSE(check_generator_closure("r d/dy, d/dr", gens, s.L, plan).passed);
}

TEST_CASE("hyperbolic desingularization of R x [0, inf) along its corner") {
  auto M = make_manifold({ModelBlock{{Factor::line(), Factor::half()}}}, "RxH");
  auto G = pair_groupoid(M, true);
  SliceSpec face{SliceSpec::Kind::Face, {1}};
  const auto D = hyperbolic_desingularize(G, face);
  CHECK(axiom_suite(D.groupoid, kQuick).passed);

  // Against H_1 = (pair(R))_ad x| R+*.
  const auto ad = adiabatic_groupoid(pair_groupoid(euclidean(1)));
  const auto H1 = semidirect_product(ad.groupoid, scaling_action(ad));
  const GlueData g = D.glue;
  GroupoidMorphism to, from;
  to.name = "to_H";
  to.source = D.groupoid;
  to.target = H1;
  to.on_units = [](const JPoint& x) { return JPoint{0, {x.x[2], x.x[1]}}; };
  to.on_arrows = [g](const JPoint& a) {
    const JPoint e = a.block == 0 ? a : g.phi_inverse(JPoint{0, a.x});
    return JPoint{0, JVec(e.x.begin() + 1, e.x.end() - 1)};
  };
  from.name = "from_H";
  from.source = H1;
  from.target = D.groupoid;
  from.on_units = [](const JPoint& x) { return JPoint{0, {Jet(1.0), x.x[1], x.x[0]}}; };
  from.on_arrows = [g](const JPoint& a) {
    JPoint e{0, {Jet(1.0)}};
    e.x.insert(e.x.end(), a.x.begin(), a.x.end());
    e.x.push_back(Jet(1.0));
    // (1, y, X, t, log s, 1): ends at radius t and s t.
    const double t = e.x[3].value(), st = std::exp(e.x[4].value()) * t;
    if (t < 1.0 && st < 1.0) return e;
    return JPoint{1, g.phi.on_arrows(e).x};
  };
  const auto rep = isomorphism_suite(to, from, kQuick);
  CHECK_MESSAGE(rep.passed, rep.witness);

  // The anisotropic variant against pair(R) x T.
  const auto N = hyperbolic_desingularize_ni(G, face);
  const auto PT = product_groupoid(pair_groupoid(euclidean(1)), dilation_action_groupoid());
  const GlueData gn = N.desing.glue;
  GroupoidMorphism to_ni, from_ni;
  to_ni.name = "to_PT";
  to_ni.source = N.desing.groupoid;
  to_ni.target = PT;
  to_ni.on_units = to.on_units;
  to_ni.on_arrows = [gn](const JPoint& a) {
    const JPoint e = a.block == 0 ? a : gn.phi_inverse(JPoint{0, a.x});
    // (w_r, y_r, y_d, w_d, t_d, log s)
    return JPoint{0, {e.x[1], e.x[2], e.x[4], e.x[5]}};
  };
  from_ni.name = "from_PT";
  from_ni.source = PT;
  from_ni.target = N.desing.groupoid;
  from_ni.on_units = from.on_units;
  from_ni.on_arrows = [gn](const JPoint& a) {
    const JPoint e{0, {Jet(1.0), a.x[0], a.x[1], Jet(1.0), a.x[2], a.x[3]}};
    const double td = a.x[2].value(), tr = std::exp(-a.x[3].value()) * td;
    if (td < 1.0 && tr < 1.0) return e;
    return JPoint{1, gn.phi.on_arrows(e).x};
  };
  const auto rep_ni = isomorphism_suite(to_ni, from_ni, kQuick);
  CHECK_MESSAGE(rep_ni.passed, rep_ni.witness);
}

TEST_CASE("desingularization needs a pair groupoid") {
  CHECK_THROWS_AS(tame_submanifold(space_groupoid(euclidean(3)), SliceSpec{SliceSpec::Kind::Linear, {0}}), Error);
}
