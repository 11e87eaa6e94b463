#include <cmath>

#include "doctest.h"
#include "lg/error.hpp"
#include "lg/geometry.hpp"

using namespace lg;

namespace {

ManifoldPtr block_of(std::vector<Factor> f) { return make_manifold({ModelBlock{std::move(f)}}); }

SmoothMap map_from(ManifoldPtr dom, ManifoldPtr cod, PointMap f, std::string name) {
  SmoothMap m;
  m.domain = std::move(dom);
  m.codomain = std::move(cod);
  m.value = std::move(f);
  m.name = std::move(name);
  return m;
}

}  // namespace

TEST_CASE("depth counts vanishing boundary coordinates") {
  auto hh = block_of({Factor::half(), Factor::half()});
  auto hl = block_of({Factor::half(), Factor::line()});
  CHECK(depth(*hh, Point{0, {0.0, 0.0}}) == 2);
  CHECK(depth(*hl, Point{0, {0.3, -1.2}}) == 0);
  CHECK(depth(*hl, Point{0, {0.0, 1.5}}) == 1);
  CHECK_THROWS_AS(depth(*hl, Point{0, {-0.5, 1.0}}), Error);
}

TEST_CASE("inward cone membership") {
  auto hh = block_of({Factor::half(), Factor::half()});
  CHECK(inward_cone_membership(*hh, {{0, {0.0, 0.0}}, {1.0, 0.0}}));
  CHECK_FALSE(inward_cone_membership(*hh, {{0, {0.0, 0.0}}, {-1.0, 0.0}}));
  CHECK(inward_cone_membership(*hh, {{0, {0.5, 0.2}}, {-3.0, -7.0}}));
}

TEST_CASE("sphere tangency is validated") {
  auto s = block_of({Factor::sphere(1)});
  CHECK_NOTHROW(validate_tangent(*s, {{0, {1.0, 0.0}}, {0.0, 2.0}}));
  CHECK_THROWS_AS(validate_tangent(*s, {{0, {1.0, 0.0}}, {1.0, 0.0}}), Error);
}

TEST_CASE("stratified sampling gives every depth level its share") {
  auto m = block_of({Factor::half(), Factor::half(), Factor::line(), Factor::sphere(2, true)});
  const int levels = m->blocks[0].rank() + 1;
  std::vector<int> hits(levels, 0);
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    Rng rng(3, static_cast<std::uint64_t>(i));
    const Point p = m->sample(rng, static_cast<std::size_t>(i));
    m->validate(p);
    ++hits[depth(*m, p)];
  }
  for (int h : hits) CHECK(h >= n / 10);
}

TEST_CASE("projection HALFxLINE -> HALF is tame") {
  auto dom = block_of({Factor::half(), Factor::line()});
  auto cod = half_line();
  const auto rep = check_tame_submersion(block_projection(dom, cod, {0}), {7, 100});
  CHECK(rep.passed);
}

TEST_CASE("h(x,t) = t on LINExHALF -> HALF is tame") {
  auto dom = block_of({Factor::line(), Factor::half()});
  const auto rep = check_tame_submersion(block_projection(dom, half_line(), {1}), {7, 100});
  CHECK(rep.passed);
}

TEST_CASE("h(x,y) = x+y fails the cone test with the brute-force witness") {
  auto dom = block_of({Factor::half(), Factor::half()});
  auto h = map_from(dom, half_line(), [](const JPoint& p) { return JPoint{0, {p.x[0] + p.x[1]}}; }, "sum");
  // Independent scan: at the origin, w lies in the cone iff both entries are
  // nonnegative; its image w1 + w2 lies in the cone iff the sum is nonnegative.
  Vec expected;
  const double vals[3] = {1.0, -1.0, 0.0};
  for (int i = 0; i < 3 && expected.empty(); ++i)
    for (int j = 0; j < 3 && expected.empty(); ++j) {
      const double a = vals[i], b = vals[j];
      if (a == 0 && b == 0) continue;
      if ((a >= 0 && b >= 0) != (a + b >= 0)) expected = {a, b};
    }
  REQUIRE(expected == Vec{1.0, -1.0});

  // Sample 0 of a rank-2 block is the corner.
  const auto rep = check_tame_submersion(h, {1, 3});
  CHECK_FALSE(rep.passed);
  CHECK(rep.witness == "cone mismatch at x=(0, 0) v=" + format_vector(expected));
}

TEST_CASE("tame maps preserve depth on fresh samples") {
  auto dom = block_of({Factor::half(), Factor::line(), Factor::half()});
  auto cod = block_of({Factor::half(), Factor::half()});
  auto h = block_projection(dom, cod, {2, 0});
  REQUIRE(check_tame_submersion(h, {11, 200}).passed);
  for (int i = 0; i < 200; ++i) {
    Rng rng(99, static_cast<std::uint64_t>(i));
    const Point x = dom->sample(rng, static_cast<std::size_t>(i));
    CHECK(depth(*dom, x) == depth(*cod, h(x)));
  }
}

TEST_CASE("dimension mismatch is a shape error") {
  auto dom = euclidean(1);
  auto h = map_from(dom, euclidean(2), [](const JPoint& p) { return JPoint{0, {p.x[0], p.x[0]}}; }, "diag");
  CHECK_THROWS_AS(check_tame_submersion(h, {1, 5}), Error);
}

TEST_CASE("blow-up of R^{n+k} along {0} x R^k has the expected factors") {
  auto M = euclidean(3);
  const auto b = blow_up(M, {SliceSpec::Kind::Linear, {0, 1}});
  REQUIRE(b.total->blocks.size() == 1);
  const auto& f = b.total->blocks[0].factors;
  REQUIRE(f.size() == 3);
  CHECK(f[0].kind == FactorKind::Sphere);
  CHECK(f[0].p == 1);
  CHECK(f[1].kind == FactorKind::Half);
  CHECK(f[2].kind == FactorKind::Line);
  CHECK(b.total->blocks[0].describe() == "S1xHxR");

  const auto b0 = blow_up(euclidean(2), {SliceSpec::Kind::Linear, {0, 1}});
  CHECK(b0.total->blocks[0].describe() == "S1xH");
}

TEST_CASE("blow-down map is (omega, r, y) -> (r omega, y)") {
  const auto b = blow_up(euclidean(3), {SliceSpec::Kind::Linear, {0, 1}});
  const double c = std::cos(0.4), s = std::sin(0.4);
  const Point q = b.blow_down(Point{0, {c, s, 1.7, -0.3}});
  CHECK(q.x[0] == doctest::Approx(1.7 * c).epsilon(1e-15));
  CHECK(q.x[1] == doctest::Approx(1.7 * s).epsilon(1e-15));
  CHECK(q.x[2] == -0.3);
}

TEST_CASE("blow-up invariants: round trip, distance, boundary radius") {
  const auto b = blow_up(euclidean(4), {SliceSpec::Kind::Linear, {0, 2}});
  CHECK(check_blow_up(b, {5, 300}).passed);
  CHECK(check_jacobian(b.blow_down, {5, 100}).passed);
  // Distance to L by least squares over L's parameterization.
  for (int i = 0; i < 50; ++i) {
    Rng rng(17, static_cast<std::uint64_t>(i));
    Point q = b.base->sample(rng, static_cast<std::size_t>(i));
    q.x[0] *= 0.3;
    q.x[2] *= 0.3;
    Mat basis = Mat::Zero(4, 2);
    basis(1, 0) = 1;
    basis(3, 1) = 1;
    const EVec qe = to_evec(q.x);
    const EVec coef = basis.colPivHouseholderQr().solve(qe);
    const double dist = (qe - basis * coef).norm();
    CHECK(b.radius(b.lift(q)).x[0] == doctest::Approx(dist).epsilon(1e-12));
  }
}

TEST_CASE("corner-face blow-up uses a clipped sphere") {
  ModelBlock m{{Factor::line(), Factor::half(), Factor::half()}};
  const auto b = blow_up(make_manifold({m}, "M"), {SliceSpec::Kind::Face, {1, 2}});
  CHECK(b.total->blocks[0].describe() == "S+1xHxR");
  CHECK(check_blow_up(b, {3, 200}).passed);
}

TEST_CASE("unsupported submanifold presentations are rejected") {
  ModelBlock m{{Factor::half(), Factor::line()}};
  auto M = make_manifold({m});
  CHECK_THROWS_AS(blow_up(M, {SliceSpec::Kind::Linear, {0}}), Error);
  CHECK_THROWS_AS(blow_up(M, {SliceSpec::Kind::Face, {1}}), Error);
  try {
    blow_up(M, {SliceSpec::Kind::Linear, {0}});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedSubmanifold);
  }
}
