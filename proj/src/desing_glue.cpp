#include <algorithm>
#include <cmath>

#include "lg/desing.hpp"
#include "lg/error.hpp"

namespace lg {

namespace {

constexpr int kDepth = 3;
constexpr int kBranch = 3;
constexpr std::size_t kFrontier = 6;

JPoint shift(const JPoint& p, int by) { return {p.block + by, p.x}; }
Point shift(const Point& p, int by) { return {p.block + by, p.x}; }

// Sample of units satisfying pred, scanning stratified indices.
std::optional<Point> sample_where(const CoordinateManifold& M, Rng& rng, std::size_t start,
                                  const std::function<bool(const Point&)>& pred) {
  for (std::size_t k = 0; k < 4000; ++k) {
    const Point x = M.sample(rng, start + k);
    if (pred(x)) return x;
  }
  return std::nullopt;
}

// Breadth-first orbit exploration from x; returns the first reached point
// satisfying stop, if any.
std::optional<Point> explore(const LieGroupoid& G, const Point& x, Rng& rng,
                             const std::function<bool(const Point&)>& stop, std::vector<Point>* visited = nullptr) {
  std::vector<Point> frontier{x};
  for (int depth = 0; depth < kDepth; ++depth) {
    std::vector<Point> next;
    for (const Point& p : frontier)
      for (int b = 0; b < kBranch; ++b) {
        Point q;
        try {
          q = G.target(G.sample_source_fiber(p, rng));
        } catch (const Error&) {
          continue;
        }
        if (stop(q)) return q;
        if (visited) visited->push_back(q);
        if (next.size() < kFrontier) next.push_back(q);
      }
    frontier = std::move(next);
  }
  return std::nullopt;
}

}  // namespace

CheckReport check_gluing_hypothesis(const GlueData& g, std::uint64_t seed, std::size_t seeds) {
  CheckReport rep;
  rep.name = "gluing:" + g.name;
  rep.tolerance = 1e-9;
  rep.notes.push_back("sampled");

  // phi must agree with the unit charts on the overlap.
  for (std::size_t i = 0; i < 60; ++i) {
    Rng rng(seed ^ 0x61u, i);
    const auto x = sample_where(*g.units, rng, i * 4000, [&](const Point& p) {
      return g.in_M1(p) && g.in_M2(p) && g.in_U1(values(g.to1(lift(p))));
    });
    if (!x) break;
    const Point a = values(g.phi.on_units(g.to1(lift(*x))));
    const Point b = values(g.to2(lift(*x)));
    if (!g.in_U2(b)) {
      rep.fail("overlap point outside U2: x=" + format_vector(x->x));
      return rep;
    }
    rep.record(point_distance(a, b), "x=" + format_vector(x->x));
    ++rep.samples;
  }
  if (!rep.passed) return rep;

  // One side: from G_i-orbits through U_i^c into U_i, then across phi into the
  // other groupoid, looking for a path out of U_j.
  struct Side {
    const LieGroupoid* from;
    const LieGroupoid* to;
    std::function<bool(const Point&)> in_M, in_U_from, in_U_to;
    PointMap chart_from;
    std::function<Point(const Point&)> across;
    const char* label;
  };
  const Side sides[2] = {
      {g.G1.get(), g.G2.get(), g.in_M1, g.in_U1, g.in_U2, g.to1,
       [&](const Point& c) { return values(g.phi.on_units(lift(c))); }, "G1->G2"},
      {g.G2.get(), g.G1.get(), g.in_M2, g.in_U2, g.in_U1, g.to2,
       [&](const Point& c) { return values(g.to1(g.from2(lift(c)))); }, "G2->G1"},
  };
  for (const Side& s : sides) {
    std::size_t found = 0;
    for (std::size_t i = 0; i < seeds; ++i) {
      Rng rng(seed ^ 0xB5Fu, i);
      const auto x = sample_where(*g.units, rng, i * 4000, [&](const Point& p) {
        return s.in_M(p) && !s.in_U_from(values(s.chart_from(lift(p))));
      });
      if (!x) break;
      ++found;
      std::vector<Point> reached;
      explore(*s.from, values(s.chart_from(lift(*x))), rng, [](const Point&) { return false; }, &reached);
      for (const Point& c : reached) {
        if (!s.in_U_from(c)) continue;
        ++rep.samples;
        const Point y = s.across(c);
        const auto out = explore(*s.to, y, rng, [&](const Point& q) { return !s.in_U_to(q); });
        if (out) {
          rep.passed = false;
          rep.max_residual = INFINITY;
          rep.witness = std::string(s.label) + ": x=" + format_vector(c.x) + " is joined to the complement of U in both groupoids (reached " +
                        format_vector(out->x) + ")";
          return rep;
        }
      }
    }
    rep.notes.push_back(std::string(s.label) + " seeds=" + std::to_string(found));
  }
  return rep;
}

GroupoidPtr glue(const GlueData& data) {
  const CheckReport hyp = check_gluing_hypothesis(data);
  if (!hyp.passed) throw Error(ErrorKind::GluingHypothesis, "sampled gluing hypothesis fails for " + data.name, hyp.witness);

  const GlueData g = data;
  const GroupoidPtr G1 = g.G1, G2 = g.G2;
  const int nb1 = static_cast<int>(G1->arrows->blocks.size());

  auto G = std::make_shared<LieGroupoid>();
  G->name = g.name;
  G->kind = "glued";
  G->units = g.units;
  G->allow_corners = G1->allow_corners || G2->allow_corners;
  G->algebroid_rank = G1->algebroid_rank;

  std::vector<ModelBlock> blocks = G1->arrows->blocks;
  blocks.insert(blocks.end(), G2->arrows->blocks.begin(), G2->arrows->blocks.end());
  auto A = std::make_shared<CoordinateManifold>(blocks, g.name + ".arrows");
  ManifoldPtr A1 = G1->arrows, A2 = G2->arrows;
  A->inside = [A1, A2, nb1](const Point& p) {
    return p.block < nb1 ? A1->contains(p) : A2->contains(shift(p, -nb1));
  };
  G->arrows = A;

  auto ends_in = [](const LieGroupoid& H, const std::function<bool(const Point&)>& U, const JPoint& a) {
    const Point v = values(a);
    return U(H.source(v)) && U(H.target(v));
  };

  G->d = [g, nb1](const JPoint& a) {
    return a.block < nb1 ? g.from1(g.G1->d(a)) : g.from2(g.G2->d(shift(a, -nb1)));
  };
  G->r = [g, nb1](const JPoint& a) {
    return a.block < nb1 ? g.from1(g.G1->r(a)) : g.from2(g.G2->r(shift(a, -nb1)));
  };
  G->u = [g, nb1](const JPoint& x) {
    if (g.in_M1(values(x))) return g.G1->u(g.to1(x));
    return shift(g.G2->u(g.to2(x)), nb1);
  };
  G->inv = [g, nb1](const JPoint& a) {
    return a.block < nb1 ? g.G1->inv(a) : shift(g.G2->inv(shift(a, -nb1)), nb1);
  };
  G->mul_raw = [g, nb1, ends_in](const JPoint& a, const JPoint& b) {
    const bool a1 = a.block < nb1, b1 = b.block < nb1;
    if (a1 && b1) return g.G1->mul_raw(a, b);
    if (!a1 && !b1) return shift(g.G2->mul_raw(shift(a, -nb1), shift(b, -nb1)), nb1);
    const JPoint& p1 = a1 ? a : b;
    const JPoint p2 = shift(a1 ? b : a, -nb1);
    if (ends_in(*g.G1, g.in_U1, p1)) {
      const JPoint q = g.phi.on_arrows(p1);
      return shift(a1 ? g.G2->mul_raw(q, p2) : g.G2->mul_raw(p2, q), nb1);
    }
    if (ends_in(*g.G2, g.in_U2, p2)) {
      const JPoint q = g.phi_inverse(p2);
      return a1 ? g.G1->mul_raw(p1, q) : g.G1->mul_raw(q, p1);
    }
    throw Error(ErrorKind::GluingHypothesis, "composable pair meets neither overlap",
                "g=" + format_vector(values(std::span<const Jet>(a.x))) + " h=" + format_vector(values(std::span<const Jet>(b.x))));
  };
  G->canonicalize = [g, nb1, ends_in](const Point& a) {
    if (a.block < nb1) return g.G1->canonical(a);
    const Point b = g.G2->canonical(shift(a, -nb1));
    if (ends_in(*g.G2, g.in_U2, lift(b))) return g.G1->canonical(values(g.phi_inverse(lift(b))));
    return shift(b, nb1);
  };
  G->sample_source_fiber = [g, nb1](const Point& x, Rng& rng) {
    const bool m1 = g.in_M1(x), m2 = g.in_M2(x);
    const bool use1 = m1 && (!m2 || rng.uniform() < 0.5);
    if (use1) return g.G1->sample_source_fiber(values(g.to1(lift(x))), rng);
    return shift(g.G2->sample_source_fiber(values(g.to2(lift(x))), rng), nb1);
  };
  G->algebroid_frame = [g](const Point& near) {
    const bool m1 = g.in_M1(near);
    const GroupoidPtr& H = m1 ? g.G1 : g.G2;
    const PointMap chart = m1 ? g.to1 : g.to2;
    std::vector<VectorField> out;
    for (auto& xi : H->algebroid_frame(values(chart(lift(near)))))
      out.push_back([xi, chart](const JPoint& x) { return xi(chart(x)); });
    return out;
  };
  return G;
}

}  // namespace lg
