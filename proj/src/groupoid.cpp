#include "lg/groupoid.hpp"

#include <algorithm>
#include <cmath>

#include "lg/error.hpp"
#include "lg/simd/kernels.hpp"

namespace lg {

namespace {

constexpr std::uint64_t kSampleRange = 1000003;

JVec slice(const JVec& v, std::size_t from, std::size_t len) {
  return JVec(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + len));
}

JVec concat_vec(std::initializer_list<const JVec*> parts) {
  JVec out;
  for (const JVec* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

JVec zeros(std::size_t n) { return JVec(n, Jet(0.0)); }

// Block bookkeeping of product_manifold(A, B): block i*nb + j, coordinates
// split after A's block i.
struct Splitter {
  std::vector<int> a_embed;
  std::vector<int> b_embed;
  int nb = 1;

  Splitter(const CoordinateManifold& a, const CoordinateManifold& b) : nb(static_cast<int>(b.blocks.size())) {
    for (const auto& blk : a.blocks) a_embed.push_back(blk.embed_dim());
    for (const auto& blk : b.blocks) b_embed.push_back(blk.embed_dim());
  }
  std::pair<JPoint, JPoint> split(const JPoint& p) const {
    const int i = p.block / nb, j = p.block % nb;
    const auto cut = static_cast<std::size_t>(a_embed[i]);
    return {JPoint{i, slice(p.x, 0, cut)}, JPoint{j, slice(p.x, cut, p.x.size() - cut)}};
  }
  std::pair<Point, Point> split(const Point& p) const {
    auto [a, b] = split(lift(p));
    return {values(a), values(b)};
  }
  JPoint join(const JPoint& a, const JPoint& b) const { return {a.block * nb + b.block, concat_vec({&a.x, &b.x})}; }
  Point join(const Point& a, const Point& b) const { return values(join(lift(a), lift(b))); }
};

Point sample_any(const CoordinateManifold& m, Rng& rng) {
  return m.sample(rng, static_cast<std::size_t>(rng.next() % kSampleRange));
}

void check_pair_rank(const CoordinateManifold& M) {
  bool corners = false;
  for (const auto& b : M.blocks) corners |= b.rank() > 0;
  if (!corners) return;
  if (M.inside) {
    // Open subsets may avoid the boundary entirely; the stratified sampler
    // would surface boundary points if the predicate admitted them.
    for (std::size_t i = 0; i < 200; ++i) {
      Rng rng(0xC0FFEE, i);
      const Point p = M.sample(rng, i);
      if (depth(M.blocks[p.block], p.x) > 0)
        throw Error(ErrorKind::Rank, "pair groupoid of a manifold with corners", format_vector(p.x));
    }
    return;
  }
  throw Error(ErrorKind::Rank, "pair groupoid of a manifold with corners requires allow_corners", M.describe());
}

bool all_lines(const ModelBlock& b) {
  return std::all_of(b.factors.begin(), b.factors.end(), [](const Factor& f) { return f.kind == FactorKind::Line; });
}

}  // namespace

// ---- core ---------------------------------------------------------------------

double point_distance(const Point& a, const Point& b) {
  if (a.block != b.block || a.x.size() != b.x.size()) return INFINITY;
  return simd::max_abs_diff(a.x, b.x);
}

double arrow_distance(const LieGroupoid& G, const Point& a, const Point& b) {
  return point_distance(G.canonical(a), G.canonical(b));
}

Point LieGroupoid::mul(const Point& g, const Point& h) const {
  const Point dg = source(g);
  const Point rh = target(h);
  const double gap = point_distance(dg, rh);
  if (!(gap <= composability_tol))
    throw Error(ErrorKind::Composability, "d(g) != r(h) in " + name,
                "g=" + format_vector(g.x) + " h=" + format_vector(h.x));
  return canonical(values(mul_raw(lift(g), lift(h))));
}

SmoothMap source_map(const GroupoidPtr& G) {
  SmoothMap m;
  m.domain = G->arrows;
  m.codomain = G->units;
  m.value = G->d;
  m.name = "d:" + G->name;
  return m;
}

SmoothMap target_map(const GroupoidPtr& G) {
  SmoothMap m;
  m.domain = G->arrows;
  m.codomain = G->units;
  m.value = G->r;
  m.name = "r:" + G->name;
  return m;
}

// ---- constructors -----------------------------------------------------------

GroupoidPtr pair_groupoid(ManifoldPtr M, bool allow_corners) {
  if (!allow_corners) check_pair_rank(*M);
  auto G = std::make_shared<LieGroupoid>();
  G->name = "pair(" + (M->name.empty() ? M->describe() : M->name) + ")";
  G->kind = "pair";
  G->allow_corners = allow_corners;
  G->units = M;
  G->arrows = product_manifold(*M, *M);
  const Splitter sp(*M, *M);
  G->d = [sp](const JPoint& g) { return sp.split(g).second; };
  G->r = [sp](const JPoint& g) { return sp.split(g).first; };
  G->u = [sp](const JPoint& x) { return sp.join(x, x); };
  G->inv = [sp](const JPoint& g) {
    auto [a, b] = sp.split(g);
    return sp.join(b, a);
  };
  G->mul_raw = [sp](const JPoint& g, const JPoint& h) { return sp.join(sp.split(g).first, sp.split(h).second); };
  G->sample_source_fiber = [M, sp](const Point& x, Rng& rng) { return sp.join(sample_any(*M, rng), x); };
  G->algebroid_rank = M->dim();
  G->algebroid_frame = [M](const Point& near) {
    std::vector<VectorField> out;
    const auto& blk = M->blocks[near.block];
    for (auto& V : tangent_frame(blk, near))
      out.push_back([V](const JPoint& x) {
        JVec v = V(x);
        v.resize(2 * x.x.size(), Jet(0.0));
        return v;
      });
    return out;
  };
  if (M->blocks.size() == 1 && all_lines(M->blocks[0])) {
    ExpData e;
    e.rank = M->dim();
    e.exp = [sp](const JPoint& x, const JVec& X, const Jet& t) {
      JPoint y = x;
      for (std::size_t i = 0; i < X.size(); ++i) y.x[i] += t * X[i];
      return sp.join(y, x);
    };
    e.chart_mul = [](const JPoint&, const JVec& X1, const JPoint&, const JVec& X2, const Jet&) { return add(X1, X2); };
    e.chart_inv = [](const JPoint& x, const JVec& X, const Jet& t) {
      JPoint y = x;
      for (std::size_t i = 0; i < X.size(); ++i) y.x[i] += t * X[i];
      return std::make_pair(y, scaled(Jet(-1.0), X));
    };
    G->exp = e;
  }
  if (M->blocks.size() == 1) {
    try {
      const BlockChart bc = block_chart(M->blocks[0]);
      FiberChart fc;
      fc.dim = bc.dim;
      fc.lo = bc.lo;
      fc.hi = bc.hi;
      fc.periodic = bc.periodic;
      fc.arrow = [sp, bc](const Point& x, const Vec& c) { return sp.join(Point{0, bc.embed(c)}, x); };
      fc.density = [bc](const Point&, const Vec& c) { return bc.density(c); };
      G->fiber_chart = fc;
    } catch (const Error&) {
    }
  }
  return G;
}

GroupoidPtr space_groupoid(ManifoldPtr M) {
  auto G = std::make_shared<LieGroupoid>();
  G->name = "space(" + (M->name.empty() ? M->describe() : M->name) + ")";
  G->kind = "space";
  G->units = M;
  G->arrows = M;
  const PointMap id = [](const JPoint& p) { return p; };
  G->d = G->r = G->u = G->inv = id;
  G->mul_raw = [](const JPoint& g, const JPoint&) { return g; };
  G->sample_source_fiber = [](const Point& x, Rng&) { return x; };
  G->algebroid_rank = 0;
  G->algebroid_frame = [](const Point&) { return std::vector<VectorField>{}; };
  ExpData e;
  e.rank = 0;
  e.exp = [](const JPoint& x, const JVec&, const Jet&) { return x; };
  e.chart_mul = [](const JPoint&, const JVec&, const JPoint&, const JVec&, const Jet&) { return JVec{}; };
  e.chart_inv = [](const JPoint& x, const JVec&, const Jet&) { return std::make_pair(x, JVec{}); };
  G->exp = e;
  FiberChart fc;
  fc.arrow = [](const Point& x, const Vec&) { return x; };
  fc.density = [](const Point&, const Vec&) { return 1.0; };
  G->fiber_chart = fc;
  return G;
}

GroupoidPtr group_bundle(ManifoldPtr M, int k, bool dilation) {
  if (k < 0) throw Error(ErrorKind::Unsupported, "bundle fiber dimension must be >= 0");
  auto G = std::make_shared<LieGroupoid>();
  G->name = std::string(dilation ? "dilation_bundle(" : "bundle(") + (M->name.empty() ? M->describe() : M->name) +
            ", " + std::to_string(k) + ")";
  G->kind = dilation ? "dilation_bundle" : "bundle";
  G->units = M;
  const int extra = k + (dilation ? 1 : 0);
  std::vector<ModelBlock> blocks;
  std::vector<int> base_len;
  for (const auto& b : M->blocks) {
    ModelBlock fib = lines(k);
    if (dilation) fib.factors.push_back(Factor::line(-1.0, 1.0));
    blocks.push_back(concat(b, fib));
    base_len.push_back(b.embed_dim());
  }
  auto arrows = std::make_shared<CoordinateManifold>(blocks, G->name + ".arrows");
  arrows->pins = M->pins;
  arrows->pins.resize(blocks.size());
  if (M->inside) {
    auto in = M->inside;
    arrows->inside = [in, base_len](const Point& p) {
      return in(Point{p.block, Vec(p.x.begin(), p.x.begin() + base_len[p.block])});
    };
  }
  G->arrows = arrows;
  auto base = [base_len](const JPoint& g) { return JPoint{g.block, slice(g.x, 0, base_len[g.block])}; };
  auto fiber = [base_len, extra](const JPoint& g) { return slice(g.x, base_len[g.block], extra); };
  G->d = base;
  G->r = base;
  G->u = [extra](const JPoint& x) {
    JPoint g = x;
    g.x.resize(x.x.size() + extra, Jet(0.0));
    return g;
  };
  auto make = [](const JPoint& x, const JVec& v) { return JPoint{x.block, concat_vec({&x.x, &v})}; };
  G->inv = [base, fiber, make, k, dilation](const JPoint& g) {
    JVec v = fiber(g);
    if (!dilation) return make(base(g), scaled(Jet(-1.0), v));
    const Jet s_inv = exp(-v[k]);
    for (int i = 0; i < k; ++i) v[i] = -(s_inv * v[i]);
    v[k] = -v[k];
    return make(base(g), v);
  };
  G->mul_raw = [base, fiber, make, k, dilation](const JPoint& g, const JPoint& h) {
    const JVec a = fiber(g), b = fiber(h);
    if (!dilation) return make(base(h), add(a, b));
    JVec c(k + 1);
    const Jet s = exp(a[k]);
    for (int i = 0; i < k; ++i) c[i] = a[i] + s * b[i];
    c[k] = a[k] + b[k];
    return make(base(h), c);
  };
  G->sample_source_fiber = [k, dilation](const Point& x, Rng& rng) {
    Point g = x;
    for (int i = 0; i < k; ++i) g.x.push_back(rng.uniform(-2.0, 2.0));
    if (dilation) g.x.push_back(rng.uniform(-1.0, 1.0));
    return g;
  };
  G->algebroid_rank = extra;
  G->algebroid_frame = [extra](const Point&) {
    std::vector<VectorField> out;
    for (int i = 0; i < extra; ++i)
      out.push_back([i, extra](const JPoint& x) {
        JVec v = zeros(x.x.size() + extra);
        v[x.x.size() + i] = 1.0;
        return v;
      });
    return out;
  };
  if (!dilation) {
    ExpData e;
    e.rank = k;
    e.exp = [make](const JPoint& x, const JVec& X, const Jet& t) { return make(x, scaled(t, X)); };
    e.chart_mul = [](const JPoint&, const JVec& X1, const JPoint&, const JVec& X2, const Jet&) { return add(X1, X2); };
    e.chart_inv = [](const JPoint& x, const JVec& X, const Jet&) { return std::make_pair(x, scaled(Jet(-1.0), X)); };
    G->exp = e;
  }
  FiberChart fc;
  fc.dim = extra;
  fc.lo.assign(extra, -INFINITY);
  fc.hi.assign(extra, INFINITY);
  fc.periodic.assign(extra, 0);
  fc.arrow = [](const Point& x, const Vec& c) {
    Point g = x;
    g.x.insert(g.x.end(), c.begin(), c.end());
    return g;
  };
  // dv ds/s is right invariant for (v, s)(w, t) = (v + s w, s t).
  fc.density = [](const Point&, const Vec&) { return 1.0; };
  G->fiber_chart = fc;
  return G;
}

GroupoidPtr product_groupoid(GroupoidPtr a, GroupoidPtr b) {
  auto G = std::make_shared<LieGroupoid>();
  G->name = a->name + "x" + b->name;
  G->kind = "product";
  G->units = product_manifold(*a->units, *b->units);
  G->arrows = product_manifold(*a->arrows, *b->arrows);
  const Splitter su(*a->units, *b->units);
  const Splitter sa(*a->arrows, *b->arrows);
  G->d = [a, b, su, sa](const JPoint& g) {
    auto [g1, g2] = sa.split(g);
    return su.join(a->d(g1), b->d(g2));
  };
  G->r = [a, b, su, sa](const JPoint& g) {
    auto [g1, g2] = sa.split(g);
    return su.join(a->r(g1), b->r(g2));
  };
  G->u = [a, b, su, sa](const JPoint& x) {
    auto [x1, x2] = su.split(x);
    return sa.join(a->u(x1), b->u(x2));
  };
  G->inv = [a, b, sa](const JPoint& g) {
    auto [g1, g2] = sa.split(g);
    return sa.join(a->inv(g1), b->inv(g2));
  };
  G->mul_raw = [a, b, sa](const JPoint& g, const JPoint& h) {
    auto [g1, g2] = sa.split(g);
    auto [h1, h2] = sa.split(h);
    return sa.join(a->mul_raw(g1, h1), b->mul_raw(g2, h2));
  };
  G->sample_source_fiber = [a, b, su, sa](const Point& x, Rng& rng) {
    auto [x1, x2] = su.split(x);
    const Point g1 = a->sample_source_fiber(x1, rng);
    const Point g2 = b->sample_source_fiber(x2, rng);
    return sa.join(g1, g2);
  };
  G->algebroid_rank = a->algebroid_rank + b->algebroid_rank;
  G->algebroid_frame = [a, b, su](const Point& near) {
    auto [n1, n2] = su.split(near);
    std::vector<VectorField> out;
    for (auto& xi : a->algebroid_frame(n1))
      out.push_back([a, b, su, xi](const JPoint& x) {
        auto [x1, x2] = su.split(x);
        JVec v = xi(x1);
        v.resize(v.size() + b->u(x2).x.size(), Jet(0.0));
        return v;
      });
    for (auto& eta : b->algebroid_frame(n2))
      out.push_back([a, su, eta](const JPoint& x) {
        auto [x1, x2] = su.split(x);
        JVec v = zeros(a->u(x1).x.size());
        const JVec w = eta(x2);
        v.insert(v.end(), w.begin(), w.end());
        return v;
      });
    return out;
  };
  if (a->exp && b->exp) {
    const ExpData ea = *a->exp, eb = *b->exp;
    const auto ka = static_cast<std::size_t>(ea.rank), kb = static_cast<std::size_t>(eb.rank);
    ExpData e;
    e.rank = ea.rank + eb.rank;
    e.exp = [ea, eb, su, sa, ka, kb](const JPoint& x, const JVec& X, const Jet& t) {
      auto [x1, x2] = su.split(x);
      return sa.join(ea.exp(x1, slice(X, 0, ka), t), eb.exp(x2, slice(X, ka, kb), t));
    };
    e.chart_mul = [ea, eb, su, ka, kb](const JPoint& x1, const JVec& X1, const JPoint& x2, const JVec& X2,
                                        const Jet& t) {
      auto [p1, q1] = su.split(x1);
      auto [p2, q2] = su.split(x2);
      JVec A = ea.chart_mul(p1, slice(X1, 0, ka), p2, slice(X2, 0, ka), t);
      JVec B = eb.chart_mul(q1, slice(X1, ka, kb), q2, slice(X2, ka, kb), t);
      return concat_vec({&A, &B});
    };
    e.chart_inv = [ea, eb, su, ka, kb](const JPoint& x, const JVec& X, const Jet& t) {
      auto [p, q] = su.split(x);
      auto [pa, A] = ea.chart_inv(p, slice(X, 0, ka), t);
      auto [qb, B] = eb.chart_inv(q, slice(X, ka, kb), t);
      return std::make_pair(su.join(pa, qb), concat_vec({&A, &B}));
    };
    G->exp = e;
  }
  if (a->fiber_chart && b->fiber_chart) {
    const FiberChart fa = *a->fiber_chart, fb = *b->fiber_chart;
    FiberChart fc;
    fc.dim = fa.dim + fb.dim;
    fc.lo = fa.lo;
    fc.lo.insert(fc.lo.end(), fb.lo.begin(), fb.lo.end());
    fc.hi = fa.hi;
    fc.hi.insert(fc.hi.end(), fb.hi.begin(), fb.hi.end());
    fc.periodic = fa.periodic;
    fc.periodic.insert(fc.periodic.end(), fb.periodic.begin(), fb.periodic.end());
    const auto na = static_cast<std::ptrdiff_t>(fa.dim);
    fc.arrow = [fa, fb, su, sa, na](const Point& x, const Vec& c) {
      auto [x1, x2] = su.split(x);
      return sa.join(fa.arrow(x1, Vec(c.begin(), c.begin() + na)), fb.arrow(x2, Vec(c.begin() + na, c.end())));
    };
    fc.density = [fa, fb, su, na](const Point& x, const Vec& c) {
      auto [x1, x2] = su.split(x);
      return fa.density(x1, Vec(c.begin(), c.begin() + na)) * fb.density(x2, Vec(c.begin() + na, c.end()));
    };
    G->fiber_chart = fc;
  }
  if (a->canonicalize || b->canonicalize) {
    G->canonicalize = [a, b, sa](const Point& g) {
      auto [g1, g2] = sa.split(g);
      return sa.join(a->canonical(g1), b->canonical(g2));
    };
  }
  return G;
}

GroupoidPtr pullback_groupoid(const SmoothMap& f, GroupoidPtr H, bool allow_corners) {
  const auto tame = check_tame_submersion(f, {0x7A3E, 100});
  if (!tame.passed && !allow_corners)
    throw Error(ErrorKind::Tameness, "pull-back along a map that is not a tame submersion", tame.witness);
  if (!f.projection)
    throw Error(ErrorKind::Unsupported, "pull-back needs a block projection (explicit fiber parameterization)");
  if (H->units->blocks.size() != 1 || !H->units->same_blocks(*f.codomain))
    throw Error(ErrorKind::Shape, "pull-back: f lands outside the units of H");
  const ManifoldPtr M = f.domain;
  const ProjectionSplit ps = projection_split(f);
  const ModelBlock F = ps.fiber;
  const std::size_t nf = ps.fiber_coords.size();

  auto G = std::make_shared<LieGroupoid>();
  G->name = "pullback(" + f.name + ", " + H->name + ")";
  G->kind = "pullback";
  G->allow_corners = allow_corners;
  G->units = M;
  std::vector<ModelBlock> blocks;
  std::vector<int> glen;
  for (const auto& hb : H->arrows->blocks) {
    blocks.push_back(concat(concat(F, hb), F));
    glen.push_back(hb.embed_dim());
  }
  auto arrows = std::make_shared<CoordinateManifold>(blocks, G->name + ".arrows");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b < H->arrows->pins.size())
      for (const auto& pin : H->arrows->pins[b]) arrows->pins[b].push_back({pin.coord + static_cast<int>(nf), pin.value});
  }
  auto fib = [ps](const JPoint& m) { return ps.fiber_part(m); };
  auto assemble = [ps](const JVec& fv, const JPoint& l) { return ps.assemble(fv, l.x); };
  auto parts = [nf, glen](const JPoint& a) {
    const auto gl = static_cast<std::size_t>(glen[a.block]);
    return std::make_tuple(slice(a.x, 0, nf), JPoint{a.block, slice(a.x, nf, gl)}, slice(a.x, nf + gl, nf));
  };
  auto make = [](const JVec& fr, const JPoint& g, const JVec& fd) {
    return JPoint{g.block, concat_vec({&fr, &g.x, &fd})};
  };
  {
    auto Hr = H->r, Hd = H->d;
    auto in_m = M;
    arrows->inside = [parts, assemble, Hr, Hd, in_m](const Point& a) {
      if (!in_m->inside && in_m->pins[0].empty()) return true;
      auto [fr, g, fd] = parts(lift(a));
      return in_m->contains(values(assemble(fr, Hr(g)))) && in_m->contains(values(assemble(fd, Hd(g))));
    };
  }
  G->arrows = arrows;
  G->d = [parts, assemble, H](const JPoint& a) {
    auto [fr, g, fd] = parts(a);
    return assemble(fd, H->d(g));
  };
  G->r = [parts, assemble, H](const JPoint& a) {
    auto [fr, g, fd] = parts(a);
    return assemble(fr, H->r(g));
  };
  G->u = [fib, make, H, f](const JPoint& m) {
    const JVec fv = fib(m);
    return make(fv, H->u(f.value(m)), fv);
  };
  G->inv = [parts, make, H](const JPoint& a) {
    auto [fr, g, fd] = parts(a);
    return make(fd, H->inv(g), fr);
  };
  G->mul_raw = [parts, make, H](const JPoint& a, const JPoint& b) {
    auto [fr1, g1, fd1] = parts(a);
    auto [fr2, g2, fd2] = parts(b);
    return make(fr1, H->mul_raw(g1, g2), fd2);
  };
  G->sample_source_fiber = [M, H, f, fib, assemble, make](const Point& m, Rng& rng) {
    const JPoint mj = lift(m);
    for (int attempt = 0; attempt < 400; ++attempt) {
      const Point g = H->sample_source_fiber(f(m), rng);
      const JVec fr = fib(lift(sample_any(*M, rng)));
      const JPoint gj = lift(g);
      if (!M->contains(values(assemble(fr, H->r(gj))))) continue;
      return values(make(fr, gj, fib(mj)));
    }
    throw Error(ErrorKind::Sampling, "no arrow of the pull-back with the requested source", format_vector(m.x));
  };
  G->algebroid_rank = H->algebroid_rank + F.dim();
  G->algebroid_frame = [H, f, F, fib, nf](const Point& near) {
    std::vector<VectorField> out;
    for (auto& xi : H->algebroid_frame(f(near)))
      out.push_back([xi, f, nf](const JPoint& m) {
        JVec v = zeros(nf);
        const JVec w = xi(f.value(m));
        v.insert(v.end(), w.begin(), w.end());
        v.resize(v.size() + nf, Jet(0.0));
        return v;
      });
    const Point fnear{0, values(std::span<const Jet>(fib(lift(near))))};
    for (auto& V : tangent_frame(F, fnear))
      out.push_back([V, fib, H, f, nf](const JPoint& m) {
        JVec v = V(JPoint{0, fib(m)});
        v.resize(v.size() + H->u(f.value(m)).x.size() + nf, Jet(0.0));
        return v;
      });
    return out;
  };
  if (H->exp && all_lines(F)) {
    const ExpData eh = *H->exp;
    const auto kh = static_cast<std::size_t>(eh.rank);
    ExpData e;
    e.rank = eh.rank + static_cast<int>(nf);
    e.exp = [eh, f, fib, make, kh, nf](const JPoint& m, const JVec& X, const Jet& t) {
      const JVec fd = fib(m);
      JVec fr = fd;
      for (std::size_t i = 0; i < nf; ++i) fr[i] += t * X[kh + i];
      return make(fr, eh.exp(f.value(m), slice(X, 0, kh), t), fd);
    };
    e.chart_mul = [eh, f, kh, nf](const JPoint& m1, const JVec& X1, const JPoint& m2, const JVec& X2, const Jet& t) {
      JVec A = eh.chart_mul(f.value(m1), slice(X1, 0, kh), f.value(m2), slice(X2, 0, kh), t);
      const JVec B = add(slice(X1, kh, nf), slice(X2, kh, nf));
      return concat_vec({&A, &B});
    };
    e.chart_inv = [eh, f, fib, assemble, kh, nf](const JPoint& m, const JVec& X, const Jet& t) {
      auto [l, A] = eh.chart_inv(f.value(m), slice(X, 0, kh), t);
      JVec fr = fib(m);
      for (std::size_t i = 0; i < nf; ++i) fr[i] += t * X[kh + i];
      JVec B = scaled(Jet(-1.0), slice(X, kh, nf));
      return std::make_pair(assemble(fr, l), concat_vec({&A, &B}));
    };
    G->exp = e;
  }
  if (H->fiber_chart) {
    try {
      const BlockChart bc = block_chart(F);
      const FiberChart fh = *H->fiber_chart;
      FiberChart fc;
      fc.dim = bc.dim + fh.dim;
      fc.lo = bc.lo;
      fc.lo.insert(fc.lo.end(), fh.lo.begin(), fh.lo.end());
      fc.hi = bc.hi;
      fc.hi.insert(fc.hi.end(), fh.hi.begin(), fh.hi.end());
      fc.periodic = bc.periodic;
      fc.periodic.insert(fc.periodic.end(), fh.periodic.begin(), fh.periodic.end());
      const auto nb = static_cast<std::ptrdiff_t>(bc.dim);
      fc.arrow = [bc, fh, f, fib, make, nb](const Point& m, const Vec& c) {
        const JVec fr = lift(std::span<const double>(bc.embed(Vec(c.begin(), c.begin() + nb))));
        const Point g = fh.arrow(f(m), Vec(c.begin() + nb, c.end()));
        return values(make(fr, lift(g), fib(lift(m))));
      };
      fc.density = [bc, fh, f, nb](const Point& m, const Vec& c) {
        return bc.density(Vec(c.begin(), c.begin() + nb)) * fh.density(f(m), Vec(c.begin() + nb, c.end()));
      };
      G->fiber_chart = fc;
    } catch (const Error&) {
    }
  }
  if (H->canonicalize) {
    G->canonicalize = [H, parts, make](const Point& a) {
      auto [fr, g, fd] = parts(lift(a));
      return values(make(fr, lift(H->canonical(values(g))), fd));
    };
  }
  return G;
}

GroupoidPtr semidirect_product(GroupoidPtr Gp, const GroupAction& act) {
  const int m = act.dim;
  // The action must be by automorphisms and a group action.
  {
    const AxiomPlan plan{0xAC7, 40, 0, 1e-9};
    const auto rep = run_sampled("action", 1e-9, plan.pairs, [&](std::size_t i) -> SampleOutcome {
      auto cs = sample_composable(*Gp, plan.seed, i, 2);
      Rng rng(plan.seed ^ 0x55, i);
      JVec a(m), b(m), ab(m), zero(m, Jet(0.0));
      for (int j = 0; j < m; ++j) {
        a[j] = rng.uniform(-1, 1);
        b[j] = rng.uniform(-1, 1);
        ab[j] = a[j] + b[j];
      }
      const JPoint g = lift(cs.arrows[0]), h = lift(cs.arrows[1]);
      auto A = [&](const JVec& s, const JPoint& p) { return Gp->canonical(values(act.on_arrows(s, p))); };
      double res = arrow_distance(*Gp, A(a, lift(Gp->mul(cs.arrows[0], cs.arrows[1]))),
                                  Gp->mul(A(a, g), A(a, h)));
      res = std::max(res, point_distance(Gp->source(A(a, g)), values(act.on_units(a, Gp->d(g)))));
      res = std::max(res, point_distance(Gp->target(A(a, g)), values(act.on_units(a, Gp->r(g)))));
      res = std::max(res, arrow_distance(*Gp, A(a, lift(A(b, g))), A(ab, g)));
      res = std::max(res, arrow_distance(*Gp, A(zero, g), cs.arrows[0]));
      return {res, "gamma=" + format_vector(values(std::span<const Jet>(a))) + " g=" + format_vector(cs.arrows[0].x)};
    });
    if (!rep.passed) throw Error(ErrorKind::Action, "action is not by groupoid automorphisms", rep.witness);
  }
  auto G = std::make_shared<LieGroupoid>();
  G->name = Gp->name + "x|" + act.name;
  G->kind = "semidirect";
  G->units = Gp->units;
  std::vector<ModelBlock> blocks;
  std::vector<int> glen;
  for (const auto& b : Gp->arrows->blocks) {
    blocks.push_back(concat(b, lines(m, -1.0, 1.0)));
    glen.push_back(b.embed_dim());
  }
  auto arrows = std::make_shared<CoordinateManifold>(blocks, G->name + ".arrows");
  arrows->pins = Gp->arrows->pins;
  arrows->pins.resize(blocks.size());
  if (Gp->arrows->inside) {
    auto in = Gp->arrows->inside;
    arrows->inside = [in, glen](const Point& p) { return in(Point{p.block, Vec(p.x.begin(), p.x.begin() + glen[p.block])}); };
  }
  G->arrows = arrows;
  const auto M = static_cast<std::size_t>(m);
  auto parts = [glen, M](const JPoint& a) {
    const auto gl = static_cast<std::size_t>(glen[a.block]);
    return std::make_pair(JPoint{a.block, slice(a.x, 0, gl)}, slice(a.x, gl, M));
  };
  auto make = [](const JPoint& g, const JVec& s) { return JPoint{g.block, concat_vec({&g.x, &s})}; };
  auto neg = [](const JVec& s) { return scaled(Jet(-1.0), s); };
  G->d = [Gp, act, parts, neg](const JPoint& a) {
    auto [g, s] = parts(a);
    return act.on_units(neg(s), Gp->d(g));
  };
  G->r = [Gp, parts](const JPoint& a) { return Gp->r(parts(a).first); };
  G->u = [Gp, make, M](const JPoint& x) { return make(Gp->u(x), zeros(M)); };
  G->inv = [Gp, act, parts, make, neg](const JPoint& a) {
    auto [g, s] = parts(a);
    return make(act.on_arrows(neg(s), Gp->inv(g)), neg(s));
  };
  G->mul_raw = [Gp, act, parts, make](const JPoint& a, const JPoint& b) {
    auto [g1, s1] = parts(a);
    auto [g2, s2] = parts(b);
    return make(Gp->mul_raw(g1, act.on_arrows(s1, g2)), add(s1, s2));
  };
  G->sample_source_fiber = [Gp, act, make, M](const Point& x, Rng& rng) {
    JVec s(M);
    for (auto& c : s) c = rng.uniform(-1.0, 1.0);
    const Point y = values(act.on_units(s, lift(x)));
    const Point g = Gp->sample_source_fiber(y, rng);
    return values(make(lift(g), s));
  };
  G->algebroid_rank = Gp->algebroid_rank + m;
  G->algebroid_frame = [Gp, act, M](const Point& near) {
    std::vector<VectorField> out;
    for (auto& xi : Gp->algebroid_frame(near))
      out.push_back([xi, M](const JPoint& x) {
        JVec v = xi(x);
        v.resize(v.size() + M, Jet(0.0));
        return v;
      });
    for (std::size_t j = 0; j < M; ++j)
      out.push_back([Gp, act, M, j](const JPoint& x) {
        // (u_* a_j(x), e_j) with a_j the infinitesimal action on units.
        JVec e = zeros(M);
        e[j] = 1.0;
        const auto orbit = [&](const JVec& s) { return act.on_units(s, x).x; };
        const JVec a = directional(orbit, zeros(M), e);
        const int block = x.block;
        const auto unit = [&](const JVec& y) { return Gp->u(JPoint{block, y}).x; };
        JVec v = directional(unit, x.x, a);
        v.insert(v.end(), e.begin(), e.end());
        return v;
      });
    return out;
  };
  if (Gp->canonicalize) {
    G->canonicalize = [Gp, parts, make](const Point& a) {
      auto [g, s] = parts(lift(a));
      return values(make(lift(Gp->canonical(values(g))), s));
    };
  }
  return G;
}

GroupoidPtr dilation_action_groupoid() {
  auto G = std::make_shared<LieGroupoid>();
  G->name = "T";
  G->kind = "action_T";
  G->units = half_line("[0,inf)");
  G->arrows = make_manifold({ModelBlock{{Factor::half(), Factor::line(-1.0, 1.0)}}}, "T.arrows");
  G->d = [](const JPoint& a) { return JPoint{0, {a.x[0]}}; };
  G->r = [](const JPoint& a) { return JPoint{0, {exp(-a.x[1]) * a.x[0]}}; };
  G->u = [](const JPoint& x) { return JPoint{0, {x.x[0], Jet(0.0)}}; };
  G->inv = [](const JPoint& a) { return JPoint{0, {exp(-a.x[1]) * a.x[0], -a.x[1]}}; };
  G->mul_raw = [](const JPoint& a, const JPoint& b) { return JPoint{0, {b.x[0], a.x[1] + b.x[1]}}; };
  G->sample_source_fiber = [](const Point& x, Rng& rng) { return Point{0, {x.x[0], rng.uniform(-1.0, 1.0)}}; };
  G->algebroid_rank = 1;
  G->algebroid_frame = [](const Point&) {
    return std::vector<VectorField>{[](const JPoint&) { return JVec{Jet(0.0), Jet(1.0)}; }};
  };
  FiberChart fc;
  fc.dim = 1;
  fc.lo = {-INFINITY};
  fc.hi = {INFINITY};
  fc.periodic = {0};
  fc.arrow = [](const Point& x, const Vec& c) { return Point{0, {x.x[0], c[0]}}; };
  fc.density = [](const Point&, const Vec&) { return 1.0; };
  G->fiber_chart = fc;
  return G;
}

GroupoidPtr transport_units(GroupoidPtr Gp, ManifoldPtr new_units, PointMap to_new, PointMap to_old, std::string name) {
  auto G = std::make_shared<LieGroupoid>(*Gp);
  G->name = name.empty() ? Gp->name + "'" : std::move(name);
  G->kind = "transported";
  G->units = new_units;
  auto d = Gp->d, r = Gp->r, u = Gp->u;
  G->d = [d, to_new](const JPoint& g) { return to_new(d(g)); };
  G->r = [r, to_new](const JPoint& g) { return to_new(r(g)); };
  G->u = [u, to_old](const JPoint& x) { return u(to_old(x)); };
  auto sampler = Gp->sample_source_fiber;
  G->sample_source_fiber = [sampler, to_old](const Point& x, Rng& rng) { return sampler(values(to_old(lift(x))), rng); };
  auto frame = Gp->algebroid_frame;
  G->algebroid_frame = [frame, to_old](const Point& near) {
    std::vector<VectorField> out;
    for (auto& xi : frame(values(to_old(lift(near))))) out.push_back([xi, to_old](const JPoint& x) { return xi(to_old(x)); });
    return out;
  };
  if (Gp->exp) {
    const ExpData e0 = *Gp->exp;
    ExpData e = e0;
    e.exp = [e0, to_old](const JPoint& x, const JVec& X, const Jet& t) { return e0.exp(to_old(x), X, t); };
    e.chart_mul = [e0, to_old](const JPoint& x1, const JVec& X1, const JPoint& x2, const JVec& X2, const Jet& t) {
      return e0.chart_mul(to_old(x1), X1, to_old(x2), X2, t);
    };
    e.chart_inv = [e0, to_old, to_new](const JPoint& x, const JVec& X, const Jet& t) {
      auto [y, Y] = e0.chart_inv(to_old(x), X, t);
      return std::make_pair(to_new(y), Y);
    };
    G->exp = e;
  }
  if (Gp->fiber_chart) {
    const FiberChart f0 = *Gp->fiber_chart;
    FiberChart fc = f0;
    fc.arrow = [f0, to_old](const Point& x, const Vec& c) { return f0.arrow(values(to_old(lift(x))), c); };
    fc.density = [f0, to_old](const Point& x, const Vec& c) { return f0.density(values(to_old(lift(x))), c); };
    G->fiber_chart = fc;
  }
  return G;
}

// ---- reduction --------------------------------------------------------------

namespace {

bool sampled_invariance(const LieGroupoid& G, const CoordinateManifold& A, std::uint64_t seed) {
  for (std::size_t i = 0; i < 100; ++i) {
    Rng rng(seed, i);
    const Point x = A.sample(rng, i);
    const Point g = G.sample_source_fiber(x, rng);
    if (!A.contains(G.target(g))) return false;
  }
  return true;
}

}  // namespace

Reduction reduction(GroupoidPtr G, const SubsetSpec& A, std::uint64_t seed) {
  std::shared_ptr<CoordinateManifold> U;
  const std::string label = A.name.empty() ? "A" : A.name;
  if (A.kind == SubsetSpec::Kind::Open) {
    if (!A.pred) throw Error(ErrorKind::Unsupported, "open subset without a predicate");
    U = std::const_pointer_cast<CoordinateManifold>(with_inside(*G->units, A.pred, G->units->name + "|" + label));
  } else {
    U = std::make_shared<CoordinateManifold>(*G->units);
    U->name = G->units->name + "|" + label;
    if (A.pins.size() > U->blocks.size()) throw Error(ErrorKind::Unsupported, "pins for nonexistent unit blocks");
    for (std::size_t b = 0; b < A.pins.size(); ++b)
      U->pins[b].insert(U->pins[b].end(), A.pins[b].begin(), A.pins[b].end());
  }
  Reduction out;
  out.invariant = sampled_invariance(*G, *U, seed);
  if (G->kind == "pair") {
    auto P = std::const_pointer_cast<LieGroupoid>(pair_groupoid(U, G->allow_corners));
    P->name = G->name + "|" + label;
    out.groupoid = P;
    return out;
  }
  if (A.kind == SubsetSpec::Kind::Closed && !out.invariant)
    throw Error(ErrorKind::Unsupported, "closed subset is neither invariant nor a slice of a pair groupoid");

  auto R = std::make_shared<LieGroupoid>(*G);
  R->name = G->name + "|" + label;
  R->kind = "reduction";
  R->units = U;
  auto d = G->d, r = G->r;
  ManifoldPtr Uc = U;
  R->arrows = with_inside(*G->arrows, [d, r, Uc](const Point& g) {
    return Uc->contains(values(d(lift(g)))) && Uc->contains(values(r(lift(g))));
  }, R->name + ".arrows");
  auto sampler = G->sample_source_fiber;
  auto Gc = G;
  R->sample_source_fiber = [sampler, Gc, Uc](const Point& x, Rng& rng) {
    for (int attempt = 0; attempt < 400; ++attempt) {
      const Point g = sampler(x, rng);
      if (Uc->contains(Gc->target(g))) return g;
    }
    throw Error(ErrorKind::Sampling, "reduction: no arrow from this unit stays in the subset", format_vector(x.x));
  };
  if (A.kind == SubsetSpec::Kind::Closed) R->fiber_chart.reset();
  out.groupoid = R;
  return out;
}

// ---- suites -------------------------------------------------------------------

ComposableSample sample_composable(const LieGroupoid& G, std::uint64_t seed, std::size_t index, std::size_t length) {
  Rng rng(seed, index);
  ComposableSample s;
  s.x = G.units->sample(rng, index);
  s.arrows.resize(length);
  Point at = s.x;
  for (std::size_t k = length; k-- > 0;) {
    s.arrows[k] = G.canonical(G.sample_source_fiber(at, rng));
    at = G.target(s.arrows[k]);
  }
  return s;
}

CheckReport axiom_suite(const GroupoidPtr& Gp, const AxiomPlan& plan) {
  const LieGroupoid& G = *Gp;
  const std::size_t n = plan.pairs + plan.triples;
  auto rep = run_sampled("axioms:" + G.name, plan.tol, n, [&](std::size_t i) -> SampleOutcome {
    if (i < plan.pairs) {
      const auto s = sample_composable(G, plan.seed, i, 2);
      const Point &g = s.arrows[0], &h = s.arrows[1];
      G.arrows->validate(g);
      G.arrows->validate(h);
      const Point ux = G.unit(s.x);
      G.arrows->validate(ux);
      double res = std::max(point_distance(G.source(ux), s.x), point_distance(G.target(ux), s.x));
      const Point gh = G.mul(g, h);
      G.arrows->validate(gh);
      res = std::max(res, point_distance(G.source(gh), G.source(h)));
      res = std::max(res, point_distance(G.target(gh), G.target(g)));
      res = std::max(res, arrow_distance(G, G.mul(g, G.unit(G.source(g))), g));
      res = std::max(res, arrow_distance(G, G.mul(G.unit(G.target(g)), g), g));
      const Point gi = G.inverse(g);
      G.arrows->validate(gi);
      res = std::max(res, arrow_distance(G, G.mul(g, gi), G.unit(G.target(g))));
      res = std::max(res, arrow_distance(G, G.mul(gi, g), G.unit(G.source(g))));
      res = std::max(res, arrow_distance(G, G.inverse(gi), g));
      return {res, "g=" + format_vector(g.x) + " h=" + format_vector(h.x)};
    }
    const auto s = sample_composable(G, plan.seed ^ 0x3A3A, i, 3);
    const Point &g = s.arrows[0], &h = s.arrows[1], &k = s.arrows[2];
    const double res = arrow_distance(G, G.mul(G.mul(g, h), k), G.mul(g, G.mul(h, k)));
    return {res, "g=" + format_vector(g.x) + " h=" + format_vector(h.x) + " k=" + format_vector(k.x)};
  });
  rep.notes.push_back("pairs=" + std::to_string(plan.pairs) + " triples=" + std::to_string(plan.triples));
  return rep;
}

CheckReport morphism_suite(const GroupoidMorphism& phi, const AxiomPlan& plan) {
  const LieGroupoid& S = *phi.source;
  const LieGroupoid& T = *phi.target;
  auto map = [&](const Point& g) { return T.canonical(values(phi.on_arrows(lift(g)))); };
  auto mapu = [&](const Point& x) { return values(phi.on_units(lift(x))); };
  return run_sampled("morphism:" + phi.name, plan.tol, plan.pairs, [&](std::size_t i) -> SampleOutcome {
    const auto s = sample_composable(S, plan.seed, i, 2);
    const Point &g = s.arrows[0], &h = s.arrows[1];
    const Point pg = map(g), ph = map(h);
    T.arrows->validate(pg);
    T.units->validate(mapu(s.x));
    double res = arrow_distance(T, map(S.mul(g, h)), T.mul(pg, ph));
    res = std::max(res, point_distance(T.source(pg), mapu(S.source(g))));
    res = std::max(res, point_distance(T.target(pg), mapu(S.target(g))));
    res = std::max(res, arrow_distance(T, map(S.unit(s.x)), T.unit(mapu(s.x))));
    res = std::max(res, arrow_distance(T, map(S.inverse(g)), T.inverse(pg)));
    return {res, "g=" + format_vector(g.x) + " h=" + format_vector(h.x)};
  });
}

CheckReport isomorphism_suite(const GroupoidMorphism& phi, const GroupoidMorphism& inverse, const AxiomPlan& plan) {
  CheckReport rep = morphism_suite(phi, plan);
  rep.name = "iso:" + phi.name;
  rep.merge(morphism_suite(inverse, plan));
  auto round = [&](const GroupoidMorphism& f, const GroupoidMorphism& g, std::uint64_t seed) {
    const LieGroupoid& S = *f.source;
    return run_sampled("roundtrip:" + f.name, plan.tol, plan.pairs, [&](std::size_t i) -> SampleOutcome {
      const auto s = sample_composable(S, seed, i, 1);
      const Point& a = s.arrows[0];
      const Point back = values(g.on_arrows(f.on_arrows(lift(a))));
      double res = arrow_distance(S, back, a);
      res = std::max(res, point_distance(values(g.on_units(f.on_units(lift(s.x)))), s.x));
      return {res, "g=" + format_vector(a.x)};
    });
  };
  rep.merge(round(phi, inverse, plan.seed ^ 0x1505));
  rep.merge(round(inverse, phi, plan.seed ^ 0x5051));
  return rep;
}

CheckReport structure_tameness(const GroupoidPtr& G, const SamplingPlan& plan) {
  CheckReport rep;
  rep.name = "tame:" + G->name;
  rep.merge(check_tame_submersion(source_map(G), plan));
  rep.merge(check_tame_submersion(target_map(G), plan));
  return rep;
}

CheckReport reduction_compatibility(const GroupoidPtr& G, const Reduction& red,
                                    const std::function<bool(const Point&)>& in_A, const AxiomPlan& plan) {
  const LieGroupoid& R = *red.groupoid;
  return run_sampled("reduction:" + R.name, 0.0, plan.pairs, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point x = R.units->sample(rng, i);
    const Point g = R.sample_source_fiber(x, rng);
    if (!in_A(R.source(g)) || !in_A(R.target(g)) || !G->arrows->contains(g))
      return {INFINITY, "reduced arrow leaves A: " + format_vector(g.x)};
    const Point h = G->sample_source_fiber(x, rng);
    if (in_A(G->target(h)) && !R.arrows->contains(h))
      return {INFINITY, "arrow with both ends in A missing: " + format_vector(h.x)};
    return {};
  });
}

GroupoidPtr corrupt_multiplication(const GroupoidPtr& G, double eps) {
  auto C = std::make_shared<LieGroupoid>(*G);
  C->name = G->name + "[corrupted]";
  auto mul = G->mul_raw;
  C->mul_raw = [mul, eps](const JPoint& g, const JPoint& h) {
    JPoint p = mul(g, h);
    p.x[0] += eps;
    return p;
  };
  return C;
}

}  // namespace lg
