#include "lg/desing.hpp"

#include <cmath>

#include "lg/error.hpp"

namespace lg {

namespace {

JVec slice(const JVec& v, std::size_t from, std::size_t len) {
  return JVec(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + len));
}

JVec join(std::initializer_list<JVec> parts) {
  JVec out;
  for (const JVec& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Jet norm2(const JVec& v) {
  Jet s(0.0);
  for (const Jet& c : v) s += c * c;
  return s;
}

struct Coords {
  std::vector<int> normal, tangential;  // embedding coordinates in M
  int mdim = 0;
};

Coords coords_of(const ModelBlock& b, const BlowUpData& blow) {
  Coords c;
  const auto off = b.offsets();
  for (int f : blow.slice.normal_factors) c.normal.push_back(off[f]);
  for (int f : blow.tangential_factors)
    for (int i = 0; i < b.factors[f].embed_dim(); ++i) c.tangential.push_back(off[f] + i);
  c.mdim = b.embed_dim();
  return c;
}

JVec pick(const JVec& v, const std::vector<int>& idx) {
  JVec out;
  for (int i : idx) out.push_back(v[i]);
  return out;
}

// Sizes of the total-space layout (omega[n], rho, y[k]).
struct TotalLayout {
  std::size_t n = 0, k = 0;
  explicit TotalLayout(const TameSubmanifold& L)
      : n(static_cast<std::size_t>(L.blow.codim)),
        k(static_cast<std::size_t>(L.locus->blocks[0].embed_dim())) {}
  JVec omega(const JPoint& p) const { return slice(p.x, 0, n); }
  Jet rho(const JPoint& p) const { return p.x[n]; }
  JVec y(const JPoint& p) const { return slice(p.x, n + 1, k); }
  JPoint point(const JVec& w, const Jet& r, const JVec& y) const { return {0, join({w, JVec{r}, y})}; }
};

struct Built {
  GroupoidPtr G1;       // over M1 = {rho < 1}
  EdgeModification edge;
  PointMap phi;         // G1 arrows with t > 0 -> pair(M \ L) arrows
  PointMap phi_inverse;
};

}  // namespace

// ---- tame submanifolds ----------------------------------------------------------

TameSubmanifold tame_submanifold(const GroupoidPtr& G, const SliceSpec& spec) {
  if (G->kind != "pair")
    throw Error(ErrorKind::Unsupported, "tubular data is synthesized for pair groupoids only, got " + G->name);
  const ManifoldPtr M = G->units;
  TameSubmanifold L;
  L.ambient = M;
  L.slice = spec;
  L.blow = blow_up(M, spec);
  if (L.blow.tangential_factors.empty())
    throw Error(ErrorKind::UnsupportedSubmanifold, "L must have positive dimension");
  const ModelBlock& mb = M->blocks[0];
  ModelBlock lb;
  for (int f : L.blow.tangential_factors) lb.factors.push_back(mb.factors[f]);
  L.locus = make_manifold({lb}, "L");
  const Coords c = coords_of(mb, L.blow);

  L.embedding.domain = L.locus;
  L.embedding.codomain = M;
  L.embedding.name = "L->M";
  L.embedding.value = [c](const JPoint& l) {
    JPoint q{0, JVec(static_cast<std::size_t>(c.mdim), Jet(0.0))};
    for (std::size_t j = 0; j < c.tangential.size(); ++j) q.x[c.tangential[j]] = l.x[j];
    return q;
  };
  L.tube_domain = with_inside(*M, [c](const Point& z) {
    double s = 0.0;
    for (int i : c.normal) s += z.x[i] * z.x[i];
    return s < 1.0;
  }, "U");
  L.tube = block_projection(L.tube_domain, L.locus, L.blow.tangential_factors, "pi");
  L.radius = [c](const JPoint& z) { return sqrt(norm2(pick(z.x, c.normal))); };
  L.H = pair_groupoid(L.locus, G->allow_corners);
  L.B = tangent_algebroid(L.locus);
  L.locus_arrow = [c](const JPoint& g) {
    const auto m = static_cast<std::size_t>(c.mdim);
    return JPoint{0, join({pick(slice(g.x, 0, m), c.tangential), pick(slice(g.x, m, m), c.tangential)})};
  };
  const SmoothMap emb = L.embedding;
  const auto kl = static_cast<std::size_t>(lb.embed_dim());
  L.locus_arrow_inverse = [emb, kl](const JPoint& h) {
    return JPoint{0, join({emb.value(JPoint{0, slice(h.x, 0, kl)}).x, emb.value(JPoint{0, slice(h.x, kl, kl)}).x})};
  };
  L.identification = [c](const JPoint&, const JVec& v) { return join({pick(v, c.tangential), pick(v, c.normal)}); };
  return L;
}

CheckReport check_tame_submanifold(const TameSubmanifold& L, const AlgebroidPtr& A, const AlgebroidPlan& plan) {
  auto rep = run_sampled("tube:pi o i", 1e-12, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point l = L.locus->sample(rng, i);
    const Point back = L.tube(L.embedding(l));
    return {point_distance(back, l), "l=" + format_vector(l.x)};
  });
  auto pulled = pullback_algebroid(L.tube, L.B);
  auto restricted = std::make_shared<LieAlgebroid>(*A);
  restricted->base = L.tube_domain;
  AlgebroidPlan p = plan;
  p.tol = 1e-7;
  rep.merge(check_algebroid_morphism(restricted, pulled, L.identification, p));
  return rep;
}

SmoothMap blow_up_projection(const TameSubmanifold& L) {
  std::vector<int> kept;
  const int nt = static_cast<int>(L.blow.tangential_factors.size());
  for (int j = 0; j < nt; ++j) kept.push_back(2 + j);
  kept.push_back(1);
  return block_projection(L.blow.total, product_manifold(*L.locus, *half_line("[0,inf)")), kept, "p");
}

// ---- desingularization ----------------------------------------------------------

namespace {

GlueData glue_data(const std::string& name, const GroupoidPtr& G, const TameSubmanifold& L, const Built& b) {
  const TotalLayout T(L);
  const BlowUpData blow = L.blow;
  const std::size_t n = T.n;
  auto outside_L = with_inside(*L.ambient, [blow](const Point& z) {
    return norm2(blow.normal_part(lift(z))).value() > 0.0;
  }, L.ambient->name + "\\L");
  GlueData g;
  g.name = name;
  g.G1 = b.G1;
  g.G2 = pair_groupoid(outside_L, G->allow_corners);
  g.units = blow.total;
  g.in_M1 = [n](const Point& x) { return x.x[n] < 1.0; };
  g.in_M2 = [n](const Point& x) { return x.x[n] > 0.0; };
  g.to1 = [](const JPoint& x) { return x; };
  g.from1 = g.to1;
  g.to2 = blow.blow_down.value;
  g.from2 = [blow](const JPoint& z) { return blow.lift(z); };
  g.in_U1 = [n](const Point& x) { return x.x[n] > 0.0 && x.x[n] < 1.0; };
  g.in_U2 = [blow](const Point& z) {
    const double s = norm2(blow.normal_part(lift(z))).value();
    return s > 0.0 && s < 1.0;
  };
  g.phi.name = "phi";
  g.phi.source = b.G1;
  g.phi.target = g.G2;
  g.phi.on_arrows = b.phi;
  g.phi.on_units = blow.blow_down.value;
  g.phi_inverse = b.phi_inverse;
  return g;
}

// E over [M:L]: arrows (w_r[n], y_d[k], X[k], t, log s, w_d[n]).
Built build_edge(const TameSubmanifold& L) {
  const TotalLayout T(L);
  const std::size_t n = T.n, k = T.k;
  const BlowUpData blow = L.blow;
  Built b;
  b.edge = edge_modification_over(blow_up_projection(L), L.H);
  SubsetSpec near;
  near.kind = SubsetSpec::Kind::Open;
  near.pred = [n](const Point& x) { return x.x[n] < 1.0; };
  near.name = "r<1";
  b.G1 = reduction(b.edge.groupoid, near).groupoid;
  const PointMap kappa = blow.blow_down.value;
  b.phi = [T, n, k, kappa](const JPoint& a) {
    const JVec wr = slice(a.x, 0, n), yd = slice(a.x, n, k), X = slice(a.x, n + k, k);
    const Jet t = a.x[n + 2 * k], ls = a.x[n + 2 * k + 1];
    const JVec wd = slice(a.x, n + 2 * k + 2, n);
    const JPoint zr = kappa(T.point(wr, t, axpy(t, X, yd)));
    const JPoint zd = kappa(T.point(wd, exp(ls) * t, yd));
    return JPoint{0, join({zr.x, zd.x})};
  };
  b.phi_inverse = [T, blow](const JPoint& g) {
    const std::size_t m = g.x.size() / 2;
    const JPoint r = blow.lift(JPoint{0, slice(g.x, 0, m)});
    const JPoint d = blow.lift(JPoint{0, slice(g.x, m, m)});
    const Jet t = T.rho(r);
    const JVec yd = T.y(d);
    const JVec X = scaled(1.0 / t, sub(T.y(r), yd));
    return JPoint{0, join({T.omega(r), yd, X, JVec{t, log(T.rho(d) / t)}, T.omega(d)})};
  };
  return b;
}

// E_ni on [M:L]: arrows (w_r[n], y_r[k], y_d[k], w_d[n], t_d, log s).
Built build_edge_ni(const TameSubmanifold& L) {
  const TotalLayout T(L);
  const std::size_t n = T.n, k = T.k;
  const BlowUpData blow = L.blow;
  std::vector<int> kept;
  for (std::size_t j = 0; j < L.blow.tangential_factors.size(); ++j) kept.push_back(1 + static_cast<int>(j));
  const SmoothMap f = block_projection(blow.boundary, L.locus, kept, "pi_S");
  Built b;
  b.edge = edge_modification_ni(f, L.H);
  // Units (w, y, t) of the product moved to (w, t, y).
  const PointMap to_new = [n, k](const JPoint& p) {
    return JPoint{0, join({slice(p.x, 0, n), JVec{p.x[n + k]}, slice(p.x, n, k)})};
  };
  const PointMap to_old = [n, k](const JPoint& p) {
    return JPoint{0, join({slice(p.x, 0, n), slice(p.x, n + 1, k), JVec{p.x[n]}})};
  };
  auto moved = transport_units(b.edge.groupoid, blow.total, to_new, to_old, b.edge.groupoid->name);
  SubsetSpec near;
  near.kind = SubsetSpec::Kind::Open;
  near.pred = [n](const Point& x) { return x.x[n] < 1.0; };
  near.name = "r<1";
  b.G1 = reduction(moved, near).groupoid;
  const PointMap kappa = blow.blow_down.value;
  b.phi = [T, n, k, kappa](const JPoint& a) {
    const JVec wr = slice(a.x, 0, n), yr = slice(a.x, n, k), yd = slice(a.x, n + k, k);
    const JVec wd = slice(a.x, n + 2 * k, n);
    const Jet td = a.x[2 * n + 2 * k], ls = a.x[2 * n + 2 * k + 1];
    const JPoint zr = kappa(T.point(wr, exp(-ls) * td, yr));
    const JPoint zd = kappa(T.point(wd, td, yd));
    return JPoint{0, join({zr.x, zd.x})};
  };
  b.phi_inverse = [T, blow](const JPoint& g) {
    const std::size_t m = g.x.size() / 2;
    const JPoint r = blow.lift(JPoint{0, slice(g.x, 0, m)});
    const JPoint d = blow.lift(JPoint{0, slice(g.x, m, m)});
    const Jet td = T.rho(d);
    return JPoint{0, join({T.omega(r), T.y(r), T.y(d), T.omega(d), JVec{td, log(td / T.rho(r))}})};
  };
  return b;
}

Desingularization assemble(const GroupoidPtr& G, const TameSubmanifold& L, const Built& b, bool ni) {
  const std::string name = "[[" + G->name + ":L]]" + (ni ? "_ni" : "");
  Desingularization D;
  D.L = L;
  D.edge = b.edge;
  D.anisotropic = ni;
  D.glue = glue_data(name, G, L, b);
  D.hypothesis = check_gluing_hypothesis(D.glue);
  D.groupoid = glue(D.glue);
  const BlowUpData blow = L.blow;
  const std::size_t n = static_cast<std::size_t>(blow.codim);
  D.far = transport_units(D.glue.G2, with_inside(*blow.total, [n](const Point& x) { return x.x[n] > 0.0; }, "[M:L]\\S"),
                          D.glue.from2, D.glue.to2, D.glue.G2->name + "'");
  return D;
}

}  // namespace

Desingularization desingularize(const GroupoidPtr& G, const TameSubmanifold& L) {
  return assemble(G, L, build_edge(L), false);
}

AnisotropicDesingularization desingularize_ni(const GroupoidPtr& G, const TameSubmanifold& L) {
  AnisotropicDesingularization out;
  const Built iso = build_edge(L);
  out.desing = assemble(G, L, build_edge_ni(L), true);
  const Desingularization plain = assemble(G, L, iso, false);
  const PointMap psi = comparison_arrow_map(L.H, static_cast<std::size_t>(L.blow.codim));
  out.psi.name = "Psi";
  out.psi.source = plain.groupoid;
  out.psi.target = out.desing.groupoid;
  out.psi.on_units = [](const JPoint& x) { return x; };
  // Both glued groupoids have one G1 block followed by one G2 block.
  out.psi.on_arrows = [psi](const JPoint& a) { return a.block == 0 ? psi(a) : a; };
  return out;
}

Desingularization hyperbolic_desingularize(const GroupoidPtr& G, const SliceSpec& face) {
  if (face.kind != SliceSpec::Kind::Face)
    throw Error(ErrorKind::UnsupportedSubmanifold, "hyperbolic desingularization is along a corner face");
  return desingularize(G, tame_submanifold(G, face));
}

AnisotropicDesingularization hyperbolic_desingularize_ni(const GroupoidPtr& G, const SliceSpec& face) {
  if (face.kind != SliceSpec::Kind::Face)
    throw Error(ErrorKind::UnsupportedSubmanifold, "hyperbolic desingularization is along a corner face");
  return desingularize_ni(G, tame_submanifold(G, face));
}

// ---- structure checks -------------------------------------------------------------

CheckReport check_desing_structure(const Desingularization& D, const AxiomPlan& plan) {
  const TameSubmanifold& L = D.L;
  const BlowUpData& blow = L.blow;
  const TotalLayout T(L);
  const std::size_t n = T.n, k = T.k;
  CheckReport rep;
  rep.name = "structure:" + D.groupoid->name;

  // Off S: the open reduction r > 0 is G over M \ L.
  {
    SubsetSpec off;
    off.kind = SubsetSpec::Kind::Open;
    off.pred = [n](const Point& x) { return x.x[n] > 0.0; };
    off.name = "r>0";
    const GroupoidPtr R = reduction(D.groupoid, off).groupoid;
    const GlueData g = D.glue;
    GroupoidMorphism to, from;
    to.name = "off_S";
    to.source = R;
    to.target = g.G2;
    to.on_units = g.to2;
    to.on_arrows = [g](const JPoint& a) { return a.block == 0 ? g.phi.on_arrows(a) : JPoint{a.block - 1, a.x}; };
    from.name = "off_S^-1";
    from.source = g.G2;
    from.target = R;
    from.on_units = g.from2;
    from.on_arrows = [](const JPoint& a) { return JPoint{a.block + 1, a.x}; };
    rep.merge(isomorphism_suite(to, from, plan));
  }
  if (D.anisotropic) return rep;

  // On S: the invariant face r = 0 is pi_S^!!(A(H) x| R+*), read off by dropping t.
  {
    SubsetSpec on;
    on.kind = SubsetSpec::Kind::Closed;
    on.pins = {{Pin{static_cast<int>(n), 0.0}}};
    on.name = "S";
    const Reduction red = reduction(D.groupoid, on);
    if (!red.invariant) rep.fail("S is not invariant");
    std::vector<int> kept;
    for (std::size_t j = 0; j < blow.tangential_factors.size(); ++j) kept.push_back(1 + static_cast<int>(j));
    const SmoothMap fS = block_projection(blow.boundary, L.locus, kept, "pi_S");
    const GroupoidPtr bundle = pullback_groupoid(fS, group_bundle(L.locus, L.H->algebroid_rank, true), true);
    const std::size_t K = static_cast<std::size_t>(L.H->algebroid_rank);
    const std::size_t tpos = n + k + K;  // t in (w_r, y, X, t, log s, w_d)
    GroupoidMorphism to, from;
    to.name = "on_S";
    to.source = red.groupoid;
    to.target = bundle;
    to.on_units = [n](const JPoint& x) {
      JPoint y = x;
      y.x.erase(y.x.begin() + static_cast<std::ptrdiff_t>(n));
      return y;
    };
    to.on_arrows = [tpos](const JPoint& a) {
      if (a.block != 0) throw Error(ErrorKind::Constraint, "arrow over S outside the edge part");
      JPoint b = a;
      b.x.erase(b.x.begin() + static_cast<std::ptrdiff_t>(tpos));
      return b;
    };
    from.name = "on_S^-1";
    from.source = bundle;
    from.target = red.groupoid;
    from.on_units = [n](const JPoint& x) {
      JPoint y = x;
      y.x.insert(y.x.begin() + static_cast<std::ptrdiff_t>(n), Jet(0.0));
      return y;
    };
    from.on_arrows = [tpos](const JPoint& a) {
      JPoint b = a;
      b.x.insert(b.x.begin() + static_cast<std::ptrdiff_t>(tpos), Jet(0.0));
      return b;
    };
    rep.merge(isomorphism_suite(to, from, plan));
  }
  return rep;
}

CheckReport canonical_form_check(const GroupoidPtr& G, const TameSubmanifold& L, const PointMap& section,
                                 const AxiomPlan& plan) {
  for (std::size_t i = 0; i < 50; ++i) {
    Rng rng(plan.seed ^ 0xC0DEu, i);
    const Point u = L.tube_domain->sample(rng, i);
    const Point s = values(section(lift(u)));
    const double res = std::max(point_distance(G->source(s), u), point_distance(G->target(s), L.embedding(L.tube(u))));
    if (!(res <= 1e-10))
      throw Error(ErrorKind::Section, "section does not join u to pi(u)", "u=" + format_vector(u.x));
  }
  SubsetSpec tube;
  tube.kind = SubsetSpec::Kind::Open;
  tube.pred = L.tube_domain->inside;
  tube.name = "U";
  const GroupoidPtr GU = reduction(G, tube).groupoid;
  const GroupoidPtr P = pullback_groupoid(L.tube, L.H, G->allow_corners);
  const ProjectionSplit ps = projection_split(L.tube);
  const GroupoidPtr H = L.H;
  const PointMap to_H = L.locus_arrow, from_H = L.locus_arrow_inverse;

  GroupoidMorphism psi, back;
  psi.name = "canonical_form";
  psi.source = GU;
  psi.target = P;
  psi.on_units = [](const JPoint& x) { return x; };
  psi.on_arrows = [G, section, ps, to_H](const JPoint& g) {
    const JPoint r = G->r(g), d = G->d(g);
    const JPoint h = G->mul_raw(G->mul_raw(section(r), g), G->inv(section(d)));
    const JPoint hh = to_H(h);
    return JPoint{hh.block, join({ps.fiber_part(r), hh.x, ps.fiber_part(d)})};
  };
  back.name = "canonical_form^-1";
  back.source = P;
  back.target = GU;
  back.on_units = [](const JPoint& x) { return x; };
  const std::size_t nf = ps.fiber_coords.size();
  back.on_arrows = [G, H, section, ps, from_H, nf](const JPoint& a) {
    const JPoint h{a.block, slice(a.x, nf, a.x.size() - 2 * nf)};
    const JPoint r = ps.assemble(slice(a.x, 0, nf), H->r(h).x);
    const JPoint d = ps.assemble(slice(a.x, a.x.size() - nf, nf), H->d(h).x);
    return G->mul_raw(G->mul_raw(G->inv(section(r)), from_H(h)), section(d));
  };
  return isomorphism_suite(psi, back, plan);
}

}  // namespace lg
