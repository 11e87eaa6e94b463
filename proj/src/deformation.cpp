#include "lg/deformation.hpp"

#include <cmath>

#include "lg/error.hpp"

namespace lg {

namespace {

JVec slice(const JVec& v, std::size_t from, std::size_t len) {
  return JVec(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + len));
}

ManifoldPtr open_half_line() {
  return with_inside(*half_line(), [](const Point& p) { return p.x[0] > 0.0; }, "(0,inf)");
}

}  // namespace

AdiabaticGroupoid adiabatic_groupoid(const GroupoidPtr& G) {
  if (!G->exp || !G->exp->exp || !G->exp->chart_mul || !G->exp->chart_inv)
    throw Error(ErrorKind::Capability, "adiabatic groupoid needs exponential chart data on " + G->name);
  if (G->units->blocks.size() != 1)
    throw Error(ErrorKind::Unsupported, "adiabatic groupoid over multi-block units");
  const ExpData e = *G->exp;
  const int k = e.rank;
  const auto K = static_cast<std::size_t>(k);
  const ManifoldPtr M = G->units;
  const auto n = static_cast<std::size_t>(M->blocks[0].embed_dim());

  auto A = std::make_shared<LieGroupoid>();
  A->name = G->name + "_ad";
  A->kind = "adiabatic";
  A->units = product_manifold(*M, *half_line("[0,inf)"));
  auto arrows = std::make_shared<CoordinateManifold>(
      std::vector<ModelBlock>{concat(concat(M->blocks[0], lines(k, -1.0, 1.0)), ModelBlock{{Factor::half()}})},
      A->name + ".arrows");
  arrows->pins = M->pins;
  arrows->pins.resize(1);

  auto x_of = [n](const JPoint& a) { return JPoint{0, slice(a.x, 0, n)}; };
  auto X_of = [n, K](const JPoint& a) { return slice(a.x, n, K); };
  auto t_of = [](const JPoint& a) { return a.x.back(); };
  auto make = [](const JPoint& x, const JVec& X, const Jet& t) {
    JPoint a{0, x.x};
    a.x.insert(a.x.end(), X.begin(), X.end());
    a.x.push_back(t);
    return a;
  };
  auto unit_pt = [](const JPoint& x, const Jet& t) {
    JPoint p = x;
    p.x.push_back(t);
    return p;
  };
  const PointMap r_of = [G, e, x_of, X_of, t_of](const JPoint& a) {
    return G->r(e.exp(x_of(a), X_of(a), t_of(a)));
  };
  if (M->inside) {
    auto Mi = M;
    arrows->inside = [Mi, x_of, r_of](const Point& a) {
      const JPoint ja = lift(a);
      return Mi->contains(values(x_of(ja))) && Mi->contains(values(r_of(ja)));
    };
  }
  A->arrows = arrows;
  A->d = [x_of, t_of, unit_pt](const JPoint& a) { return unit_pt(x_of(a), t_of(a)); };
  A->r = [r_of, t_of, unit_pt](const JPoint& a) { return unit_pt(r_of(a), t_of(a)); };
  A->u = [n, K, make](const JPoint& xt) {
    return make(JPoint{0, slice(xt.x, 0, n)}, JVec(K, Jet(0.0)), xt.x.back());
  };
  A->inv = [e, x_of, X_of, t_of, make](const JPoint& a) {
    auto [y, Y] = e.chart_inv(x_of(a), X_of(a), t_of(a));
    return make(y, Y, t_of(a));
  };
  A->mul_raw = [e, x_of, X_of, t_of, make](const JPoint& a, const JPoint& b) {
    return make(x_of(b), e.chart_mul(x_of(a), X_of(a), x_of(b), X_of(b), t_of(b)), t_of(b));
  };
  A->sample_source_fiber = [M, G, e, K, n](const Point& xt, Rng& rng) {
    for (int attempt = 0; attempt < 400; ++attempt) {
      Point a = xt;
      a.x.resize(n);
      for (std::size_t i = 0; i < K; ++i) a.x.push_back(rng.uniform(-1.0, 1.0));
      a.x.push_back(xt.x.back());
      const JPoint ja = lift(a);
      const JPoint x{0, slice(ja.x, 0, n)};
      if (!M->inside || M->contains(values(G->r(e.exp(x, slice(ja.x, n, K), ja.x.back()))))) return a;
    }
    throw Error(ErrorKind::Sampling, "no adiabatic arrow with this source stays in the units", format_vector(xt.x));
  };
  A->algebroid_rank = k;
  A->algebroid_frame = [n, K](const Point&) {
    std::vector<VectorField> out;
    for (std::size_t i = 0; i < K; ++i)
      out.push_back([n, K, i](const JPoint&) {
        JVec v(n + K + 1, Jet(0.0));
        v[n + i] = 1.0;
        return v;
      });
    return out;
  };

  AdiabaticGroupoid ad;
  ad.groupoid = A;
  ad.base = G;
  ad.rank = k;
  ad.zero_part = group_bundle(M, k);
  ad.positive_part = product_groupoid(G, space_groupoid(open_half_line()));
  ad.chart = [e, x_of, X_of, t_of](const JPoint& a) {
    JPoint g = e.exp(x_of(a), X_of(a), t_of(a));
    g.x.push_back(t_of(a));
    return g;
  };
  return ad;
}

GroupAction scaling_action(const AdiabaticGroupoid& ad) {
  const auto K = static_cast<std::size_t>(ad.rank);
  GroupAction act;
  act.name = "R+*";
  act.dim = 1;
  act.on_units = [](const JVec& s, const JPoint& xt) {
    JPoint p = xt;
    p.x.back() = exp(-s[0]) * p.x.back();
    return p;
  };
  act.on_arrows = [K](const JVec& s, const JPoint& a) {
    JPoint b = a;
    const std::size_t n = a.x.size() - K - 1;
    const Jet up = exp(s[0]);
    for (std::size_t i = 0; i < K; ++i) b.x[n + i] = up * b.x[n + i];
    b.x.back() = b.x.back() / up;
    return b;
  };
  return act;
}

GroupoidMorphism scaling_morphism(const AdiabaticGroupoid& ad, double s) {
  const GroupAction act = scaling_action(ad);
  const JVec log_s{Jet(std::log(s))};
  GroupoidMorphism m;
  m.name = "scale(" + format_double(s) + ")";
  m.source = ad.groupoid;
  m.target = ad.groupoid;
  m.on_arrows = [act, log_s](const JPoint& a) { return act.on_arrows(log_s, a); };
  m.on_units = [act, log_s](const JPoint& x) { return act.on_units(log_s, x); };
  return m;
}

ScalingCheck check_scaling_action(const AdiabaticGroupoid& ad, const std::vector<double>& scales,
                                  const AxiomPlan& plan, double chart_tol) {
  const LieGroupoid& A = *ad.groupoid;
  const GroupAction act = scaling_action(ad);
  const std::size_t ns = scales.size();
  auto sample = [&](std::size_t i) {
    Rng rng(plan.seed, i);
    const Point xt = A.units->sample(rng, i);
    return A.sample_source_fiber(xt, rng);
  };
  auto apply = [&](double s, const Point& a) { return values(act.on_arrows(JVec{Jet(std::log(s))}, lift(a))); };

  ScalingCheck out;
  out.chart = run_sampled("scaling chart", chart_tol, plan.pairs * ns, [&](std::size_t idx) -> SampleOutcome {
    const double s = scales[idx % ns];
    const Point a = sample(idx / ns);
    const Point sa = apply(s, a);
    const std::size_t K = static_cast<std::size_t>(ad.rank);
    const std::size_t n = a.x.size() - K - 1;
    const double t = a.x.back();
    double res;
    if (t == 0.0) {
      // s.(X, 0) = (sX, 0)
      Point want = a;
      for (std::size_t i = 0; i < K; ++i) want.x[n + i] *= s;
      res = point_distance(sa, want);
    } else {
      // s.(g, t) = (g, t/s) with (g, t) = Phi(X, t)
      Point want = values(ad.chart(lift(a)));
      want.x.back() = t / s;
      res = point_distance(values(ad.chart(lift(sa))), want);
    }
    return {res, "s=" + format_double(s) + " a=" + format_vector(a.x)};
  });
  out.group_law = run_sampled("scaling group law", plan.tol, plan.pairs * ns * ns, [&](std::size_t idx) -> SampleOutcome {
    const double s1 = scales[idx % ns], s2 = scales[(idx / ns) % ns];
    const Point a = sample(idx / (ns * ns));
    const double res = point_distance(apply(s1, apply(s2, a)), apply(s1 * s2, a));
    return {res, "s=" + format_double(s1) + " s'=" + format_double(s2) + " a=" + format_vector(a.x)};
  });
  return out;
}

CheckReport check_adiabatic_structure(const AdiabaticGroupoid& ad, const AxiomPlan& plan) {
  CheckReport rep;
  rep.name = "adiabatic structure:" + ad.groupoid->name;
  const auto n = static_cast<std::size_t>(ad.base->units->blocks[0].embed_dim());
  const auto K = static_cast<std::size_t>(ad.rank);

  // t = 0: (x, X, 0) -> (x, X) in the bundle A(G).
  SubsetSpec zero{SubsetSpec::Kind::Closed, {}, {{{static_cast<int>(n), 0.0}}}, "t=0"};
  const auto red0 = reduction(ad.groupoid, zero);
  if (!red0.invariant) rep.fail("t = 0 slice is not invariant");
  GroupoidMorphism m0;
  m0.name = "t=0 -> A(G)";
  m0.source = red0.groupoid;
  m0.target = ad.zero_part;
  m0.on_arrows = [n, K](const JPoint& a) { return JPoint{0, slice(a.x, 0, n + K)}; };
  m0.on_units = [n](const JPoint& xt) { return JPoint{0, slice(xt.x, 0, n)}; };
  rep.merge(morphism_suite(m0, plan));

  // t > 0: the chart into G x (0, inf).
  SubsetSpec pos{SubsetSpec::Kind::Open, [](const Point& p) { return p.x.back() > 0.0; }, {}, "t>0"};
  GroupoidMorphism m1;
  m1.name = "chart";
  m1.source = reduction(ad.groupoid, pos).groupoid;
  m1.target = ad.positive_part;
  m1.on_arrows = ad.chart;
  m1.on_units = [](const JPoint& xt) { return xt; };
  rep.merge(morphism_suite(m1, plan));

  // First-order agreement: (exp(x, X, t) - u(x)) / t -> sum X_i e_i(x).
  const auto& G = *ad.base;
  const ExpData e = *G.exp;
  rep.merge(run_sampled("chart at t -> 0", 0.0, plan.pairs / 4 + 1, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed ^ 0xAD, i);
    const Point x = G.units->sample(rng, i);
    JVec X(K);
    for (auto& c : X) c = rng.uniform(-1.0, 1.0);
    const auto frame = G.algebroid_frame(x);
    const JPoint jx = lift(x);
    JVec lin(G.unit(x).x.size(), Jet(0.0));
    for (std::size_t j = 0; j < K; ++j) lin = axpy(X[j], frame[j](jx), lin);
    const Point ux = G.unit(x);
    auto err = [&](double t) {
      const Point g = values(e.exp(jx, X, Jet(t)));
      double worst = 0.0;
      for (std::size_t c = 0; c < g.x.size(); ++c)
        worst = std::max(worst, std::fabs((g.x[c] - ux.x[c]) / t - lin[c].value()));
      return worst;
    };
    const double e1 = err(1e-2), e2 = err(1e-3);
    // Linear convergence in t (exactly linear charts give e1 = e2 = 0).
    const bool ok = e2 <= 0.2 * e1 + 1e-9;
    return {ok ? 0.0 : e2, "x=" + format_vector(x.x)};
  }));
  return rep;
}

EdgeModification edge_modification_over(const SmoothMap& f1, const GroupoidPtr& H) {
  const AdiabaticGroupoid ad = adiabatic_groupoid(H);
  if (!f1.codomain->same_blocks(*ad.groupoid->units))
    throw Error(ErrorKind::Shape, "edge modification: projection must land in L x [0, inf)");
  auto S = semidirect_product(ad.groupoid, scaling_action(ad));
  auto G = std::const_pointer_cast<LieGroupoid>(pullback_groupoid(f1, S, H->allow_corners));
  G->name = "edge(" + f1.name + ", " + H->name + ")";
  G->kind = "edge";
  EdgeModification out;
  out.groupoid = G;
  out.f1 = f1;
  out.H = H;
  return out;
}

namespace {

SmoothMap time_extension(const SmoothMap& f) {
  if (!f.projection) throw Error(ErrorKind::Unsupported, "edge modification needs a block projection");
  auto N = product_manifold(*f.domain, *half_line("[0,inf)"));
  auto Lt = product_manifold(*f.codomain, *half_line("[0,inf)"));
  std::vector<int> kept = *f.projection;
  kept.push_back(static_cast<int>(f.domain->blocks[0].factors.size()));
  return block_projection(N, Lt, kept, f.name + "x1");
}

}  // namespace

EdgeModification edge_modification(const SmoothMap& f, const GroupoidPtr& H) {
  return edge_modification_over(time_extension(f), H);
}

EdgeModification edge_modification_ni(const SmoothMap& f, const GroupoidPtr& H) {
  auto G = std::const_pointer_cast<LieGroupoid>(product_groupoid(pullback_groupoid(f, H, H->allow_corners), dilation_action_groupoid()));
  G->name = "edge_ni(" + f.name + ", " + H->name + ")";
  G->kind = "edge_ni";
  EdgeModification out;
  out.groupoid = G;
  out.f1 = time_extension(f);
  out.H = H;
  out.anisotropic = true;
  return out;
}

GroupoidMorphism comparison_morphism(const EdgeModification& E, const EdgeModification& Eni) {
  if (E.anisotropic || !Eni.anisotropic)
    throw Error(ErrorKind::Pairing, "comparison morphism runs from the edge modification to its anisotropic variant");
  if (E.H != Eni.H || E.f1.projection != Eni.f1.projection || !E.f1.domain->same_blocks(*Eni.f1.domain))
    throw Error(ErrorKind::Pairing, "edge modifications built from different (f, H)");
  GroupoidMorphism m;
  m.name = "Psi";
  m.source = E.groupoid;
  m.target = Eni.groupoid;
  m.on_units = [](const JPoint& x) { return x; };
  m.on_arrows = comparison_arrow_map(E.H, projection_split(E.f1).fiber_coords.size());
  return m;
}

PointMap comparison_arrow_map(const GroupoidPtr& H, std::size_t nf) {
  if (!H->exp) throw Error(ErrorKind::Capability, "comparison morphism needs exp on " + H->name);
  const ExpData eh = *H->exp;
  const auto nl = static_cast<std::size_t>(H->units->blocks[0].embed_dim());
  const auto K = static_cast<std::size_t>(eh.rank);
  return [eh, nf, nl, K](const JPoint& a) {
    // (w_r, y, X, t, log s, w_d)
    const JVec wr = slice(a.x, 0, nf);
    const JPoint y{0, slice(a.x, nf, nl)};
    const JVec X = slice(a.x, nf + nl, K);
    const Jet t = a.x[nf + nl + K];
    const Jet ls = a.x[nf + nl + K + 1];
    const JVec wd = slice(a.x, nf + nl + K + 2, nf);
    const JPoint h = eh.exp(y, X, t);
    JPoint out{h.block, wr};
    out.x.insert(out.x.end(), h.x.begin(), h.x.end());
    out.x.insert(out.x.end(), wd.begin(), wd.end());
    out.x.push_back(exp(ls) * t);
    out.x.push_back(ls);
    return out;
  };
}

}  // namespace lg
