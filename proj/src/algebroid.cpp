#include "lg/algebroid.hpp"

#include <cmath>

#include "lg/error.hpp"

namespace lg {

namespace {

JVec zeros(std::size_t n) { return JVec(n, Jet(0.0)); }

JVec join(const JVec& a, const JVec& b) {
  JVec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

JVec pad_front(std::size_t n, const JVec& v) { return join(zeros(n), v); }

JVec pad_back(const JVec& v, std::size_t n) {
  JVec out = v;
  out.resize(v.size() + n, Jet(0.0));
  return out;
}

std::size_t fiber_len(const LieAlgebroid& A, const JPoint& x) {
  if (A.rank == 0) return 0;
  return A.local_frame(values(x))[0](x).size();
}

// Splits points of product_manifold(a, b).
struct BaseSplit {
  std::vector<int> a_embed;
  int nb = 1;
  BaseSplit(const CoordinateManifold& a, const CoordinateManifold& b) : nb(static_cast<int>(b.blocks.size())) {
    for (const auto& blk : a.blocks) a_embed.push_back(blk.embed_dim());
  }
  std::pair<JPoint, JPoint> operator()(const JPoint& p) const {
    const int i = p.block / nb;
    const auto cut = static_cast<std::ptrdiff_t>(a_embed[i]);
    return {JPoint{i, JVec(p.x.begin(), p.x.begin() + cut)}, JPoint{p.block % nb, JVec(p.x.begin() + cut, p.x.end())}};
  }
};

}  // namespace

Section LieAlgebroid::bracket_section(Section X, Section Y) const {
  auto br = bracket;
  return [br, X, Y](const JPoint& x) { return br(X, Y, x); };
}

Section LieAlgebroid::anchor_section(Section X) const {
  auto an = anchor;
  return [an, X](const JPoint& x) { return an(x, X(x)); };
}

JVec frame_coefficients(const std::vector<Section>& frame, const Section& X, const JPoint& x) {
  std::vector<JVec> cols;
  cols.reserve(frame.size());
  for (const auto& e : frame) cols.push_back(e(x));
  const JVec v = X(x);
  if (frame.empty()) {
    if (max_abs(v) > 1e-8) throw Error(ErrorKind::Section, "nonzero section of a rank-0 algebroid");
    return {};
  }
  const JVec c = solve_lsq(cols, v);
  const double res = lsq_residual(cols, c, v);
  if (res > 1e-8 * (1.0 + max_abs(v)))
    throw Error(ErrorKind::Section, "vector is not in the span of the frame", format_vector(values(x).x));
  return c;
}

JVec vector_field_bracket(const VectorField& V, const VectorField& W, const JPoint& x) {
  const int block = x.block;
  auto as_fn = [block](const VectorField& F) {
    return [&F, block](const JVec& y) { return F(JPoint{block, y}); };
  };
  const JVec v = V(x), w = W(x);
  return sub(directional(as_fn(W), x.x, v), directional(as_fn(V), x.x, w));
}

AlgebroidPtr frame_algebroid(FramePresentation p) {
  auto A = std::make_shared<LieAlgebroid>();
  A->name = p.name;
  A->base = p.base;
  A->rank = p.rank;
  A->anchor = p.anchor;
  A->local_frame = p.local_frame;
  auto anchor = p.anchor;
  auto frame_of = p.local_frame;
  auto fb = p.frame_bracket;
  A->bracket = [anchor, frame_of, fb](const Section& X, const Section& Y, const JPoint& x) {
    const Point near = values(x);
    const auto frame = frame_of(near);
    const JVec a = frame_coefficients(frame, X, x);
    const JVec b = frame_coefficients(frame, Y, x);
    const int block = x.block;
    auto coeffs = [&](const Section& S) {
      return [&frame, &S, block](const JVec& y) { return frame_coefficients(frame, S, JPoint{block, y}); };
    };
    const JVec da = directional(coeffs(X), x.x, anchor(x, Y(x)));
    const JVec db = directional(coeffs(Y), x.x, anchor(x, X(x)));
    std::vector<JVec> e;
    for (const auto& s : frame) e.push_back(s(x));
    JVec out = zeros(e.empty() ? 0 : e[0].size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
      out = axpy(db[i], e[i], out);
      out = axpy(-da[i], e[i], out);
      for (std::size_t j = i + 1; j < frame.size(); ++j) {
        const Jet c = a[i] * b[j] - a[j] * b[i];
        if (c.value() == 0.0 && c.vars() == 0) continue;
        out = axpy(c, fb(near, static_cast<int>(i), static_cast<int>(j), x), out);
      }
    }
    return out;
  };
  return A;
}

AlgebroidPtr lie_algebroid_of(const GroupoidPtr& G) {
  if (!G->algebroid_frame)
    throw Error(ErrorKind::Capability, "groupoid " + G->name + " does not expose an algebroid frame");
  for (std::size_t i = 0; i < 20; ++i) {
    Rng rng(0xF4A3E, i);
    const Point x = G->units->sample(rng, i);
    const JPoint ux = lift(G->unit(x));
    const auto frame = G->algebroid_frame(x);
    std::vector<Vec> cols;
    double leak = 0.0;
    for (const auto& xi : frame) {
      const JVec v = xi(lift(x));
      cols.push_back(values(std::span<const Jet>(v)));
      const JVec dv = directional([&](const JVec& g) { return G->d(JPoint{ux.block, g}).x; }, ux.x, v);
      leak = std::max(leak, max_abs(dv));
    }
    int rank = 0;
    if (!cols.empty()) {
      Mat m(static_cast<Eigen::Index>(cols[0].size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = to_evec(cols[j]);
      Eigen::JacobiSVD<Mat> svd(m);
      for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) rank += svd.singularValues()(j) > 1e-8;
    }
    if (leak > 1e-8 || rank != G->algebroid_rank)
      throw Error(ErrorKind::Rank, "algebroid frame of " + G->name + " is not a basis of ker d_*",
                  "x=" + format_vector(x.x) + " rank=" + std::to_string(rank));
  }
  auto A = std::make_shared<LieAlgebroid>();
  A->name = "A(" + G->name + ")";
  A->base = G->units;
  A->rank = G->algebroid_rank;
  A->anchor = [G](const JPoint& x, const JVec& v) {
    const JPoint ux = G->u(x);
    const int block = ux.block;
    return directional([&](const JVec& g) { return G->r(JPoint{block, g}).x; }, ux.x, v);
  };
  // Right-invariant extension X^R(g) = d/de (u(r g) + e X(r g)) g at e = 0.
  auto right_invariant = [G](const Section& X) {
    return [G, X](const JPoint& g) {
      const JPoint rg = G->r(g);
      const JPoint urg = G->u(rg);
      const JVec xv = X(rg);
      const JVec zero{Jet(0.0)}, one{Jet(1.0)};
      return directional(
          [&](const JVec& e) { return G->mul_raw(JPoint{urg.block, axpy(e[0], xv, urg.x)}, g).x; }, zero, one);
    };
  };
  A->bracket = [G, right_invariant](const Section& X, const Section& Y, const JPoint& x) {
    return vector_field_bracket(right_invariant(X), right_invariant(Y), G->u(x));
  };
  auto frame = G->algebroid_frame;
  A->local_frame = [frame](const Point& near) { return frame(near); };
  return A;
}

AlgebroidPtr tangent_algebroid(ManifoldPtr M) {
  auto A = std::make_shared<LieAlgebroid>();
  A->name = "T" + (M->name.empty() ? M->describe() : M->name);
  A->base = M;
  A->rank = M->dim();
  A->anchor = [](const JPoint&, const JVec& v) { return v; };
  A->bracket = [](const Section& X, const Section& Y, const JPoint& x) { return vector_field_bracket(X, Y, x); };
  A->local_frame = [M](const Point& near) { return tangent_frame(M->blocks[near.block], near); };
  return A;
}

AlgebroidPtr zero_algebroid(ManifoldPtr M) {
  auto A = std::make_shared<LieAlgebroid>();
  A->name = "0";
  A->base = M;
  A->rank = 0;
  A->anchor = [](const JPoint& x, const JVec&) { return zeros(x.x.size()); };
  A->bracket = [](const Section&, const Section&, const JPoint&) { return JVec{}; };
  A->local_frame = [](const Point&) { return std::vector<Section>{}; };
  return A;
}

AlgebroidPtr external_product(const AlgebroidPtr& A, const AlgebroidPtr& B) {
  const BaseSplit split(*A->base, *B->base);
  FramePresentation p;
  p.name = A->name + "x" + B->name;
  p.base = product_manifold(*A->base, *B->base);
  p.rank = A->rank + B->rank;
  p.anchor = [A, B, split](const JPoint& x, const JVec& v) {
    auto [x1, x2] = split(x);
    const auto n1 = static_cast<std::ptrdiff_t>(fiber_len(*A, x1));
    return join(A->anchor(x1, JVec(v.begin(), v.begin() + n1)), B->anchor(x2, JVec(v.begin() + n1, v.end())));
  };
  p.local_frame = [A, B, split](const Point& near) {
    auto [n1, n2] = split(lift(near));
    std::vector<Section> out;
    for (auto& e : A->local_frame(values(n1)))
      out.push_back([B, e, split](const JPoint& x) {
        auto [x1, x2] = split(x);
        return pad_back(e(x1), fiber_len(*B, x2));
      });
    for (auto& f : B->local_frame(values(n2)))
      out.push_back([A, f, split](const JPoint& x) {
        auto [x1, x2] = split(x);
        return pad_front(fiber_len(*A, x1), f(x2));
      });
    return out;
  };
  const int ra = A->rank;
  p.frame_bracket = [A, B, split, ra](const Point& near, int i, int j, const JPoint& x) {
    auto [n1, n2] = split(lift(near));
    auto [x1, x2] = split(x);
    if (i < ra && j < ra) {
      const auto fa = A->local_frame(values(n1));
      return pad_back(A->bracket(fa[i], fa[j], x1), fiber_len(*B, x2));
    }
    if (i >= ra && j >= ra) {
      const auto fb = B->local_frame(values(n2));
      return pad_front(fiber_len(*A, x1), B->bracket(fb[i - ra], fb[j - ra], x2));
    }
    return zeros(fiber_len(*A, x1) + fiber_len(*B, x2));
  };
  return frame_algebroid(std::move(p));
}

AlgebroidPtr pullback_algebroid(const SmoothMap& f, const AlgebroidPtr& B) {
  const ProjectionSplit ps = projection_split(f);
  const std::size_t nf = ps.fiber_coords.size();
  const ModelBlock F = ps.fiber;
  FramePresentation p;
  p.name = "pullback(" + f.name + ", " + B->name + ")";
  p.base = f.domain;
  p.rank = B->rank + F.dim();
  p.anchor = [B, f, ps, nf](const JPoint& m, const JVec& v) {
    const auto nb = static_cast<std::ptrdiff_t>(v.size() - nf);
    const JVec rho = B->anchor(f.value(m), JVec(v.begin(), v.begin() + nb));
    return ps.assemble(JVec(v.begin() + nb, v.end()), rho).x;
  };
  auto fiber_frame = [F, ps](const Point& near) {
    return tangent_frame(F, values(JPoint{0, ps.fiber_part(lift(near))}));
  };
  p.local_frame = [B, f, ps, nf, fiber_frame](const Point& near) {
    std::vector<Section> out;
    for (auto& b : B->local_frame(f(near)))
      out.push_back([b, f, nf](const JPoint& m) { return pad_back(b(f.value(m)), nf); });
    for (auto& V : fiber_frame(near))
      out.push_back([B, V, f, ps](const JPoint& m) {
        return pad_front(fiber_len(*B, f.value(m)), V(JPoint{0, ps.fiber_part(m)}));
      });
    return out;
  };
  const int rb = B->rank;
  p.frame_bracket = [B, f, ps, nf, rb, fiber_frame](const Point& near, int i, int j, const JPoint& m) {
    const JPoint l = f.value(m);
    if (i < rb && j < rb) {
      const auto fb = B->local_frame(f(near));
      return pad_back(B->bracket(fb[i], fb[j], l), nf);
    }
    if (i >= rb && j >= rb) {
      const auto ff = fiber_frame(near);
      return pad_front(fiber_len(*B, l), vector_field_bracket(ff[i - rb], ff[j - rb], JPoint{0, ps.fiber_part(m)}));
    }
    return zeros(fiber_len(*B, l) + nf);
  };
  return frame_algebroid(std::move(p));
}

AlgebroidPtr rescale(const AlgebroidPtr& A, std::function<Jet(const JPoint&)> f, std::string name) {
  for (std::size_t b = 0; b < A->base->blocks.size(); ++b) {
    bool all_zero = true;
    for (std::size_t i = 0; i < 32 && all_zero; ++i) {
      Rng rng(0x5CA1E, i);
      const Point p = A->base->sample_block(static_cast<int>(b), rng, 0);
      all_zero = std::fabs(f(lift(p)).value()) < 1e-14;
    }
    if (all_zero) throw Error(ErrorKind::Degeneracy, "rescaling function vanishes on block " + std::to_string(b));
  }
  auto R = std::make_shared<LieAlgebroid>(*A);
  R->name = std::move(name);
  R->anchor = [A, f](const JPoint& x, const JVec& v) { return scaled(f(x), A->anchor(x, v)); };
  R->bracket = [A, f](const Section& X, const Section& Y, const JPoint& x) {
    const int block = x.block;
    auto fj = [&](const JVec& y) { return f(JPoint{block, y}); };
    const JVec xv = X(x), yv = Y(x);
    const Jet xf = directional_scalar(fj, x.x, A->anchor(x, xv));
    const Jet yf = directional_scalar(fj, x.x, A->anchor(x, yv));
    JVec out = scaled(f(x), A->bracket(X, Y, x));
    out = axpy(xf, yv, out);
    return axpy(-yf, xv, out);
  };
  return R;
}

AlgebroidPtr adiabatic_algebroid(const AlgebroidPtr& A) {
  auto P = external_product(A, zero_algebroid(half_line("[0,inf)")));
  return rescale(P, [](const JPoint& x) { return x.x.back(); }, "adiabatic(" + A->name + ")");
}

AlgebroidPtr b_tangent_half_line() {
  return rescale(tangent_algebroid(half_line("[0,inf)")), [](const JPoint& x) { return x.x[0]; }, "bT[0,inf)");
}

Section random_section(const LieAlgebroid& A, const Point& near, Rng& rng) {
  const auto frame = A.local_frame(near);
  struct Coef {
    double a, b, phase;
    Vec w;
  };
  std::vector<Coef> cs;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    Coef c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 6.283185307179586), {}};
    for (std::size_t k = 0; k < near.x.size(); ++k) c.w.push_back(rng.uniform(-1.0, 1.0));
    cs.push_back(std::move(c));
  }
  return [frame, cs](const JPoint& x) {
    JVec out;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      Jet arg(cs[i].phase);
      for (std::size_t k = 0; k < x.x.size(); ++k) arg += cs[i].w[k] * x.x[k];
      const Jet c = cs[i].a + cs[i].b * sin(arg);
      const JVec e = frame[i](x);
      out = out.empty() ? scaled(c, e) : axpy(c, e, out);
    }
    return out;
  };
}

namespace {

double rel(const JVec& diff, std::initializer_list<const JVec*> terms) {
  double scale = 1.0;
  for (const JVec* t : terms) scale = std::max(scale, max_abs(*t));
  return max_abs(diff) / scale;
}

}  // namespace

CheckReport check_algebroid_axioms(const AlgebroidPtr& Ap, const AlgebroidPlan& plan) {
  const LieAlgebroid& A = *Ap;
  return run_sampled("algebroid:" + A.name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point p = A.base->sample(rng, i);
    const JPoint x = lift(p);
    const Section X = random_section(A, p, rng), Y = random_section(A, p, rng), Z = random_section(A, p, rng);
    Vec w;
    for (std::size_t k = 0; k < p.x.size(); ++k) w.push_back(rng.uniform(-1.0, 1.0));
    auto f = [w](const JPoint& y) {
      Jet s(0.0);
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * y.x[k];
      return cos(s) + 2.0;
    };
    const Section fY = [f, Y](const JPoint& y) { return scaled(f(y), Y(y)); };

    const JVec xy = A.bracket(X, Y, x), yx = A.bracket(Y, X, x);
    double res = rel(add(xy, yx), {&xy});

    const JVec lhs = A.bracket(X, fY, x);
    const int block = x.block;
    const Jet xf = directional_scalar([&](const JVec& y) { return f(JPoint{block, y}); }, x.x, A.anchor(x, X(x)));
    const JVec rhs = axpy(xf, Y(x), scaled(f(x), xy));
    res = std::max(res, rel(sub(lhs, rhs), {&lhs, &rhs}));

    const JVec rho_xy = A.anchor(x, xy);
    const JVec vf = vector_field_bracket(A.anchor_section(X), A.anchor_section(Y), x);
    res = std::max(res, rel(sub(rho_xy, vf), {&rho_xy, &vf}));

    const JVec j1 = A.bracket(A.bracket_section(X, Y), Z, x);
    const JVec j2 = A.bracket(A.bracket_section(Y, Z), X, x);
    const JVec j3 = A.bracket(A.bracket_section(Z, X), Y, x);
    res = std::max(res, rel(add(add(j1, j2), j3), {&j1, &j2, &j3}));
    return {res, "x=" + format_vector(p.x)};
  });
}

CheckReport check_isotropy_closure(const AlgebroidPtr& Ap, const AlgebroidPlan& plan) {
  const LieAlgebroid& A = *Ap;
  return run_sampled("isotropy:" + A.name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point p = A.base->sample(rng, i);
    const JPoint x = lift(p);
    const auto frame = A.local_frame(p);
    if (frame.empty()) return {};
    Mat rho(static_cast<Eigen::Index>(p.x.size()), static_cast<Eigen::Index>(frame.size()));
    for (std::size_t j = 0; j < frame.size(); ++j)
      rho.col(static_cast<Eigen::Index>(j)) = to_evec(values(std::span<const Jet>(A.anchor(x, frame[j](x)))));
    Eigen::JacobiSVD<Mat> svd(rho, Eigen::ComputeFullV);
    std::vector<Section> kernel;
    const auto& sv = svd.singularValues();
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(frame.size()); ++j) {
      if (j < sv.size() && sv(j) > 1e-9) continue;
      const Vec k = to_vec(svd.matrixV().col(j));
      kernel.push_back([frame, k](const JPoint& y) {
        JVec out;
        for (std::size_t c = 0; c < frame.size(); ++c) {
          const JVec e = frame[c](y);
          out = out.empty() ? scaled(Jet(k[c]), e) : axpy(Jet(k[c]), e, out);
        }
        return out;
      });
    }
    double res = 0.0;
    for (std::size_t a = 0; a < kernel.size(); ++a)
      for (std::size_t b = a + 1; b < kernel.size(); ++b)
        res = std::max(res, max_abs(A.anchor(x, A.bracket(kernel[a], kernel[b], x))));
    return {res, "x=" + format_vector(p.x)};
  });
}

CheckReport check_algebroid_morphism(const AlgebroidPtr& Ap, const AlgebroidPtr& Bp, const FiberMap& phi,
                                     const AlgebroidPlan& plan) {
  const LieAlgebroid& A = *Ap;
  const LieAlgebroid& B = *Bp;
  return run_sampled("morphism:" + A.name + "->" + B.name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point p = A.base->sample(rng, i);
    const JPoint x = lift(p);
    const Section X = random_section(A, p, rng), Y = random_section(A, p, rng);
    auto push = [&phi](const Section& S) { return [&phi, S](const JPoint& y) { return phi(y, S(y)); }; };
    const JVec a1 = A.anchor(x, X(x));
    const JVec a2 = B.anchor(x, phi(x, X(x)));
    double res = rel(sub(a1, a2), {&a1});
    const JVec b1 = phi(x, A.bracket(X, Y, x));
    const JVec b2 = B.bracket(push(X), push(Y), x);
    res = std::max(res, rel(sub(b1, b2), {&b1, &b2}));
    return {res, "x=" + format_vector(p.x)};
  });
}

}  // namespace lg
