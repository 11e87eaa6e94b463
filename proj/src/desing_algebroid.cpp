#include <atomic>
#include <cmath>

#include "lg/desing.hpp"
#include "lg/error.hpp"

namespace lg {

namespace {

double rel_diff(const JVec& a, const JVec& b) {
  return max_abs(sub(a, b)) / (1.0 + std::max(max_abs(a), max_abs(b)));
}

std::size_t radius_coord(const TameSubmanifold& L) { return static_cast<std::size_t>(L.blow.codim); }

}  // namespace

AlgebroidPtr desing_algebroid(const TameSubmanifold& L) {
  auto BT = external_product(L.B, tangent_algebroid(half_line("[0,inf)")));
  auto scaled = rescale(BT, [](const JPoint& x) { return x.x.back(); }, "r(" + BT->name + ")");
  auto D = std::const_pointer_cast<LieAlgebroid>(pullback_algebroid(blow_up_projection(L), scaled));
  D->name = "[[A:L]]";
  return D;
}

AlgebroidPtr desing_algebroid_ni(const TameSubmanifold& L) {
  auto D = std::const_pointer_cast<LieAlgebroid>(
      pullback_algebroid(blow_up_projection(L), external_product(L.B, b_tangent_half_line())));
  D->name = "[[A:L]]_ni";
  return D;
}

CheckReport check_algebroid_iso(const AlgebroidPtr& Ap, const AlgebroidPtr& Dp, const TameSubmanifold& L,
                                const IsoPlan& plan) {
  const LieAlgebroid& A = *Ap;
  const LieAlgebroid& D = *Dp;
  if (A.rank != D.rank)
    throw Error(ErrorKind::Rank, "ranks differ: " + std::to_string(A.rank) + " vs " + std::to_string(D.rank));
  const std::size_t rc = radius_coord(L);
  const ManifoldPtr base = L.blow.total;
  std::atomic<std::size_t> on_S{0};

  auto rep = run_sampled("iso:" + A.name + "~" + D.name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point p = base->sample(rng, i);
    const bool boundary = p.x[rc] == 0.0;
    if (boundary) ++on_S;
    const auto FA = A.local_frame(p);
    const auto FD = D.local_frame(p);

    // Columns of Phi in the D frame, one per A frame element.
    auto solve_at = [&](const JPoint& y) {
      std::vector<JVec> cols;
      for (const auto& f : FD) cols.push_back(D.anchor(y, f(y)));
      std::vector<JVec> C;
      for (const auto& e : FA) C.push_back(solve_lsq(cols, A.anchor(y, e(y))));
      return C;
    };
    auto coefficients = [&](const JPoint& y) {
      if (!boundary) return solve_at(y);
      auto at = [&](double m) {
        JPoint z = y;
        z.x[rc] += m * plan.probe;
        return solve_at(z);
      };
      const auto c1 = at(1.0), c2 = at(2.0), c3 = at(3.0);
      std::vector<JVec> C(c1.size());
      for (std::size_t j = 0; j < C.size(); ++j)
        C[j] = add(sub(scaled(Jet(3.0), c1[j]), scaled(Jet(3.0), c2[j])), c3[j]);
      return C;
    };
    auto phi = [&](const JPoint& y, const JVec& v) {
      std::vector<JVec> ea;
      for (const auto& e : FA) ea.push_back(e(y));
      const JVec a = solve_lsq(ea, v);
      const auto C = coefficients(y);
      JVec coef(FD.size(), Jet(0.0));
      for (std::size_t j = 0; j < C.size(); ++j) coef = axpy(a[j], C[j], coef);
      JVec out;
      for (std::size_t b = 0; b < FD.size(); ++b) {
        const JVec f = FD[b](y);
        out = out.empty() ? scaled(coef[b], f) : axpy(coef[b], f, out);
      }
      return out;
    };

    const JPoint x = lift(p);
    const auto C = coefficients(x);
    Mat m(static_cast<Eigen::Index>(FD.size()), static_cast<Eigen::Index>(C.size()));
    for (std::size_t j = 0; j < C.size(); ++j)
      for (std::size_t b = 0; b < FD.size(); ++b)
        m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = C[j][b].value();
    const double smin = smallest_singular_value(m);
    const std::string where = std::string(boundary ? "S " : "") + "x=" + format_vector(p.x);
    if (!(smin >= plan.min_singular))
      return {INFINITY, where + " fiber map singular (smallest singular value " + format_double(smin) + ")"};

    double res = 0.0;
    std::vector<Section> mapped;
    for (const auto& e : FA) {
      res = std::max(res, rel_diff(D.anchor(x, phi(x, e(x))), A.anchor(x, e(x))));
      mapped.push_back([&phi, e](const JPoint& y) { return phi(y, e(y)); });
    }
    for (std::size_t a = 0; a < FA.size(); ++a)
      for (std::size_t b = a + 1; b < FA.size(); ++b) {
        const JVec lhs = phi(x, A.bracket(FA[a], FA[b], x));
        const JVec rhs = D.bracket(mapped[a], mapped[b], x);
        res = std::max(res, rel_diff(lhs, rhs));
      }
    return {res, where};
  });
  rep.notes.push_back("points=" + std::to_string(plan.count) + " on_S=" + std::to_string(on_S.load()));
  if (on_S.load() < 20) rep.fail("fewer than 20 samples on S");
  return rep;
}

CheckReport check_desing_algebroid_iso(const Desingularization& D, const IsoPlan& plan) {
  const AlgebroidPtr A = lie_algebroid_of(D.groupoid);
  const AlgebroidPtr expected = D.anisotropic ? desing_algebroid_ni(D.L) : desing_algebroid(D.L);
  return check_algebroid_iso(A, expected, D.L, plan);
}

CheckReport check_generator_closure(const std::string& name,
                                    const std::function<std::vector<VectorField>(const Point&)>& generators,
                                    const TameSubmanifold& L, const AlgebroidPlan& plan) {
  const std::size_t rc = radius_coord(L);
  const ManifoldPtr base = L.blow.total;
  constexpr double radii[3] = {1e-1, 1e-2, 1e-3};
  auto rep = run_sampled("closure:" + name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    Point p = base->sample_block(0, rng, 0);
    double res = 0.0;
    double cmax[3] = {0.0, 0.0, 0.0};
    for (int level = 0; level < 3; ++level) {
      p.x[rc] = radii[level];
      const JPoint x = lift(p);
      const auto gens = generators(p);
      std::vector<JVec> cols;
      for (const auto& g : gens) cols.push_back(g(x));
      for (std::size_t a = 0; a < gens.size(); ++a)
        for (std::size_t b = a + 1; b < gens.size(); ++b) {
          const JVec w = vector_field_bracket(gens[a], gens[b], x);
          const JVec c = solve_lsq(cols, w);
          res = std::max(res, lsq_residual(cols, c, w) / (1.0 + max_abs(w)));
          cmax[level] = std::max(cmax[level], max_abs(c));
        }
    }
    const std::string where = "x=" + format_vector(p.x);
    // Coefficients of a closed family stay bounded; 1/r growth shows up as a
    // factor 100 between the first and last radius.
    if (cmax[2] > 10.0 * cmax[0] + 1.0)
      return {INFINITY, where + " coefficients grow as r -> 0 (" + format_double(cmax[0]) + " -> " +
                            format_double(cmax[2]) + ")"};
    return {res, where};
  });
  return rep;
}

CheckReport check_bracket_closure(const AlgebroidPtr& D, const TameSubmanifold& L, const AlgebroidPlan& plan) {
  auto gens = [D](const Point& near) {
    std::vector<VectorField> out;
    for (auto& e : D->local_frame(near)) out.push_back([D, e](const JPoint& x) { return D->anchor(x, e(x)); });
    return out;
  };
  return check_generator_closure(D->name, gens, L, plan);
}

CheckReport check_ideal_property(const TameSubmanifold& L, const AlgebroidPlan& plan, bool fiber_part) {
  const AlgebroidPtr W = desing_algebroid(L);
  const AlgebroidPtr Wni = desing_algebroid_ni(L);
  const std::size_t rc = radius_coord(L);
  const auto kb = static_cast<std::size_t>(L.locus->blocks[0].embed_dim());
  const ManifoldPtr base = L.blow.total;
  // W -> W_ni on fiber vectors (xi_1, xi_2, X_F) -> (r xi_1, xi_2, X_F).
  auto include = [rc, kb, fiber_part](const Section& X) {
    return [rc, kb, X, fiber_part](const JPoint& y) {
      JVec v = X(y);
      for (std::size_t j = 0; j < kb; ++j) v[j] = y.x[rc] * v[j];
      if (!fiber_part)
        for (std::size_t j = kb + 1; j < v.size(); ++j) v[j] = Jet(0.0);
      return v;
    };
  };
  return run_sampled(std::string(fiber_part ? "ideal:" : "ideal(no fiber part):") + W->name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point p = base->sample_block(0, rng, 1);
    const JPoint x = lift(p);
    const Section X = random_section(*W, p, rng);
    const Section Y = random_section(*Wni, p, rng);
    const JVec v = Wni->bracket(include(X), Y, x);
    return {max_abs(JVec(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(kb))), "x=" + format_vector(p.x)};
  });
}

}  // namespace lg
