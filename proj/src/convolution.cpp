#include "lg/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "lg/error.hpp"
#include "lg/parallel.hpp"
#include "lg/simd/kernels.hpp"

namespace lg {

GaussLegendre gauss_legendre(int order) {
  if (order < 1) throw Error(ErrorKind::Constraint, "quadrature order must be positive");
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(order); it != cache.end()) return it->second;
  }
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= order; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= order; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    if (order == 1) p0 = 1.0;
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(order - 1 - i);
    rule.nodes[a] = -x;
    rule.nodes[b] = x;
    rule.weights[a] = rule.weights[b] = w;
  }
  if (order % 2 == 1) rule.nodes[static_cast<std::size_t>(order / 2)] = 0.0;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(order, rule);
  return rule;
}

namespace {

// C-infinity step: 0 for u <= 0, 1 for u >= 1.
double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

}  // namespace

FiberQuadrature fiber_quadrature(const GroupoidPtr& G, int order, double R, double cutoff_width) {
  if (!G->fiber_chart)
    throw Error(ErrorKind::Unsupported, "groupoid " + G->name + " has no fiber chart; pass one explicitly");
  return fiber_quadrature(G, *G->fiber_chart, order, R, cutoff_width);
}

FiberQuadrature fiber_quadrature(const GroupoidPtr& G, const FiberChart& chart, int order, double R,
                                 double cutoff_width) {
  if (!(R > 0.0)) throw Error(ErrorKind::Constraint, "truncation radius must be positive");
  FiberQuadrature q;
  q.groupoid = G;
  q.chart = chart;
  q.order = order;
  q.R = R;
  q.cutoff_width = cutoff_width < 0.0 ? R / 16.0 : cutoff_width;
  const auto dim = static_cast<std::size_t>(chart.dim);
  const GaussLegendre rule = gauss_legendre(order);
  std::vector<std::vector<double>> nodes(dim), weights(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const bool tl = chart.lo[j] < -R, th = chart.hi[j] > R;
    q.lo.push_back(tl ? -R : chart.lo[j]);
    q.hi.push_back(th ? R : chart.hi[j]);
    q.truncated_lo.push_back(tl);
    q.truncated_hi.push_back(th);
    const double c = 0.5 * (q.lo[j] + q.hi[j]), h = 0.5 * (q.hi[j] - q.lo[j]);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      nodes[j].push_back(c + h * rule.nodes[i]);
      weights[j].push_back(h * rule.weights[i]);
    }
  }
  std::size_t total = 1;
  for (std::size_t j = 0; j < dim; ++j) total *= nodes[j].size();
  std::vector<std::size_t> idx(dim, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vec c(dim);
    double w = 1.0, chi = 1.0;
    for (std::size_t j = 0; j < dim; ++j) {
      c[j] = nodes[j][idx[j]];
      w *= weights[j][idx[j]];
      if (q.cutoff_width > 0.0) {
        if (q.truncated_hi[j]) chi *= smooth_step((q.hi[j] - c[j]) / q.cutoff_width);
        if (q.truncated_lo[j]) chi *= smooth_step((c[j] - q.lo[j]) / q.cutoff_width);
      }
    }
    q.coords.push_back(std::move(c));
    q.base_weights.push_back(w);
    q.cutoff.push_back(chi);
    for (std::size_t j = dim; j-- > 0;) {
      if (++idx[j] < nodes[j].size()) break;
      idx[j] = 0;
    }
  }
  return q;
}

FiberQuadrature::Grid FiberQuadrature::at(const Point& x) const {
  Grid g;
  g.arrows.reserve(coords.size());
  g.weights.reserve(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    g.arrows.push_back(groupoid->canonical(chart.arrow(x, coords[i])));
    g.weights.push_back(base_weights[i] * chart.density(x, coords[i]));
  }
  return g;
}

double FiberQuadrature::volume(const Point& x) const {
  const Grid g = at(x);
  double v = 0.0;
  for (double w : g.weights) v += w;
  return v;
}

namespace {

void require_fit(const Kernel& psi, const FiberQuadrature& q) {
  if (psi.compact && psi.support_radius > q.R)
    throw Error(ErrorKind::Truncation,
                "support radius " + format_double(psi.support_radius) + " of " + psi.name +
                    " exceeds truncation radius " + format_double(q.R));
}

// phi(g h_i^{-1}), psi(h_i) and the effective weights at d(g).
struct Integrand {
  std::vector<double> w, a, b;
};

Integrand integrand(const Kernel& phi, const Kernel& psi, const FiberQuadrature& q, const Point& g) {
  const LieGroupoid& G = *q.groupoid;
  const FiberQuadrature::Grid grid = q.at(G.source(g));
  Integrand I;
  const std::size_t m = grid.arrows.size();
  I.w.resize(m);
  I.a.resize(m);
  I.b.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Point& h = grid.arrows[i];
    I.w[i] = grid.weights[i] * (psi.compact ? 1.0 : q.cutoff[i]);
    I.b[i] = psi.eval(h);
    I.a[i] = phi.eval(G.mul(g, G.inverse(h)));
  }
  return I;
}

}  // namespace

Kernel convolve(const Kernel& phi, const Kernel& psi, const FiberQuadrature& q) {
  require_fit(psi, q);
  Kernel out;
  out.name = "(" + phi.name + "*" + psi.name + ")";
  out.compact = phi.compact && psi.compact;
  // Valid for charts where the product's coordinates are sums of the factors'.
  out.support_radius = out.compact ? phi.support_radius + psi.support_radius : INFINITY;
  out.eval = [phi, psi, q](const Point& g) {
    const Integrand I = integrand(phi, psi, q, g);
    return simd::weighted_dot3(I.w, I.a, I.b);
  };
  return out;
}

double cutoff_budget(const Kernel& phi, const Kernel& psi, const FiberQuadrature& q, const Point& g) {
  if (psi.compact) return 0.0;
  const LieGroupoid& G = *q.groupoid;
  const FiberQuadrature::Grid grid = q.at(G.source(g));
  double s = 0.0;
  for (std::size_t i = 0; i < grid.arrows.size(); ++i) {
    if (q.cutoff[i] == 1.0) continue;
    const Point& h = grid.arrows[i];
    s += grid.weights[i] * (1.0 - q.cutoff[i]) * std::fabs(phi.eval(G.mul(g, G.inverse(h))) * psi.eval(h));
  }
  return s;
}

namespace {

Point default_arrow(const LieGroupoid& G, Rng& rng, std::size_t i) {
  const Point x = G.units->sample(rng, i);
  return G.canonical(G.sample_source_fiber(x, rng));
}

Point plan_arrow(const ConvolutionPlan& plan, const LieGroupoid& G, std::size_t i) {
  Rng rng(plan.seed, i);
  return plan.arrows ? plan.arrows(rng, i) : default_arrow(G, rng, i);
}

}  // namespace

CheckReport associativity_check(const Kernel& phi, const Kernel& psi, const Kernel& chi, const FiberQuadrature& q,
                                const ConvolutionPlan& plan) {
  const Kernel left = convolve(convolve(phi, psi, q), chi, q);
  const Kernel right = convolve(phi, convolve(psi, chi, q), q);
  const LieGroupoid& G = *q.groupoid;
  std::vector<double> budget(plan.count, 0.0);
  auto rep = run_sampled("associativity:" + q.groupoid->name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    const Point g = plan_arrow(plan, G, i);
    const Kernel pc = convolve(phi, psi, q);
    budget[i] = std::max(cutoff_budget(pc, chi, q, g), cutoff_budget(phi, convolve(psi, chi, q), q, g));
    return {std::fabs(left.eval(g) - right.eval(g)), "g=" + format_vector(g.x)};
  });
  rep.notes.push_back("order=" + std::to_string(q.order) + " R=" + format_double(q.R) +
                      " cutoff_budget=" + format_double(*std::max_element(budget.begin(), budget.end())));
  return rep;
}

CheckReport right_invariance_check(const FiberQuadrature& q, const ConvolutionPlan& plan, double step) {
  const LieGroupoid& G = *q.groupoid;
  auto f = [](const Point& h) {
    double s = 0.0;
    for (double v : h.x) s += v * v;
    return std::exp(-s);
  };
  auto integral = [&](const Point& x, const std::function<Point(const Point&)>& move) {
    const FiberQuadrature::Grid grid = q.at(x);
    std::vector<double> vals(grid.arrows.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = f(move(grid.arrows[i]));
    return simd::weighted_sum(grid.weights, vals);
  };
  return run_sampled("right_invariance:" + G.name, plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point x = G.units->sample(rng, i);
    // k = g^{-1} for a chart arrow g in G_x, so r(k) = x. Unbounded chart
    // directions stay within `step` so the translated integrand fits the box.
    Vec c(static_cast<std::size_t>(q.chart.dim));
    for (std::size_t j = 0; j < c.size(); ++j)
      c[j] = rng.uniform(std::max(q.chart.lo[j], -step), std::min(q.chart.hi[j], step));
    const Point k = G.inverse(G.canonical(q.chart.arrow(x, c)));
    const double lhs = integral(x, [&](const Point& h) { return G.mul(h, k); });
    const double rhs = integral(G.source(k), [](const Point& h) { return h; });
    return {std::fabs(lhs - rhs) / (1.0 + std::fabs(rhs)), "k=" + format_vector(k.x)};
  });
}

CheckReport check_kernel_support(const Kernel& K, const FiberQuadrature& q, const ConvolutionPlan& plan) {
  const LieGroupoid& G = *q.groupoid;
  return run_sampled("support:" + K.name, 1e-12, plan.count, [&](std::size_t i) -> SampleOutcome {
    if (!K.compact) return {0.0, ""};
    Rng rng(plan.seed, i);
    const Point x = G.units->sample(rng, i);
    const auto dim = static_cast<std::size_t>(q.chart.dim);
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < dim; ++j)
      if (q.chart.hi[j] > K.support_radius || q.chart.lo[j] < -K.support_radius) open.push_back(j);
    if (open.empty()) return {0.0, ""};
    Vec c(dim);
    for (std::size_t j = 0; j < dim; ++j)
      c[j] = rng.uniform(std::max(q.chart.lo[j], -K.support_radius), std::min(q.chart.hi[j], K.support_radius));
    // Push one coordinate beyond the support on a side where the chart allows it.
    const std::size_t j = open[static_cast<std::size_t>(rng.index(static_cast<int>(open.size())))];
    const double out = K.support_radius * (1.0 + rng.uniform(1e-3, 1.0));
    c[j] = (q.chart.hi[j] > K.support_radius && (q.chart.lo[j] >= -K.support_radius || rng.uniform() < 0.5)) ? out
                                                                                                             : -out;
    const Point h = G.canonical(q.chart.arrow(x, c));
    return {std::fabs(K.eval(h)), "h=" + format_vector(h.x)};
  });
}

// ---- edge calculus demo ---------------------------------------------------------

namespace {

double gauss(const Vec& v, double s2) {
  double a = 0.0;
  for (double x : v) a += x * x;
  return std::exp(-a / (2.0 * s2));
}

Vec part(const Vec& v, std::size_t off, std::size_t len) {
  return Vec(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + len));
}

// Sphere angles of block_chart order: w = (cos a1, sin a1 cos a2, ..., sin a1 ... sin a_{n-1}).
Vec sphere_point(const Vec& a) {
  Vec w;
  double s = 1.0;
  for (double t : a) {
    w.push_back(s * std::cos(t));
    s *= std::sin(t);
  }
  w.push_back(s);
  return w;
}

double sphere_density(const Vec& a) {
  double d = 1.0;
  const std::size_t p = a.size();
  for (std::size_t j = 0; j + 1 < p; ++j) d *= std::pow(std::sin(a[j]), static_cast<double>(p - 1 - j));
  return d;
}

// Guards against a vacuous comparison of products that are all near zero.
void note_size(CheckReport& r, const std::vector<double>& size) {
  const double m = size.empty() ? 0.0 : *std::max_element(size.begin(), size.end());
  r.notes.push_back(r.name + " max|product|=" + format_double(m));
  if (m < 1e-3) r.fail("compared products are all below 1e-3");
}

}  // namespace

CheckReport edge_operator_demo(int n, int k, const EdgeDemoPlan& plan) {
  if (n < 2 || k < 1) throw Error(ErrorKind::Constraint, "edge_operator_demo needs n >= 2 and k >= 1");
  if (plan.order % 2 != 0) throw Error(ErrorKind::Constraint, "edge_operator_demo needs an even quadrature order");
  const auto N = static_cast<std::size_t>(n), K = static_cast<std::size_t>(k);
  const GroupoidPtr P = pair_groupoid(euclidean(n + k, "R" + std::to_string(n + k)));
  SliceSpec spec;
  for (int i = 0; i < n; ++i) spec.normal_factors.push_back(i);
  const TameSubmanifold L = tame_submanifold(P, spec);
  const Desingularization D = desingularize(P, L);
  const GroupoidPtr Gd = D.groupoid;
  const auto far_block = static_cast<int>(D.glue.G1->arrows->blocks.size());

  CheckReport rep;
  rep.name = "edge_operator_demo(" + std::to_string(n) + "," + std::to_string(k) + ")";

  // ---- over S: edge arrows (w_r, y, X, t, log s, w_d) with t = 0.
  std::vector<int> kept;
  for (std::size_t j = 0; j < L.blow.tangential_factors.size(); ++j) kept.push_back(1 + static_cast<int>(j));
  const SmoothMap fS = block_projection(L.blow.boundary, L.locus, kept, "pi_S");
  const GroupoidPtr model = pullback_groupoid(fS, group_bundle(L.locus, k, true), true);
  const std::size_t tpos = N + 2 * K;

  FiberChart sc;
  sc.dim = n - 1 + k + 1;
  for (int j = 1; j < n; ++j) {
    sc.lo.push_back(0.0);
    sc.hi.push_back(j == n - 1 ? 2 * std::numbers::pi : std::numbers::pi);
    sc.periodic.push_back(j == n - 1);
  }
  for (int j = 0; j <= k; ++j) {
    sc.lo.push_back(-INFINITY);
    sc.hi.push_back(INFINITY);
    sc.periodic.push_back(0);
  }
  sc.arrow = [N, K](const Point& x, const Vec& c) {
    Vec a = sphere_point(part(c, 0, N - 1));
    const Vec y = part(x.x, N + 1, K), X = part(c, N - 1, K);
    a.insert(a.end(), y.begin(), y.end());
    a.insert(a.end(), X.begin(), X.end());
    a.push_back(0.0);
    a.push_back(c.back());
    a.insert(a.end(), x.x.begin(), x.x.begin() + static_cast<std::ptrdiff_t>(N));
    return Point{0, a};
  };
  sc.density = [N](const Point&, const Vec& c) { return sphere_density(part(c, 0, N - 1)); };

  // Test kernels on the edge part, vanishing before either radius reaches 1/2
  // so that they extend by zero to the far arrows.
  auto edge_kernel = [N, K, tpos, far_block](double s2, double wr, double wd, std::string name) {
    Kernel ker;
    ker.name = std::move(name);
    ker.eval = [=](const Point& a) {
      if (a.block >= far_block) return 0.0;
      const double t = a.x[tpos], ls = a.x[tpos + 1];
      const double bump = smooth_step(1.0 - 2.0 * t) * smooth_step(1.0 - 2.0 * std::exp(ls) * t);
      return bump * gauss(part(a.x, N + K, K), s2) * std::exp(-ls * ls / (2.0 * s2)) *
             (1.0 + wr * a.x[0] + wd * a.x[tpos + 2 + N - 1]) * std::exp(-0.1 * (1.0 + t) * gauss(part(a.x, N, K), 4.0));
    };
    return ker;
  };
  auto restrict_S = [tpos](const Kernel& ker) {
    Kernel r = ker;
    r.name = ker.name + "|S";
    r.eval = [ker, tpos](const Point& b) {
      Point a = b;
      a.x.insert(a.x.begin() + static_cast<std::ptrdiff_t>(tpos), 0.0);
      return ker.eval(a);
    };
    return r;
  };
  {
    const Kernel phi = edge_kernel(0.6, 0.3, -0.2, "phi"), psi = edge_kernel(0.9, -0.1, 0.4, "psi");
    const FiberQuadrature qS = fiber_quadrature(Gd, sc, plan.order, plan.R);
    const FiberQuadrature qM = fiber_quadrature(model, plan.order, plan.R);
    const Kernel on_D = convolve(phi, psi, qS);
    const Kernel on_model = convolve(restrict_S(phi), restrict_S(psi), qM);
    std::vector<double> size(plan.count, 0.0);
    auto r = run_sampled("S:restriction_multiplicative", plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
      Rng rng(plan.seed, i);
      Point x = L.blow.boundary_to_total(L.blow.boundary->sample(rng, i));
      Vec c(static_cast<std::size_t>(sc.dim));
      for (std::size_t j = 0; j < c.size(); ++j)
        c[j] = j + 1 < N ? rng.uniform(sc.lo[j], sc.hi[j]) : rng.uniform(-1.5, 1.5);
      const Point g = sc.arrow(x, c);
      Point gm = g;
      gm.x.erase(gm.x.begin() + static_cast<std::ptrdiff_t>(tpos));
      const double a = on_D.eval(g), b = on_model.eval(gm);
      size[i] = std::fabs(b);
      return {std::fabs(a - b) / (1.0 + std::fabs(b)), "g=" + format_vector(g.x)};
    });
    note_size(r, size);
    rep.merge(r);
  }

  // ---- interior: arrows of pair(M \ L), chart by the range point in M.
  {
    const BlowUpData blow = L.blow;
    FiberChart ic;
    ic.dim = n + k;
    ic.lo.assign(N + K, -INFINITY);
    ic.hi.assign(N + K, INFINITY);
    ic.periodic.assign(N + K, 0);
    ic.arrow = [blow, far_block](const Point& x, const Vec& c) {
      Vec a = c;
      const Point z = values(blow.blow_down.value(lift(x)));
      a.insert(a.end(), z.x.begin(), z.x.end());
      return Point{far_block, a};
    };
    ic.density = [](const Point&, const Vec&) { return 1.0; };
    auto pair_kernel = [](double s2, Vec shift, std::string name) {
      Kernel ker;
      ker.name = std::move(name);
      ker.eval = [s2, shift](const Point& g) {
        const std::size_t m = g.x.size() / 2;
        Vec diff(m), mid(m);
        for (std::size_t i = 0; i < m; ++i) {
          diff[i] = g.x[i] - g.x[m + i] - shift[i];
          mid[i] = 0.5 * (g.x[i] + g.x[m + i]);
        }
        return gauss(diff, s2) * gauss(mid, 4.0);
      };
      return ker;
    };
    // Kernels on [[G:L]] read through kappa on both ends.
    auto via_kappa = [Gd, blow](const Kernel& ker) {
      Kernel out = ker;
      out.name = ker.name + "o kappa";
      out.eval = [ker, Gd, blow](const Point& g) {
        const Point r = blow.blow_down(Gd->target(g)), d = blow.blow_down(Gd->source(g));
        Vec a = r.x;
        a.insert(a.end(), d.x.begin(), d.x.end());
        return ker.eval(Point{0, a});
      };
      return out;
    };
    Vec s1(N + K, 0.0), s2v(N + K, 0.0);
    s1[0] = 0.3;
    s2v[N] = -0.2;
    const Kernel phi = pair_kernel(0.5, s1, "phi"), psi = pair_kernel(0.8, s2v, "psi");
    const FiberQuadrature qI = fiber_quadrature(Gd, ic, plan.order, plan.R);
    const FiberQuadrature qP = fiber_quadrature(P, plan.order, plan.R);
    const Kernel on_D = convolve(via_kappa(phi), via_kappa(psi), qI);
    const Kernel on_pair = convolve(phi, psi, qP);
    std::vector<double> size(plan.count, 0.0);
    auto r = run_sampled("interior:pair_composition", plan.tol, plan.count, [&](std::size_t i) -> SampleOutcome {
      Rng rng(plan.seed ^ 0x1D7E, i);
      const Point x = Gd->units->sample_block(0, rng, 0);
      Vec z(N + K);
      for (double& v : z) v = rng.uniform(-1.5, 1.5);
      const Point g = Gd->canonical(ic.arrow(x, z));
      Vec pm = z;
      const Point xd = blow.blow_down(x);
      pm.insert(pm.end(), xd.x.begin(), xd.x.end());
      const double a = on_D.eval(g), b = on_pair.eval(Point{0, pm});
      size[i] = std::fabs(b);
      return {std::fabs(a - b) / (1.0 + std::fabs(b)), "g=" + format_vector(g.x)};
    });
    note_size(r, size);
    rep.merge(r);
  }
  return rep;
}

}  // namespace lg
