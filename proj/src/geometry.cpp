#include "lg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lg/error.hpp"
#include "lg/simd/kernels.hpp"

namespace lg {

Factor Factor::line(double lo, double hi) { return {FactorKind::Line, 0, false, lo, hi}; }
Factor Factor::half(double hi) { return {FactorKind::Half, 0, false, 0.0, hi}; }
Factor Factor::sphere(int p, bool clipped) {
  if (p < 0) throw Error(ErrorKind::Shape, "sphere dimension must be >= 0");
  return {FactorKind::Sphere, p, clipped, -1.0, 1.0};
}

int Factor::rank() const {
  if (kind == FactorKind::Half) return 1;
  if (kind == FactorKind::Sphere && clipped) return p;
  return 0;
}

int ModelBlock::dim() const {
  int d = 0;
  for (const auto& f : factors) d += f.dim();
  return d;
}
int ModelBlock::embed_dim() const {
  int d = 0;
  for (const auto& f : factors) d += f.embed_dim();
  return d;
}
int ModelBlock::rank() const {
  int r = 0;
  for (const auto& f : factors) r += f.rank();
  return r;
}
std::vector<int> ModelBlock::offsets() const {
  std::vector<int> off;
  int o = 0;
  for (const auto& f : factors) {
    off.push_back(o);
    o += f.embed_dim();
  }
  return off;
}
std::string ModelBlock::describe() const {
  std::string s;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) s += "x";
    const auto& f = factors[i];
    switch (f.kind) {
      case FactorKind::Line: s += "R"; break;
      case FactorKind::Half: s += "H"; break;
      case FactorKind::Sphere: s += (f.clipped ? "S+" : "S") + std::to_string(f.p); break;
    }
  }
  return s.empty() ? "pt" : s;
}
bool ModelBlock::same_shape(const ModelBlock& o) const {
  if (factors.size() != o.factors.size()) return false;
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (!factors[i].same_shape(o.factors[i])) return false;
  return true;
}

ModelBlock concat(const ModelBlock& a, const ModelBlock& b) {
  ModelBlock r = a;
  r.factors.insert(r.factors.end(), b.factors.begin(), b.factors.end());
  return r;
}

ModelBlock lines(int n, double lo, double hi) {
  ModelBlock b;
  for (int i = 0; i < n; ++i) b.factors.push_back(Factor::line(lo, hi));
  return b;
}

JPoint lift(const Point& p) { return {p.block, lift(std::span<const double>(p.x))}; }
Point values(const JPoint& p) { return {p.block, values(std::span<const Jet>(p.x))}; }

CoordinateManifold::CoordinateManifold(std::vector<ModelBlock> b, std::string n)
    : blocks(std::move(b)), name(std::move(n)) {
  if (blocks.empty()) throw Error(ErrorKind::Shape, "manifold needs at least one block");
  for (const auto& blk : blocks)
    if (blk.dim() != blocks[0].dim()) throw Error(ErrorKind::Shape, "blocks of unequal dimension");
  pins.resize(blocks.size());
}

int CoordinateManifold::dim() const { return blocks.at(0).dim(); }

std::string CoordinateManifold::describe() const {
  std::string s;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) s += " + ";
    s += blocks[i].describe();
  }
  return s;
}

bool CoordinateManifold::same_blocks(const CoordinateManifold& o) const {
  if (blocks.size() != o.blocks.size()) return false;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (!blocks[i].same_shape(o.blocks[i])) return false;
  return true;
}

void CoordinateManifold::validate(const Point& p) const {
  if (p.block < 0 || p.block >= static_cast<int>(blocks.size()))
    throw Error(ErrorKind::Constraint, "block index out of range", std::to_string(p.block));
  const auto& b = blocks[p.block];
  if (static_cast<int>(p.x.size()) != b.embed_dim())
    throw Error(ErrorKind::Constraint, "coordinate length mismatch", format_vector(p.x));
  for (double v : p.x)
    if (!std::isfinite(v)) throw Error(ErrorKind::Constraint, "non-finite coordinate", format_vector(p.x));
  const auto off = b.offsets();
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    const int o = off[f];
    if (fac.kind == FactorKind::Half && p.x[o] < -kBoundaryTol)
      throw Error(ErrorKind::Constraint, "half-line coordinate negative", format_vector(p.x));
    if (fac.kind == FactorKind::Sphere) {
      double n2 = 0.0;
      for (int i = 0; i <= fac.p; ++i) n2 += p.x[o + i] * p.x[o + i];
      if (std::fabs(std::sqrt(n2) - 1.0) > kBoundaryTol)
        throw Error(ErrorKind::Constraint, "sphere coordinate off the unit sphere", format_vector(p.x));
      if (fac.clipped)
        for (int i = 0; i <= fac.p; ++i)
          if (p.x[o + i] < -kBoundaryTol)
            throw Error(ErrorKind::Constraint, "clipped sphere coordinate negative", format_vector(p.x));
    }
  }
  if (!pins.empty())
    for (const auto& pin : pins[p.block])
      if (std::fabs(p.x[pin.coord] - pin.value) > kBoundaryTol)
        throw Error(ErrorKind::Constraint, "pinned coordinate violated", format_vector(p.x));
  if (inside && !inside(p)) throw Error(ErrorKind::Constraint, "point outside open subset", format_vector(p.x));
}

bool CoordinateManifold::contains(const Point& p) const {
  try {
    validate(p);
    return true;
  } catch (const Error&) {
    return false;
  }
}

Point CoordinateManifold::sample_block(int block, Rng& rng, int depth_target) const {
  const auto& b = blocks.at(block);
  const auto off = b.offsets();
  // Boundary slots: (coordinate, group). A half-line is its own group of
  // capacity one; a clipped sphere S^p is one group of capacity p.
  struct Slot {
    int coord, group;
  };
  std::vector<Slot> slots;
  std::vector<int> capacity;
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.rank() == 0) continue;
    const int g = static_cast<int>(capacity.size());
    capacity.push_back(fac.rank());
    for (int i = 0; i < fac.embed_dim(); ++i) slots.push_back({off[f] + i, g});
  }
  for (std::size_t i = slots.size(); i > 1; --i)
    std::swap(slots[i - 1], slots[static_cast<std::size_t>(rng.index(static_cast<int>(i)))]);
  std::vector<char> zero(b.embed_dim(), 0);
  int chosen = 0;
  for (const auto& s : slots) {
    if (chosen >= depth_target) break;
    if (capacity[s.group] == 0) continue;
    --capacity[s.group];
    zero[s.coord] = 1;
    ++chosen;
  }

  Point p{block, Vec(b.embed_dim(), 0.0)};
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    const int o = off[f];
    switch (fac.kind) {
      case FactorKind::Line: p.x[o] = rng.uniform(fac.lo, fac.hi); break;
      case FactorKind::Half:
        if (!zero[o]) {
          double v = rng.uniform(0.0, fac.hi);
          if (v < 1e-6) v = 1e-6 + v;
          p.x[o] = v;
        }
        break;
      case FactorKind::Sphere: {
        double n2 = 0.0;
        for (int i = 0; i <= fac.p; ++i) {
          double v = zero[o + i] ? 0.0 : rng.normal();
          if (fac.clipped) v = std::fabs(v) + (zero[o + i] ? 0.0 : 1e-3);
          p.x[o + i] = v;
          n2 += v * v;
        }
        if (n2 == 0.0) {
          p.x[o] = 1.0;
          n2 = 1.0;
        }
        const double n = std::sqrt(n2);
        for (int i = 0; i <= fac.p; ++i) p.x[o + i] /= n;
        break;
      }
    }
  }
  if (!pins.empty())
    for (const auto& pin : pins[block]) p.x[pin.coord] = pin.value;
  return p;
}

Point CoordinateManifold::sample(Rng& rng, std::size_t index) const {
  const std::size_t nb = blocks.size();
  const int block = static_cast<int>(index % nb);
  const int levels = blocks[block].rank() + 1;
  // Deepest stratum first: corners are where cone conditions bite.
  const int target = levels - 1 - static_cast<int>((index / nb) % static_cast<std::size_t>(levels));
  for (int attempt = 0; attempt < 4000; ++attempt) {
    const int d = attempt < 200 ? target : rng.index(levels);
    Point p = sample_block(block, rng, d);
    if (!inside || inside(p)) return p;
  }
  throw Error(ErrorKind::Sampling, "rejection sampling found no point of " +
                                       (name.empty() ? describe() : name));
}

ManifoldPtr make_manifold(std::vector<ModelBlock> blocks, std::string name) {
  return std::make_shared<const CoordinateManifold>(std::move(blocks), std::move(name));
}

ManifoldPtr euclidean(int n, std::string name) {
  return make_manifold({lines(n)}, name.empty() ? "R^" + std::to_string(n) : std::move(name));
}

ManifoldPtr half_line(std::string name) {
  return make_manifold({ModelBlock{{Factor::half()}}}, name.empty() ? "[0,inf)" : std::move(name));
}

ManifoldPtr product_manifold(const CoordinateManifold& a, const CoordinateManifold& b) {
  std::vector<ModelBlock> blocks;
  for (const auto& x : a.blocks)
    for (const auto& y : b.blocks) blocks.push_back(concat(x, y));
  auto m = std::make_shared<CoordinateManifold>(std::move(blocks), a.name + "x" + b.name);
  const std::size_t nb = b.blocks.size();
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      auto& pins = m->pins[i * nb + j];
      if (i < a.pins.size()) pins = a.pins[i];
      if (j < b.pins.size())
        for (const auto& pin : b.pins[j]) pins.push_back({pin.coord + a.blocks[i].embed_dim(), pin.value});
    }
  if (a.inside || b.inside) {
    auto ai = a.inside;
    auto bi = b.inside;
    auto ablocks = a.blocks;
    m->inside = [ai, bi, ablocks, nb](const Point& p) {
      const int i = p.block / static_cast<int>(nb);
      const int j = p.block % static_cast<int>(nb);
      const int split = ablocks[i].embed_dim();
      if (ai && !ai(Point{i, Vec(p.x.begin(), p.x.begin() + split)})) return false;
      if (bi && !bi(Point{j, Vec(p.x.begin() + split, p.x.end())})) return false;
      return true;
    };
  }
  return m;
}

ManifoldPtr with_inside(const CoordinateManifold& m, std::function<bool(const Point&)> pred,
                        std::string name) {
  auto r = std::make_shared<CoordinateManifold>(m);
  if (!name.empty()) r->name = std::move(name);
  auto prev = m.inside;
  r->inside = prev ? std::function<bool(const Point&)>([prev, pred](const Point& p) { return prev(p) && pred(p); })
                   : std::move(pred);
  return r;
}

int depth(const ModelBlock& b, std::span<const double> x) {
  const auto off = b.offsets();
  int d = 0;
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind == FactorKind::Half && std::fabs(x[off[f]]) <= kBoundaryTol) ++d;
    if (fac.kind == FactorKind::Sphere && fac.clipped)
      for (int i = 0; i <= fac.p; ++i)
        if (std::fabs(x[off[f] + i]) <= kBoundaryTol) ++d;
  }
  return d;
}

int depth(const CoordinateManifold& m, const Point& p) {
  m.validate(p);
  return depth(m.blocks[p.block], p.x);
}

bool inward(const ModelBlock& b, std::span<const double> x, std::span<const double> v) {
  const auto off = b.offsets();
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind == FactorKind::Half && std::fabs(x[off[f]]) <= kBoundaryTol && v[off[f]] < -kBoundaryTol)
      return false;
    if (fac.kind == FactorKind::Sphere && fac.clipped)
      for (int i = 0; i <= fac.p; ++i) {
        const int c = off[f] + i;
        if (std::fabs(x[c]) <= kBoundaryTol && v[c] < -kBoundaryTol) return false;
      }
  }
  return true;
}

void validate_tangent(const CoordinateManifold& m, const TangentVector& v) {
  m.validate(v.base);
  const auto& b = m.blocks[v.base.block];
  if (static_cast<int>(v.v.size()) != b.embed_dim())
    throw Error(ErrorKind::Constraint, "tangent vector length mismatch", format_vector(v.v));
  const auto off = b.offsets();
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind != FactorKind::Sphere) continue;
    double ip = 0.0;
    for (int i = 0; i <= fac.p; ++i) ip += v.v[off[f] + i] * v.base.x[off[f] + i];
    if (std::fabs(ip) > 1e-10)
      throw Error(ErrorKind::Constraint, "sphere component not tangent", format_vector(v.v));
  }
}

bool inward_cone_membership(const CoordinateManifold& m, const TangentVector& v) {
  validate_tangent(m, v);
  return inward(m.blocks[v.base.block], v.base.x, v.v);
}

Mat tangent_basis(const ModelBlock& b, std::span<const double> x) {
  Mat B = Mat::Zero(b.embed_dim(), b.dim());
  const auto off = b.offsets();
  int col = 0;
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind != FactorKind::Sphere) {
      B(off[f], col++) = 1.0;
      continue;
    }
    if (fac.p == 0) continue;
    EVec w(fac.p + 1);
    for (int i = 0; i <= fac.p; ++i) w(i) = x[off[f] + i];
    const Mat Q = complement_basis(w);
    B.block(off[f], col, fac.p + 1, fac.p) = Q;
    col += fac.p;
  }
  return B;
}

Mat tangent_projector(const ModelBlock& b, std::span<const double> x) {
  const Mat B = tangent_basis(b, x);
  return B * B.transpose();
}

namespace {

VectorField coordinate_field(int coord, int len) {
  return [coord, len](const JPoint&) {
    JVec v(len, Jet(0.0));
    v[coord] = 1.0;
    return v;
  };
}

VectorField sphere_field(int offset, int p, int i, int len) {
  return [offset, p, i, len](const JPoint& x) {
    JVec v(len, Jet(0.0));
    const Jet wi = x.x[offset + i];
    for (int j = 0; j <= p; ++j) v[offset + j] = -(wi * x.x[offset + j]);
    v[offset + i] += 1.0;
    return v;
  };
}

}  // namespace

std::vector<VectorField> tangent_frame(const ModelBlock& b, const Point& near) {
  std::vector<VectorField> out;
  const auto off = b.offsets();
  const int len = b.embed_dim();
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind != FactorKind::Sphere) {
      out.push_back(coordinate_field(off[f], len));
      continue;
    }
    int drop = 0;
    for (int j = 1; j <= fac.p; ++j)
      if (std::fabs(near.x[off[f] + j]) > std::fabs(near.x[off[f] + drop])) drop = j;
    for (int i = 0; i <= fac.p; ++i)
      if (i != drop) out.push_back(sphere_field(off[f], fac.p, i, len));
  }
  return out;
}

std::vector<VectorField> tangent_generators(const ModelBlock& b) {
  std::vector<VectorField> out;
  const auto off = b.offsets();
  const int len = b.embed_dim();
  for (std::size_t f = 0; f < b.factors.size(); ++f) {
    const auto& fac = b.factors[f];
    if (fac.kind != FactorKind::Sphere) {
      out.push_back(coordinate_field(off[f], len));
      continue;
    }
    if (fac.p == 0) continue;
    for (int i = 0; i <= fac.p; ++i) out.push_back(sphere_field(off[f], fac.p, i, len));
  }
  return out;
}

BlockChart block_chart(const ModelBlock& b) {
  BlockChart c;
  const double inf = INFINITY;
  const double pi = std::numbers::pi;
  struct Piece {
    FactorKind kind;
    int p;
    bool clipped;
  };
  std::vector<Piece> pieces;
  for (const auto& fac : b.factors) {
    pieces.push_back({fac.kind, fac.p, fac.clipped});
    switch (fac.kind) {
      case FactorKind::Line:
        c.lo.push_back(-inf);
        c.hi.push_back(inf);
        c.periodic.push_back(0);
        break;
      case FactorKind::Half:
        c.lo.push_back(0.0);
        c.hi.push_back(inf);
        c.periodic.push_back(0);
        break;
      case FactorKind::Sphere:
        if (fac.p == 0 && !fac.clipped)
          throw Error(ErrorKind::Unsupported, "no angular chart for the two-point sphere S0");
        for (int j = 1; j <= fac.p; ++j) {
          c.lo.push_back(0.0);
          c.hi.push_back(fac.clipped ? pi / 2 : (j == fac.p ? 2 * pi : pi));
          c.periodic.push_back(!fac.clipped && j == fac.p);
        }
        break;
    }
  }
  c.dim = static_cast<int>(c.lo.size());
  c.embed = [pieces](const Vec& a) {
    Vec x;
    std::size_t k = 0;
    for (const auto& pc : pieces) {
      if (pc.kind != FactorKind::Sphere) {
        x.push_back(a[k++]);
        continue;
      }
      double s = 1.0;
      for (int j = 0; j < pc.p; ++j) {
        x.push_back(s * std::cos(a[k + j]));
        s *= std::sin(a[k + j]);
      }
      x.push_back(s);
      k += pc.p;
    }
    return x;
  };
  c.density = [pieces](const Vec& a) {
    double w = 1.0;
    std::size_t k = 0;
    for (const auto& pc : pieces) {
      if (pc.kind != FactorKind::Sphere) {
        ++k;
        continue;
      }
      for (int j = 0; j + 1 < pc.p; ++j) w *= std::pow(std::sin(a[k + j]), pc.p - 1 - j);
      k += pc.p;
    }
    return w;
  };
  return c;
}

Mat SmoothMap::dual_jacobian(const Point& p) const {
  const std::size_t n = p.x.size();
  const JVec xj = lg::lift(std::span<const double>(p.x));
  std::vector<Vec> cols;
  for (std::size_t j = 0; j < n; ++j) {
    JVec e(n, Jet(0.0));
    e[j] = 1.0;
    const int block = p.block;
    const auto f = [&](const JVec& x) { return value(JPoint{block, x}).x; };
    cols.push_back(values(std::span<const Jet>(directional(f, xj, e))));
  }
  Mat J(cols.empty() ? 0 : static_cast<Eigen::Index>(cols[0].size()), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < cols[j].size(); ++i) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  return J;
}

Mat SmoothMap::jacobian(const Point& p) const {
  return analytic_jacobian ? analytic_jacobian(p) : dual_jacobian(p);
}

SmoothMap block_projection(ManifoldPtr domain, ManifoldPtr codomain, std::vector<int> kept, std::string name) {
  if (domain->blocks.size() != 1 || codomain->blocks.size() != 1)
    throw Error(ErrorKind::Unsupported, "block projections need single-block manifolds");
  const auto& db = domain->blocks[0];
  const auto& cb = codomain->blocks[0];
  if (kept.size() != cb.factors.size()) throw Error(ErrorKind::Shape, "projection factor count mismatch");
  for (std::size_t j = 0; j < kept.size(); ++j)
    if (!db.factors.at(kept[j]).same_shape(cb.factors[j]))
      throw Error(ErrorKind::Shape, "projection factor kinds differ");
  const auto off = db.offsets();
  std::vector<int> src;
  for (int f : kept)
    for (int i = 0; i < db.factors[f].embed_dim(); ++i) src.push_back(off[f] + i);
  SmoothMap m;
  m.domain = std::move(domain);
  m.codomain = std::move(codomain);
  m.name = name.empty() ? "projection" : std::move(name);
  m.projection = kept;
  m.value = [src](const JPoint& p) {
    JPoint q{0, JVec(src.size())};
    for (std::size_t i = 0; i < src.size(); ++i) q.x[i] = p.x[src[i]];
    return q;
  };
  const int n = db.embed_dim();
  m.analytic_jacobian = [src, n](const Point&) {
    Mat J = Mat::Zero(static_cast<Eigen::Index>(src.size()), n);
    for (std::size_t i = 0; i < src.size(); ++i) J(static_cast<Eigen::Index>(i), src[i]) = 1.0;
    return J;
  };
  return m;
}

JVec ProjectionSplit::fiber_part(const JPoint& m) const {
  JVec v;
  v.reserve(fiber_coords.size());
  for (int i : fiber_coords) v.push_back(m.x[i]);
  return v;
}

JPoint ProjectionSplit::assemble(const JVec& fv, const JVec& kept) const {
  JPoint m{0, JVec(static_cast<std::size_t>(embed_dim))};
  for (std::size_t i = 0; i < fiber_coords.size(); ++i) m.x[fiber_coords[i]] = fv[i];
  for (std::size_t i = 0; i < kept_coords.size(); ++i) m.x[kept_coords[i]] = kept[i];
  return m;
}

ProjectionSplit projection_split(const SmoothMap& f) {
  if (!f.projection || f.domain->blocks.size() != 1)
    throw Error(ErrorKind::Unsupported, "expected a block projection (explicit fiber parameterization)");
  const ModelBlock& mb = f.domain->blocks[0];
  const auto off = mb.offsets();
  std::vector<char> is_kept(mb.factors.size(), 0);
  ProjectionSplit s;
  s.embed_dim = mb.embed_dim();
  for (int k : *f.projection) {
    is_kept.at(k) = 1;
    for (int j = 0; j < mb.factors[k].embed_dim(); ++j) s.kept_coords.push_back(off[k] + j);
  }
  for (std::size_t i = 0; i < mb.factors.size(); ++i)
    if (!is_kept[i]) {
      s.fiber.factors.push_back(mb.factors[i]);
      for (int j = 0; j < mb.factors[i].embed_dim(); ++j) s.fiber_coords.push_back(off[i] + j);
    }
  return s;
}

SmoothMap identity_map(ManifoldPtr m) {
  SmoothMap s;
  s.domain = m;
  s.codomain = m;
  s.name = "id";
  s.value = [](const JPoint& p) { return p; };
  if (m->blocks.size() == 1) {
    std::vector<int> all(m->blocks[0].factors.size());
    std::iota(all.begin(), all.end(), 0);
    s.projection = all;
  }
  return s;
}

namespace {

// Deterministic fan of intrinsic test directions, lexicographic over
// {1, -1, 0}^dim without the zero vector; coordinate pairs beyond dim 6.
std::vector<Vec> cone_fan(int dim) {
  std::vector<Vec> fan;
  if (dim <= 6) {
    const double vals[3] = {1.0, -1.0, 0.0};
    std::vector<int> idx(dim, 0);
    while (true) {
      Vec w(dim);
      bool nonzero = false;
      for (int i = 0; i < dim; ++i) {
        w[i] = vals[idx[i]];
        nonzero |= idx[i] != 2;
      }
      if (nonzero) fan.push_back(w);
      int k = dim - 1;
      while (k >= 0 && idx[k] == 2) idx[k--] = 0;
      if (k < 0) break;
      ++idx[k];
    }
    return fan;
  }
  for (int i = 0; i < dim; ++i)
    for (double si : {1.0, -1.0}) {
      Vec w(dim, 0.0);
      w[i] = si;
      fan.push_back(w);
      for (int j = i + 1; j < dim; ++j)
        for (double sj : {1.0, -1.0}) {
          Vec u = w;
          u[j] = sj;
          fan.push_back(u);
        }
    }
  return fan;
}

}  // namespace

CheckReport check_tame_submersion(const SmoothMap& h, const SamplingPlan& plan) {
  if (h.domain->dim() < h.codomain->dim())
    throw Error(ErrorKind::Shape, "tame submersion needs dim(domain) >= dim(codomain)");
  auto rep = run_sampled("tame_submersion:" + h.name, 0.0, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point x = h.domain->sample(rng, i);
    const Point y = h(x);
    h.codomain->validate(y);
    const auto& db = h.domain->blocks[x.block];
    const auto& cb = h.codomain->blocks[y.block];
    const Mat J = h.jacobian(x);
    const Mat B = tangent_basis(db, x.x);
    const Mat C = tangent_basis(cb, y.x);
    const Mat JB = J * B;
    const double leak = (JB - C * (C.transpose() * JB)).cwiseAbs().maxCoeff();
    if (JB.size() && leak > 1e-8) return {INFINITY, "differential leaves the tangent space at " + format_vector(x.x)};
    const Mat D = C.transpose() * JB;
    if (D.rows() > 0 && smallest_singular_value(D) <= 1e-8)
      return {INFINITY, "differential not surjective at " + format_vector(x.x)};
    for (const Vec& w : cone_fan(db.dim())) {
      const EVec v = B * to_evec(w);
      const EVec hv = J * v;
      const Vec vv = to_vec(v), hvv = to_vec(hv);
      if (inward(db, x.x, vv) != inward(cb, y.x, hvv))
        return {INFINITY, "cone mismatch at x=" + format_vector(x.x) + " v=" + format_vector(vv)};
    }
    if (depth(db, x.x) != depth(cb, y.x))
      return {INFINITY, "depth changes at " + format_vector(x.x)};
    return {};
  });
  return rep;
}

CheckReport check_jacobian(const SmoothMap& h, const SamplingPlan& plan, double tol) {
  return run_sampled("jacobian:" + h.name, tol, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point x = h.domain->sample(rng, i);
    if (!h.analytic_jacobian) return {};
    const Mat B = tangent_basis(h.domain->blocks[x.block], x.x);
    const Mat A = h.analytic_jacobian(x) * B;
    const Mat D = h.dual_jacobian(x) * B;
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    return {(A - D).cwiseAbs().maxCoeff() / scale, format_vector(x.x)};
  });
}

// ---- blow-up ---------------------------------------------------------------

JVec BlowUpData::normal_part(const JPoint& q) const {
  const auto& b = base->blocks[0];
  const auto off = b.offsets();
  JVec z;
  for (int f : slice.normal_factors) z.push_back(q.x[off[f]]);
  return z;
}

JVec BlowUpData::tangential_part(const JPoint& q) const {
  const auto& b = base->blocks[0];
  const auto off = b.offsets();
  JVec y;
  for (int f : tangential_factors)
    for (int i = 0; i < b.factors[f].embed_dim(); ++i) y.push_back(q.x[off[f] + i]);
  return y;
}

JPoint BlowUpData::lift(const JPoint& q) const {
  const JVec z = normal_part(q);
  Jet r2(0.0);
  for (const auto& c : z) r2 += c * c;
  if (r2.value() == 0.0) throw Error(ErrorKind::Constraint, "lift is undefined on L", format_vector(values(std::span<const Jet>(q.x))));
  const Jet r = sqrt(r2);
  JPoint out{0, {}};
  for (const auto& c : z) out.x.push_back(c / r);
  out.x.push_back(r);
  const JVec y = tangential_part(q);
  out.x.insert(out.x.end(), y.begin(), y.end());
  return out;
}

Point BlowUpData::boundary_to_total(const Point& s) const {
  Point p{0, {}};
  p.x.assign(s.x.begin(), s.x.begin() + codim);
  p.x.push_back(0.0);
  p.x.insert(p.x.end(), s.x.begin() + codim, s.x.end());
  return p;
}

BlowUpData blow_up(ManifoldPtr M, const SliceSpec& L) {
  if (M->blocks.size() != 1)
    throw Error(ErrorKind::UnsupportedSubmanifold, "blow-up supports single-block manifolds");
  const auto& b = M->blocks[0];
  if (L.normal_factors.empty())
    throw Error(ErrorKind::UnsupportedSubmanifold, "submanifold has no normal directions");
  const FactorKind want = L.kind == SliceSpec::Kind::Linear ? FactorKind::Line : FactorKind::Half;
  std::vector<char> normal(b.factors.size(), 0);
  for (int f : L.normal_factors) {
    if (f < 0 || f >= static_cast<int>(b.factors.size()) || b.factors[f].kind != want || normal[f])
      throw Error(ErrorKind::UnsupportedSubmanifold,
                  L.kind == SliceSpec::Kind::Linear ? "linear slice must be normal to distinct line factors"
                                                    : "corner face must be normal to distinct half-line factors");
    normal[f] = 1;
  }
  BlowUpData out;
  out.base = M;
  out.slice = L;
  out.codim = static_cast<int>(L.normal_factors.size());
  for (std::size_t f = 0; f < b.factors.size(); ++f)
    if (!normal[f]) out.tangential_factors.push_back(static_cast<int>(f));

  const bool face = L.kind == SliceSpec::Kind::Face;
  ModelBlock total{{Factor::sphere(out.codim - 1, face), Factor::half()}};
  ModelBlock bdry{{Factor::sphere(out.codim - 1, face)}};
  for (int f : out.tangential_factors) {
    total.factors.push_back(b.factors[f]);
    bdry.factors.push_back(b.factors[f]);
  }
  out.total = make_manifold({total}, "[" + M->name + ":L]");
  out.boundary = make_manifold({bdry}, "S");

  const int n = out.codim;
  const auto moff = b.offsets();
  std::vector<int> normal_coord, tang_coord;
  for (int f : L.normal_factors) normal_coord.push_back(moff[f]);
  for (int f : out.tangential_factors)
    for (int i = 0; i < b.factors[f].embed_dim(); ++i) tang_coord.push_back(moff[f] + i);
  const int mdim = b.embed_dim();

  out.blow_down.domain = out.total;
  out.blow_down.codomain = M;
  out.blow_down.name = "blow_down";
  out.blow_down.value = [n, normal_coord, tang_coord, mdim](const JPoint& p) {
    JPoint q{0, JVec(mdim, Jet(0.0))};
    for (int i = 0; i < n; ++i) q.x[normal_coord[i]] = p.x[n] * p.x[i];
    for (std::size_t j = 0; j < tang_coord.size(); ++j) q.x[tang_coord[j]] = p.x[n + 1 + j];
    return q;
  };
  out.blow_down.analytic_jacobian = [n, normal_coord, tang_coord, mdim](const Point& p) {
    Mat J = Mat::Zero(mdim, static_cast<Eigen::Index>(p.x.size()));
    for (int i = 0; i < n; ++i) {
      J(normal_coord[i], i) = p.x[n];
      J(normal_coord[i], n) = p.x[i];
    }
    for (std::size_t j = 0; j < tang_coord.size(); ++j) J(tang_coord[j], n + 1 + static_cast<Eigen::Index>(j)) = 1.0;
    return J;
  };

  out.radius.domain = out.total;
  out.radius.codomain = half_line("[0,inf)");
  out.radius.name = "r_L";
  out.radius.value = [n](const JPoint& p) { return JPoint{0, {p.x[n]}}; };
  out.radius.projection = std::vector<int>{1};
  return out;
}

CheckReport check_blow_up(const BlowUpData& b, const SamplingPlan& plan) {
  auto rep = run_sampled("blow_up", 1e-10, plan.count, [&](std::size_t i) -> SampleOutcome {
    Rng rng(plan.seed, i);
    const Point s = b.boundary->sample(rng, i);
    const Point on_s = b.boundary_to_total(s);
    b.total->validate(on_s);
    double res = std::fabs(b.radius(on_s).x[0]);
    Point q = b.base->sample(rng, i);
    const Vec z = values(std::span<const Jet>(b.normal_part(lift(q))));
    double n2 = 0.0;
    for (double c : z) n2 += c * c;
    if (n2 == 0.0) return {res, {}};
    const Point l = b.lift(q);
    b.total->validate(l);
    const Point back = b.blow_down(l);
    res = std::max(res, simd::max_abs_diff(back.x, q.x));
    if (n2 < 1.0) res = std::max(res, std::fabs(b.radius(l).x[0] - std::sqrt(n2)));
    return {res, format_vector(q.x)};
  });
  return rep;
}

}  // namespace lg
