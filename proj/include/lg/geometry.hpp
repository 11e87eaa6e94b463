#pragma once
// Coordinate models of manifolds with corners.
//
// A manifold is a finite list of product blocks. Each factor is a line, a
// closed half-line or a unit sphere embedded in R^{p+1}; points are stored in
// the block's embedding coordinates. Open subsets are expressed by an
// `inside` predicate and closed coordinate slices by pinned coordinates, so
// reductions keep the ambient coordinates of the parent manifold.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lg/jet.hpp"
#include "lg/linalg.hpp"
#include "lg/report.hpp"
#include "lg/rng.hpp"

namespace lg {

inline constexpr double kBoundaryTol = 1e-12;

enum class FactorKind { Line, Half, Sphere };

struct Factor {
  FactorKind kind = FactorKind::Line;
  int p = 0;             // sphere dimension
  bool clipped = false;  // sphere intersected with the closed positive orthant
  double lo = -2.0;      // sampling window; HALF factors sample [0, hi]
  double hi = 2.0;

  static Factor line(double lo = -2.0, double hi = 2.0);
  static Factor half(double hi = 2.0);
  static Factor sphere(int p, bool clipped = false);

  int dim() const { return kind == FactorKind::Sphere ? p : 1; }
  int embed_dim() const { return kind == FactorKind::Sphere ? p + 1 : 1; }
  /// Maximal number of simultaneously vanishing boundary coordinates.
  int rank() const;
  bool same_shape(const Factor& o) const {
    return kind == o.kind && p == o.p && clipped == o.clipped;
  }
};

struct ModelBlock {
  std::vector<Factor> factors;

  int dim() const;
  int embed_dim() const;
  int rank() const;
  std::vector<int> offsets() const;  // embedding offset of each factor
  std::string describe() const;
  bool same_shape(const ModelBlock& o) const;
};

ModelBlock concat(const ModelBlock& a, const ModelBlock& b);
ModelBlock lines(int n, double lo = -2.0, double hi = 2.0);

struct Point {
  int block = 0;
  Vec x;
};

struct JPoint {
  int block = 0;
  JVec x;
};

JPoint lift(const Point& p);
Point values(const JPoint& p);

struct TangentVector {
  Point base;
  Vec v;
};

struct Pin {
  int coord;
  double value;
};

struct CoordinateManifold {
  std::vector<ModelBlock> blocks;
  std::string name;
  /// Open-subset predicate; empty means the whole block union.
  std::function<bool(const Point&)> inside;
  /// Pinned coordinates per block (closed slices and faces).
  std::vector<std::vector<Pin>> pins;

  CoordinateManifold() = default;
  CoordinateManifold(std::vector<ModelBlock> b, std::string n = {});

  int dim() const;
  int embed_dim(int block) const { return blocks.at(block).embed_dim(); }
  std::string describe() const;
  bool same_blocks(const CoordinateManifold& o) const;

  /// Throws a constraint error naming the violated condition.
  void validate(const Point& p) const;
  bool contains(const Point& p) const;

  /// Deterministic stratified sample: sample `index` visits blocks and depth
  /// levels cyclically, deepest first, so every stratum gets its share.
  Point sample(Rng& rng, std::size_t index) const;
  Point sample_block(int block, Rng& rng, int depth_target) const;
};

using ManifoldPtr = std::shared_ptr<const CoordinateManifold>;

ManifoldPtr make_manifold(std::vector<ModelBlock> blocks, std::string name = {});
ManifoldPtr euclidean(int n, std::string name = {});
ManifoldPtr half_line(std::string name = {});
ManifoldPtr product_manifold(const CoordinateManifold& a, const CoordinateManifold& b);
ManifoldPtr with_inside(const CoordinateManifold& m, std::function<bool(const Point&)> pred,
                        std::string name = {});

int depth(const ModelBlock& b, std::span<const double> x);
int depth(const CoordinateManifold& m, const Point& p);
bool inward(const ModelBlock& b, std::span<const double> x, std::span<const double> v);
bool inward_cone_membership(const CoordinateManifold& m, const TangentVector& v);
void validate_tangent(const CoordinateManifold& m, const TangentVector& v);

/// Orthonormal tangent basis (embedding coords x intrinsic dim).
Mat tangent_basis(const ModelBlock& b, std::span<const double> x);
/// Orthogonal projection onto the tangent space in embedding coordinates.
Mat tangent_projector(const ModelBlock& b, std::span<const double> x);

using PointMap = std::function<JPoint(const JPoint&)>;
/// Vector field in embedding coordinates; also the evaluator type of sections.
using VectorField = std::function<JVec(const JPoint&)>;

/// Tangent fields forming a basis near `near`. On a sphere factor these are
/// the projected coordinate fields e_i - omega_i omega with the index of the
/// largest |omega_j| dropped.
std::vector<VectorField> tangent_frame(const ModelBlock& b, const Point& near);
/// Global generating family; sphere factors contribute all p+1 fields.
std::vector<VectorField> tangent_generators(const ModelBlock& b);

/// Intrinsic chart of a whole block for quadrature: lines and half-lines as
/// themselves, spheres by hyperspherical angles.
struct BlockChart {
  int dim = 0;
  std::vector<double> lo, hi;  // coordinate box, possibly infinite
  std::vector<char> periodic;
  std::function<Vec(const Vec&)> embed;
  std::function<double(const Vec&)> density;
};
BlockChart block_chart(const ModelBlock& b);

struct SmoothMap {
  ManifoldPtr domain;
  ManifoldPtr codomain;
  PointMap value;
  std::function<Mat(const Point&)> analytic_jacobian;  // optional
  /// Set when the map is a single-block factor projection: codomain factor j
  /// is domain factor projection[j].
  std::optional<std::vector<int>> projection;
  std::string name;

  Point operator()(const Point& p) const { return values(value(lift(p))); }
  JPoint operator()(const JPoint& p) const { return value(p); }
  /// Analytic Jacobian when supplied, dual-number Jacobian otherwise.
  Mat jacobian(const Point& p) const;
  Mat dual_jacobian(const Point& p) const;
};

SmoothMap block_projection(ManifoldPtr domain, ManifoldPtr codomain, std::vector<int> kept,
                           std::string name = {});
SmoothMap identity_map(ManifoldPtr m);

/// Coordinate bookkeeping of a block projection f: M -> L.
struct ProjectionSplit {
  ModelBlock fiber;               // factors of M dropped by f
  std::vector<int> fiber_coords;  // embedding coordinates of the fiber in M
  std::vector<int> kept_coords;   // embedding coordinates of L in M, in L's order
  int embed_dim = 0;

  JVec fiber_part(const JPoint& m) const;
  /// Point of M (block 0) from fiber coordinates and a point of L.
  JPoint assemble(const JVec& fiber, const JVec& kept) const;
};
ProjectionSplit projection_split(const SmoothMap& f);

struct SamplingPlan {
  std::uint64_t seed = 42;
  std::size_t count = 200;
};

CheckReport check_tame_submersion(const SmoothMap& h, const SamplingPlan& plan);
/// Analytic versus dual-number Jacobian on tangent directions (relative).
CheckReport check_jacobian(const SmoothMap& h, const SamplingPlan& plan, double tol = 1e-7);

// ---- real blow-up -------------------------------------------------------

struct SliceSpec {
  enum class Kind { Linear, Face };
  Kind kind = Kind::Linear;
  std::vector<int> normal_factors;  // factor indices in block 0 of M
};

struct BlowUpData {
  ManifoldPtr base;      // M
  ManifoldPtr total;     // [M:L], factors (sphere, radius, tangential...)
  ManifoldPtr boundary;  // S, factors (sphere, tangential...)
  SmoothMap blow_down;   // kappa
  SmoothMap radius;      // r_L into [0, inf)
  SliceSpec slice;
  int codim = 0;
  std::vector<int> tangential_factors;  // factors of M kept, in order

  int sphere_offset() const { return 0; }
  int radius_offset() const { return codim; }
  int tangential_offset() const { return codim + 1; }

  /// Inverse of kappa off L.
  JPoint lift(const JPoint& q) const;
  Point lift(const Point& q) const { return values(lift(lg::lift(q))); }
  Point boundary_to_total(const Point& s) const;
  /// Normal and tangential parts of a point of M.
  JVec normal_part(const JPoint& q) const;
  JVec tangential_part(const JPoint& q) const;
};

BlowUpData blow_up(ManifoldPtr M, const SliceSpec& L);

CheckReport check_blow_up(const BlowUpData& b, const SamplingPlan& plan);

}  // namespace lg
