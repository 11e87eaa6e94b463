#pragma once
// Lie groupoids over coordinate manifolds, their constructors, reductions and
// the sampled axiom and morphism suites.
//
// Every structural map is a jet evaluator so the same code yields values and
// derivatives. Arrows are points of the arrow manifold; `mul` is partial and
// checks composability before delegating to the unchecked `mul_raw`.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lg/geometry.hpp"

namespace lg {

using ArrowMul = std::function<JPoint(const JPoint&, const JPoint&)>;

/// Exponential chart data: arrows near the units written as (x, X, t) with
/// X in R^rank in the groupoid's canonical algebroid frame.
struct ExpData {
  int rank = 0;
  /// Arrow with source x reached from the unit along tX; the unit at t = 0.
  std::function<JPoint(const JPoint& x, const JVec& X, const Jet& t)> exp;
  /// (x1, X1)(x2, X2) at time t, returned as X with source x2.
  std::function<JVec(const JPoint& x1, const JVec& X1, const JPoint& x2, const JVec& X2, const Jet& t)>
      chart_mul;
  /// Inverse of (x, X) at time t, returned as (source, X).
  std::function<std::pair<JPoint, JVec>(const JPoint& x, const JVec& X, const Jet& t)> chart_inv;
};

/// Parameterization of source fibers for quadrature.
struct FiberChart {
  int dim = 0;
  std::vector<double> lo, hi;
  std::vector<char> periodic;
  std::function<Point(const Point& x, const Vec& c)> arrow;
  /// Density of the fiber measure with respect to dc.
  std::function<double(const Point& x, const Vec& c)> density;
};

struct LieGroupoid {
  std::string name;
  std::string kind;
  ManifoldPtr units;
  ManifoldPtr arrows;
  PointMap d, r, u, inv;
  ArrowMul mul_raw;
  /// Random arrow g with d(g) = x.
  std::function<Point(const Point& x, Rng& rng)> sample_source_fiber;
  /// Sections of ker(d_*) along the units forming a basis near a unit.
  std::function<std::vector<VectorField>(const Point& near)> algebroid_frame;
  int algebroid_rank = 0;
  std::optional<ExpData> exp;
  std::optional<FiberChart> fiber_chart;
  /// Normal form for arrows with several representations.
  std::function<Point(const Point&)> canonicalize;
  bool allow_corners = false;
  double composability_tol = 1e-9;

  Point source(const Point& g) const { return values(d(lift(g))); }
  Point target(const Point& g) const { return values(r(lift(g))); }
  Point unit(const Point& x) const { return canonical(values(u(lift(x)))); }
  Point inverse(const Point& g) const { return canonical(values(inv(lift(g)))); }
  /// Checked product; throws a composability error when d(g) != r(h).
  Point mul(const Point& g, const Point& h) const;
  Point canonical(const Point& g) const { return canonicalize ? canonicalize(g) : g; }
};

using GroupoidPtr = std::shared_ptr<const LieGroupoid>;

struct GroupoidMorphism {
  std::string name;
  GroupoidPtr source;
  GroupoidPtr target;
  PointMap on_arrows;
  PointMap on_units;
};

/// A group R^dim (additive coordinates; R+* enters through log s) acting by
/// groupoid automorphisms.
struct GroupAction {
  std::string name;
  int dim = 1;
  std::function<JPoint(const JVec& gamma, const JPoint& g)> on_arrows;
  std::function<JPoint(const JVec& gamma, const JPoint& x)> on_units;
};

GroupoidPtr pair_groupoid(ManifoldPtr M, bool allow_corners = false);
GroupoidPtr space_groupoid(ManifoldPtr M);
/// Bundle of groups R^k over M; with `dilation` the fibers are R^k x| R+* with
/// (v, s)(w, t) = (v + s w, s t), stored as (v, log s).
GroupoidPtr group_bundle(ManifoldPtr M, int k, bool dilation = false);
GroupoidPtr product_groupoid(GroupoidPtr a, GroupoidPtr b);
/// Fibered pull-back along a tame block projection f: M -> L; arrows are
/// (fiber(m), g, fiber(m')). `allow_corners` skips the tameness requirement.
GroupoidPtr pullback_groupoid(const SmoothMap& f, GroupoidPtr H, bool allow_corners = false);
/// G x| Gamma with (g1, a)(g2, b) = (g1 a(g2), a + b) and d(g, a) = a^{-1} d(g).
GroupoidPtr semidirect_product(GroupoidPtr G, const GroupAction& action);
/// The dilation action groupoid [0, inf) x| R+*: arrows (t, log s),
/// d = t, r = t/s, (t', a)(t, b) = (t, a + b) when t' = e^{-b} t.
GroupoidPtr dilation_action_groupoid();
/// Same groupoid with units re-coordinatized by a diffeomorphism.
GroupoidPtr transport_units(GroupoidPtr G, ManifoldPtr new_units, PointMap to_new, PointMap to_old,
                            std::string name = {});

struct SubsetSpec {
  enum class Kind { Open, Closed };
  Kind kind = Kind::Open;
  std::function<bool(const Point&)> pred;  // Open
  std::vector<std::vector<Pin>> pins;      // Closed, per unit block
  std::string name;
};

struct Reduction {
  GroupoidPtr groupoid;
  bool invariant = false;
};

/// G_A^A. Open subsets reduce by rejection sampling; closed coordinate slices
/// are supported when invariant or when G is a pair groupoid.
Reduction reduction(GroupoidPtr G, const SubsetSpec& A, std::uint64_t seed = 7);

SmoothMap source_map(const GroupoidPtr& G);
SmoothMap target_map(const GroupoidPtr& G);

double point_distance(const Point& a, const Point& b);
double arrow_distance(const LieGroupoid& G, const Point& a, const Point& b);

struct AxiomPlan {
  std::uint64_t seed = 42;
  std::size_t pairs = 500;
  std::size_t triples = 200;
  double tol = 1e-10;
};

struct ComposableSample {
  Point x;
  std::vector<Point> arrows;  // arrows[0] arrows[1] ... composable left to right
};

/// Deterministic composable tuple of the given length from stream `index`.
ComposableSample sample_composable(const LieGroupoid& G, std::uint64_t seed, std::size_t index,
                                   std::size_t length);

CheckReport axiom_suite(const GroupoidPtr& G, const AxiomPlan& plan = {});
CheckReport morphism_suite(const GroupoidMorphism& phi, const AxiomPlan& plan = {});
/// Both maps are morphisms and undo each other on sampled arrows of either side.
CheckReport isomorphism_suite(const GroupoidMorphism& phi, const GroupoidMorphism& inverse,
                              const AxiomPlan& plan = {});
/// d and r must be tame submersions.
CheckReport structure_tameness(const GroupoidPtr& G, const SamplingPlan& plan);
/// Arrows of the reduction are exactly arrows of G with both ends in A.
CheckReport reduction_compatibility(const GroupoidPtr& G, const Reduction& red,
                                    const std::function<bool(const Point&)>& in_A,
                                    const AxiomPlan& plan = {});
/// Negative control: gh is shifted by eps in the first coordinate.
GroupoidPtr corrupt_multiplication(const GroupoidPtr& G, double eps);

}  // namespace lg
