#pragma once
// Desingularization of a Lie groupoid along a tame submanifold: gluing, the
// groupoids [[G:L]] and [[G:L]]_ni over the blow-up, the algebroids [[A:L]]
// and [[A:L]]_ni, and the checks that relate them.

#include "lg/algebroid.hpp"
#include "lg/deformation.hpp"
#include "lg/geometry.hpp"
#include "lg/groupoid.hpp"

namespace lg {

/// L inside M with its tube U = {|normal part| < 1}, the projection pi: U -> L,
/// the groupoid H = G_L^L and an algebroid B over L with A|_U = pi^!!(B).
struct TameSubmanifold {
  ManifoldPtr ambient;
  ManifoldPtr locus;
  ManifoldPtr tube_domain;  // U
  SliceSpec slice;
  BlowUpData blow;
  SmoothMap embedding;  // L -> M
  SmoothMap tube;       // pi: U -> L
  std::function<Jet(const JPoint&)> radius;
  GroupoidPtr H;
  AlgebroidPtr B;
  /// G-arrows with both ends on L to H-arrows, and back.
  PointMap locus_arrow;
  PointMap locus_arrow_inverse;
  /// A|_U -> pi^!!(B) on fiber vectors.
  FiberMap identification;
};

/// Synthesized tubular data for a pair groupoid and a linear slice or corner
/// face of its unit block; B is the tangent algebroid of L.
TameSubmanifold tame_submanifold(const GroupoidPtr& G, const SliceSpec& slice);

/// pi o embedding = id, and the identification intertwines anchors and brackets.
CheckReport check_tame_submanifold(const TameSubmanifold& L, const AlgebroidPtr& A, const AlgebroidPlan& plan);

/// p = (pi, r_L): [M:L] -> L x [0, inf).
SmoothMap blow_up_projection(const TameSubmanifold& L);

// ---- gluing -------------------------------------------------------------------

struct GlueData {
  std::string name;
  GroupoidPtr G1, G2;
  ManifoldPtr units;  // presentation of M1 u M2
  std::function<bool(const Point&)> in_M1, in_M2;
  PointMap to1, from1, to2, from2;  // unit charts
  std::function<bool(const Point&)> in_U1;  // in M1 coordinates
  std::function<bool(const Point&)> in_U2;  // in M2 coordinates
  /// (G1)_{U1}^{U1} -> (G2)_{U2}^{U2} and its inverse on arrows.
  GroupoidMorphism phi;
  PointMap phi_inverse;
};

/// Sampled orbit exploration (breadth first, depth 3) for
/// phi(U1 n G1 U1^c G1) n (U2 n G2 U2^c G2) = 0, plus agreement of phi with the
/// unit charts. A pass is only a sampled pass and is noted as such.
CheckReport check_gluing_hypothesis(const GlueData& data, std::uint64_t seed = 42, std::size_t seeds = 24);

/// G1 u_phi G2. Arrow blocks are those of G1 followed by those of G2; arrows
/// with both ends in the overlap are stored in G1 form. Throws a
/// gluing-hypothesis error with a witness when the sampled check fails.
GroupoidPtr glue(const GlueData& data);

// ---- desingularization ----------------------------------------------------------

struct Desingularization {
  GroupoidPtr groupoid;
  TameSubmanifold L;
  EdgeModification edge;  // over the blow-up total space
  GroupoidPtr far;        // G over M \ L, on the total space
  GlueData glue;
  CheckReport hypothesis;
  bool anisotropic = false;
};

/// [[G:L]] for a pair groupoid G. Units are blow_up(M, L).total.
Desingularization desingularize(const GroupoidPtr& G, const TameSubmanifold& L);

struct AnisotropicDesingularization {
  Desingularization desing;
  /// [[G:L]] -> [[G:L]]_ni over the identity of [M:L].
  GroupoidMorphism psi;
};
AnisotropicDesingularization desingularize_ni(const GroupoidPtr& G, const TameSubmanifold& L);

/// Corner-face variant: L a codimension-n face, the boundary factor a clipped sphere.
Desingularization hyperbolic_desingularize(const GroupoidPtr& G, const SliceSpec& face);
AnisotropicDesingularization hyperbolic_desingularize_ni(const GroupoidPtr& G, const SliceSpec& face);

/// Restriction to S against pi^!!(A(H) x| R+*) and restriction off S against
/// G over M \ L, by explicit isomorphisms and their inverses.
CheckReport check_desing_structure(const Desingularization& D, const AxiomPlan& plan = {});

/// Psi(g) = (r(g), s(r(g)) g s(d(g))^{-1}, d(g)) from G_U^U to pi^!!(G_L^L);
/// `section` must satisfy d(s(u)) = u and r(s(u)) = pi(u).
CheckReport canonical_form_check(const GroupoidPtr& G, const TameSubmanifold& L, const PointMap& section,
                                 const AxiomPlan& plan = {});

// ---- algebroids -----------------------------------------------------------------

/// [[A:L]] = p^!!(r (B x T[0, inf))) with p = (pi, r_L) on the blow-up.
AlgebroidPtr desing_algebroid(const TameSubmanifold& L);
/// [[A:L]]_ni = p^!!(B x r T[0, inf)).
AlgebroidPtr desing_algebroid_ni(const TameSubmanifold& L);

struct IsoPlan {
  std::uint64_t seed = 42;
  std::size_t count = 100;
  double tol = 1e-5;
  /// Probe offset for the extrapolated fiber map on S.
  double probe = 1e-3;
  /// Smallest singular value accepted for the fiber map.
  double min_singular = 1e-6;
};

/// Fiber map Phi: A -> D solving rho_D Phi = rho_A by least squares at each
/// point; on S, where the anchors degenerate, Phi is extrapolated from probes
/// at radius probe, 2 probe, 3 probe. Checks invertibility of Phi, anchors and
/// frame brackets.
CheckReport check_algebroid_iso(const AlgebroidPtr& A, const AlgebroidPtr& D, const TameSubmanifold& L,
                                const IsoPlan& plan = {});

/// A([[G:L]]) against [[A(G):L]] (or the _ni pair).
CheckReport check_desing_algebroid_iso(const Desingularization& D, const IsoPlan& plan = {});

/// Brackets of the anchored frame generators of D are combinations of the
/// generators with coefficients that stay bounded as r_L -> 0.
CheckReport check_bracket_closure(const AlgebroidPtr& D, const TameSubmanifold& L, const AlgebroidPlan& plan = {});
/// Same scan for an arbitrary generating family of vector fields on [M:L].
CheckReport check_generator_closure(const std::string& name,
                                    const std::function<std::vector<VectorField>(const Point&)>& generators,
                                    const TameSubmanifold& L, const AlgebroidPlan& plan = {});

/// For X in [[A:L]] and Y in [[A:L]]_ni, the B-component of [X, Y]_ni on S.
/// With `fiber_part` false, X is drawn without its T(sphere) component.
CheckReport check_ideal_property(const TameSubmanifold& L, const AlgebroidPlan& plan = {}, bool fiber_part = true);

}  // namespace lg
