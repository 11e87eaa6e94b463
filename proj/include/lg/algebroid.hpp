#pragma once
// Lie algebroids as evaluators: anchor and bracket act on jet-valued sections,
// so brackets of brackets and their derivatives come from nested jets.

#include <memory>
#include <string>
#include <vector>

#include "lg/geometry.hpp"
#include "lg/groupoid.hpp"

namespace lg {

/// Section of an algebroid: fiber vector in the algebroid's ambient
/// coordinates over each base point.
using Section = VectorField;

struct LieAlgebroid {
  std::string name;
  ManifoldPtr base;
  int rank = 0;
  std::function<JVec(const JPoint& x, const JVec& v)> anchor;
  std::function<JVec(const Section& X, const Section& Y, const JPoint& x)> bracket;
  /// Sections forming a basis of the fibers near `near`.
  std::function<std::vector<Section>(const Point& near)> local_frame;

  Section bracket_section(Section X, Section Y) const;
  Section anchor_section(Section X) const;
};

using AlgebroidPtr = std::shared_ptr<const LieAlgebroid>;

/// Coefficients of X(x) in the frame; throws a section error when X(x) is
/// not in the span.
JVec frame_coefficients(const std::vector<Section>& frame, const Section& X, const JPoint& x);

/// Lie bracket of vector fields in embedding coordinates: DW[V] - DV[W].
JVec vector_field_bracket(const VectorField& V, const VectorField& W, const JPoint& x);

/// Algebroid presented by a local frame and the brackets of frame elements;
/// general brackets follow from the Leibniz rule.
struct FramePresentation {
  std::string name;
  ManifoldPtr base;
  int rank = 0;
  std::function<JVec(const JPoint& x, const JVec& v)> anchor;
  std::function<std::vector<Section>(const Point& near)> local_frame;
  /// [e_i, e_j] for the frame chosen at `near`.
  std::function<JVec(const Point& near, int i, int j, const JPoint& x)> frame_bracket;
};
AlgebroidPtr frame_algebroid(FramePresentation p);

/// Right-invariant vector fields restricted to the units; anchor r_*. The
/// groupoid frame is checked to lie in ker d_* with constant rank.
AlgebroidPtr lie_algebroid_of(const GroupoidPtr& G);
AlgebroidPtr tangent_algebroid(ManifoldPtr M);
AlgebroidPtr zero_algebroid(ManifoldPtr M);
/// A x B over the product of the bases.
AlgebroidPtr external_product(const AlgebroidPtr& A, const AlgebroidPtr& B);
/// f^!! B for a block projection f: fibers B_{f(m)} + T(fiber); anchor
/// assembles rho(xi) on the kept factors with the fiber part.
AlgebroidPtr pullback_algebroid(const SmoothMap& f, const AlgebroidPtr& B);
/// Sections X' = fX: anchor f rho, bracket f[X,Y] + rho(X)f Y - rho(Y)f X.
/// A degeneracy error when f vanishes at every sample of some block.
AlgebroidPtr rescale(const AlgebroidPtr& A, std::function<Jet(const JPoint&)> f, std::string name);
/// A x 0 over M x [0, inf) rescaled by t.
AlgebroidPtr adiabatic_algebroid(const AlgebroidPtr& A);
/// t d/dt on [0, inf).
AlgebroidPtr b_tangent_half_line();

/// Smooth section sum_i c_i(x) e_i with random analytic coefficients.
Section random_section(const LieAlgebroid& A, const Point& near, Rng& rng);

struct AlgebroidPlan {
  std::uint64_t seed = 42;
  std::size_t count = 60;
  double tol = 1e-8;
};

/// Antisymmetry, Leibniz rule, anchor of brackets and the Jacobi identity on
/// random sections.
CheckReport check_algebroid_axioms(const AlgebroidPtr& A, const AlgebroidPlan& plan = {});

/// Brackets of isotropy elements (ker rho_x, constant coefficients in the
/// frame) stay in ker rho_x.
CheckReport check_isotropy_closure(const AlgebroidPtr& A, const AlgebroidPlan& plan = {});

using FiberMap = std::function<JVec(const JPoint& x, const JVec& v)>;

/// Base-preserving morphism: rho_B Phi = rho_A and Phi[X,Y] = [Phi X, Phi Y].
CheckReport check_algebroid_morphism(const AlgebroidPtr& A, const AlgebroidPtr& B, const FiberMap& phi,
                                     const AlgebroidPlan& plan = {});

}  // namespace lg
