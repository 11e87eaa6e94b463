#pragma once
// Adiabatic groupoids, the dilation action on them, edge modifications and
// the comparison morphism onto the anisotropic edge modification.

#include <vector>

#include "lg/groupoid.hpp"

namespace lg {

/// G_ad over M x [0, inf). Arrows are written in the exponential chart as
/// (x, X, t): source (x, t), target (r(exp(x, X, t)), t). At t = 0 these are
/// the fibers of A(G); for t > 0 the chart map identifies them with G x (0, inf).
struct AdiabaticGroupoid {
  GroupoidPtr groupoid;
  GroupoidPtr base;
  GroupoidPtr zero_part;      // bundle of abelian groups A(G) over M
  GroupoidPtr positive_part;  // G x (0, inf)
  /// (x, X, t) -> (exp(x, X, t), t) as an arrow of G x [0, inf).
  PointMap chart;
  int rank = 0;
};

/// Requires exp data (exp, chart_mul, chart_inv) and single-block units.
AdiabaticGroupoid adiabatic_groupoid(const GroupoidPtr& G);

/// R+* acting by s.(x, X, t) = (x, sX, t/s); parameter is log s.
GroupAction scaling_action(const AdiabaticGroupoid& ad);
GroupoidMorphism scaling_morphism(const AdiabaticGroupoid& ad, double s);

struct ScalingCheck {
  CheckReport chart;      // s.Phi(X, t) = Phi(sX, t/s) and s.(X, 0) = (sX, 0)
  CheckReport group_law;  // s.(s'.g) = (ss').g
};
ScalingCheck check_scaling_action(const AdiabaticGroupoid& ad, const std::vector<double>& scales,
                                  const AxiomPlan& plan = {}, double chart_tol = 1e-8);

/// t = 0 restriction against the bundle A(G), t > 0 restriction against
/// G x (0, inf), and first-order agreement of the chart at t -> 0.
CheckReport check_adiabatic_structure(const AdiabaticGroupoid& ad, const AxiomPlan& plan = {});

struct EdgeModification {
  GroupoidPtr groupoid;
  SmoothMap f1;  // block projection onto L x [0, inf), time last
  GroupoidPtr H;
  bool anisotropic = false;
};

/// f1^!!((H_ad) x| R+*) for a block projection f1: N -> L x [0, inf). N is
/// M x [0, inf) in some factor order. The pull-backs inherit H's
/// allow_corners opt-in.
EdgeModification edge_modification_over(const SmoothMap& f1, const GroupoidPtr& H);
/// Units M x [0, inf) with the time factor last.
EdgeModification edge_modification(const SmoothMap& f, const GroupoidPtr& H);
/// f^!!(H) x T over M x [0, inf).
EdgeModification edge_modification_ni(const SmoothMap& f, const GroupoidPtr& H);

/// Psi: (w_r, y, X, t, s, w_d) -> (w_r, exp_H(y, X, t), w_d, s t, s). At t = 0
/// the A(H) component collapses to the unit. Both inputs must come from the
/// same (f, H); otherwise a pairing error.
GroupoidMorphism comparison_morphism(const EdgeModification& E, const EdgeModification& E_ni);

/// Arrow part of the comparison morphism for the layout
/// (w_r[fiber], y, X, t, log s, w_d[fiber]) with y, X those of H.
PointMap comparison_arrow_map(const GroupoidPtr& H, std::size_t fiber);

}  // namespace lg
