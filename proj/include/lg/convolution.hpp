#pragma once
// Discretized convolution algebras: tensor Gauss-Legendre quadrature on source
// fibers, kernels on arrows and the convolution product
//   (phi * psi)(g) = sum_i w_i phi(g h_i^{-1}) psi(h_i),  h_i in G_{d(g)}.
//
// The fiber measure is the density of the groupoid's fiber chart. For the
// built-in charts this is the volume of the Euclidean metric in the canonical
// algebroid frame: Lebesgue measure on pair and bundle fibers, d(log s) = ds/s
// on R+* factors.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lg/desing.hpp"
#include "lg/groupoid.hpp"
#include "lg/report.hpp"

namespace lg {

struct GaussLegendre {
  std::vector<double> nodes;    // ascending in (-1, 1)
  std::vector<double> weights;  // positive, summing to 2
};

/// Nodes and weights of the order-point rule on [-1, 1], by Newton iteration
/// on the Legendre recurrence.
GaussLegendre gauss_legendre(int order);

struct FiberQuadrature {
  GroupoidPtr groupoid;
  FiberChart chart;
  int order = 0;
  double R = 0.0;
  /// Width of the smooth cutoff applied to noncompact kernels at truncated ends.
  double cutoff_width = 0.0;
  std::vector<double> lo, hi;  // box after truncation
  std::vector<char> truncated_lo, truncated_hi;
  /// Tensor grid in chart coordinates with the Gauss-Legendre weights and the
  /// cutoff factor at each node.
  std::vector<Vec> coords;
  std::vector<double> base_weights;
  std::vector<double> cutoff;

  struct Grid {
    std::vector<Point> arrows;   // in G_x
    std::vector<double> weights; // base weight times density
  };
  Grid at(const Point& x) const;
  /// Sum of the weights at x: the truncated fiber volume.
  double volume(const Point& x) const;
};

/// Quadrature from the groupoid's own fiber chart; Unsupported when it has none.
FiberQuadrature fiber_quadrature(const GroupoidPtr& G, int order, double R, double cutoff_width = -1.0);
/// Quadrature from an explicit chart of the source fibers of G.
FiberQuadrature fiber_quadrature(const GroupoidPtr& G, const FiberChart& chart, int order, double R,
                                 double cutoff_width = -1.0);

struct Kernel {
  std::string name;
  std::function<double(const Point& g)> eval;
  /// For compact kernels: psi(h) = 0 whenever the fiber-chart coordinates of h
  /// leave [-support_radius, support_radius].
  double support_radius = INFINITY;
  bool compact = false;
};

/// phi * psi evaluated by quadrature at d(g). Compact psi must fit in the box
/// (truncation error otherwise); noncompact psi is multiplied by the cutoff.
/// Only psi is integrated over the chart, so only its support is checked.
Kernel convolve(const Kernel& phi, const Kernel& psi, const FiberQuadrature& q);

/// Mass removed by the cutoff at g: sum_i w_i (1 - chi_i) |phi(g h_i^{-1}) psi(h_i)|.
double cutoff_budget(const Kernel& phi, const Kernel& psi, const FiberQuadrature& q, const Point& g);

struct ConvolutionPlan {
  std::uint64_t seed = 42;
  std::size_t count = 40;
  double tol = 1e-6;
  /// Arrow sampler; defaults to a sampled unit and sample_source_fiber.
  std::function<Point(Rng&, std::size_t)> arrows;
};

/// ||(phi * psi) * chi - phi * (psi * chi)||_inf on sampled arrows. The
/// largest cutoff budget met is reported in the notes.
CheckReport associativity_check(const Kernel& phi, const Kernel& psi, const Kernel& chi, const FiberQuadrature& q,
                                const ConvolutionPlan& plan = {});

/// int_{G_x} f(h k) dh = int_{G_{d(k)}} f(h') dh' for r(k) = x, with f a
/// Gaussian in the arrow coordinates and k drawn from the chart within `step`
/// in the unbounded directions.
CheckReport right_invariance_check(const FiberQuadrature& q, const ConvolutionPlan& plan = {}, double step = 0.1);

/// Compact kernels vanish (|value| < 1e-12) at sampled chart points beyond
/// their support radius.
CheckReport check_kernel_support(const Kernel& K, const FiberQuadrature& q, const ConvolutionPlan& plan = {});

struct EdgeDemoPlan {
  std::uint64_t seed = 42;
  std::size_t count = 12;
  int order = 16;  // even, so no node lands on L
  double R = 6.0;
  double tol = 1e-10;
};

/// Kernels on [[pair(R^{n+k}):R^k]]: products at arrows over S against the
/// convolution algebra of pi_S^!!(R^k x| R+*) (restriction to S is
/// multiplicative), and products at interior arrows against pair(R^{n+k})
/// kernel composition.
CheckReport edge_operator_demo(int n, int k, const EdgeDemoPlan& plan = {});

}  // namespace lg
