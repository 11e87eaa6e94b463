#pragma once
// Finite-difference oracles, independent of the jet machinery.
// Central differences at h and h/2 combined by Richardson extrapolation.

#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Field = std::function<Vec(const Vec&)>;

inline constexpr double kStep = 1e-4;

inline Vec central(const Field& f, const Vec& x, const Vec& v, double h) {
  Vec xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * v[i];
    xm[i] -= h * v[i];
  }
  const Vec fp = f(xp), fm = f(xm);
  Vec out(fp.size());
  for (std::size_t i = 0; i < fp.size(); ++i) out[i] = (fp[i] - fm[i]) / (2 * h);
  return out;
}

/// d/de f(x + e v) at e = 0.
inline Vec directional(const Field& f, const Vec& x, const Vec& v, double h = kStep) {
  const Vec a = central(f, x, v, h), b = central(f, x, v, h / 2);
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (4 * b[i] - a[i]) / 3;
  return out;
}

/// [V, W](x) = DW[V] - DV[W].
inline Vec bracket(const Field& V, const Field& W, const Vec& x, double h = kStep) {
  const Vec a = directional(W, x, V(x), h), b = directional(V, x, W(x), h);
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace oracle
