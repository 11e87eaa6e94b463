#pragma once
// Nested forward-mode differentiation.
//
// A Jet is a truncated multivariate Taylor polynomial in up to kMaxLevels
// independent nilpotent infinitesimals e_0..e_{K-1} with e_i^2 = 0. Each
// coefficient is indexed by the subset of infinitesimals it multiplies, so a
// jet carries every mixed first-order partial across the active levels.
//
// Directional derivatives allocate a fresh level from a thread-local stack,
// which keeps nested derivatives (brackets of brackets) free of perturbation
// confusion.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lg {

inline constexpr int kMaxLevels = 4;
inline constexpr int kJetSize = 1 << kMaxLevels;

class Jet {
public:
  constexpr Jet() = default;
  constexpr Jet(double v) { c_[0] = v; }  // NOLINT: implicit lift of constants

  static Jet infinitesimal(int level, double coefficient = 1.0) {
    Jet j;
    j.vars_ = static_cast<std::uint8_t>(1u << level);
    j.c_[j.vars_] = coefficient;
    return j;
  }

  double value() const { return c_[0]; }
  std::uint8_t vars() const { return vars_; }
  double coeff(unsigned subset) const { return (subset & ~vars_) ? 0.0 : c_[subset]; }

  /// Coefficient of e_level, itself a jet in the remaining infinitesimals.
  Jet part(int level) const {
    Jet r;
    const unsigned bit = 1u << level;
    if (!(vars_ & bit)) return r;
    r.vars_ = static_cast<std::uint8_t>(vars_ & ~bit);
    for (unsigned s = r.vars_;; s = (s - 1) & r.vars_) {
      r.c_[s] = c_[s | bit];
      if (s == 0) break;
    }
    return r;
  }

  Jet operator-() const {
    Jet r = *this;
    for_each_subset([&](unsigned s) { r.c_[s] = -c_[s]; });
    return r;
  }

  Jet& operator+=(const Jet& o) {
    widen(o.vars_);
    o.for_each_subset([&](unsigned s) { c_[s] += o.c_[s]; });
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    widen(o.vars_);
    o.for_each_subset([&](unsigned s) { c_[s] -= o.c_[s]; });
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (a.vars_ == 0) return b.scaled(a.c_[0]);
    if (b.vars_ == 0) return a.scaled(b.c_[0]);
    Jet r;
    r.vars_ = a.vars_ | b.vars_;
    const unsigned all = r.vars_;
    for (unsigned s = all;; s = (s - 1) & all) {
      double acc = 0.0;
      const unsigned sa = s & a.vars_;
      for (unsigned t = sa;; t = (t - 1) & sa) {
        const unsigned rest = s & ~t;
        if ((rest & ~b.vars_) == 0) acc += a.c_[t] * b.c_[rest];
        if (t == 0) break;
      }
      r.c_[s] = acc;
      if (s == 0) break;
    }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.vars_ == 0) return a.scaled(1.0 / b.c_[0]);
    return a * reciprocal(b);
  }

  friend bool operator<(const Jet& a, const Jet& b) { return a.value() < b.value(); }
  friend bool operator>(const Jet& a, const Jet& b) { return a.value() > b.value(); }
  friend bool operator<=(const Jet& a, const Jet& b) { return a.value() <= b.value(); }
  friend bool operator>=(const Jet& a, const Jet& b) { return a.value() >= b.value(); }

  /// f(a) from the derivatives f, f', f'', ... at a.value(); needs
  /// popcount(vars)+1 entries.
  Jet apply(const std::array<double, kMaxLevels + 1>& derivs) const {
    if (vars_ == 0) return Jet(derivs[0]);
    Jet nil = *this;
    nil.c_[0] = 0.0;
    Jet result(derivs[0]);
    Jet power(1.0);
    double factorial = 1.0;
    const int order = std::popcount(static_cast<unsigned>(vars_));
    for (int j = 1; j <= order; ++j) {
      power = power * nil;
      factorial *= j;
      result += power.scaled(derivs[j] / factorial);
    }
    return result;
  }

  friend Jet reciprocal(const Jet& a) {
    const double x = a.value();
    std::array<double, kMaxLevels + 1> d{};
    double p = 1.0 / x;
    double sign = 1.0, fact = 1.0;
    for (int j = 0; j <= kMaxLevels; ++j) {
      d[j] = sign * fact * p;
      p /= x;
      sign = -sign;
      fact *= (j + 1);
    }
    return a.apply(d);
  }

private:
  template <class F>
  void for_each_subset(F&& f) const {
    for (unsigned s = vars_;; s = (s - 1) & vars_) {
      f(s);
      if (s == 0) break;
    }
  }
  void widen(std::uint8_t other) {
    const unsigned added = other & ~vars_;
    if (!added) return;
    const unsigned all = vars_ | other;
    for (unsigned s = all;; s = (s - 1) & all) {
      if (s & added) c_[s] = 0.0;
      if (s == 0) break;
    }
    vars_ = static_cast<std::uint8_t>(all);
  }
  Jet scaled(double k) const {
    Jet r = *this;
    for_each_subset([&](unsigned s) { r.c_[s] = c_[s] * k; });
    return r;
  }

  std::array<double, kJetSize> c_{};
  std::uint8_t vars_ = 0;
};

inline Jet sqrt(const Jet& a) {
  const double x = a.value();
  const double s = std::sqrt(x);
  // d^j/dx^j x^{1/2}
  std::array<double, kMaxLevels + 1> d{};
  double coeff = 1.0, e = 0.5;
  for (int j = 0; j <= kMaxLevels; ++j) {
    d[j] = coeff * s / std::pow(x, j);
    coeff *= e;
    e -= 1.0;
  }
  if (x == 0.0) d = {0.0, 0.0, 0.0, 0.0, 0.0};
  return a.apply(d);
}
inline Jet exp(const Jet& a) {
  const double e = std::exp(a.value());
  return a.apply({e, e, e, e, e});
}
inline Jet log(const Jet& a) {
  const double x = a.value();
  return a.apply({std::log(x), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), -6.0 / (x * x * x * x)});
}
inline Jet sin(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.apply({s, c, -s, -c, s});
}
inline Jet cos(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.apply({c, -s, -c, s, c});
}
inline Jet square(const Jet& a) { return a * a; }

using JVec = std::vector<Jet>;
using Vec = std::vector<double>;

inline JVec lift(std::span<const double> v) { return JVec(v.begin(), v.end()); }
inline Vec values(std::span<const Jet> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].value();
  return out;
}

namespace detail {
int& jet_level();
}

/// Innermost free infinitesimal level; throws when nesting exceeds kMaxLevels.
class LevelGuard {
public:
  LevelGuard();
  ~LevelGuard();
  LevelGuard(const LevelGuard&) = delete;
  LevelGuard& operator=(const LevelGuard&) = delete;
  int level() const { return level_; }

private:
  int level_;
};

/// d/de f(x + e v) at e = 0.
JVec directional(const std::function<JVec(const JVec&)>& f, std::span<const Jet> x,
                 std::span<const Jet> v);
Jet directional_scalar(const std::function<Jet(const JVec&)>& f, std::span<const Jet> x,
                       std::span<const Jet> v);

/// Columns are d f / d x_j along unit directions; rows follow f's output.
std::vector<Vec> jacobian(const std::function<JVec(const JVec&)>& f, std::span<const double> x);

}  // namespace lg
