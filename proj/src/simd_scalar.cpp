#include <cmath>

#include "lg/simd/kernels.hpp"

namespace lg::simd::scalar {

double weighted_dot3(const double* w, const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m || std::isnan(d)) m = d;
  }
  return m;
}

double weighted_sum(const double* w, const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * a[i];
  return acc;
}

}  // namespace lg::simd::scalar
