#pragma once
// Reduction kernels behind quadrature sums and residual scans. Each kernel has
// a scalar reference and, on x86-64, an AVX2+FMA variant chosen once at
// runtime. Set LG_SIMD=scalar to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace lg::simd {

enum class Isa { Scalar, Avx2 };

Isa active_isa();
std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);

/// sum_i w[i] * a[i] * b[i]
double weighted_dot3(std::span<const double> w, std::span<const double> a,
                     std::span<const double> b);
/// max_i |a[i] - b[i]|
double max_abs_diff(std::span<const double> a, std::span<const double> b);
/// sum_i w[i] * a[i]
double weighted_sum(std::span<const double> w, std::span<const double> a);

namespace scalar {
double weighted_dot3(const double* w, const double* a, const double* b, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double weighted_sum(const double* w, const double* a, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define LG_HAVE_AVX2_KERNELS 1
namespace avx2 {
double weighted_dot3(const double* w, const double* a, const double* b, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double weighted_sum(const double* w, const double* a, std::size_t n);
}  // namespace avx2
#else
#define LG_HAVE_AVX2_KERNELS 0
#endif

}  // namespace lg::simd
