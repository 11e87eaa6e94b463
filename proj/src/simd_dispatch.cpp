#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "lg/simd/kernels.hpp"

namespace lg::simd {

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if LG_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa isa = [] {
    const char* forced = std::getenv("LG_SIMD");
    if (forced && std::strcmp(forced, "scalar") == 0) return Isa::Scalar;
    return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
  }();
  return isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

namespace {
void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd kernel: length mismatch");
}
}  // namespace

double weighted_dot3(std::span<const double> w, std::span<const double> a,
                     std::span<const double> b) {
  require_same(w.size(), a.size());
  require_same(w.size(), b.size());
#if LG_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::Avx2) return avx2::weighted_dot3(w.data(), a.data(), b.data(), w.size());
#endif
  return scalar::weighted_dot3(w.data(), a.data(), b.data(), w.size());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
#if LG_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::Avx2) return avx2::max_abs_diff(a.data(), b.data(), a.size());
#endif
  return scalar::max_abs_diff(a.data(), b.data(), a.size());
}

double weighted_sum(std::span<const double> w, std::span<const double> a) {
  require_same(w.size(), a.size());
#if LG_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::Avx2) return avx2::weighted_sum(w.data(), a.data(), w.size());
#endif
  return scalar::weighted_sum(w.data(), a.data(), w.size());
}

}  // namespace lg::simd
