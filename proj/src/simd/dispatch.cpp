#include <cstdlib>
#include <string_view>

#include "lprobe/simd/kernels.hpp"

namespace lprobe::simd {

#ifdef LPROBE_HAVE_AVX2
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#ifdef LPROBE_HAVE_AVX2
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select_kernels() {
  const char* env = std::getenv("LPROBE_SIMD");
  const std::string_view want = env ? env : "";
  if (want == "scalar") return scalar_kernels();
  if (const KernelTable* avx2 = avx2_kernels(); avx2 && cpu_supports_avx2()) return *avx2;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace lprobe::simd
