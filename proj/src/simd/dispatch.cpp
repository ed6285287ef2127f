#include <atomic>

#include "prefcf/error.hpp"
#include "prefcf/simd.hpp"

namespace prefcf::simd {
namespace {

std::atomic<const Kernels*>& active_slot() {
  static std::atomic<const Kernels*> slot{&kernels_for(detect_isa())};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(PREFCF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() noexcept { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "auto") return detect_isa();
  throw ValidationError("unknown instruction set '" + std::string(name) + "'");
}

const Kernels& kernels_for(Isa isa) {
  if (!isa_supported(isa))
    throw ValidationError("instruction set '" + std::string(isa_name(isa)) +
                          "' is not available on this machine");
#if defined(PREFCF_HAVE_AVX2)
  if (isa == Isa::avx2) return avx2_kernels();
#endif
  return scalar_kernels();
}

const Kernels& kernels() noexcept { return *active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_relaxed); }

Isa active_isa() noexcept { return kernels().isa; }

}  // namespace prefcf::simd
