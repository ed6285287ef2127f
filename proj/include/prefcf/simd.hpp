#pragma once
// Dense double-precision kernels used by the E-step inner loops.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2/FMA
// variant. The active table is picked once from CPUID on first use and can be
// overridden (tests compare the variants against each other).

#include <cstddef>
#include <span>
#include <string_view>

namespace prefcf::simd {

enum class Isa { scalar, avx2 };

struct Kernels {
  Isa isa;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y = a * x
  void (*scale)(double a, const double* x, double* y, std::size_t n);
  // y += a * (x .* z)
  void (*mul_axpy)(double a, const double* x, const double* z, double* y, std::size_t n);
  // y = x .* z
  void (*mul)(const double* x, const double* z, double* y, std::size_t n);
  // sum_i (x_i - z_i)^2
  double (*sq_dist)(const double* x, const double* z, std::size_t n);
};

const Kernels& scalar_kernels() noexcept;
#if defined(PREFCF_HAVE_AVX2)
const Kernels& avx2_kernels() noexcept;
#endif

bool isa_supported(Isa isa) noexcept;
Isa detect_isa() noexcept;
std::string_view isa_name(Isa isa) noexcept;
// Throws ValidationError for an unknown name.
Isa parse_isa(std::string_view name);

// Kernel table for `isa`; throws ValidationError if the ISA is not available.
const Kernels& kernels_for(Isa isa);
// Currently active table.
const Kernels& kernels() noexcept;
// Overrides the active table for the whole process.
void set_active_isa(Isa isa);
Isa active_isa() noexcept;

// RAII override, restores the previous ISA on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

inline double dot(std::span<const double> x, std::span<const double> y) noexcept {
  return kernels().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) noexcept {
  return kernels().sum(x.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  kernels().axpy(a, x.data(), y.data(), x.size());
}
inline void scale(double a, std::span<const double> x, std::span<double> y) noexcept {
  kernels().scale(a, x.data(), y.data(), x.size());
}
inline void mul_axpy(double a, std::span<const double> x, std::span<const double> z,
                     std::span<double> y) noexcept {
  kernels().mul_axpy(a, x.data(), z.data(), y.data(), x.size());
}
inline void mul(std::span<const double> x, std::span<const double> z,
                std::span<double> y) noexcept {
  kernels().mul(x.data(), z.data(), y.data(), x.size());
}
inline double sq_dist(std::span<const double> x, std::span<const double> z) noexcept {
  return kernels().sq_dist(x.data(), z.data(), x.size());
}

}  // namespace prefcf::simd
