#include <atomic>
#include <cstdlib>
#include <string>

#include "internal.hpp"
#include "rcnf/errors.hpp"

namespace rcnf::kernels {
namespace {

Isa detect() noexcept {
  if (const char* env = std::getenv("RCNF_SIMD"); env && std::string(env) == "scalar") return Isa::kScalar;
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if defined(RCNF_HAVE_AVX2_TU)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa))
    throw ValidationError("kernel ISA not supported on this CPU: " + std::string(isa_name(isa)));
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
#if defined(RCNF_HAVE_AVX2_TU)
  if (isa == Isa::kAvx2) {
    if (!isa_supported(isa)) throw ValidationError("avx2 kernels requested on a CPU without avx2/fma");
    return avx2::kTable;
  }
#endif
  if (isa != Isa::kScalar) throw ValidationError("kernel ISA not compiled in: " + std::string(isa_name(isa)));
  return scalar::kTable;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ValidationError("axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void leaky_tanh(std::span<double> state, std::span<const double> pre, double alpha) {
  if (state.size() != pre.size()) throw ValidationError("leaky_tanh: length mismatch");
  active().leaky_tanh(state.data(), pre.data(), alpha, state.size());
}

}  // namespace rcnf::kernels
