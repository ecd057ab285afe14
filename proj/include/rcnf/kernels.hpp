#pragma once

// Data-parallel inner loops shared by the reservoir, readout training and
// nearest-neighbour diagnostics. Each kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant chosen at runtime.
// RCNF_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace rcnf::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa) noexcept;

/// True if `isa` can run on this machine.
bool isa_supported(Isa isa) noexcept;

/// The ISA currently used by the free functions below.
Isa active_isa() noexcept;

/// Overrides the dispatch choice (tests use this to compare variants).
/// Throws ValidationError if the ISA is not supported on this CPU.
void set_active_isa(Isa isa);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// state <- (1 - alpha) * state + alpha * tanh(pre)
  void (*leaky_tanh)(double* state, const double* pre, double alpha, std::size_t n);
  /// Lower triangle of G (dim x dim, row-major) += F F^T, F is dim x cols row-major.
  void (*gram_lower)(const double* f, std::size_t dim, std::size_t cols, double* g);
  /// C (rows x dim, row-major) += Y F^T, Y is rows x cols, F dim x cols.
  void (*cross)(const double* y, std::size_t rows, const double* f, std::size_t dim,
                std::size_t cols, double* c);
  /// out[j] = sum_k (points[k*n + j] - query[k])^2 for j < n (dimension-major points).
  void (*squared_distances)(const double* points, std::size_t n, std::size_t dim,
                            const double* query, double* out);
};

const KernelTable& table(Isa isa);

inline const KernelTable& active() { return table(active_isa()); }

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void leaky_tanh(std::span<double> state, std::span<const double> pre, double alpha);

}  // namespace rcnf::kernels
