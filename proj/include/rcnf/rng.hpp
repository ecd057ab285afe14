#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace rcnf {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for the `index`-th independent stream under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Seed for a named sub-stream ("simulate", "reservoir", "bo", "flow", "forecast").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept;

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

void fill_standard_normal(Engine& eng, std::span<double> out);

}  // namespace rcnf
