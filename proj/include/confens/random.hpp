#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace confens {

/// Independent generator keyed by (seed, id, tag); stable across platforms
/// that share the standard engine definition.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t id, std::uint64_t tag);

void fill_normal(std::mt19937_64& rng, std::span<double> out);

}  // namespace confens
