#include "confens/random.hpp"

namespace confens {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t id, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return std::mt19937_64(seq);
}

void fill_normal(std::mt19937_64& rng, std::span<double> out) {
    std::normal_distribution<double> normal;
    for (double& v : out) v = normal(rng);
}

}  // namespace confens
