#pragma once

#include <cstdint>
#include <random>

namespace panelbreak {

using Rng = std::mt19937_64;

/// Stream tags keep the generators of different experiment stages apart.
enum class Stream : std::uint64_t {
    continuous_law = 1,
    discrete_law = 2,
    panel = 3,
    limit_overlay = 4,
};

/**
 * Independent generator for replicate `index` of stream `stream` under `seed`.
 * The result depends only on the three arguments, so replicates can run in any
 * order and on any number of threads.
 */
[[nodiscard]] Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index);

}  // namespace panelbreak
