#include "panelbreak/random.hpp"

namespace panelbreak {

Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
    const auto tag = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace panelbreak
