#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

namespace iotgem {

/// Shannon entropy of the byte-value distribution, in bits per byte ([0, 8]).
inline double shannon_entropy(std::span<const std::uint8_t> payload) noexcept {
    if (payload.size() <= 1) return 0.0;
    std::array<std::size_t, 256> counts{};
    for (auto b : payload) ++counts[b];
    const double n = static_cast<double>(payload.size());
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    // A single repeated symbol yields -0.0; clamp rounding at both ends.
    if (h <= 0.0) return 0.0;
    return h > 8.0 ? 8.0 : h;
}

}  // namespace iotgem
