#pragma once

#include <array>
#include <cstdint>

namespace breed {

// Radical inverse of `index` in the given prime base. Index 1 is the first
// point of the sequence; the value is always strictly inside (0, 1).
inline double halton(std::uint64_t index, std::uint32_t base) {
    double fraction = 1.0;
    double result = 0.0;
    while (index > 0) {
        fraction /= base;
        result += fraction * static_cast<double>(index % base);
        index /= base;
    }
    return result;
}

// One prime base per temperature dimension.
inline constexpr std::array<std::uint32_t, 5> kHaltonBases{2, 3, 5, 7, 11};

}  // namespace breed
