#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/halton.hpp"
#include "breed/heatpde.hpp"
#include "breed/types.hpp"

namespace breed {

// Fixed validation set: n full trajectories at Halton-sequence parameters.
// Binary layout (validation.bin, little-endian): header u32 n, u32 T_steps,
// u32 M; then per simulation 5 x f64 params followed by
// (T_steps + 1) x M*M x f32 fields in timestep order.
struct ValidationSet {
    std::uint32_t n = 0;
    std::uint32_t t_steps = 0;
    std::uint32_t grid_size = 0;
    std::vector<SimParams> params;
    std::vector<std::vector<float>> trajectories;  // per sim, flattened (T+1) * M * M

    std::size_t field_size() const {
        return static_cast<std::size_t>(grid_size) * grid_size;
    }
};

// Halton point i (1-based index i+1) in the d-th prime base, mapped affinely
// onto the temperature bounds.
inline SimParams halton_params(std::uint32_t point, const Bounds& bounds) {
    SimParams p;
    for (int d = 0; d < kParamDim; ++d)
        p[d] = bounds.low + bounds.span() * halton(point + 1, kHaltonBases[d]);
    return p;
}

inline ValidationSet gen_validation(std::uint32_t n, const Bounds& bounds,
                                    const SolverConfig& solver) {
    if (n < 1) throw std::invalid_argument("gen_validation: n must be >= 1");
    solver.validate();
    ValidationSet set;
    set.n = n;
    set.t_steps = static_cast<std::uint32_t>(solver.t_steps);
    set.grid_size = static_cast<std::uint32_t>(solver.grid_size);
    set.params.reserve(n);
    set.trajectories.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const SimParams p = halton_params(i, bounds);
        set.params.push_back(p);
        std::vector<float> flat;
        flat.reserve(static_cast<std::size_t>(solver.t_steps + 1) * set.field_size());
        run_trajectory(i, p, solver, [&](const FieldSample& s) {
            flat.insert(flat.end(), s.field.begin(), s.field.end());
        });
        set.trajectories.push_back(std::move(flat));
    }
    return set;
}

namespace detail {

inline void bin_u32(std::ofstream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline std::uint32_t bin_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("validation.bin: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void save_validation(const ValidationSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("validation.bin: cannot open " + path + " for writing");
    detail::bin_u32(os, set.n);
    detail::bin_u32(os, set.t_steps);
    detail::bin_u32(os, set.grid_size);
    for (std::uint32_t i = 0; i < set.n; ++i) {
        for (double v : set.params[i].temps)
            for (int byte = 0; byte < 8; ++byte)
                os.put(static_cast<char>((std::bit_cast<std::uint64_t>(v) >> (8 * byte)) & 0xff));
        for (float v : set.trajectories[i])
            detail::bin_u32(os, std::bit_cast<std::uint32_t>(v));
    }
    if (!os) throw std::runtime_error("validation.bin: write failed for " + path);
}

inline ValidationSet load_validation(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("validation.bin: cannot open " + path);
    ValidationSet set;
    set.n = detail::bin_u32(is);
    set.t_steps = detail::bin_u32(is);
    set.grid_size = detail::bin_u32(is);
    const std::size_t per_sim = static_cast<std::size_t>(set.t_steps + 1) * set.field_size();
    set.params.resize(set.n);
    set.trajectories.assign(set.n, {});
    for (std::uint32_t i = 0; i < set.n; ++i) {
        for (double& v : set.params[i].temps) {
            std::uint64_t raw = 0;
            for (int byte = 0; byte < 8; ++byte) {
                const int c = is.get();
                if (c == EOF) throw std::runtime_error("validation.bin: truncated params");
                raw |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * byte);
            }
            v = std::bit_cast<double>(raw);
        }
        std::vector<float>& flat = set.trajectories[i];
        flat.resize(per_sim);
        for (float& v : flat) v = std::bit_cast<float>(detail::bin_u32(is));
        if (!is) throw std::runtime_error("validation.bin: truncated trajectory");
    }
    return set;
}

}  // namespace breed
