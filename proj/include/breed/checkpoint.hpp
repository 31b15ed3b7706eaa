#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/mlp.hpp"

namespace breed {

// Parameter checkpoint, flat binary, little-endian:
//   header:  u32 layer_count, then (u32 in, u32 out) per layer
//   payload: f32 per layer, weights row-major (out x in) then biases
// Optimizer state is not persisted; the file is an export of the weights.

namespace detail {

inline void put_u32(std::ofstream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff),
                           static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

inline std::uint32_t get_u32(std::ifstream& is) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated header");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f32(std::ofstream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32(std::ifstream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace detail

inline void save_checkpoint(const Mlp<float>& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    detail::put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
        detail::put_u32(os, static_cast<std::uint32_t>(layer.in));
        detail::put_u32(os, static_cast<std::uint32_t>(layer.out));
    }
    for (const auto& layer : net.layers()) {
        for (float w : layer.w) detail::put_f32(os, w);
        for (float b : layer.b) detail::put_f32(os, b);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Mlp<float> load_checkpoint(const std::string& path, double lr = 1e-3,
                                  int batch_size = 128) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    const std::uint32_t layer_count = detail::get_u32(is);
    if (layer_count < 2) throw std::runtime_error("checkpoint: needs at least two layers");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(layer_count);
    for (auto& [in, out] : dims) {
        in = detail::get_u32(is);
        out = detail::get_u32(is);
    }
    for (std::size_t l = 1; l < dims.size(); ++l)
        if (dims[l].first != dims[l - 1].second)
            throw std::runtime_error("checkpoint: layer shapes do not chain");

    MlpConfig cfg;
    cfg.input_dim = static_cast<int>(dims.front().first);
    cfg.hidden_size = static_cast<int>(dims.front().second);
    cfg.num_layers = static_cast<int>(layer_count) - 1;
    cfg.output_dim = static_cast<int>(dims.back().second);
    cfg.lr = lr;
    cfg.batch_size = batch_size;
    Mlp<float> net(cfg);

    for (auto& layer : net.layers()) {
        for (float& w : layer.w) w = detail::get_f32(is);
        for (float& b : layer.b) b = detail::get_f32(is);
    }
    return net;
}

}  // namespace breed
