#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace breed {

// Sampling space: initial temperature plus the four boundary temperatures.
inline constexpr int kParamDim = 5;

struct Bounds {
    double low = 100.0;
    double high = 500.0;

    bool contains(double v) const { return v >= low && v <= high; }
    double span() const { return high - low; }
};

struct SimParams {
    std::array<double, kParamDim> temps{};

    double& operator[](std::size_t i) { return temps[i]; }
    double operator[](std::size_t i) const { return temps[i]; }

    bool within(const Bounds& b) const {
        for (double t : temps)
            if (!b.contains(t)) return false;
        return true;
    }

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

// Identifies one trajectory timestep across the whole pipeline.
struct SampleKey {
    std::uint32_t sim_id = 0;
    std::uint32_t t = 0;

    friend bool operator==(const SampleKey&, const SampleKey&) = default;
};

struct SampleKeyHash {
    std::size_t operator()(const SampleKey& k) const {
        return std::hash<std::uint64_t>{}(
            (static_cast<std::uint64_t>(k.sim_id) << 32) | k.t);
    }
};

// One streamed trajectory timestep: the unit buffered and trained on.
struct FieldSample {
    std::uint32_t sim_id = 0;
    std::uint32_t t = 0;
    std::vector<float> field;  // row-major M*M, Kelvin
};

struct PerSampleLoss {
    SampleKey key;
    double loss = 0.0;
};

// Outcome of one training step: batch statistics plus the per-sample
// losses the deviation ledger aggregates.
struct TrainRecord {
    std::uint64_t iteration = 0;
    double mu = 0.0;     // batch mean loss
    double sigma = 0.0;  // population std of the batch losses
    std::vector<PerSampleLoss> losses;
};

}  // namespace breed
