#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "breed/types.hpp"

namespace breed {

struct NotReady : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReservoirConfig {
    std::uint32_t capacity = 2000;  // C
    std::uint32_t watermark = 300;  // W, distinct samples before training starts
    std::uint32_t batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const {
        if (capacity < 1) throw std::invalid_argument("ReservoirConfig: capacity must be >= 1");
        if (watermark > capacity)
            throw std::invalid_argument("ReservoirConfig: watermark must be <= capacity");
        if (batch_size < 1 || batch_size > watermark)
            throw std::invalid_argument("ReservoirConfig: batch_size must be in [1, watermark]");
    }
};

struct ReservoirEntry {
    SampleKey key;
    SimParams params;
    std::vector<float> target;  // field at key.t, Kelvin
    std::uint32_t times_used = 0;

    bool is_new() const { return times_used == 0; }
};

// Fixed-capacity buffer between ingestion and training. Below capacity it
// appends; at capacity it overwrites a uniformly random entry that has been
// drawn at least once. A put is rejected (never silently dropped) when every
// resident entry is still new, which signals the clients to pause.
//
// Shared by one ingest activity and one training activity; every operation
// is atomic and returns immediately.
class Reservoir {
public:
    explicit Reservoir(const ReservoirConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        cfg.validate();
        entries_.reserve(cfg.capacity);
    }

    // Moves from `entry` only on acceptance; a rejected entry stays intact
    // with the caller, who is responsible for retrying it.
    bool put(ReservoirEntry&& entry) {
        std::lock_guard lock(mu_);
        if (entries_.size() < cfg_.capacity) {
            note_key(entry.key);
            entries_.push_back(std::move(entry));
            return true;
        }
        victims_.clear();
        for (std::uint32_t i = 0; i < entries_.size(); ++i)
            if (!entries_[i].is_new()) victims_.push_back(i);
        if (victims_.empty()) return false;
        std::uniform_int_distribution<std::size_t> pick(0, victims_.size() - 1);
        note_key(entry.key);
        entries_[victims_[pick(rng_)]] = std::move(entry);
        return true;
    }

    // True once the number of distinct samples ever inserted reaches the
    // watermark (replacement does not lower it).
    bool is_ready() const {
        std::lock_guard lock(mu_);
        return seen_.size() >= cfg_.watermark;
    }

    // Uniform sample of b entries without replacement within the batch,
    // via a partial Fisher-Yates shuffle. Drawn entries are marked used,
    // which makes them eligible victims.
    std::vector<ReservoirEntry> draw_batch(std::uint32_t b) {
        std::lock_guard lock(mu_);
        if (seen_.size() < cfg_.watermark)
            throw NotReady("draw_batch: watermark not reached");
        if (b > entries_.size())
            throw std::invalid_argument("draw_batch: batch larger than reservoir");
        indices_.resize(entries_.size());
        for (std::uint32_t i = 0; i < indices_.size(); ++i) indices_[i] = i;
        std::vector<ReservoirEntry> batch;
        batch.reserve(b);
        for (std::uint32_t i = 0; i < b; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, indices_.size() - 1);
            std::swap(indices_[i], indices_[pick(rng_)]);
            ReservoirEntry& e = entries_[indices_[i]];
            ++e.times_used;
            batch.push_back(e);
        }
        return batch;
    }

    std::uint32_t size() const {
        std::lock_guard lock(mu_);
        return static_cast<std::uint32_t>(entries_.size());
    }

    std::uint64_t distinct_inserted() const {
        std::lock_guard lock(mu_);
        return seen_.size();
    }

    // Keys and use counts of the resident entries, for tests and metrics.
    std::vector<std::pair<SampleKey, std::uint32_t>> entry_snapshot() const {
        std::lock_guard lock(mu_);
        std::vector<std::pair<SampleKey, std::uint32_t>> out;
        out.reserve(entries_.size());
        for (const ReservoirEntry& e : entries_) out.emplace_back(e.key, e.times_used);
        return out;
    }

    const ReservoirConfig& config() const { return cfg_; }

private:
    void note_key(const SampleKey& k) {
        seen_.insert((static_cast<std::uint64_t>(k.sim_id) << 32) | k.t);
    }

    ReservoirConfig cfg_;
    mutable std::mutex mu_;
    std::mt19937_64 rng_;
    std::vector<ReservoirEntry> entries_;
    std::vector<std::uint32_t> victims_;  // scratch
    std::vector<std::uint32_t> indices_;  // scratch for batch draws
    std::unordered_set<std::uint64_t> seen_;
};

}  // namespace breed
