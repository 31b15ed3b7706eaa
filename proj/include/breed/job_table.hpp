#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/sampler.hpp"
#include "breed/types.hpp"

namespace breed {

struct UnknownSim : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SimState { pending, submitted, running, done };

struct SimRow {
    SimParams params;
    SimState state = SimState::pending;
    Provenance provenance = Provenance::uniform;
    int generation = 0;  // 0 = initial draw, g = assigned by the g-th resampling
};

// Tracks every simulation of the budget through pending -> submitted ->
// running -> done, with at most m in flight. Submission is in id order, so
// the pending set is always the suffix above the highest submitted id.
//
// All mutation is serialized through one internal lock; steering reads the
// watermark id and overwrites pending parameters in the same critical
// section, which is what makes the k+m rule race-free against the launcher.
class JobTable {
public:
    JobTable(std::vector<SimParams> initial_params, std::uint32_t max_in_flight)
        : max_in_flight_(max_in_flight) {
        if (initial_params.empty()) throw std::invalid_argument("JobTable: empty budget");
        if (max_in_flight < 1) throw std::invalid_argument("JobTable: m must be >= 1");
        rows_.reserve(initial_params.size());
        for (SimParams& p : initial_params)
            rows_.push_back({p, SimState::pending, Provenance::uniform, 0});
    }

    struct Submission {
        std::uint32_t sim_id;
        SimParams params;
    };

    // Submits pending sims in id order until m are in flight or the budget
    // is exhausted. Returns what was newly submitted.
    std::vector<Submission> launcher_tick() {
        std::lock_guard lock(mu_);
        std::vector<Submission> out;
        while (in_flight_ < max_in_flight_ &&
               highest_submitted_ + 1 < static_cast<std::int64_t>(rows_.size())) {
            const auto id = static_cast<std::uint32_t>(highest_submitted_ + 1);
            rows_[id].state = SimState::submitted;
            ++in_flight_;
            ++highest_submitted_;
            out.push_back({id, rows_[id].params});
        }
        return out;
    }

    // Ids eligible for steering: {k+m, ..., S-1} that are still pending.
    // Ids below k+m may already sit in a scheduler queue, so they are never
    // touched.
    std::vector<std::uint32_t> steerable_ids() const {
        std::lock_guard lock(mu_);
        return steerable_unlocked();
    }

    // Runs the sampler and applies its output to the steerable ids under one
    // lock, so the set cannot shift between the read of k and the overwrite.
    // Returns the number of overwritten simulations (0 when none are
    // steerable).
    std::uint32_t steer(
        const std::function<std::vector<TaggedParams>(std::uint32_t)>& sampler,
        int generation) {
        std::lock_guard lock(mu_);
        const std::vector<std::uint32_t> ids = steerable_unlocked();
        if (ids.empty()) return 0;
        const std::vector<TaggedParams> fresh = sampler(static_cast<std::uint32_t>(ids.size()));
        if (fresh.size() != ids.size())
            throw std::logic_error("steer: sampler returned wrong count");
        const std::int64_t floor_id = highest_submitted_ + max_in_flight_;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            SimRow& row = rows_[ids[i]];
            // Protocol invariant of the steering rule; a violation would mean
            // overwriting inputs that may already have been handed out.
            if (row.state != SimState::pending || ids[i] < floor_id)
                throw std::logic_error("steer: attempted overwrite of sim " +
                                       std::to_string(ids[i]) + " below the k+m floor");
            row.params = fresh[i].params;
            row.provenance = fresh[i].provenance;
            row.generation = generation;
        }
        return static_cast<std::uint32_t>(ids.size());
    }

    void mark_running(std::uint32_t id) {
        std::lock_guard lock(mu_);
        check_id(id);
        if (rows_[id].state != SimState::submitted)
            throw std::logic_error("mark_running: sim " + std::to_string(id) +
                                   " not in submitted state");
        rows_[id].state = SimState::running;
    }

    void mark_done(std::uint32_t id) {
        std::lock_guard lock(mu_);
        check_id(id);
        SimState& st = rows_[id].state;
        if (st != SimState::running && st != SimState::submitted)
            throw std::logic_error("mark_done: sim " + std::to_string(id) + " not in flight");
        st = SimState::done;
        --in_flight_;
        ++done_;
    }

    SimParams params(std::uint32_t id) const {
        std::lock_guard lock(mu_);
        check_id(id);
        return rows_[id].params;
    }

    std::vector<SimParams> params_snapshot() const {
        std::lock_guard lock(mu_);
        std::vector<SimParams> out;
        out.reserve(rows_.size());
        for (const SimRow& r : rows_) out.push_back(r.params);
        return out;
    }

    std::vector<SimRow> snapshot() const {
        std::lock_guard lock(mu_);
        return rows_;
    }

    bool all_done() const {
        std::lock_guard lock(mu_);
        return done_ == rows_.size();
    }

    std::uint32_t done_count() const {
        std::lock_guard lock(mu_);
        return static_cast<std::uint32_t>(done_);
    }

    std::uint32_t in_flight() const {
        std::lock_guard lock(mu_);
        return in_flight_;
    }

    std::int64_t highest_submitted() const {
        std::lock_guard lock(mu_);
        return highest_submitted_;
    }

    std::uint32_t budget() const { return static_cast<std::uint32_t>(rows_.size()); }
    std::uint32_t max_in_flight() const { return max_in_flight_; }

private:
    std::vector<std::uint32_t> steerable_unlocked() const {
        std::vector<std::uint32_t> out;
        const std::int64_t first = highest_submitted_ + max_in_flight_;
        for (std::int64_t id = std::max<std::int64_t>(first, 0);
             id < static_cast<std::int64_t>(rows_.size()); ++id)
            if (rows_[id].state == SimState::pending)
                out.push_back(static_cast<std::uint32_t>(id));
        return out;
    }

    void check_id(std::uint32_t id) const {
        if (id >= rows_.size())
            throw UnknownSim("sim id " + std::to_string(id) + " beyond budget");
    }

    mutable std::mutex mu_;
    std::vector<SimRow> rows_;
    std::uint32_t max_in_flight_;
    std::uint32_t in_flight_ = 0;
    std::size_t done_ = 0;
    std::int64_t highest_submitted_ = -1;
};

}  // namespace breed
