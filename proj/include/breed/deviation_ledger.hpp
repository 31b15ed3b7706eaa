#pragma once

#include <algorithm>
#include <cstdint>
#include <list>
#include <optional>
#include <stdexcept>
#include <vector>

#include "breed/types.hpp"

namespace breed {

// Clamped, std-normalized excess of a per-sample loss over its batch mean.
// A zero-sigma batch carries no ranking signal, so the deviation is 0.
inline double deviation(double l, double mu, double sigma) {
    if (sigma == 0.0) return 0.0;
    const double excess = l - mu;
    return excess > 0.0 ? excess / sigma : 0.0;
}

// Per-(sim, timestep) running deviation statistics and per-simulation scores.
// A simulation is scored once every timestep of its trajectory has been seen
// in at least one batch; its score is the timestep average of the running
// deviation means and is refreshed whenever later batches touch it again.
//
// Written only by the training activity, so no internal locking.
class DeviationLedger {
public:
    DeviationLedger(std::uint32_t budget, std::uint32_t samples_per_sim)
        : samples_per_sim_(samples_per_sim),
          sims_(budget),
          mru_pos_(budget, mru_.end()) {
        if (samples_per_sim < 1)
            throw std::invalid_argument("DeviationLedger: samples_per_sim must be >= 1");
    }

    void record_batch(const TrainRecord& record) {
        touched_.clear();
        for (const PerSampleLoss& s : record.losses) {
            if (s.key.sim_id >= sims_.size())
                throw std::out_of_range("record_batch: sim id beyond budget");
            if (s.key.t >= samples_per_sim_)
                throw std::out_of_range("record_batch: timestep beyond trajectory");
            PerSim& sim = sims_[s.key.sim_id];
            if (sim.delta_mean.empty()) {
                sim.delta_mean.assign(samples_per_sim_, 0.0);
                sim.delta_count.assign(samples_per_sim_, 0);
            }
            const double d = deviation(s.loss, record.mu, record.sigma);
            std::uint32_t& count = sim.delta_count[s.key.t];
            if (count == 0) ++sim.covered;
            ++count;
            sim.delta_mean[s.key.t] += (d - sim.delta_mean[s.key.t]) / count;
            touched_.push_back(s.key.sim_id);
        }

        std::sort(touched_.begin(), touched_.end());
        touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
        for (std::uint32_t sim_id : touched_) {
            PerSim& sim = sims_[sim_id];
            if (sim.covered < samples_per_sim_) continue;
            double q = 0.0;
            for (double m : sim.delta_mean) q += m;
            sim.q = q / samples_per_sim_;
            sim.completed = true;
            sim.q_iteration = record.iteration;
            if (mru_pos_[sim_id] != mru_.end()) mru_.erase(mru_pos_[sim_id]);
            mru_.push_front(sim_id);
            mru_pos_[sim_id] = mru_.begin();
        }
    }

    struct ScoredSim {
        std::uint32_t sim_id;
        double q;
    };

    // The n most recently rescored completed simulations, newest first.
    std::vector<ScoredSim> window(std::uint32_t n) const {
        std::vector<ScoredSim> out;
        out.reserve(std::min<std::size_t>(n, mru_.size()));
        for (std::uint32_t sim_id : mru_) {
            if (out.size() == n) break;
            out.push_back({sim_id, sims_[sim_id].q});
        }
        return out;
    }

    std::size_t completed_count() const { return mru_.size(); }

    bool completed(std::uint32_t sim_id) const {
        return sim_id < sims_.size() && sims_[sim_id].completed;
    }

    std::optional<double> q(std::uint32_t sim_id) const {
        if (!completed(sim_id)) return std::nullopt;
        return sims_[sim_id].q;
    }

    std::optional<std::uint64_t> q_update_iteration(std::uint32_t sim_id) const {
        if (!completed(sim_id)) return std::nullopt;
        return sims_[sim_id].q_iteration;
    }

    // Running deviation mean for one (sim, timestep), if ever observed.
    std::optional<double> delta_mean(std::uint32_t sim_id, std::uint32_t t) const {
        if (sim_id >= sims_.size()) return std::nullopt;
        const PerSim& sim = sims_[sim_id];
        if (sim.delta_count.empty() || t >= samples_per_sim_ || sim.delta_count[t] == 0)
            return std::nullopt;
        return sim.delta_mean[t];
    }

private:
    struct PerSim {
        std::vector<double> delta_mean;    // per timestep, running mean
        std::vector<std::uint32_t> delta_count;
        std::uint32_t covered = 0;
        bool completed = false;
        double q = 0.0;
        std::uint64_t q_iteration = 0;
    };

    std::uint32_t samples_per_sim_;  // T_steps + 1
    std::vector<PerSim> sims_;
    std::list<std::uint32_t> mru_;   // completed sims, most recent Q update first
    std::vector<std::list<std::uint32_t>::iterator> mru_pos_;
    std::vector<std::uint32_t> touched_;  // scratch
};

}  // namespace breed
