#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "breed/deviation_ledger.hpp"
#include "breed/rng.hpp"
#include "breed/types.hpp"

namespace breed {

struct DegenerateWeights : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoCompletedSimulations : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BreedConfig {
    std::uint32_t budget = 200;  // S, total simulations
    std::uint32_t window = 200;  // N, proposal population size
    std::uint32_t period = 200;  // P, training iterations between resamplings
    double width = 5.0;          // sigma, Kelvin
    double r_s = 0.5;            // concentrate-explore schedule: start,
    double r_e = 0.9;            //   end,
    double r_c = 3.0;            //   resamplings to reach the end value
    Bounds bounds{};
    int max_retries = 5;
    double shrink = 0.7;  // width multiplier per out-of-bounds retry
    std::uint64_t seed = 0;

    void validate() const {
        if (budget < 1) throw std::invalid_argument("BreedConfig: budget must be >= 1");
        if (window < 1 || window > budget)
            throw std::invalid_argument("BreedConfig: window must be in [1, budget]");
        if (period < 1) throw std::invalid_argument("BreedConfig: period must be >= 1");
        if (width <= 0.0) throw std::invalid_argument("BreedConfig: width must be > 0");
        for (double r : {r_s, r_e})
            if (r < 0.0 || r > 1.0)
                throw std::invalid_argument("BreedConfig: r values must be in [0, 1]");
        if (r_c < 0.0) throw std::invalid_argument("BreedConfig: r_c must be >= 0");
        if (bounds.low >= bounds.high)
            throw std::invalid_argument("BreedConfig: bounds.low must be < bounds.high");
        if (max_retries < 0) throw std::invalid_argument("BreedConfig: max_retries must be >= 0");
        if (shrink <= 0.0 || shrink >= 1.0)
            throw std::invalid_argument("BreedConfig: shrink must be in (0, 1)");
    }
};

// Proposal mass at resampling s: linear ramp from r_s to r_e over the first
// r_c resamplings, constant r_e afterwards.
inline double r_value(std::uint64_t s, const BreedConfig& cfg) {
    const double f = cfg.r_c > 0.0 ? std::min(static_cast<double>(s) / cfg.r_c, 1.0) : 1.0;
    return cfg.r_s + f * (cfg.r_e - cfg.r_s);
}

// Self-normalized importance weights w_j = Q_j / mean(Q); their sum is
// always the population size. All-zero scores carry no signal, so the
// weights fall back to uniform.
inline std::vector<double> importance_weights(std::span<const double> q) {
    if (q.empty()) throw std::invalid_argument("importance_weights: empty scores");
    double total = 0.0;
    for (double v : q) {
        if (v < 0.0) throw std::invalid_argument("importance_weights: negative score");
        total += v;
    }
    std::vector<double> w(q.size());
    if (total == 0.0) {
        std::fill(w.begin(), w.end(), 1.0);
        return w;
    }
    const double mean = total / static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) w[i] = q[i] / mean;
    return w;
}

// Walker alias table: O(N) build, O(1) per draw, so resampling K locations
// out of a window of N stays O(K + N).
class AliasTable {
public:
    explicit AliasTable(std::span<const double> weights) {
        const std::size_t n = weights.size();
        if (n == 0) throw std::invalid_argument("AliasTable: empty weights");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("AliasTable: negative weight");
            total += w;
        }
        if (total <= 0.0) throw DegenerateWeights("AliasTable: all weights zero");

        prob_.resize(n);
        alias_.resize(n);
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * n / total;

        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i)
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        while (!small.empty() && !large.empty()) {
            const std::uint32_t s = small.back();
            small.pop_back();
            const std::uint32_t l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::uint32_t i : large) prob_[i] = 1.0;
        for (std::uint32_t i : small) prob_[i] = 1.0;  // rounding leftovers
    }

    std::uint32_t draw(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng) * static_cast<double>(prob_.size());
        auto idx = static_cast<std::uint32_t>(u);
        if (idx >= prob_.size()) idx = static_cast<std::uint32_t>(prob_.size()) - 1;
        const double frac = u - static_cast<double>(idx);
        return frac < prob_[idx] ? idx : alias_[idx];
    }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

// K multinomial draws with replacement, probability proportional to weight.
inline std::vector<SimParams> resample_locations(std::span<const SimParams> population,
                                                 std::span<const double> weights,
                                                 std::uint32_t k, std::mt19937_64& rng) {
    if (population.size() != weights.size())
        throw std::invalid_argument("resample_locations: population/weights size mismatch");
    std::vector<SimParams> out;
    if (k == 0) return out;
    const AliasTable table(weights);  // throws DegenerateWeights on all-zero
    out.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) out.push_back(population[table.draw(rng)]);
    return out;
}

struct MemberDraw {
    SimParams params;
    double width;  // possibly shrunk by out-of-bounds retries
};

// One draw from an isotropic Gaussian proposal member. An out-of-bounds draw
// shrinks the width and retries, at most max_retries times; if every retry
// lands outside, the member degenerates to its location.
inline MemberDraw sample_member(const SimParams& location, double width, const Bounds& bounds,
                                std::mt19937_64& rng, int max_retries = 5, double shrink = 0.7) {
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) width *= shrink;
        std::normal_distribution<double> noise(0.0, width);
        SimParams candidate;
        for (int d = 0; d < kParamDim; ++d) candidate[d] = location[d] + noise(rng);
        if (candidate.within(bounds)) return {candidate, width};
    }
    return {location, width};
}

enum class Provenance { uniform, proposal };

inline const char* to_string(Provenance p) {
    return p == Provenance::uniform ? "uniform" : "proposal";
}

struct TaggedParams {
    SimParams params;
    Provenance provenance = Provenance::uniform;
};

// The Gaussian mixture built at one resampling: K components around the
// multinomially chosen locations, plus the realized proposal mass r.
struct ProposalMixture {
    struct Component {
        SimParams location;
        double width;
    };
    std::vector<Component> components;
    double r = 0.0;
};

struct ResampleResult {
    std::vector<TaggedParams> draws;
    ProposalMixture mixture;
};

// One adaptive resampling pass: weight the window of most recently scored
// simulations, multinomially pick K proposal locations, perturb each within
// bounds, then mix in uniform exploration with probability 1 - r per point.
inline ResampleResult breed_resample(const DeviationLedger& ledger,
                                     std::span<const SimParams> params_by_id, std::uint32_t k,
                                     std::uint64_t s, const BreedConfig& cfg,
                                     std::mt19937_64& rng) {
    if (k < 1) throw std::invalid_argument("breed_resample: k must be >= 1");
    const std::vector<DeviationLedger::ScoredSim> window = ledger.window(cfg.window);
    if (window.empty())
        throw NoCompletedSimulations("breed_resample: no completed simulations scored yet");

    std::vector<double> scores;
    std::vector<SimParams> population;
    scores.reserve(window.size());
    population.reserve(window.size());
    for (const auto& w : window) {
        scores.push_back(w.q);
        if (w.sim_id >= params_by_id.size())
            throw std::out_of_range("breed_resample: scored sim beyond parameter table");
        population.push_back(params_by_id[w.sim_id]);
    }

    const std::vector<double> weights = importance_weights(scores);
    const std::vector<SimParams> locations = resample_locations(population, weights, k, rng);

    ResampleResult result;
    result.mixture.r = r_value(s, cfg);
    result.mixture.components.reserve(k);
    result.draws.reserve(k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const SimParams& loc : locations) {
        const MemberDraw member =
            sample_member(loc, cfg.width, cfg.bounds, rng, cfg.max_retries, cfg.shrink);
        result.mixture.components.push_back({loc, member.width});
        if (unit(rng) < 1.0 - result.mixture.r) {
            result.draws.push_back({uniform_params(cfg.bounds, rng), Provenance::uniform});
        } else {
            result.draws.push_back({member.params, Provenance::proposal});
        }
    }
    return result;
}

}  // namespace breed
