#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "breed/deviation_ledger.hpp"
#include "breed/sampler.hpp"
#include "breed/stats.hpp"

using namespace breed;

namespace {

TrainRecord make_record(std::uint64_t iteration, std::vector<PerSampleLoss> losses) {
    TrainRecord rec;
    rec.iteration = iteration;
    rec.losses = std::move(losses);
    std::vector<double> values;
    for (const auto& l : rec.losses) values.push_back(l.loss);
    rec.mu = mean_of(values);
    rec.sigma = population_std(values);
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        rec.mu = values[0];
        rec.sigma = 0.0;
    }
    return rec;
}

BreedConfig desk_breed(std::uint32_t budget = 16) {
    BreedConfig cfg;
    cfg.budget = budget;
    cfg.window = budget;
    cfg.width = 5.0;
    return cfg;
}

// Completes sim `id` in one batch with a flat deviation profile of the
// requested strength: every timestep gets loss mu + strength * sigma.
void complete_sim(DeviationLedger& ledger, std::uint32_t id, std::uint32_t samples_per_sim,
                  double strength, std::uint64_t iteration) {
    TrainRecord rec;
    rec.iteration = iteration;
    rec.mu = 1.0;
    rec.sigma = 1.0;
    for (std::uint32_t t = 0; t < samples_per_sim; ++t)
        rec.losses.push_back({{id, t}, 1.0 + strength});
    ledger.record_batch(rec);
}

}  // namespace

TEST_CASE("deviation clamps below the mean and normalizes above it") {
    REQUIRE(deviation(3.0, 3.0, 2.0) == 0.0);
    REQUIRE(deviation(5.0, 3.0, 2.0) == 1.0);
    REQUIRE(deviation(1.0, 3.0, 2.0) == 0.0);
    REQUIRE(deviation(7.5, 3.0, 2.0) == 2.25);
    REQUIRE(deviation(100.0, 3.0, 0.0) == 0.0);  // degenerate batch
}

TEST_CASE("deviation is invariant under affine loss rescaling") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> loss_dist(0.0, 10.0);
    std::uniform_real_distribution<double> scale_dist(0.1, 100.0);
    std::uniform_real_distribution<double> shift_dist(-50.0, 50.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> losses(16);
        for (double& l : losses) l = loss_dist(rng);
        const double mu = mean_of(losses);
        const double sigma = population_std(losses);
        if (sigma == 0.0) continue;
        const double a = scale_dist(rng);
        const double b = shift_dist(rng);
        for (double l : losses) {
            const double d = deviation(l, mu, sigma);
            const double d_scaled = deviation(a * l + b, a * mu + b, a * sigma);
            REQUIRE_THAT(d_scaled, Catch::Matchers::WithinRel(d, 1e-12) ||
                                       Catch::Matchers::WithinAbs(d, 1e-15));
        }
    }
}

TEST_CASE("record_batch keeps a running mean per (sim, timestep)") {
    DeviationLedger ledger(4, 3);
    // Losses {0.5, 0.0}: mu = 0.25, sigma = 0.25, so the high sample
    // deviates by 1 and the low one clamps to 0.
    ledger.record_batch(make_record(1, {{{0, 0}, 0.5}, {{1, 0}, 0.0}}));
    REQUIRE(ledger.delta_mean(0, 0) == 1.0);
    REQUIRE(ledger.delta_mean(1, 0) == 0.0);

    DeviationLedger direct(4, 3);
    TrainRecord r1;
    r1.iteration = 1;
    r1.mu = 0.0;
    r1.sigma = 1.0;
    r1.losses = {{{0, 0}, 0.5}};
    direct.record_batch(r1);
    REQUIRE(direct.delta_mean(0, 0) == 0.5);
    TrainRecord r2 = r1;
    r2.iteration = 2;
    r2.losses = {{{0, 0}, 1.5}};
    direct.record_batch(r2);
    REQUIRE(direct.delta_mean(0, 0) == 1.0);  // mean of {0.5, 1.5}
}

TEST_CASE("Q is the timestep average once the trajectory is covered") {
    DeviationLedger ledger(2, 2);
    TrainRecord rec;
    rec.iteration = 7;
    rec.mu = 0.0;
    rec.sigma = 1.0;
    rec.losses = {{{0, 0}, 1.0}, {{0, 1}, 0.0}};
    ledger.record_batch(rec);
    REQUIRE(ledger.completed(0));
    REQUIRE(ledger.q(0) == 0.5);
    REQUIRE(ledger.q_update_iteration(0) == 7);
    REQUIRE_FALSE(ledger.completed(1));
    REQUIRE_FALSE(ledger.q(1).has_value());
}

TEST_CASE("a degenerate batch contributes zero deviations") {
    DeviationLedger ledger(1, 2);
    TrainRecord rec;
    rec.iteration = 1;
    rec.mu = 4.2;
    rec.sigma = 0.0;
    rec.losses = {{{0, 0}, 4.2}, {{0, 1}, 4.2}};
    ledger.record_batch(rec);
    REQUIRE(ledger.q(0) == 0.0);
}

TEST_CASE("batch arrival order does not change the running means") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> loss_dist(0.0, 2.0);
    std::vector<TrainRecord> records;
    for (int b = 0; b < 6; ++b) {
        std::vector<PerSampleLoss> losses;
        for (std::uint32_t t = 0; t < 4; ++t)
            losses.push_back({{static_cast<std::uint32_t>(b % 3), t}, loss_dist(rng)});
        records.push_back(make_record(b + 1, std::move(losses)));
    }
    DeviationLedger forward_order(3, 4);
    for (const auto& r : records) forward_order.record_batch(r);

    // Disjoint keys across batches commute; batches touching the same key
    // preserve their relative order within these permutations.
    DeviationLedger grouped(3, 4);
    for (int sim = 0; sim < 3; ++sim)
        for (std::size_t b = 0; b < records.size(); ++b)
            if (b % 3 == static_cast<std::size_t>(sim)) grouped.record_batch(records[b]);

    for (std::uint32_t sim = 0; sim < 3; ++sim)
        for (std::uint32_t t = 0; t < 4; ++t)
            REQUIRE(forward_order.delta_mean(sim, t) == grouped.delta_mean(sim, t));
}

TEST_CASE("window orders completed sims by score recency") {
    DeviationLedger ledger(8, 2);
    complete_sim(ledger, 0, 2, 0.1, 1);
    complete_sim(ledger, 1, 2, 0.2, 2);
    complete_sim(ledger, 2, 2, 0.3, 3);
    auto window = ledger.window(8);
    REQUIRE(window.size() == 3);
    REQUIRE(window[0].sim_id == 2);
    REQUIRE(window[1].sim_id == 1);
    REQUIRE(window[2].sim_id == 0);

    complete_sim(ledger, 0, 2, 0.5, 4);  // re-touch moves sim 0 to the front
    window = ledger.window(2);
    REQUIRE(window.size() == 2);
    REQUIRE(window[0].sim_id == 0);
    REQUIRE(window[1].sim_id == 2);
}

TEST_CASE("importance weights self-normalize to the population size") {
    const std::vector<double> q{1.0, 2.0, 3.0};
    const std::vector<double> w = importance_weights(q);
    REQUIRE(w == std::vector<double>{0.5, 1.0, 1.5});

    const std::vector<double> equal{0.7, 0.7, 0.7, 0.7};
    for (double v : importance_weights(equal)) REQUIRE(v == 1.0);

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> dist(0.0, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> scores(1 + trial % 32);
        for (double& s : scores) s = dist(rng);
        const std::vector<double> weights = importance_weights(scores);
        double sum = 0.0;
        for (double v : weights) sum += v;
        REQUIRE_THAT(sum, Catch::Matchers::WithinRel(static_cast<double>(scores.size()), 1e-12));
    }
}

TEST_CASE("all-zero scores fall back to uniform weights") {
    const std::vector<double> zeros(5, 0.0);
    for (double v : importance_weights(zeros)) REQUIRE(v == 1.0);
}

TEST_CASE("resample_locations follows the weights") {
    std::mt19937_64 rng(5);
    const std::vector<SimParams> population{{{110, 110, 110, 110, 110}},
                                            {{200, 200, 200, 200, 200}},
                                            {{490, 490, 490, 490, 490}}};
    const std::vector<double> point_mass{0.0, 0.0, 1.0};
    for (const SimParams& p : resample_locations(population, point_mass, 50, rng))
        REQUIRE(p == population[2]);

    REQUIRE(resample_locations(population, point_mass, 0, rng).empty());

    const std::vector<double> zeros{0.0, 0.0, 0.0};
    REQUIRE_THROWS_AS(resample_locations(population, zeros, 3, rng), DegenerateWeights);

    const std::vector<SimParams> pair{population[0], population[1]};
    const std::vector<double> even{1.0, 1.0};
    int first = 0;
    const int k = 10000;
    for (const SimParams& p : resample_locations(pair, even, k, rng))
        if (p == pair[0]) ++first;
    const double margin = 3.0 * std::sqrt(k * 0.25);
    REQUIRE_THAT(static_cast<double>(first), Catch::Matchers::WithinAbs(k / 2.0, margin));
}

TEST_CASE("sample_member shrinks on out-of-bounds draws and gives up at the location") {
    std::mt19937_64 rng(13);
    const Bounds bounds{100.0, 500.0};

    const SimParams corner{{100, 100, 100, 100, 100}};
    const MemberDraw stuck = sample_member(corner, 1e6, bounds, rng);
    REQUIRE(stuck.params == corner);
    REQUIRE_THAT(stuck.width, Catch::Matchers::WithinRel(1e6 * std::pow(0.7, 5), 1e-12));

    const SimParams center{{300, 300, 300, 300, 300}};
    const MemberDraw tight = sample_member(center, 1e-9, bounds, rng);
    REQUIRE(tight.width == 1e-9);
    for (int d = 0; d < kParamDim; ++d)
        REQUIRE_THAT(tight.params[d], Catch::Matchers::WithinAbs(300.0, 1e-6));
}

TEST_CASE("accepted draws have the proposal's moments") {
    std::mt19937_64 rng(21);
    const Bounds bounds{100.0, 500.0};
    const SimParams center{{300, 300, 300, 300, 300}};
    const int n = 10000;
    std::array<double, kParamDim> sums{};
    for (int i = 0; i < n; ++i) {
        const MemberDraw draw = sample_member(center, 5.0, bounds, rng);
        for (int d = 0; d < kParamDim; ++d) sums[d] += draw.params[d];
    }
    const double stderr3 = 3.0 * 5.0 / std::sqrt(static_cast<double>(n));
    for (int d = 0; d < kParamDim; ++d)
        REQUIRE_THAT(sums[d] / n, Catch::Matchers::WithinAbs(300.0, stderr3));
}

TEST_CASE("r schedule ramps linearly and then holds") {
    BreedConfig cfg = desk_breed();
    cfg.r_s = 0.5;
    cfg.r_e = 0.7;
    cfg.r_c = 3.0;
    REQUIRE(r_value(0, cfg) == 0.5);
    REQUIRE_THAT(r_value(1, cfg), Catch::Matchers::WithinRel(0.5 + 0.2 / 3.0, 1e-12));
    REQUIRE_THAT(r_value(3, cfg), Catch::Matchers::WithinRel(0.7, 1e-12));
    REQUIRE_THAT(r_value(99, cfg), Catch::Matchers::WithinRel(0.7, 1e-12));
}

TEST_CASE("breed_resample requires a scored simulation") {
    DeviationLedger empty(4, 2);
    const std::vector<SimParams> params(4, SimParams{{300, 300, 300, 300, 300}});
    BreedConfig cfg = desk_breed(4);
    std::mt19937_64 rng(cfg.seed);
    REQUIRE_THROWS_AS(breed_resample(empty, params, 3, 0, cfg, rng), NoCompletedSimulations);
}

TEST_CASE("breed_resample provenance tags follow the mixing ratio") {
    DeviationLedger ledger(4, 2);
    complete_sim(ledger, 0, 2, 0.4, 1);
    complete_sim(ledger, 1, 2, 1.2, 2);
    std::vector<SimParams> params(4, SimParams{{250, 260, 270, 280, 290}});
    params[1] = {{410, 420, 430, 440, 450}};

    BreedConfig cfg = desk_breed(4);
    std::mt19937_64 rng(9);

    cfg.r_s = cfg.r_e = 1.0;
    for (const TaggedParams& t : breed_resample(ledger, params, 200, 0, cfg, rng).draws)
        REQUIRE(t.provenance == Provenance::proposal);

    cfg.r_s = cfg.r_e = 0.0;
    for (const TaggedParams& t : breed_resample(ledger, params, 200, 0, cfg, rng).draws)
        REQUIRE(t.provenance == Provenance::uniform);

    cfg.r_s = cfg.r_e = 0.7;
    const std::uint32_t k = 10000;
    const ResampleResult res = breed_resample(ledger, params, k, 5, cfg, rng);
    REQUIRE(res.mixture.r == 0.7);
    REQUIRE(res.mixture.components.size() == k);
    std::uint32_t uniform_count = 0;
    for (const TaggedParams& t : res.draws)
        if (t.provenance == Provenance::uniform) ++uniform_count;
    const double margin = 3.0 * std::sqrt(0.3 * 0.7 / k);
    REQUIRE_THAT(uniform_count / static_cast<double>(k),
                 Catch::Matchers::WithinAbs(0.3, margin));
}

TEST_CASE("every resampled parameter stays in bounds") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> temp(100.0, 500.0);
    DeviationLedger ledger(8, 2);
    std::vector<SimParams> params(8);
    for (std::uint32_t id = 0; id < 8; ++id) {
        for (int d = 0; d < kParamDim; ++d) params[id][d] = temp(rng);
        complete_sim(ledger, id, 2, temp(rng) / 100.0, id + 1);
    }
    for (int trial = 0; trial < 20; ++trial) {
        BreedConfig cfg = desk_breed(8);
        cfg.width = trial % 2 == 0 ? 5.0 : 400.0;  // wide widths force retries
        const ResampleResult res = breed_resample(ledger, params, 500, trial, cfg, rng);
        for (const TaggedParams& t : res.draws) REQUIRE(t.params.within(cfg.bounds));
        for (const auto& c : res.mixture.components) REQUIRE(c.location.within(cfg.bounds));
    }
}

TEST_CASE("breed config validation") {
    BreedConfig cfg = desk_breed();
    cfg.window = cfg.budget + 1;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_breed();
    cfg.width = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_breed();
    cfg.r_s = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_breed();
    cfg.shrink = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
