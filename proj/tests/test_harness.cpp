#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "breed/analysis.hpp"
#include "breed/halton.hpp"
#include "breed/run_config.hpp"
#include "breed/stats.hpp"
#include "breed/study.hpp"
#include "breed/validation.hpp"
#include "support.hpp"

using namespace breed;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::trunc);
    os << content;
}

// A miniature but well-formed run directory for analyze().
void synth_run_dir(const std::string& dir, bool all_uniform) {
    std::filesystem::create_directories(dir);
    std::vector<SimulationRow> sims;
    for (std::uint32_t id = 0; id < 6; ++id) {
        SimulationRow r;
        r.sim_id = id;
        const double spread = 10.0 * id;
        r.params = {{300 - spread, 300 + spread, 300 - spread, 300 + spread, 300.0}};
        r.provenance =
            (!all_uniform && id >= 3) ? Provenance::proposal : Provenance::uniform;
        r.generation = id >= 3 ? 1 : 0;
        if (id != 5) {
            r.q_final = 0.1 * id;
            r.q_update_iteration = 10 + id;
        }
        sims.push_back(r);
    }
    write_simulations_csv(dir + "/simulations.csv", sims);

    std::ofstream samples(dir + "/samples.csv");
    samples << "iteration,sim_id,t,loss,batch_mu\n";
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> noise(0.0, 0.1);
    for (int i = 1; i <= 40; ++i)
        samples << i << ',' << i % 6 << ',' << i % 3 << ',' << 0.5 / i + noise(rng) << ','
                << 0.4 / i << '\n';
    samples.close();

    std::ofstream metrics(dir + "/metrics.csv");
    metrics << "iteration,train_loss,val_loss,batch_mu,batch_sigma,s,r,reservoir_size\n";
    for (int i = 1; i <= 40; ++i)
        metrics << i << ',' << 1.0 / i << ',' << (i % 10 == 0 ? std::to_string(2.0 / i) : "")
                << ',' << 1.0 / i << ",0.01,0,0.5," << 16 << '\n';
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("halton radical inverse") {
    REQUIRE(halton(1, 2) == 0.5);
    REQUIRE(halton(2, 2) == 0.25);
    REQUIRE(halton(3, 2) == 0.75);
    REQUIRE_THAT(halton(1, 3), Catch::Matchers::WithinRel(1.0 / 3.0, 1e-15));
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::uint64_t> idx(1, 100000);
    for (int trial = 0; trial < 500; ++trial) {
        for (std::uint32_t base : kHaltonBases) {
            const double v = halton(idx(rng), base);
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
        }
    }
}

TEST_CASE("first validation point matches the radical inverses") {
    const Bounds bounds{100.0, 500.0};
    const SimParams p = halton_params(0, bounds);
    REQUIRE_THAT(p[0], Catch::Matchers::WithinAbs(300.0, 1e-12));
    REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(100.0 + 400.0 / 3.0, 1e-12));
    REQUIRE_THAT(p[2], Catch::Matchers::WithinAbs(180.0, 1e-12));
    REQUIRE_THAT(p[3], Catch::Matchers::WithinAbs(100.0 + 400.0 / 7.0, 1e-12));
    REQUIRE_THAT(p[4], Catch::Matchers::WithinAbs(100.0 + 400.0 / 11.0, 1e-12));
}

TEST_CASE("halton points have lower discrepancy than uniform draws") {
    const int n = 200;
    std::vector<std::array<double, 5>> halton_points(n);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < 5; ++d) halton_points[i][d] = halton(i + 1, kHaltonBases[d]);

    const auto probes = testsupport::random_probes(2000, 99);
    const double halton_disc = testsupport::estimate_star_discrepancy(halton_points, probes);

    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double uniform_mean = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::array<double, 5>> pts(n);
        for (auto& p : pts)
            for (double& v : p) v = unit(rng);
        uniform_mean += testsupport::estimate_star_discrepancy(pts, probes);
    }
    uniform_mean /= 20.0;
    REQUIRE(halton_disc < uniform_mean);
}

TEST_CASE("gen_validation produces bounded params and full trajectories") {
    SolverConfig solver;
    solver.grid_size = 6;
    solver.t_steps = 2;
    const Bounds bounds{100.0, 500.0};
    const ValidationSet set = gen_validation(3, bounds, solver);
    REQUIRE(set.n == 3);
    for (const SimParams& p : set.params) REQUIRE(p.within(bounds));
    for (const auto& traj : set.trajectories) REQUIRE(traj.size() == 3 * 36);

    testsupport::TempDir dir("val");
    const std::string path = dir.str() + "/validation.bin";
    save_validation(set, path);
    const ValidationSet loaded = load_validation(path);
    REQUIRE(loaded.n == set.n);
    REQUIRE(loaded.t_steps == set.t_steps);
    REQUIRE(loaded.grid_size == set.grid_size);
    for (std::uint32_t i = 0; i < set.n; ++i) {
        REQUIRE(loaded.params[i] == set.params[i]);
        REQUIRE(loaded.trajectories[i] == set.trajectories[i]);
    }
}

TEST_CASE("param_deviation is the population std of the five temperatures") {
    REQUIRE(param_deviation({{300, 300, 300, 300, 300}}) == 0.0);
    REQUIRE_THAT(param_deviation({{100, 500, 100, 500, 100}}),
                 Catch::Matchers::WithinRel(std::sqrt(38400.0), 1e-12));
    const SimParams p{{120, 480, 250, 330, 410}};
    SimParams q = p;
    std::swap(q.temps[0], q.temps[4]);
    std::swap(q.temps[1], q.temps[2]);
    REQUIRE(param_deviation(p) == param_deviation(q));
}

TEST_CASE("pearson correlation") {
    const std::vector<double> xs{1, 2, 3, 4, 5};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(2.0 * x + 1.0);
    REQUIRE_THAT(pearson(xs, ys), Catch::Matchers::WithinRel(1.0, 1e-12));
    for (double& y : ys) y = -y;
    REQUIRE_THAT(pearson(xs, ys), Catch::Matchers::WithinRel(-1.0, 1e-12));

    REQUIRE_THAT(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}),
                 Catch::Matchers::WithinRel(0.5, 1e-12));

    REQUIRE_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                      DegenerateInput);
    REQUIRE_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), DegenerateInput);
}

TEST_CASE("moving_average trails with a growing prefix") {
    const std::vector<double> series{0.0, 2.0, 4.0};
    REQUIRE(moving_average(series, 1) == series);
    REQUIRE(moving_average(series, 2) == std::vector<double>{0.0, 1.0, 3.0});
    const std::vector<double> constant(7, 3.25);
    REQUIRE(moving_average(constant, 4) == constant);
    REQUIRE_THROWS_AS(moving_average(series, 0), std::invalid_argument);
}

TEST_CASE("config files parse with comments and fail on bad input") {
    testsupport::TempDir dir("cfg");
    const std::string path = dir.str() + "/run.cfg";
    write_file(path,
               "# solver\nM = 8\nT_steps = 4\n\nmode = random  # baseline\n"
               "budget = 10\nwindow = 10\nwatermark = 6\ncapacity = 12\nbatch_size = 4\n"
               "seed = 42\noutput_dir = " +
                   dir.str() + "/out\n");
    const RunConfig cfg = RunConfig::from_file(path);
    REQUIRE(cfg.solver.grid_size == 8);
    REQUIRE(cfg.solver.t_steps == 4);
    REQUIRE(cfg.mode == RunMode::random);
    REQUIRE(cfg.breed.budget == 10);
    REQUIRE(cfg.seed == 42);
    REQUIRE(cfg.mlp.output_dim == 64);
    REQUIRE(cfg.validation_path == dir.str() + "/out/validation.bin");

    write_file(path, "unknown_key = 3\n");
    REQUIRE_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
    write_file(path, "M eight\n");
    REQUIRE_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
    write_file(path, "M = eight\n");
    REQUIRE_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
    write_file(path, "mode = sometimes\n");
    REQUIRE_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
    // Budget too small for the watermark: training could never start.
    write_file(path, "budget = 2\nT_steps = 4\nwatermark = 300\n");
    REQUIRE_THROWS_AS(RunConfig::from_file(path), std::invalid_argument);
}

TEST_CASE("config round-trips through write_file") {
    testsupport::TempDir dir("cfgrt");
    RunConfig cfg;
    cfg.solver.grid_size = 12;
    cfg.mode = RunMode::random;
    cfg.seed = 88;
    cfg.output_dir = dir.str() + "/out";
    cfg.finalize();
    const std::string path = dir.str() + "/cfg.out";
    cfg.write_file(path);
    const RunConfig back = RunConfig::from_file(path);
    REQUIRE(back.solver.grid_size == 12);
    REQUIRE(back.mode == RunMode::random);
    REQUIRE(back.seed == 88);
    REQUIRE(back.breed.width == cfg.breed.width);
    REQUIRE(back.iteration_cap == cfg.iteration_cap);
}

TEST_CASE("study plans are the cartesian product of the grid axes") {
    testsupport::TempDir dir("study");
    const std::string path = dir.str() + "/grid.cfg";
    write_file(path, "output_dir = " + dir.str() +
                         "/out\nhidden_size = 16, 32, 64\nnum_layers = 1,2,3\n"
                         "mode = random, breed\nseed = 7\n");
    const StudyPlan plan = plan_study(path);
    REQUIRE(plan.points.size() == 18);
    REQUIRE(plan.axis_keys == std::vector<std::string>{"hidden_size", "num_layers", "mode"});
    REQUIRE(plan.points.front().run_dir == dir.str() + "/out/run_000");
    REQUIRE(plan.shared_validation);

    // Width study: one axis.
    write_file(path, "width = 1.0, 5.0, 10.0, 25.0\n");
    REQUIRE(plan_study(path).points.size() == 4);

    // Solver axes split the validation set per run.
    write_file(path, "M = 8, 16\n");
    REQUIRE_FALSE(plan_study(path).shared_validation);

    write_file(path, "seed = 3\nbudget = 10\n");
    REQUIRE_THROWS_AS(plan_study(path), std::invalid_argument);  // empty grid
    write_file(path, "output_dir = a, b\n");
    REQUIRE_THROWS_AS(plan_study(path), std::invalid_argument);
}

TEST_CASE("a two-point study runs end to end with a manifest") {
    testsupport::TempDir dir("study_run");
    const std::string path = dir.str() + "/grid.cfg";
    write_file(path, "output_dir = " + dir.str() +
                         "/out\nM = 4\nT_steps = 3\nhidden_size = 4\nbatch_size = 4\n"
                         "capacity = 16\nwatermark = 8\nbudget = 6\nwindow = 6\n"
                         "validation_size = 2\neval_period = 10\niteration_cap = 12\n"
                         "seed = 11\nmode = random, breed\n");
    const StudyPlan plan = plan_study(path);
    REQUIRE(plan.points.size() == 2);
    const auto results = run_study(plan, 2);
    REQUIRE(results.size() == 2);
    for (const RunResult& r : results) REQUIRE(r.sims_done == 6);

    const std::string manifest = slurp(dir.str() + "/out/manifest.csv");
    const auto rows = lines_of(manifest);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0] == "run_dir,mode");
    REQUIRE(std::filesystem::exists(dir.str() + "/out/validation.bin"));
    REQUIRE(std::filesystem::exists(dir.str() + "/out/run_000/simulations.csv"));
    REQUIRE(std::filesystem::exists(dir.str() + "/out/run_001/simulations.csv"));
}

TEST_CASE("analyze emits histograms, correlations and loss curves") {
    testsupport::TempDir dir("analyze");
    const std::string run1 = dir.str() + "/one";
    const std::string run2 = dir.str() + "/two";
    synth_run_dir(run1, false);
    synth_run_dir(run2, true);

    const std::string before = slurp(run1 + "/simulations.csv") + slurp(run1 + "/samples.csv") +
                               slurp(run1 + "/metrics.csv");
    analyze(run1, run2);
    const std::string after = slurp(run1 + "/simulations.csv") + slurp(run1 + "/samples.csv") +
                              slurp(run1 + "/metrics.csv");
    REQUIRE(before == after);  // inputs untouched

    const auto hist = lines_of(slurp(run1 + "/analysis/deviation_histogram.csv"));
    REQUIRE(hist[0] == "run,provenance,bin_low,bin_high,count");
    bool has_uniform = false, has_proposal = false, two_proposal = false;
    for (const auto& line : hist) {
        if (line.find("one,uniform") == 0) has_uniform = true;
        if (line.find("one,proposal") == 0) has_proposal = true;
        if (line.find("two,proposal") == 0) two_proposal = true;
    }
    REQUIRE(has_uniform);
    REQUIRE(has_proposal);
    REQUIRE_FALSE(two_proposal);  // all-uniform run keeps a single group

    const auto means = lines_of(slurp(run1 + "/analysis/deviation_means.csv"));
    int all_rows = 0;
    for (const auto& line : means)
        if (line.find(",all,") != std::string::npos) ++all_rows;
    REQUIRE(all_rows == 2);  // one per compared run

    const auto corr = lines_of(slurp(run1 + "/analysis/correlation_matrix.csv"));
    REQUIRE(corr.size() == 6);
    const auto header = csv::split(corr[0]);
    std::vector<std::vector<std::string>> cells;
    for (std::size_t i = 1; i < corr.size(); ++i) cells.push_back(csv::split(corr[i]));
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(cells[i][0] == header[i + 1]);
        REQUIRE(cells[i][i + 1] == "1");
        for (std::size_t j = 0; j < 5; ++j) REQUIRE(cells[i][j + 1] == cells[j][i + 1]);
    }

    const auto curve = lines_of(slurp(run1 + "/analysis/loss_curve.csv"));
    REQUIRE(curve[0] == "iteration,train_loss,train_loss_smoothed,val_loss");
    REQUIRE(curve.size() == 41);

    REQUIRE_THROWS_AS(analyze(dir.str() + "/missing"), MissingArtifacts);
}
