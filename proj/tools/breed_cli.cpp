#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "breed/analysis.hpp"
#include "breed/run_config.hpp"
#include "breed/server.hpp"
#include "breed/study.hpp"
#include "breed/validation.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& output_override) {
    breed::RunConfig cfg = breed::RunConfig::from_file(config_path);
    if (!output_override.empty()) {
        cfg.output_dir = output_override;
        cfg.validation_path.clear();
        cfg.finalize();
    }
    const breed::RunResult result = breed::run(cfg);
    std::printf("run complete: %llu iterations, %llu resamplings, %u simulations done\n",
                static_cast<unsigned long long>(result.iterations),
                static_cast<unsigned long long>(result.resamplings), result.sims_done);
    std::printf("final train loss %.6g, val loss %.6g, gap %.6g\n", result.final_train_loss,
                result.final_val_loss, result.train_val_gap);
    std::printf("artifacts in %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_study(const std::string& grid_path, unsigned jobs) {
    const breed::StudyPlan plan = breed::plan_study(grid_path);
    std::printf("study: %zu grid points over", plan.points.size());
    for (const std::string& k : plan.axis_keys) std::printf(" %s", k.c_str());
    std::printf(", output %s\n", plan.root.c_str());
    breed::run_study(plan, jobs);
    std::printf("study complete; manifest at %s/manifest.csv\n", plan.root.c_str());
    return 0;
}

int cmd_gen_validation(const std::string& config_path) {
    breed::RunConfig cfg = breed::RunConfig::from_file(config_path);
    const breed::ValidationSet set =
        breed::gen_validation(cfg.validation_size, cfg.breed.bounds, cfg.solver);
    std::filesystem::create_directories(
        std::filesystem::path(cfg.validation_path).parent_path());
    breed::save_validation(set, cfg.validation_path);
    std::printf("validation set: %u trajectories, T_steps=%u, M=%u -> %s\n", set.n, set.t_steps,
                set.grid_size, cfg.validation_path.c_str());
    return 0;
}

int cmd_analyze(const std::string& dir, const std::string& dir2) {
    std::optional<std::string> second;
    if (!dir2.empty()) second = dir2;
    breed::analyze(dir, second);
    std::printf("analysis written to %s/analysis\n", dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"On-line surrogate training with loss-deviation-guided input resampling"};
    app.require_subcommand(1);

    std::string config_path, grid_path, run_dir, run_dir2, output_dir;
    unsigned jobs = 1;

    CLI::App* run = app.add_subcommand("run", "Execute one training run");
    run->add_option("config", config_path, "run config file")->required();
    run->add_option("--output-dir", output_dir, "override the configured output directory");

    CLI::App* study = app.add_subcommand("study", "Run a config grid, one run per point");
    study->add_option("grid-config", grid_path, "config with comma-separated grid axes")
        ->required();
    study->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

    CLI::App* genval = app.add_subcommand("gen-validation", "Precompute the validation set");
    genval->add_option("config", config_path, "run config file")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "Produce analysis CSVs for run(s)");
    analyze->add_option("dir", run_dir, "run directory")->required();
    analyze->add_option("dir2", run_dir2, "second run directory for comparison");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, output_dir);
        if (study->parsed()) return cmd_study(grid_path, jobs);
        if (genval->parsed()) return cmd_gen_validation(config_path);
        if (analyze->parsed()) return cmd_analyze(run_dir, run_dir2);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
