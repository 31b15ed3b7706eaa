#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "breed/run_artifacts.hpp"
#include "breed/stats.hpp"

namespace breed {

struct AnalyzeOptions {
    std::size_t ma_window = 40;     // loss-curve smoothing window
    std::uint32_t hist_bins = 20;   // param-deviation histogram bins
    double hist_max = 200.0;        // upper edge; the 5-point std cannot exceed it
};

namespace detail {

inline std::string run_label(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.filename().empty()) p = p.parent_path();
    return p.filename().string();
}

inline std::optional<double> pearson_or_nan(std::span<const double> xs,
                                            std::span<const double> ys) {
    try {
        return pearson(xs, ys);
    } catch (const DegenerateInput&) {
        return std::nullopt;
    }
}

}  // namespace detail

// Input-deviation histograms: per run, the distribution of
// the five-temperature spread, split by provenance, plus per-group and
// per-run means.
inline void write_deviation_histograms(const std::vector<std::string>& run_dirs,
                                       const std::string& out_dir, const AnalyzeOptions& opts) {
    std::ofstream hist(out_dir + "/deviation_histogram.csv", std::ios::trunc);
    std::ofstream means(out_dir + "/deviation_means.csv", std::ios::trunc);
    if (!hist || !means) throw std::runtime_error("analyze: cannot write " + out_dir);
    hist << "run,provenance,bin_low,bin_high,count\n";
    means << "run,provenance,count,mean_deviation\n";

    const double bin_width = opts.hist_max / opts.hist_bins;
    for (const std::string& dir : run_dirs) {
        const std::string label = detail::run_label(dir);
        const std::vector<SimulationRow> sims = read_simulations_csv(dir + "/simulations.csv");

        std::map<std::string, std::vector<double>> groups;
        for (const SimulationRow& s : sims) {
            const double dev = param_deviation(s.params);
            groups[to_string(s.provenance)].push_back(dev);
            groups["all"].push_back(dev);
        }
        for (const auto& [group, values] : groups) {
            if (group == "all") continue;  // histogram is the provenance split
            std::vector<std::uint64_t> counts(opts.hist_bins, 0);
            for (double v : values) {
                auto bin = static_cast<std::size_t>(v / bin_width);
                if (bin >= counts.size()) bin = counts.size() - 1;
                ++counts[bin];
            }
            for (std::uint32_t b = 0; b < opts.hist_bins; ++b)
                hist << label << ',' << group << ',' << csv::fmt(b * bin_width) << ','
                     << csv::fmt((b + 1) * bin_width) << ',' << counts[b] << '\n';
        }
        for (const auto& [group, values] : groups)
            means << label << ',' << group << ',' << values.size() << ','
                  << csv::fmt(mean_of(values)) << '\n';
    }
}

// Correlation matrix over the recorded per-sample
// observations: NN iteration, per-sample loss, batch loss, the simulation's
// final Q score and its uniform-provenance indicator. Observations of
// never-scored simulations are skipped; degenerate columns yield nan cells.
inline void write_correlation_matrix(const std::string& run_dir, const std::string& out_dir) {
    const std::vector<SimulationRow> sims = read_simulations_csv(run_dir + "/simulations.csv");
    const std::vector<SampleLogRow> samples = read_samples_csv(run_dir + "/samples.csv");

    std::vector<std::optional<double>> q_by_sim;
    std::vector<double> uniform_by_sim;
    for (const SimulationRow& s : sims) {
        if (s.sim_id >= q_by_sim.size()) {
            q_by_sim.resize(s.sim_id + 1);
            uniform_by_sim.resize(s.sim_id + 1, 0.0);
        }
        q_by_sim[s.sim_id] = s.q_final;
        uniform_by_sim[s.sim_id] = s.provenance == Provenance::uniform ? 1.0 : 0.0;
    }

    const std::array<std::string, 5> names{"iteration", "sample_loss", "batch_loss", "Q",
                                           "uniform"};
    std::array<std::vector<double>, 5> cols;
    for (const SampleLogRow& row : samples) {
        if (row.sim_id >= q_by_sim.size() || !q_by_sim[row.sim_id]) continue;
        cols[0].push_back(static_cast<double>(row.iteration));
        cols[1].push_back(row.loss);
        cols[2].push_back(row.batch_mu);
        cols[3].push_back(*q_by_sim[row.sim_id]);
        cols[4].push_back(uniform_by_sim[row.sim_id]);
    }

    std::ofstream os(out_dir + "/correlation_matrix.csv", std::ios::trunc);
    if (!os) throw std::runtime_error("analyze: cannot write " + out_dir);
    os << "variable";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        os << names[i];
        for (std::size_t j = 0; j < names.size(); ++j) {
            if (i == j) {
                os << ",1";
                continue;
            }
            const auto r = detail::pearson_or_nan(cols[i], cols[j]);
            os << ',' << (r ? csv::fmt(*r) : std::string("nan"));
        }
        os << '\n';
    }
}

// Smoothed loss curves: trailing moving average of the
// training loss next to the sparse validation losses.
inline void write_loss_curve(const std::string& run_dir, const std::string& out_dir,
                             const AnalyzeOptions& opts) {
    const std::vector<MetricsFileRow> rows = read_metrics_csv(run_dir + "/metrics.csv");
    std::vector<double> train;
    train.reserve(rows.size());
    for (const MetricsFileRow& r : rows) train.push_back(r.train_loss);
    const std::vector<double> smoothed = moving_average(train, opts.ma_window);

    std::ofstream os(out_dir + "/loss_curve.csv", std::ios::trunc);
    if (!os) throw std::runtime_error("analyze: cannot write " + out_dir);
    os << "iteration,train_loss,train_loss_smoothed,val_loss\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        os << rows[i].iteration << ',' << csv::fmt(rows[i].train_loss) << ','
           << csv::fmt(smoothed[i]) << ','
           << (rows[i].val_loss ? csv::fmt(*rows[i].val_loss) : std::string{}) << '\n';
}

// Produces the analysis files for one run, or for a two-run comparison when
// a second directory is given. Run artifacts are only read; everything new
// lands under <first run>/analysis/ (and <run>/analysis/ for per-run files).
inline void analyze(const std::string& run_dir, const std::optional<std::string>& run_dir2 = {},
                    const AnalyzeOptions& opts = {}) {
    std::vector<std::string> dirs{run_dir};
    if (run_dir2) dirs.push_back(*run_dir2);
    for (const std::string& dir : dirs)
        if (!std::filesystem::exists(dir + "/simulations.csv"))
            throw MissingArtifacts("missing artifact: " + dir + "/simulations.csv");

    for (const std::string& dir : dirs) {
        const std::string out = dir + "/analysis";
        std::filesystem::create_directories(out);
        write_correlation_matrix(dir, out);
        write_loss_curve(dir, out, opts);
    }
    write_deviation_histograms(dirs, run_dir + "/analysis", opts);
}

}  // namespace breed
