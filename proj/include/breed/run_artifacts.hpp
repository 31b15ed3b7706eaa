#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/sampler.hpp"
#include "breed/types.hpp"

namespace breed {

struct MissingArtifacts : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace csv {

inline std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// Full round-trip precision, used where byte-stable output matters.
inline std::string fmt_exact(double v) { return fmt(v, "%.17g"); }

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace csv

// One metrics.csv row per training iteration; val_loss is empty between
// evaluations.
struct MetricsRow {
    std::uint64_t iteration = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    double batch_mu = 0.0;
    double batch_sigma = 0.0;
    std::uint64_t s = 0;  // completed resamplings
    double r = 0.0;
    std::uint32_t reservoir_size = 0;
};

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path) : os_(path, std::ios::trunc) {
        if (!os_) throw std::runtime_error("metrics.csv: cannot open " + path);
        os_ << "iteration,train_loss,val_loss,batch_mu,batch_sigma,s,r,reservoir_size\n";
    }

    void write(const MetricsRow& row) {
        os_ << row.iteration << ',' << csv::fmt(row.train_loss) << ','
            << (row.val_loss ? csv::fmt(*row.val_loss) : std::string{}) << ','
            << csv::fmt(row.batch_mu) << ',' << csv::fmt(row.batch_sigma) << ',' << row.s << ','
            << csv::fmt(row.r) << ',' << row.reservoir_size << '\n';
    }

    void flush() { os_.flush(); }

private:
    std::ofstream os_;
};

// Periodic per-sample observation log feeding the correlation analysis.
class SampleLogWriter {
public:
    explicit SampleLogWriter(const std::string& path) : os_(path, std::ios::trunc) {
        if (!os_) throw std::runtime_error("samples.csv: cannot open " + path);
        os_ << "iteration,sim_id,t,loss,batch_mu\n";
    }

    void write(std::uint64_t iteration, const TrainRecord& rec) {
        for (const PerSampleLoss& s : rec.losses)
            os_ << iteration << ',' << s.key.sim_id << ',' << s.key.t << ','
                << csv::fmt(s.loss) << ',' << csv::fmt(rec.mu) << '\n';
    }

private:
    std::ofstream os_;
};

// Per-simulation audit record. Q and its update iteration stay empty for
// simulations whose trajectories were never fully scored.
struct SimulationRow {
    std::uint32_t sim_id = 0;
    SimParams params;
    Provenance provenance = Provenance::uniform;
    int generation = 0;
    std::optional<double> q_final;
    std::optional<std::uint64_t> q_update_iteration;
};

inline void write_simulations_csv(const std::string& path,
                                  const std::vector<SimulationRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("simulations.csv: cannot open " + path);
    os << "sim_id,T0,T1,T2,T3,T4,provenance,generation,Q_final,q_update_iteration\n";
    for (const SimulationRow& r : rows) {
        os << r.sim_id;
        for (double t : r.params.temps) os << ',' << csv::fmt_exact(t);
        os << ',' << to_string(r.provenance) << ',' << r.generation << ','
           << (r.q_final ? csv::fmt(*r.q_final) : std::string{}) << ','
           << (r.q_update_iteration ? std::to_string(*r.q_update_iteration) : std::string{})
           << '\n';
    }
}

inline std::vector<SimulationRow> read_simulations_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingArtifacts("missing artifact: " + path);
    std::string line;
    if (!std::getline(is, line)) throw MissingArtifacts("empty artifact: " + path);
    std::vector<SimulationRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = csv::split(line);
        if (cells.size() != 10) throw std::runtime_error("simulations.csv: bad row: " + line);
        SimulationRow r;
        r.sim_id = static_cast<std::uint32_t>(std::stoul(cells[0]));
        for (int d = 0; d < kParamDim; ++d) r.params[d] = std::stod(cells[1 + d]);
        r.provenance = cells[6] == "proposal" ? Provenance::proposal : Provenance::uniform;
        r.generation = std::stoi(cells[7]);
        if (!cells[8].empty()) r.q_final = std::stod(cells[8]);
        if (!cells[9].empty()) r.q_update_iteration = std::stoull(cells[9]);
        rows.push_back(r);
    }
    return rows;
}

struct SampleLogRow {
    std::uint64_t iteration = 0;
    std::uint32_t sim_id = 0;
    std::uint32_t t = 0;
    double loss = 0.0;
    double batch_mu = 0.0;
};

inline std::vector<SampleLogRow> read_samples_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingArtifacts("missing artifact: " + path);
    std::string line;
    if (!std::getline(is, line)) throw MissingArtifacts("empty artifact: " + path);
    std::vector<SampleLogRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = csv::split(line);
        if (cells.size() != 5) throw std::runtime_error("samples.csv: bad row: " + line);
        rows.push_back({std::stoull(cells[0]), static_cast<std::uint32_t>(std::stoul(cells[1])),
                        static_cast<std::uint32_t>(std::stoul(cells[2])), std::stod(cells[3]),
                        std::stod(cells[4])});
    }
    return rows;
}

struct MetricsFileRow {
    std::uint64_t iteration = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

inline std::vector<MetricsFileRow> read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingArtifacts("missing artifact: " + path);
    std::string line;
    if (!std::getline(is, line)) throw MissingArtifacts("empty artifact: " + path);
    std::vector<MetricsFileRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = csv::split(line);
        if (cells.size() < 3) throw std::runtime_error("metrics.csv: bad row: " + line);
        MetricsFileRow r;
        r.iteration = std::stoull(cells[0]);
        r.train_loss = std::stod(cells[1]);
        if (!cells[2].empty()) r.val_loss = std::stod(cells[2]);
        rows.push_back(r);
    }
    return rows;
}

struct RunResult {
    std::uint64_t iterations = 0;
    std::uint64_t resamplings = 0;
    std::uint32_t sims_done = 0;
    std::uint64_t samples_ingested = 0;
    std::uint64_t rejected_puts = 0;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    double train_val_gap = 0.0;
};

inline void write_run_summary(const std::string& path, const RunResult& r) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("run_summary.csv: cannot open " + path);
    os << "iterations,resamplings,sims_done,samples_ingested,rejected_puts,"
          "final_train_loss,final_val_loss,train_val_gap\n";
    os << r.iterations << ',' << r.resamplings << ',' << r.sims_done << ','
       << r.samples_ingested << ',' << r.rejected_puts << ',' << csv::fmt(r.final_train_loss)
       << ',' << csv::fmt(r.final_val_loss) << ',' << csv::fmt(r.train_val_gap) << '\n';
}

}  // namespace breed
