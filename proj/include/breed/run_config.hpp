#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "breed/heatpde.hpp"
#include "breed/mlp.hpp"
#include "breed/reservoir.hpp"
#include "breed/rng.hpp"
#include "breed/sampler.hpp"

namespace breed {

enum class RunMode { random, breed };
enum class Execution { sim, threads, socket };

inline const char* to_string(RunMode m) { return m == RunMode::random ? "random" : "breed"; }
inline const char* to_string(Execution e) {
    switch (e) {
        case Execution::sim: return "sim";
        case Execution::threads: return "threads";
        default: return "socket";
    }
}

// Whole-run configuration. File format: one `key = value` per line, `#`
// comments, keys named after the fields they set. Later assignments win.
struct RunConfig {
    SolverConfig solver;
    MlpConfig mlp;
    ReservoirConfig reservoir;
    BreedConfig breed;
    RunMode mode = RunMode::breed;
    std::uint32_t max_in_flight = 10;  // m, concurrent client limit
    std::uint64_t seed = 0;
    std::string output_dir = "run_out";
    std::uint32_t validation_size = 50;
    std::uint32_t eval_period = 100;
    std::uint64_t iteration_cap = 20000;
    std::string validation_path;  // empty -> <output_dir>/validation.bin
    Execution execution = Execution::sim;
    std::uint32_t sample_log_period = 10;  // batches between per-sample log rows
    double ingest_backoff_ms = 10.0;       // client pause after a rejected put

    RunConfig() {
        // Desk-scale defaults; full-scale runs use M=64, T_steps=100, budget 800.
        solver.grid_size = 32;
        solver.t_steps = 50;
        mlp.hidden_size = 16;
        mlp.num_layers = 1;
        breed.budget = 200;
        breed.window = 200;
        breed.period = 200;
        breed.width = 5.0;
    }

    // Values derived from other fields; call after any direct mutation.
    void finalize() {
        mlp.output_dim = solver.grid_size * solver.grid_size;
        mlp.seed = derive_seed(seed, Stream::nn_init);
        reservoir.batch_size = static_cast<std::uint32_t>(mlp.batch_size);
        reservoir.seed = derive_seed(seed, Stream::reservoir);
        breed.seed = derive_seed(seed, Stream::sampler);
        if (validation_path.empty()) validation_path = output_dir + "/validation.bin";
    }

    void validate() const {
        solver.validate();
        mlp.validate();
        reservoir.validate();
        breed.validate();
        if (max_in_flight < 1) throw std::invalid_argument("config: m must be >= 1");
        if (validation_size < 1)
            throw std::invalid_argument("config: validation_size must be >= 1");
        if (eval_period < 1) throw std::invalid_argument("config: eval_period must be >= 1");
        if (iteration_cap < 1) throw std::invalid_argument("config: iteration_cap must be >= 1");
        if (sample_log_period < 1)
            throw std::invalid_argument("config: sample_log_period must be >= 1");
        if (ingest_backoff_ms < 0.0)
            throw std::invalid_argument("config: ingest_backoff_ms must be >= 0");
        if (output_dir.empty()) throw std::invalid_argument("config: output_dir must be set");
        const std::uint64_t total_samples =
            static_cast<std::uint64_t>(breed.budget) * (solver.t_steps + 1);
        if (total_samples < reservoir.watermark)
            throw std::invalid_argument(
                "config: budget * (T_steps + 1) below the watermark; training could never start");
    }

    static RunConfig from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);
    static RunConfig from_file(const std::string& path);
    void write_file(const std::string& path) const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T v{};
    is >> v;
    if (is.fail() || !is.eof())
        throw std::invalid_argument("config: bad value '" + value + "' for key " + key);
    return v;
}

}  // namespace detail

// Ordered key/value pairs from one config file: comments and blank lines
// stripped, no interpretation of the values.
inline std::vector<std::pair<std::string, std::string>> load_key_values(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' at " + path + ":" +
                                        std::to_string(lineno));
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = detail::trim(trimmed.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config: empty key at " + path + ":" +
                                        std::to_string(lineno));
        pairs.emplace_back(key, value);
    }
    return pairs;
}

inline RunConfig RunConfig::from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    RunConfig cfg;
    for (const auto& [key, value] : pairs) {
        using detail::parse_number;
        if (key == "M") cfg.solver.grid_size = parse_number<int>(key, value);
        else if (key == "T_steps") cfg.solver.t_steps = parse_number<int>(key, value);
        else if (key == "dt") cfg.solver.dt = parse_number<double>(key, value);
        else if (key == "alpha") cfg.solver.alpha = parse_number<double>(key, value);
        else if (key == "domain_length") cfg.solver.domain_length = parse_number<double>(key, value);
        else if (key == "lin_tol") cfg.solver.lin_tol = parse_number<double>(key, value);
        else if (key == "lin_max_iter") cfg.solver.lin_max_iter = parse_number<int>(key, value);
        else if (key == "hidden_size") cfg.mlp.hidden_size = parse_number<int>(key, value);
        else if (key == "num_layers") cfg.mlp.num_layers = parse_number<int>(key, value);
        else if (key == "lr") cfg.mlp.lr = parse_number<double>(key, value);
        else if (key == "batch_size") cfg.mlp.batch_size = parse_number<int>(key, value);
        else if (key == "capacity") cfg.reservoir.capacity = parse_number<std::uint32_t>(key, value);
        else if (key == "watermark") cfg.reservoir.watermark = parse_number<std::uint32_t>(key, value);
        else if (key == "budget") cfg.breed.budget = parse_number<std::uint32_t>(key, value);
        else if (key == "window") cfg.breed.window = parse_number<std::uint32_t>(key, value);
        else if (key == "period") cfg.breed.period = parse_number<std::uint32_t>(key, value);
        else if (key == "width") cfg.breed.width = parse_number<double>(key, value);
        else if (key == "r_s") cfg.breed.r_s = parse_number<double>(key, value);
        else if (key == "r_e") cfg.breed.r_e = parse_number<double>(key, value);
        else if (key == "r_c") cfg.breed.r_c = parse_number<double>(key, value);
        else if (key == "low") cfg.breed.bounds.low = parse_number<double>(key, value);
        else if (key == "high") cfg.breed.bounds.high = parse_number<double>(key, value);
        else if (key == "max_retries") cfg.breed.max_retries = parse_number<int>(key, value);
        else if (key == "shrink") cfg.breed.shrink = parse_number<double>(key, value);
        else if (key == "mode") {
            if (value == "random") cfg.mode = RunMode::random;
            else if (value == "breed") cfg.mode = RunMode::breed;
            else throw std::invalid_argument("config: mode must be random or breed, got " + value);
        } else if (key == "m") cfg.max_in_flight = parse_number<std::uint32_t>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "validation_size") cfg.validation_size = parse_number<std::uint32_t>(key, value);
        else if (key == "eval_period") cfg.eval_period = parse_number<std::uint32_t>(key, value);
        else if (key == "iteration_cap") cfg.iteration_cap = parse_number<std::uint64_t>(key, value);
        else if (key == "validation_path") cfg.validation_path = value;
        else if (key == "execution") {
            if (value == "sim") cfg.execution = Execution::sim;
            else if (value == "threads") cfg.execution = Execution::threads;
            else if (value == "socket") cfg.execution = Execution::socket;
            else throw std::invalid_argument("config: execution must be sim, threads or socket");
        } else if (key == "sample_log_period") cfg.sample_log_period = parse_number<std::uint32_t>(key, value);
        else if (key == "ingest_backoff_ms") cfg.ingest_backoff_ms = parse_number<double>(key, value);
        else throw std::invalid_argument("config: unknown key " + key);
    }
    cfg.finalize();
    cfg.validate();
    return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    return from_pairs(load_key_values(path));
}

inline void RunConfig::write_file(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("config: cannot write " + path);
    os << "M = " << solver.grid_size << "\n"
       << "T_steps = " << solver.t_steps << "\n"
       << "dt = " << solver.dt << "\n"
       << "alpha = " << solver.alpha << "\n"
       << "domain_length = " << solver.domain_length << "\n"
       << "lin_tol = " << solver.lin_tol << "\n"
       << "lin_max_iter = " << solver.lin_max_iter << "\n"
       << "hidden_size = " << mlp.hidden_size << "\n"
       << "num_layers = " << mlp.num_layers << "\n"
       << "lr = " << mlp.lr << "\n"
       << "batch_size = " << mlp.batch_size << "\n"
       << "capacity = " << reservoir.capacity << "\n"
       << "watermark = " << reservoir.watermark << "\n"
       << "budget = " << breed.budget << "\n"
       << "window = " << breed.window << "\n"
       << "period = " << breed.period << "\n"
       << "width = " << breed.width << "\n"
       << "r_s = " << breed.r_s << "\n"
       << "r_e = " << breed.r_e << "\n"
       << "r_c = " << breed.r_c << "\n"
       << "low = " << breed.bounds.low << "\n"
       << "high = " << breed.bounds.high << "\n"
       << "max_retries = " << breed.max_retries << "\n"
       << "shrink = " << breed.shrink << "\n"
       << "mode = " << to_string(mode) << "\n"
       << "m = " << max_in_flight << "\n"
       << "seed = " << seed << "\n"
       << "output_dir = " << output_dir << "\n"
       << "validation_size = " << validation_size << "\n"
       << "eval_period = " << eval_period << "\n"
       << "iteration_cap = " << iteration_cap << "\n"
       << "validation_path = " << validation_path << "\n"
       << "execution = " << to_string(execution) << "\n"
       << "sample_log_period = " << sample_log_period << "\n"
       << "ingest_backoff_ms = " << ingest_backoff_ms << "\n";
}

}  // namespace breed
