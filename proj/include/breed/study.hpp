#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "breed/run_config.hpp"
#include "breed/server.hpp"

namespace breed {

// A study file is an ordinary run config in which any key may carry a
// comma-separated value list; listed keys become grid axes and the study is
// their cartesian product. At least one axis is required.
struct StudyPlan {
    std::string root;                                             // study output directory
    std::vector<std::pair<std::string, std::string>> base;        // single-valued keys
    std::vector<std::string> axis_keys;                           // in file order
    std::vector<std::vector<std::string>> axis_values;
    struct Point {
        std::string run_dir;
        std::vector<std::pair<std::string, std::string>> overrides;
    };
    std::vector<Point> points;
    bool shared_validation = false;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(value);
    while (std::getline(is, cell, ',')) {
        const std::string trimmed = trim(cell);
        if (trimmed.empty()) throw std::invalid_argument("study: empty grid value in " + value);
        out.push_back(trimmed);
    }
    return out;
}

// Axes over these keys change what the validation set contains, so it can
// no longer be shared across the grid.
inline bool affects_validation(const std::string& key) {
    for (const char* k : {"M", "T_steps", "dt", "alpha", "domain_length", "lin_tol",
                          "lin_max_iter", "low", "high", "validation_size", "validation_path"})
        if (key == k) return true;
    return false;
}

}  // namespace detail

inline StudyPlan plan_study(const std::string& grid_path) {
    StudyPlan plan;
    plan.root = "study_out";
    plan.shared_validation = true;
    for (const auto& [key, value] : load_key_values(grid_path)) {
        if (value.find(',') == std::string::npos) {
            if (key == "output_dir") plan.root = value;
            else plan.base.emplace_back(key, value);
            continue;
        }
        if (key == "output_dir" || key == "validation_path")
            throw std::invalid_argument("study: key " + key + " cannot be a grid axis");
        plan.axis_keys.push_back(key);
        plan.axis_values.push_back(detail::split_list(value));
        if (detail::affects_validation(key)) plan.shared_validation = false;
    }
    if (plan.axis_keys.empty())
        throw std::invalid_argument("study: empty grid (no comma-separated key)");

    std::size_t count = 1;
    for (const auto& vals : plan.axis_values) count *= vals.size();

    std::vector<std::size_t> index(plan.axis_keys.size(), 0);
    for (std::size_t p = 0; p < count; ++p) {
        StudyPlan::Point point;
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", p);
        point.run_dir = plan.root + "/" + name;
        for (std::size_t a = 0; a < plan.axis_keys.size(); ++a)
            point.overrides.emplace_back(plan.axis_keys[a], plan.axis_values[a][index[a]]);
        plan.points.push_back(std::move(point));
        for (std::size_t a = plan.axis_keys.size(); a-- > 0;) {
            if (++index[a] < plan.axis_values[a].size()) break;
            index[a] = 0;
        }
    }
    return plan;
}

inline RunConfig point_config(const StudyPlan& plan, const StudyPlan::Point& point) {
    std::vector<std::pair<std::string, std::string>> pairs = plan.base;
    pairs.insert(pairs.end(), point.overrides.begin(), point.overrides.end());
    pairs.emplace_back("output_dir", point.run_dir);
    if (plan.shared_validation)
        pairs.emplace_back("validation_path", plan.root + "/validation.bin");
    return RunConfig::from_pairs(pairs);
}

inline void write_manifest(const StudyPlan& plan) {
    std::ofstream os(plan.root + "/manifest.csv", std::ios::trunc);
    if (!os) throw std::runtime_error("study: cannot write manifest in " + plan.root);
    os << "run_dir";
    for (const std::string& k : plan.axis_keys) os << ',' << k;
    os << '\n';
    for (const StudyPlan::Point& p : plan.points) {
        os << p.run_dir;
        for (const auto& [key, value] : p.overrides) os << ',' << value;
        os << '\n';
    }
}

// Executes every grid point, each in its own directory with its own RNG
// streams; `jobs` > 1 runs points concurrently.
inline std::vector<RunResult> run_study(const StudyPlan& plan, unsigned jobs = 1) {
    std::filesystem::create_directories(plan.root);
    write_manifest(plan);
    if (plan.shared_validation)
        ensure_validation(point_config(plan, plan.points.front()));

    std::vector<RunResult> results(plan.points.size());
    if (jobs <= 1) {
        for (std::size_t p = 0; p < plan.points.size(); ++p)
            results[p] = run(point_config(plan, plan.points[p]));
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                while (true) {
                    const std::size_t p = next.fetch_add(1);
                    if (p >= plan.points.size()) return;
                    results[p] = run(point_config(plan, plan.points[p]));
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : workers) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace breed
