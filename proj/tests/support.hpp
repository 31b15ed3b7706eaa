#pragma once

// Shared test oracles and fixtures. Everything here is deliberately
// independent of the library's solver/sampler code paths.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/heatpde.hpp"
#include "breed/types.hpp"

namespace testsupport {

// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) pivot = row;
        if (a[pivot * n + col] == 0.0) throw std::runtime_error("singular system");
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = a[row * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[row * n + k] -= f * a[col * n + k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t row = n; row-- > 0;) {
        double acc = b[row];
        for (std::size_t k = row + 1; k < n; ++k) acc -= a[row * n + k] * x[k];
        x[row] = acc / a[row * n + row];
    }
    return x;
}

// Steady-state oracle: direct dense solve of the Laplace system L_h u = 0
// with the Dirichlet boundary values of `params`.
inline breed::Field steady_state_dense(const breed::SimParams& params,
                                       const breed::SolverConfig& cfg) {
    const int m = cfg.grid_size;
    const int n = m - 2;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const breed::Field boundary = breed::init_field(params, cfg);

    std::vector<double> a(nn * nn, 0.0);
    std::vector<double> b(nn, 0.0);
    auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t row = idx(i, j);
            a[row * nn + row] = 4.0;
            if (i > 0) a[row * nn + idx(i - 1, j)] = -1.0;
            else b[row] += boundary.at(0, j + 1);
            if (i < n - 1) a[row * nn + idx(i + 1, j)] = -1.0;
            else b[row] += boundary.at(m - 1, j + 1);
            if (j > 0) a[row * nn + idx(i, j - 1)] = -1.0;
            else b[row] += boundary.at(i + 1, 0);
            if (j < n - 1) a[row * nn + idx(i, j + 1)] = -1.0;
            else b[row] += boundary.at(i + 1, m - 1);
        }
    }
    const std::vector<double> x = solve_dense(std::move(a), std::move(b));

    breed::Field out = boundary;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.at(i + 1, j + 1) = x[idx(i, j)];
    return out;
}

// Star-discrepancy estimate over a fixed random probe set of anchored boxes
// [0, z). The same probes must be used when comparing two point sets.
inline double estimate_star_discrepancy(const std::vector<std::array<double, 5>>& points,
                                        const std::vector<std::array<double, 5>>& probes) {
    double worst = 0.0;
    for (const auto& z : probes) {
        double volume = 1.0;
        for (double zd : z) volume *= zd;
        std::size_t inside = 0;
        for (const auto& p : points) {
            bool in = true;
            for (int d = 0; d < 5; ++d)
                if (p[d] >= z[d]) {
                    in = false;
                    break;
                }
            if (in) ++inside;
        }
        const double frac = static_cast<double>(inside) / points.size();
        worst = std::max(worst, std::abs(frac - volume));
    }
    return worst;
}

inline std::vector<std::array<double, 5>> random_probes(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::array<double, 5>> out(count);
    for (auto& z : out)
        for (double& v : z) v = unit(rng);
    return out;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("breed_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
