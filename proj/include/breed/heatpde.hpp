#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "breed/types.hpp"

namespace breed {

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    int grid_size = 64;          // M, grid points per side
    int t_steps = 100;           // timesteps per trajectory
    double dt = 0.01;            // seconds per step
    double alpha = 1.0;          // thermal diffusivity, m^2/s
    double domain_length = 1.0;  // meters per side
    double lin_tol = 1e-10;      // relative residual target for the implicit solve
    int lin_max_iter = 0;        // 0 -> 10 * M * M

    double dx() const { return domain_length / (grid_size - 1); }
    int max_iterations() const {
        return lin_max_iter > 0 ? lin_max_iter : 10 * grid_size * grid_size;
    }

    void validate() const {
        if (grid_size < 3) throw std::invalid_argument("SolverConfig: M must be >= 3");
        if (t_steps < 0) throw std::invalid_argument("SolverConfig: T_steps must be >= 0");
        if (dt <= 0.0) throw std::invalid_argument("SolverConfig: dt must be > 0");
        if (alpha <= 0.0) throw std::invalid_argument("SolverConfig: alpha must be > 0");
        if (domain_length <= 0.0)
            throw std::invalid_argument("SolverConfig: domain_length must be > 0");
        if (lin_tol <= 0.0) throw std::invalid_argument("SolverConfig: lin_tol must be > 0");
    }
};

struct Field {
    int m = 0;
    std::vector<double> values;  // row-major m*m, Kelvin

    Field() = default;
    explicit Field(int grid) : m(grid), values(static_cast<std::size_t>(grid) * grid, 0.0) {}

    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * m + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * m + j]; }
};

inline std::vector<float> to_float_field(const Field& f) {
    std::vector<float> out(f.values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(f.values[i]);
    return out;
}

// Initial condition: interior at T0, the four edges at T1..T4. The first
// grid axis is x1, so row 0 is the x1=0 edge. Corners take the value of the
// lowest-numbered edge meeting there (T1 over T2 over T3 over T4), realized
// by write order below.
inline Field init_field(const SimParams& params, const SolverConfig& cfg) {
    const int m = cfg.grid_size;
    Field f(m);
    for (double& v : f.values) v = params[0];
    for (int i = 0; i < m; ++i) {
        f.at(i, m - 1) = params[4];  // x2 = L
        f.at(i, 0) = params[3];      // x2 = 0
    }
    for (int j = 0; j < m; ++j) {
        f.at(m - 1, j) = params[2];  // x1 = L
        f.at(0, j) = params[1];      // x1 = 0
    }
    return f;
}

namespace detail {

// Applies (I - alpha*dt*L_h) to an interior-sized vector, with zero Dirichlet
// lift (boundary contributions live on the right-hand side).
inline void apply_heat_operator(const std::vector<double>& x, std::vector<double>& out,
                                int n, double r) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * n + j;
            double acc = (1.0 + 4.0 * r) * x[idx];
            if (i > 0) acc -= r * x[idx - n];
            if (i < n - 1) acc -= r * x[idx + n];
            if (j > 0) acc -= r * x[idx - 1];
            if (j < n - 1) acc -= r * x[idx + 1];
            out[idx] = acc;
        }
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

// One implicit Euler step: solves (I - alpha*dt*L_h) u' = u on the interior
// by conjugate gradient, Dirichlet boundary rows/columns fixed. The operator
// is symmetric positive definite, so CG converges monotonically; the residual
// target is relative to ||b||.
inline Field step(const Field& u, const SimParams& /*params*/, const SolverConfig& cfg) {
    const int m = cfg.grid_size;
    const int n = m - 2;  // interior points per side
    const double r = cfg.alpha * cfg.dt / (cfg.dx() * cfg.dx());
    const std::size_t nn = static_cast<std::size_t>(n) * n;

    // Right-hand side: previous interior values plus boundary contributions.
    std::vector<double> b(nn);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = u.at(i + 1, j + 1);
            if (i == 0) acc += r * u.at(0, j + 1);
            if (i == n - 1) acc += r * u.at(m - 1, j + 1);
            if (j == 0) acc += r * u.at(i + 1, 0);
            if (j == n - 1) acc += r * u.at(i + 1, m - 1);
            b[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }

    const double b_norm = std::sqrt(detail::dot(b, b));
    std::vector<double> x(nn);
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
    } else {
        // Warm start from the previous interior field.
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                x[static_cast<std::size_t>(i) * n + j] = u.at(i + 1, j + 1);

        std::vector<double> res(nn), p(nn), ap(nn);
        detail::apply_heat_operator(x, ap, n, r);
        for (std::size_t k = 0; k < nn; ++k) res[k] = b[k] - ap[k];
        p = res;
        double rr = detail::dot(res, res);
        const double target = cfg.lin_tol * b_norm;

        int iter = 0;
        while (std::sqrt(rr) > target) {
            if (iter++ >= cfg.max_iterations())
                throw NonConvergence("implicit step: residual " + std::to_string(std::sqrt(rr)) +
                                     " above tolerance after " +
                                     std::to_string(cfg.max_iterations()) + " iterations");
            detail::apply_heat_operator(p, ap, n, r);
            const double alpha_cg = rr / detail::dot(p, ap);
            for (std::size_t k = 0; k < nn; ++k) {
                x[k] += alpha_cg * p[k];
                res[k] -= alpha_cg * ap[k];
            }
            const double rr_next = detail::dot(res, res);
            const double beta = rr_next / rr;
            rr = rr_next;
            for (std::size_t k = 0; k < nn; ++k) p[k] = res[k] + beta * p[k];
        }
    }

    Field out = u;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i + 1, j + 1) = x[static_cast<std::size_t>(i) * n + j];
    return out;
}

// Runs a full trajectory and emits every timestep, t = 0..T_steps, in order.
// Returns the number of emitted samples (always T_steps + 1).
template <class Sink>
std::uint64_t run_trajectory(std::uint32_t sim_id, const SimParams& params,
                             const SolverConfig& cfg, Sink&& emit) {
    Field f = init_field(params, cfg);
    emit(FieldSample{sim_id, 0, to_float_field(f)});
    for (int t = 1; t <= cfg.t_steps; ++t) {
        f = step(f, params, cfg);
        emit(FieldSample{sim_id, static_cast<std::uint32_t>(t), to_float_field(f)});
    }
    return static_cast<std::uint64_t>(cfg.t_steps) + 1;
}

}  // namespace breed
