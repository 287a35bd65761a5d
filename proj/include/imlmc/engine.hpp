#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "imlmc/errors.hpp"
#include "imlmc/grid.hpp"
#include "imlmc/model.hpp"
#include "imlmc/random.hpp"

namespace imlmc {

/// Gaussian increments over the fine grid, one row of q components per fine
/// step, each ~ N(0, step length). The coarse scheme consumes the same
/// increments aggregated over each coarse interval, so both schemes ride
/// one Brownian path.
struct BrownianPath {
    const NestedGrid* grid = nullptr;
    std::size_t q = 0;
    std::vector<double> increments;  // step-major, q entries per fine step

    double at(std::size_t step, std::size_t comp) const {
        return increments[step * q + comp];
    }
};

/// Coarse and fine Euler iterates at their grid points, driven by one path.
struct CoupledPath {
    std::vector<Vec> x_coarse;
    std::vector<Vec> x_fine;
    BrownianPath brownian;

    const Vec& coarse_terminal() const { return x_coarse.back(); }
    const Vec& fine_terminal() const { return x_fine.back(); }
};

/// Increments for an arbitrary single grid (used by the level-0 scheme and
/// by statistics checks). Layout matches BrownianPath::increments.
inline std::vector<double> gaussian_increments(const TimeGrid& grid, std::size_t q,
                                               const SeedSpec& seed) {
    Rng rng = make_stream(seed, kStreamPath);
    std::vector<double> out(grid.intervals() * q);
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        const double sd = std::sqrt(grid.step(k));
        for (std::size_t c = 0; c < q; ++c) out[k * q + c] = rng.normal(sd);
    }
    return out;
}

inline BrownianPath sample_brownian(const NestedGrid& grid, std::size_t q,
                                    const SeedSpec& seed) {
    BrownianPath path;
    path.grid = &grid;
    path.q = q;
    path.increments = gaussian_increments(grid.fine, q, seed);
    return path;
}

namespace detail {

inline void check_state(const Vec& x, double t, const char* where) {
    if (!x.all_finite())
        throw simulation_error(std::string(where) + ": nonfinite state at t=" +
                               std::to_string(t));
}

}  // namespace detail

/// One Euler step: x + b(x) dt + sigma(x) dW.
inline Vec euler_step(const SdeModel& model, const Vec& x, double dt, const double* dw) {
    Vec next = x;
    next.axpy(dt, model.drift(x));
    const Mat sig = model.diffusion(x);
    for (std::size_t i = 0; i < model.d; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < model.q; ++c) s += sig(i, c) * dw[c];
        next[i] += s;
    }
    return next;
}

/// Terminal state of the Euler scheme on a single grid.
inline Vec euler_terminal(const SdeModel& model, const TimeGrid& grid,
                          const std::vector<double>& increments) {
    Vec x = model.x0;
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        x = euler_step(model, x, grid.step(k), &increments[k * model.q]);
        detail::check_state(x, grid.points[k + 1], "euler_terminal");
    }
    return x;
}

/// Runs the fine scheme over the fine grid and the coarse scheme over the
/// coarse grid with the same increments aggregated per interval. Aggregation
/// is an ordered sum of the m fine rows, so recomputing it reproduces the
/// coarse path bit for bit.
inline CoupledPath euler_coupled(const SdeModel& model, const NestedGrid& grid,
                                 BrownianPath path) {
    const std::size_t q = model.q;
    const std::size_t m = grid.m;
    if (path.q != q || path.increments.size() != grid.fine.intervals() * q)
        throw std::invalid_argument("euler_coupled: path does not match model/grid dimensions");

    CoupledPath out;
    out.x_fine.reserve(grid.fine.points.size());
    out.x_fine.push_back(model.x0);
    for (std::size_t j = 0; j < grid.fine.intervals(); ++j) {
        Vec next = euler_step(model, out.x_fine.back(), grid.fine.step(j),
                              &path.increments[j * q]);
        detail::check_state(next, grid.fine.points[j + 1], "euler_coupled[fine]");
        out.x_fine.push_back(next);
    }

    std::vector<double> agg(q);
    out.x_coarse.reserve(grid.coarse.points.size());
    out.x_coarse.push_back(model.x0);
    for (std::size_t k = 0; k < grid.coarse.intervals(); ++k) {
        for (std::size_t c = 0; c < q; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += path.at(k * m + j, c);
            agg[c] = s;
        }
        Vec next = euler_step(model, out.x_coarse.back(), grid.coarse.step(k), agg.data());
        detail::check_state(next, grid.coarse.points[k + 1], "euler_coupled[coarse]");
        out.x_coarse.push_back(next);
    }

    out.brownian = std::move(path);
    return out;
}

/// Scaled terminal coupling error sqrt(m n / (m - 1)) * (fine_T - coarse_T).
inline Vec error_stat(const SdeModel& model, const NestedGrid& grid,
                      const CoupledPath& path) {
    const double n = static_cast<double>(grid.coarse.n);
    const double m = static_cast<double>(grid.m);
    const double scale = std::sqrt(m * n / (m - 1.0));
    Vec out(model.d);
    for (std::size_t i = 0; i < model.d; ++i)
        out[i] = scale * (path.fine_terminal()[i] - path.coarse_terminal()[i]);
    return out;
}

}  // namespace imlmc
