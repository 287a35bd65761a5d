#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "imlmc/compensated.hpp"
#include "imlmc/model.hpp"

namespace imlmc {

/// Strictly increasing time points from 0 to the horizon. Interior steps
/// follow the recursion tau_{k+1} = tau_k + 1/(n theta(tau_k)); the final
/// point is clipped to the horizon, so the last step may be shorter.
struct TimeGrid {
    std::vector<double> points;
    std::size_t n = 0;     // nominal resolution parameter
    double horizon = 0.0;  // T

    std::size_t intervals() const { return points.empty() ? 0 : points.size() - 1; }
    double step(std::size_t k) const { return points[k + 1] - points[k]; }
};

/// A coarse grid plus its m-refined fine grid. Every coarse point is a fine
/// point (exact float equality) and each coarse interval holds exactly m
/// fine substeps. parent_index maps a fine point to the coarse interval
/// containing it.
struct NestedGrid {
    TimeGrid coarse;
    TimeGrid fine;
    std::size_t m = 0;
    std::vector<std::size_t> parent_index;
};

namespace detail {

// A terminal fragment shorter than this fraction of the running step is
// absorbed into the horizon instead of becoming its own interval, which
// keeps constant-theta grids bit-identical to the closed-form uniform grid.
inline constexpr double kTerminalSnap = 1e-9;
inline constexpr std::size_t kMaxGridPoints = std::size_t{1} << 27;

inline double checked_step(const ThetaSpec& theta, double t, double scale,
                           const char* where) {
    const double th = theta.theta(t);
    if (!(th > 0.0) || !std::isfinite(th))
        throw std::domain_error(std::string(where) + ": theta(t) not positive finite at t=" +
                                std::to_string(t));
    const double h = 1.0 / (scale * th);
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::domain_error(std::string(where) + ": step not positive finite at t=" +
                                std::to_string(t));
    return h;
}

}  // namespace detail

/// Applies the step recursion from 0 until the next point would pass T,
/// then appends T itself. Points are emitted from a compensated
/// accumulator, so with constant theta the grid equals {k * step} exactly.
inline TimeGrid build_coarse(const ThetaSpec& theta, std::size_t n, double T) {
    if (n < 1) throw std::invalid_argument("build_coarse: n must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("build_coarse: T must be positive");

    TimeGrid grid;
    grid.n = n;
    grid.horizon = T;
    grid.points.push_back(0.0);

    CompensatedSum acc;
    const double scale = static_cast<double>(n);
    while (true) {
        const double t = grid.points.back();
        const double h = detail::checked_step(theta, t, scale, "build_coarse");
        acc.add(h);
        const double next = acc.value();
        if (next >= T - detail::kTerminalSnap * h) {
            grid.points.push_back(T);
            break;
        }
        if (next <= t)
            throw std::domain_error("build_coarse: step underflow at t=" + std::to_string(t));
        grid.points.push_back(next);
        if (grid.points.size() > detail::kMaxGridPoints)
            throw std::runtime_error("build_coarse: grid exceeds point cap");
    }
    return grid;
}

/// Refines each coarse interval into exactly m substeps: the fine recursion
/// runs for the first m-1 substeps and the m-th fine point is pinned to the
/// coarse right endpoint. If the recursion would reach the right endpoint
/// early, the interval's raw substeps are rescaled proportionally so m
/// positive substeps remain.
inline NestedGrid refine(const TimeGrid& coarse, const ThetaSpec& theta, std::size_t m) {
    if (m < 2) throw std::invalid_argument("refine: m must be >= 2");

    NestedGrid grid;
    grid.coarse = coarse;
    grid.m = m;
    grid.fine.n = coarse.n * m;
    grid.fine.horizon = coarse.horizon;
    grid.fine.points.reserve(coarse.intervals() * m + 1);
    grid.fine.points.push_back(0.0);

    const double scale = static_cast<double>(coarse.n) * static_cast<double>(m);
    std::vector<double> raw_steps(m);
    std::vector<double> raw_points(m);  // recursion points left + h_0 + ... (m of them)

    for (std::size_t k = 0; k < coarse.intervals(); ++k) {
        const double left = coarse.points[k];
        const double right = coarse.points[k + 1];

        CompensatedSum acc(left);
        double cursor = left;
        for (std::size_t j = 0; j < m; ++j) {
            // The raw recursion may walk past the horizon when rescaling is
            // about to kick in; clamp the evaluation time.
            const double at = std::clamp(cursor, 0.0, coarse.horizon);
            const double h = detail::checked_step(theta, at, scale, "refine");
            raw_steps[j] = h;
            acc.add(h);
            cursor = acc.value();
            raw_points[j] = cursor;
        }

        const double last_interior = raw_points[m - 2];
        const bool overshoot =
            last_interior >= right - detail::kTerminalSnap * raw_steps[m - 2];
        if (!overshoot) {
            for (std::size_t j = 0; j + 1 < m; ++j) {
                if (!(raw_points[j] > grid.fine.points.back()))
                    throw std::domain_error("refine: substep underflow");
                grid.fine.points.push_back(raw_points[j]);
            }
        } else {
            CompensatedSum total;
            for (std::size_t j = 0; j < m; ++j) total.add(raw_steps[j]);
            const double span = right - left;
            CompensatedSum partial;
            for (std::size_t j = 0; j + 1 < m; ++j) {
                partial.add(raw_steps[j]);
                const double p = left + span * (partial.value() / total.value());
                if (!(p > grid.fine.points.back()) || !(p < right))
                    throw std::domain_error("refine: rescaled substep not positive");
                grid.fine.points.push_back(p);
            }
        }
        grid.fine.points.push_back(right);
    }

    const std::size_t n_intervals = coarse.intervals();
    grid.parent_index.resize(grid.fine.points.size());
    for (std::size_t i = 0; i < grid.parent_index.size(); ++i)
        grid.parent_index[i] = std::min(i / m, n_intervals - 1);
    return grid;
}

/// Index of the last grid point at or before t (left-closed intervals).
inline std::size_t eta_index(const TimeGrid& grid, double t) {
    if (t < 0.0 || t > grid.horizon)
        throw std::out_of_range("eta: t outside [0, T]");
    const auto it = std::upper_bound(grid.points.begin(), grid.points.end(), t);
    return static_cast<std::size_t>(it - grid.points.begin()) - 1;
}

/// The last grid point at or before t; eta(T) = T.
inline double eta(const TimeGrid& grid, double t) {
    return grid.points[eta_index(grid, t)];
}

}  // namespace imlmc
