#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "imlmc/compensated.hpp"
#include "imlmc/engine.hpp"
#include "imlmc/grid.hpp"
#include "imlmc/model.hpp"
#include "imlmc/parallel.hpp"
#include "imlmc/random.hpp"

namespace imlmc {

/// Number of correction levels: L with m^L = n. Rejects n that is not an
/// exact power of m.
inline std::size_t mlmc_level_count(std::size_t n, std::size_t m) {
    if (m < 2) throw std::invalid_argument("mlmc_level_count: m must be >= 2");
    if (n < 1) throw std::invalid_argument("mlmc_level_count: n must be >= 1");
    std::size_t level = 0;
    std::size_t p = 1;
    while (p < n) {
        p *= m;
        ++level;
    }
    if (p != n) throw std::invalid_argument("mlmc_level_count: n must be a power of m");
    return level;
}

struct MlmcConfig {
    std::size_t n = 0;            // top resolution, a power of m
    std::size_t m = 2;            // refinement factor
    double alpha = 0.5;           // error-rate exponent in [1/2, 1]
    double horizon = 1.0;         // T
    std::vector<double> a_seq;    // level weights a_0..a_L
    std::function<double(const Vec&)> payoff;
    std::function<Vec(const Vec&)> payoff_gradient;
    bool allow_aborts = false;    // keep going when replications blow up

    std::size_t levels() const { return mlmc_level_count(n, m); }

    void validate() const {
        const std::size_t L = levels();
        if (!(alpha >= 0.5 && alpha <= 1.0))
            throw std::invalid_argument("MlmcConfig: alpha must lie in [1/2, 1]");
        if (!(horizon > 0.0)) throw std::invalid_argument("MlmcConfig: horizon must be positive");
        if (a_seq.size() != L + 1)
            throw std::invalid_argument("MlmcConfig: a_seq must have L+1 entries");
        for (double a : a_seq)
            if (!(a > 0.0)) throw std::invalid_argument("MlmcConfig: weights must be positive");
        if (!payoff) throw std::invalid_argument("MlmcConfig: payoff not set");
    }
};

/// Built-in weight sequences (a_0..a_L): "const" (all ones) and "linear"
/// (a_ell = ell, with a_0 = 1).
inline std::vector<double> make_weights(std::string_view name, std::size_t L) {
    std::vector<double> a(L + 1, 1.0);
    if (name == "const") return a;
    if (name == "linear") {
        for (std::size_t l = 1; l <= L; ++l) a[l] = static_cast<double>(l);
        return a;
    }
    throw std::invalid_argument("make_weights: unknown sequence '" + std::string(name) + "'");
}

/// Growth diagnostic (sum_{l>=1} a_l)^{-p/2} * sum_{l>=1} a_l^{p/2} for a
/// weight sequence including a_0. Must shrink as L grows for the level sums
/// to satisfy the triangular-array moment condition.
inline double weight_decay_ratio(std::span<const double> a_seq, double p) {
    double sum = 0.0, sum_pow = 0.0;
    for (std::size_t l = 1; l < a_seq.size(); ++l) {
        sum += a_seq[l];
        sum_pow += std::pow(a_seq[l], 0.5 * p);
    }
    return sum_pow / std::pow(sum, 0.5 * p);
}

/// Per-level sample budgets N_0..N_L:
///   N_l = ceil( n^{2 alpha} (m-1) T (sum_{l'=1}^L a_{l'}) / (m^l a_l) ).
/// Rounding is ceil so the variance budget never undershoots.
inline std::vector<std::size_t> allocate_levels(const MlmcConfig& cfg) {
    cfg.validate();
    const std::size_t L = cfg.levels();
    double weight_sum = 0.0;
    for (std::size_t l = 1; l <= L; ++l) weight_sum += cfg.a_seq[l];

    const double base = std::pow(static_cast<double>(cfg.n), 2.0 * cfg.alpha) *
                        (static_cast<double>(cfg.m) - 1.0) * cfg.horizon * weight_sum;
    std::vector<std::size_t> out(L + 1);
    double m_pow = 1.0;
    for (std::size_t l = 0; l <= L; ++l) {
        const double raw = base / (m_pow * cfg.a_seq[l]);
        const double rounded = std::ceil(raw);
        if (!(rounded >= 1.0))
            throw std::invalid_argument("allocate_levels: N_" + std::to_string(l) +
                                        " rounds to zero");
        out[l] = static_cast<std::size_t>(rounded);
        m_pow *= static_cast<double>(cfg.m);
    }
    return out;
}

struct LevelStat {
    std::size_t level = 0;
    std::size_t samples = 0;
    double mean = 0.0;
    double variance = 0.0;
};

struct MlmcEstimate {
    double q_n = 0.0;
    std::vector<LevelStat> per_level;
    std::optional<double> scaled_error;  // n^alpha (q_n - reference)
    std::size_t abort_count = 0;
};

namespace detail {

struct LevelReduction {
    double mean = 0.0;
    double variance = 0.0;
    std::size_t used = 0;
    std::size_t aborted = 0;
};

/// Ordered reduction over slot-indexed values; aborted slots are skipped.
/// The mean divides an exactly accumulated sum, so identical inputs yield
/// the input bit for bit.
inline LevelReduction reduce_level(const std::vector<double>& vals,
                                   const std::vector<unsigned char>& aborted) {
    LevelReduction red;
    CompensatedSum sum;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (aborted[i]) {
            ++red.aborted;
            continue;
        }
        sum.add(vals[i]);
        ++red.used;
    }
    if (red.used == 0) return red;
    red.mean = sum.mean(red.used);
    double ss = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (aborted[i]) continue;
        const double c = vals[i] - red.mean;
        ss += c * c;
    }
    red.variance = red.used > 1 ? ss / static_cast<double>(red.used - 1) : 0.0;
    return red;
}

inline constexpr std::uint64_t kMlmcLevelTag = 0x4D4C4D43;  // level seed derivation

}  // namespace detail

/// The multilevel estimator
///   Q_n = mean f(X^1_T) + sum_{l=1}^L mean [ f(X^{m^l}_T) - f(X^{m^{l-1}}_T) ],
/// with every (level, replication) pair on a fresh Brownian path and only
/// the coarse/fine pair within one replication sharing a path. If a
/// reference expectation is supplied, scaled_error = n^alpha (Q_n - ref).
///
/// `levels` overrides the sample allocation; empty means allocate_levels(cfg).
inline MlmcEstimate mlmc_estimate(const SdeModel& model, const ThetaSpec& theta,
                                  const MlmcConfig& cfg, const SeedSpec& seed,
                                  std::optional<double> reference = {},
                                  unsigned jobs = 1,
                                  std::vector<std::size_t> levels = {}) {
    cfg.validate();
    const std::size_t L = cfg.levels();
    if (levels.empty()) levels = allocate_levels(cfg);
    if (levels.size() != L + 1)
        throw std::invalid_argument("mlmc_estimate: level allocation size mismatch");

    MlmcEstimate est;
    est.per_level.reserve(L + 1);

    // Level 0: the one-step-scale scheme (resolution parameter 1).
    {
        const TimeGrid g0 = build_coarse(theta, 1, cfg.horizon);
        const std::uint64_t level_master = derive_master(seed.master_seed, detail::kMlmcLevelTag);
        std::vector<double> vals(levels[0]);
        std::vector<unsigned char> aborted(levels[0], 0);
        parallel_for(levels[0], jobs, [&](std::size_t k) {
            const SeedSpec s{level_master, seed.replication_index + k};
            try {
                const Vec x = euler_terminal(model, g0, gaussian_increments(g0, model.q, s));
                vals[k] = cfg.payoff(x);
            } catch (const simulation_error&) {
                aborted[k] = 1;
            }
        });
        const auto red = detail::reduce_level(vals, aborted);
        est.abort_count += red.aborted;
        est.per_level.push_back({0, red.used, red.mean, red.variance});
    }

    std::size_t coarse_res = 1;
    for (std::size_t l = 1; l <= L; ++l) {
        const NestedGrid grid = refine(build_coarse(theta, coarse_res, cfg.horizon), theta, cfg.m);
        const std::uint64_t level_master =
            derive_master(seed.master_seed, detail::kMlmcLevelTag + l);
        std::vector<double> vals(levels[l]);
        std::vector<unsigned char> aborted(levels[l], 0);
        parallel_for(levels[l], jobs, [&](std::size_t k) {
            const SeedSpec s{level_master, seed.replication_index + k};
            try {
                const CoupledPath path = euler_coupled(model, grid, sample_brownian(grid, model.q, s));
                vals[k] = cfg.payoff(path.fine_terminal()) - cfg.payoff(path.coarse_terminal());
            } catch (const simulation_error&) {
                aborted[k] = 1;
            }
        });
        const auto red = detail::reduce_level(vals, aborted);
        est.abort_count += red.aborted;
        est.per_level.push_back({l, red.used, red.mean, red.variance});
        coarse_res *= cfg.m;
    }

    if (est.abort_count > 0 && !cfg.allow_aborts)
        throw simulation_error("mlmc_estimate: " + std::to_string(est.abort_count) +
                               " replication(s) aborted; set allow_aborts to accept");

    double q = 0.0;
    for (const auto& stat : est.per_level) q += stat.mean;
    est.q_n = q;
    if (reference)
        est.scaled_error = std::pow(static_cast<double>(cfg.n), cfg.alpha) * (q - *reference);
    return est;
}

/// Independent repetitions of the whole estimator; returns the scaled
/// errors n^alpha (Q_n - reference) for distributional analysis.
inline std::vector<double> clt_ensemble(const SdeModel& model, const ThetaSpec& theta,
                                        const MlmcConfig& cfg, double reference,
                                        std::size_t reps, const SeedSpec& seed,
                                        unsigned jobs = 1,
                                        const std::vector<std::size_t>& levels = {}) {
    std::vector<double> errors(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const SeedSpec run_seed{derive_master(seed.master_seed, 0xE5E + r),
                                seed.replication_index};
        const MlmcEstimate est =
            mlmc_estimate(model, theta, cfg, run_seed, reference, jobs, levels);
        errors[r] = *est.scaled_error;
    }
    return errors;
}

}  // namespace imlmc
