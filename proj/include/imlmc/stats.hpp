#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "imlmc/engine.hpp"
#include "imlmc/limit.hpp"
#include "imlmc/model.hpp"
#include "imlmc/parallel.hpp"
#include "imlmc/quadrature.hpp"
#include "imlmc/random.hpp"

namespace imlmc {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;  // population central moments
    double kurtosis = 0.0;  // non-excess
};

inline Moments compute_moments(std::span<const double> xs) {
    Moments m;
    m.count = xs.size();
    if (xs.empty()) return m;
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.mean = sum / static_cast<double>(xs.size());
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double c = x - m.mean;
        const double c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    const double n = static_cast<double>(xs.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = xs.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2);
    }
    return m;
}

/// Classical two-sample Kolmogorov-Smirnov statistic sup_x |F_a - F_b|.
inline double two_sample_ks(std::span<const double> a_in, std::span<const double> b_in) {
    if (a_in.empty() || b_in.empty())
        throw std::invalid_argument("two_sample_ks: samples must be nonempty");
    std::vector<double> a(a_in.begin(), a_in.end());
    std::vector<double> b(b_in.begin(), b_in.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Asymptotic two-sample KS critical value c(level) * sqrt((na+nb)/(na*nb))
/// at the 1% level, c = 1.628.
inline double ks_critical_1pct(std::size_t na, std::size_t nb) {
    const double a = static_cast<double>(na), b = static_cast<double>(nb);
    return 1.628 * std::sqrt((a + b) / (a * b));
}

/// Jarque-Bera normality statistic (size/6) (skew^2 + (kurtosis-3)^2 / 4),
/// asymptotically chi-squared with 2 degrees of freedom under normality.
inline double jarque_bera(std::span<const double> xs) {
    if (xs.size() < 20) throw std::invalid_argument("jarque_bera: need at least 20 samples");
    const Moments m = compute_moments(xs);
    const double n = static_cast<double>(xs.size());
    const double excess = m.kurtosis - 3.0;
    return (n / 6.0) * (m.skewness * m.skewness + 0.25 * excess * excess);
}

// 1% chi^2_2 critical value used by the normality gates.
inline constexpr double kJbCritical1pct = 9.21;

struct StatThresholds {
    double ks_max = 0.05;        // two-sample distributional gate
    double jb_max = kJbCritical1pct;
    double variance_band = 0.10; // relative band around the variance target
    double mean_sigmas = 3.0;    // |mean| <= sigmas * stderr
};

/// Two-sample comparison report. Every threshold sits next to the value it
/// judges; pass flags not exercised by a given check stay true.
struct DistReport {
    Moments sample_a;  // primary sample (scheme errors, sups, ...)
    Moments sample_b;  // reference sample (limit draws, terminal integrals, ...)
    double ks_statistic = 0.0;
    double jb_statistic = 0.0;
    double variance_target = 0.0;  // reference variance sample_a is judged against
    double variance_ratio = 1.0;   // sample variance / target
    double mean_tolerance_a = 0.0;
    double mean_tolerance_b = 0.0;
    double sup_mean = 0.0;   // time-integral checks: mean over paths of sup|.|
    double sup_bound = 0.0;
    bool ks_pass = true;
    bool jb_pass = true;
    bool variance_pass = true;
    bool mean_pass = true;
    bool sup_pass = true;
    StatThresholds thresholds;

    bool all_pass() const {
        return ks_pass && jb_pass && variance_pass && mean_pass && sup_pass;
    }
};

/// Running-integral functional against its deterministic limit curve.
struct QvStatistic {
    std::size_t n = 0;
    std::vector<double> t_grid;     // evaluation times
    std::vector<double> empirical;  // mean curve over replications
    std::vector<double> target;     // limit values
    double sup_error = 0.0;         // max |empirical - target| over t_grid
    double mean_path_sup = 0.0;     // mean over replications of per-path sup
    std::vector<double> path_sups;  // per-replication sup errors
};

namespace detail {

inline std::vector<double> eval_times(double T, std::size_t count = 16) {
    std::vector<double> ts(count);
    for (std::size_t i = 0; i < count; ++i)
        ts[i] = T * static_cast<double>(i + 1) / static_cast<double>(count);
    return ts;
}

/// Linear interpolation on a sorted abscissa grid covering the query.
inline double interp_at(const std::vector<double>& xs, const std::vector<double>& ys,
                        double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    if (hi >= xs.size()) return ys.back();
    const std::size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + w * (ys[hi] - ys[lo]);
}

inline void finalize_qv(QvStatistic& qv, std::vector<double>& curve_sum, std::size_t reps) {
    qv.empirical.resize(curve_sum.size());
    for (std::size_t i = 0; i < curve_sum.size(); ++i)
        qv.empirical[i] = curve_sum[i] / static_cast<double>(reps);
    qv.sup_error = 0.0;
    for (std::size_t i = 0; i < qv.t_grid.size(); ++i)
        qv.sup_error = std::max(qv.sup_error, std::abs(qv.empirical[i] - qv.target[i]));
    double s = 0.0;
    for (double v : qv.path_sups) s += v;
    qv.mean_path_sup = s / static_cast<double>(reps);
}

inline constexpr std::uint64_t kTagErrorSamples = 0xE44;
inline constexpr std::uint64_t kTagLimitSamples = 0x11A;

}  // namespace detail

/// Empirical check that the running power-variation integral
///   int_0^t n^{p/2} (W_s - W_{eta_n(s)})^p ds
/// approaches a_p int_0^t theta(s)^{-p/2} ds with a_1 = 0, a_2 = 1/2.
/// The integrand is continuous in t, so each grid interval is integrated by
/// trapezoid over 32 sub-points (bias O(substep^2), far below the Monte
/// Carlo noise).
inline QvStatistic check_power_variation(const ThetaSpec& theta, std::size_t n, double T,
                                         int p, const SeedSpec& seed, std::size_t reps,
                                         unsigned jobs = 1) {
    if (p != 1 && p != 2) throw std::invalid_argument("check_power_variation: p must be 1 or 2");
    constexpr std::size_t kSub = 32;

    const TimeGrid grid = build_coarse(theta, n, T);
    const std::size_t n_sub = grid.intervals() * kSub;

    std::vector<double> sub_times(n_sub + 1);
    sub_times[0] = 0.0;
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        const double h = grid.step(k);
        for (std::size_t j = 1; j < kSub; ++j)
            sub_times[k * kSub + j] = grid.points[k] + static_cast<double>(j) * (h / kSub);
        sub_times[(k + 1) * kSub] = grid.points[k + 1];
    }

    QvStatistic qv;
    qv.n = n;
    qv.t_grid = detail::eval_times(T);
    const double a_p = p == 2 ? 0.5 : 0.0;
    qv.target.resize(qv.t_grid.size());
    const double half_p = 0.5 * static_cast<double>(p);
    for (std::size_t i = 0; i < qv.t_grid.size(); ++i)
        qv.target[i] = a_p * integrate([&](double s) { return std::pow(theta.theta(s), -half_p); },
                                       0.0, qv.t_grid[i]);

    const double scale = std::pow(static_cast<double>(n), half_p);
    std::vector<std::vector<double>> curves(reps);
    qv.path_sups.resize(reps);

    parallel_for(reps, jobs, [&](std::size_t r) {
        Rng rng = make_stream({seed.master_seed, seed.replication_index + r}, kStreamPath);
        std::vector<double> cumulative(n_sub + 1, 0.0);
        double running = 0.0;
        std::size_t idx = 0;
        for (std::size_t k = 0; k < grid.intervals(); ++k) {
            const double sub_h = grid.step(k) / kSub;
            const double sd = std::sqrt(sub_h);
            double w_rel = 0.0;  // W_t - W_{tau_k}
            double prev_val = 0.0;
            for (std::size_t j = 0; j < kSub; ++j) {
                w_rel += rng.normal(sd);
                const double val = p == 2 ? w_rel * w_rel : w_rel;
                running += 0.5 * (prev_val + val) * sub_h;
                cumulative[++idx] = running;
                prev_val = val;
            }
        }
        std::vector<double> curve(qv.t_grid.size());
        double sup = 0.0;
        for (std::size_t i = 0; i < qv.t_grid.size(); ++i) {
            curve[i] = scale * detail::interp_at(sub_times, cumulative, qv.t_grid[i]);
            sup = std::max(sup, std::abs(curve[i] - qv.target[i]));
        }
        curves[r] = std::move(curve);
        qv.path_sups[r] = sup;
    });

    std::vector<double> curve_sum(qv.t_grid.size(), 0.0);
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.size(); ++i) curve_sum[i] += c[i];
    detail::finalize_qv(qv, curve_sum, reps);
    return qv;
}

/// Empirical check of the cross-scale bracket limit
///   n int_0^t (W_{eta_{nm}(s)} - W_{eta_n(s)})^2 ds  ->  (m-1)/(2m) int_0^t 1/theta.
/// The integrand is constant on each fine interval, so the integral is an
/// exact Riemann sum.
inline QvStatistic check_cross_qv(const ThetaSpec& theta, std::size_t n, std::size_t m,
                                  double T, const SeedSpec& seed, std::size_t reps,
                                  unsigned jobs = 1) {
    const NestedGrid grid = refine(build_coarse(theta, n, T), theta, m);
    const std::size_t n_fine = grid.fine.intervals();

    QvStatistic qv;
    qv.n = n;
    qv.t_grid = detail::eval_times(T);
    qv.target.resize(qv.t_grid.size());
    const double factor = (static_cast<double>(m) - 1.0) / (2.0 * static_cast<double>(m));
    for (std::size_t i = 0; i < qv.t_grid.size(); ++i)
        qv.target[i] =
            factor * integrate([&](double s) { return 1.0 / theta.theta(s); }, 0.0, qv.t_grid[i]);

    std::vector<std::vector<double>> curves(reps);
    qv.path_sups.resize(reps);
    const double scale = static_cast<double>(n);

    parallel_for(reps, jobs, [&](std::size_t r) {
        const std::vector<double> dw =
            gaussian_increments(grid.fine, 1, {seed.master_seed, seed.replication_index + r});
        std::vector<double> w(n_fine + 1, 0.0);
        for (std::size_t j = 0; j < n_fine; ++j) w[j + 1] = w[j] + dw[j];

        std::vector<double> cumulative(n_fine + 1, 0.0);
        double running = 0.0;
        for (std::size_t j = 0; j < n_fine; ++j) {
            const double diff = w[j] - w[grid.parent_index[j] * m];
            running += scale * diff * diff * grid.fine.step(j);
            cumulative[j + 1] = running;
        }

        std::vector<double> curve(qv.t_grid.size());
        double sup = 0.0;
        for (std::size_t i = 0; i < qv.t_grid.size(); ++i) {
            curve[i] = detail::interp_at(grid.fine.points, cumulative, qv.t_grid[i]);
            sup = std::max(sup, std::abs(curve[i] - qv.target[i]));
        }
        curves[r] = std::move(curve);
        qv.path_sups[r] = sup;
    });

    std::vector<double> curve_sum(qv.t_grid.size(), 0.0);
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.size(); ++i) curve_sum[i] += c[i];
    detail::finalize_qv(qv, curve_sum, reps);
    return qv;
}

/// Checks the two scheme-increment integrals driving the error limit:
/// (a) sup_t |sqrt(n) int_0^t (s - eta_n(s)) dW_s| stays below the bracket
///     bound 3 K sqrt(T/n); simulated exactly via the conditional law of
///     int (W_s - W_tau) ds given the interval increment.
/// (b) sqrt(n) int_0^T (W_s - W_{eta_n(s)}) dW_s, evaluated exactly as the
///     Ito sum of ((dW_k)^2 - h_k)/2; its variance must match
///     int_0^T 1/(2 theta) and (for constant theta) the sample must look
///     Gaussian, gated by Jarque-Bera and a KS test against a synthetic
///     normal sample of the target variance.
inline DistReport check_increment_integrals(const ThetaSpec& theta, std::size_t n, double T,
                                            const SeedSpec& seed, std::size_t reps,
                                            unsigned jobs = 1,
                                            const StatThresholds& thresholds = {}) {
    const TimeGrid grid = build_coarse(theta, n, T);
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    std::vector<double> sups(reps), terminals(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec rs{seed.master_seed, seed.replication_index + r};
        Rng rng_w = make_stream(rs, kStreamPath);
        Rng rng_bridge = make_stream(rs, kStreamBridge);
        double mart = 0.0, sup = 0.0, ito = 0.0;
        for (std::size_t k = 0; k < grid.intervals(); ++k) {
            const double h = grid.step(k);
            const double dw = rng_w.normal(std::sqrt(h));
            const double bridge = rng_bridge.normal(std::sqrt(h * h * h / 12.0));
            mart += sqrt_n * (0.5 * h * dw - bridge);
            sup = std::max(sup, std::abs(mart));
            ito += 0.5 * (dw * dw - h);
        }
        sups[r] = sup;
        terminals[r] = sqrt_n * ito;
    });

    DistReport report;
    report.thresholds = thresholds;
    report.sample_a = compute_moments(sups);
    report.sample_b = compute_moments(terminals);
    report.sup_mean = report.sample_a.mean;
    report.sup_bound = 3.0 * theta.inv_bound * std::sqrt(T / static_cast<double>(n));
    report.sup_pass = report.sup_mean < report.sup_bound;

    report.variance_target =
        integrate([&](double s) { return 0.5 / theta.theta(s); }, 0.0, T);
    report.variance_ratio = report.sample_b.variance / report.variance_target;
    report.variance_pass = std::abs(report.variance_ratio - 1.0) <= thresholds.variance_band;

    report.jb_statistic = jarque_bera(terminals);
    report.jb_pass = report.jb_statistic < thresholds.jb_max;

    std::vector<double> reference(reps);
    Rng ref_rng = make_stream(seed, kStreamReference);
    const double ref_sd = std::sqrt(report.variance_target);
    for (auto& v : reference) v = ref_rng.normal(ref_sd);
    report.ks_statistic = two_sample_ks(terminals, reference);
    report.ks_pass = report.ks_statistic < ks_critical_1pct(reps, reps);

    const double se_b = std::sqrt(report.sample_b.variance / static_cast<double>(reps));
    report.mean_tolerance_b = thresholds.mean_sigmas * se_b;
    report.mean_pass = std::abs(report.sample_b.mean) <= report.mean_tolerance_b;
    return report;
}

/// Scaled terminal coupling errors from the scheme engine, one component.
inline std::vector<double> collect_error_samples(const SdeModel& model, const ThetaSpec& theta,
                                                 std::size_t n, std::size_t m, std::size_t reps,
                                                 const SeedSpec& seed, double horizon,
                                                 unsigned jobs = 1, std::size_t component = 0) {
    const NestedGrid grid = refine(build_coarse(theta, n, horizon), theta, m);
    std::vector<double> out(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec rs{seed.master_seed, seed.replication_index + r};
        const CoupledPath path = euler_coupled(model, grid, sample_brownian(grid, model.q, rs));
        out[r] = error_stat(model, grid, path)[component];
    });
    return out;
}

/// Terminal draws of the limit process U, one component.
inline std::vector<double> collect_limit_samples(const SdeModel& model, const ThetaSpec& theta,
                                                 std::size_t steps, std::size_t reps,
                                                 const SeedSpec& seed, double horizon,
                                                 unsigned jobs = 1, std::size_t component = 0) {
    std::vector<double> out(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec rs{seed.master_seed, seed.replication_index + r};
        out[r] = simulate_limit(model, theta, steps, rs, horizon).u_T[component];
    });
    return out;
}

/// Distributional match between the scheme's scaled terminal errors and
/// independent draws of the limit process: two-sample KS plus
/// first-four-moment comparison. The limit law is mixed normal, so no
/// normality gate applies here.
inline DistReport match_error_to_limit(const SdeModel& model, const ThetaSpec& theta,
                                       std::size_t n, std::size_t m, std::size_t reps,
                                       std::size_t steps, const SeedSpec& seed, double horizon,
                                       unsigned jobs = 1, const StatThresholds& thresholds = {}) {
    const SeedSpec err_seed{derive_master(seed.master_seed, detail::kTagErrorSamples),
                            seed.replication_index};
    const SeedSpec lim_seed{derive_master(seed.master_seed, detail::kTagLimitSamples),
                            seed.replication_index};
    const std::vector<double> errors =
        collect_error_samples(model, theta, n, m, reps, err_seed, horizon, jobs);
    const std::vector<double> limits =
        collect_limit_samples(model, theta, steps, reps, lim_seed, horizon, jobs);

    DistReport report;
    report.thresholds = thresholds;
    report.sample_a = compute_moments(errors);
    report.sample_b = compute_moments(limits);
    report.ks_statistic = two_sample_ks(errors, limits);
    report.ks_pass = report.ks_statistic < thresholds.ks_max;
    if (reps >= 20) report.jb_statistic = jarque_bera(errors);  // recorded, not gated

    report.variance_target = report.sample_b.variance;
    report.variance_ratio = report.sample_a.variance / report.variance_target;
    report.variance_pass = std::abs(report.variance_ratio - 1.0) <= thresholds.variance_band;

    report.mean_tolerance_a =
        thresholds.mean_sigmas * std::sqrt(report.sample_a.variance / static_cast<double>(reps));
    report.mean_tolerance_b =
        thresholds.mean_sigmas * std::sqrt(report.sample_b.variance / static_cast<double>(reps));
    report.mean_pass = std::abs(report.sample_a.mean) <= report.mean_tolerance_a &&
                       std::abs(report.sample_b.mean) <= report.mean_tolerance_b;
    return report;
}

}  // namespace imlmc
