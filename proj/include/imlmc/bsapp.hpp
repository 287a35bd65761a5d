#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "imlmc/limit.hpp"
#include "imlmc/model.hpp"
#include "imlmc/stats.hpp"

namespace imlmc {

/// Standard normal CDF, accurate to a few ulp via the complementary error
/// function.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

struct BsParams {
    double mu = 0.0;       // stock drift under the market measure
    double rate = 0.0;     // short rate r
    double vol = 0.0;      // volatility
    double strike = 0.0;   // K
    double maturity = 0.0; // option maturity T
    double x1_0 = 0.0;     // initial stock
    double x2_0 = 0.0;     // initial bank account

    void validate() const {
        if (!(vol > 0.0)) throw std::invalid_argument("BsParams: vol must be positive");
        if (!(strike > 0.0)) throw std::invalid_argument("BsParams: strike must be positive");
        if (!(maturity > 0.0)) throw std::invalid_argument("BsParams: maturity must be positive");
        if (!(x1_0 > 0.0) || !(x2_0 > 0.0))
            throw std::invalid_argument("BsParams: initial states must be positive");
    }
};

/// The stock/bank-account SDE the option rides on.
inline SdeModel bs_model(const BsParams& p) {
    p.validate();
    return make_bs2d(p.mu, p.rate, p.vol, p.x1_0, p.x2_0);
}

namespace detail {

struct BsTerms {
    double d_plus = 0.0;
    double d_minus = 0.0;
    double discount = 0.0;  // K e^{-rT}
};

inline BsTerms bs_terms(const BsParams& p, double t, double x1) {
    if (!(t < p.maturity))
        throw std::domain_error("call_value: t must be before maturity");
    if (!(x1 > 0.0)) throw std::domain_error("call_value: stock price must be positive");
    const double tau = p.maturity - t;
    const double sq = p.vol * std::sqrt(tau);
    BsTerms terms;
    terms.d_plus = (std::log(x1 / p.strike) + (p.rate + 0.5 * p.vol * p.vol) * tau) / sq;
    terms.d_minus = terms.d_plus - sq;
    terms.discount = p.strike * std::exp(-p.rate * p.maturity);
    return terms;
}

}  // namespace detail

/// Call value as a function of the full state:
///   f(x1, x2) = Phi(d_+) x1 - K e^{-rT} x2 Phi(d_-).
/// With the bank account normalized to x2_t = e^{rt} this is the standard
/// call price with discount factor e^{-r(T-t)}.
inline double call_value(const BsParams& p, double t, double x1, double x2) {
    p.validate();
    const auto terms = detail::bs_terms(p, t, x1);
    return norm_cdf(terms.d_plus) * x1 - terms.discount * x2 * norm_cdf(terms.d_minus);
}

/// Analytic gradient of call_value with respect to (x1, x2). The chain-rule
/// terms through d_± only cancel when x2 = e^{rt}, so they are kept.
inline Vec call_gradient(const BsParams& p, double t, double x1, double x2) {
    p.validate();
    const auto terms = detail::bs_terms(p, t, x1);
    const double tau = p.maturity - t;
    const double d_prime = 1.0 / (x1 * p.vol * std::sqrt(tau));
    const double g1 =
        norm_cdf(terms.d_plus) +
        d_prime * (x1 * norm_pdf(terms.d_plus) - terms.discount * x2 * norm_pdf(terms.d_minus));
    const double g2 = -terms.discount * norm_cdf(terms.d_minus);
    return Vec{g1, g2};
}

/// Compares the scaled two-level error of the option value,
///   sqrt(m n / (m-1)) (f(X^{nm}_t) - f(X^n_t))   at t = t_eval,
/// against the projected limit <grad f(X_t), U_t>. Both run on [0, t_eval];
/// the option keeps its own later maturity.
inline DistReport hedging_error_experiment(const BsParams& p, const ThetaSpec& theta,
                                           std::size_t n, std::size_t m, double t_eval,
                                           std::size_t reps, std::size_t steps,
                                           const SeedSpec& seed, unsigned jobs = 1,
                                           const StatThresholds& thresholds = {}) {
    p.validate();
    if (!(t_eval > 0.0 && t_eval < p.maturity))
        throw std::invalid_argument("hedging_error_experiment: need 0 < t_eval < maturity");

    const SdeModel model = bs_model(p);
    const NestedGrid grid = refine(build_coarse(theta, n, t_eval), theta, m);
    const double scale =
        std::sqrt(static_cast<double>(m) * static_cast<double>(n) / (static_cast<double>(m) - 1.0));

    const SeedSpec hedge_seed{derive_master(seed.master_seed, detail::kTagErrorSamples),
                              seed.replication_index};
    const SeedSpec limit_seed{derive_master(seed.master_seed, detail::kTagLimitSamples),
                              seed.replication_index};

    std::vector<double> hedge(reps), projected(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec rs{hedge_seed.master_seed, hedge_seed.replication_index + r};
        const CoupledPath path = euler_coupled(model, grid, sample_brownian(grid, model.q, rs));
        const Vec& xf = path.fine_terminal();
        const Vec& xc = path.coarse_terminal();
        hedge[r] = scale * (call_value(p, t_eval, xf[0], xf[1]) -
                            call_value(p, t_eval, xc[0], xc[1]));
    });
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec rs{limit_seed.master_seed, limit_seed.replication_index + r};
        const LimitSample sample = simulate_limit(model, theta, steps, rs, t_eval);
        projected[r] = dot(call_gradient(p, t_eval, sample.x_T[0], sample.x_T[1]), sample.u_T);
    });

    DistReport report;
    report.thresholds = thresholds;
    report.sample_a = compute_moments(hedge);
    report.sample_b = compute_moments(projected);
    report.ks_statistic = two_sample_ks(hedge, projected);
    report.ks_pass = report.ks_statistic < thresholds.ks_max;
    if (reps >= 20) report.jb_statistic = jarque_bera(hedge);  // recorded, not gated

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
