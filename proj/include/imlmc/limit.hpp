#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "imlmc/engine.hpp"
#include "imlmc/linalg.hpp"
#include "imlmc/model.hpp"
#include "imlmc/parallel.hpp"
#include "imlmc/random.hpp"

namespace imlmc {

/// One draw of the asymptotic-error triple at the horizon: the SDE state X,
/// the flow derivative Z (solution of the linear matrix SDE
/// dZ = sum_j grad(phi_j)(X) Z dY^j, Z_0 = I), and the error-limit value
///   U = (1/sqrt 2) * Z * sum_{i,j>=1} int Z_s^{-1} grad(phi_j) phi_i
///                                         theta(s)^{-1/2} dB^{ij}_s,
/// where B is a q^2-dimensional Brownian motion independent of the driver W,
/// laid out row-major by (i, j).
struct LimitSample {
    Vec x_T;
    Mat z_T;
    Vec u_T;
    SeedSpec seed;
};

/// Direct small-matrix inversion of the flow matrix. Near-singular inputs
/// (|det| below 1e-12 * ||z||_F^d) raise singular_matrix_error.
inline Mat invert_z(const Mat& z) { return inverse(z, 1e-12); }

inline constexpr std::size_t kDefaultLimitSteps = 512;

/// Euler-simulates (X, Z, U) on a regular auxiliary grid of `steps`
/// intervals over [0, horizon]. The B driver comes from a stream domain
/// disjoint from W's; pass b_seed to rerandomize B alone.
inline LimitSample simulate_limit(const SdeModel& model, const ThetaSpec& theta,
                                  std::size_t steps, const SeedSpec& seed, double horizon,
                                  std::optional<SeedSpec> b_seed = {}) {
    if (steps < 2) throw std::invalid_argument("simulate_limit: steps must be >= 2");
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_limit: horizon must be positive");

    const std::size_t d = model.d;
    const std::size_t q = model.q;
    const double h = horizon / static_cast<double>(steps);
    const double sqrt_h = std::sqrt(h);

    Rng rng_w = make_stream(seed, kStreamLimitW);
    Rng rng_b = make_stream(b_seed.value_or(seed), kStreamLimitB);

    Vec x = model.x0;
    Mat z = Mat::identity(d);
    Vec integral(d);
    std::vector<double> dw(q);

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        for (std::size_t c = 0; c < q; ++c) dw[c] = rng_w.normal(sqrt_h);

        const double th = theta.theta(t);
        if (!(th > 0.0) || !std::isfinite(th))
            throw std::domain_error("simulate_limit: theta(t) not positive finite");
        const double inv_sqrt_theta = 1.0 / std::sqrt(th);

        // Integrand pieces at the left point.
        const Mat z_inv = invert_z(z);
        const Mat sig = model.diffusion(x);
        for (std::size_t i = 1; i <= q; ++i) {
            const Vec phi_i = sig.col(i - 1);
            for (std::size_t j = 1; j <= q; ++j) {
                const double db = rng_b.normal(sqrt_h);
                const Vec hij = z_inv * (model.jacobian_col(j, x) * phi_i);
                integral.axpy(inv_sqrt_theta * db, hij);
            }
        }

        // Step X and Z with the shared dW.
        Vec x_next = euler_step(model, x, h, dw.data());
        Mat z_next = z;
        z_next.axpy(h, model.jacobian_col(0, x) * z);
        for (std::size_t j = 1; j <= q; ++j)
            z_next.axpy(dw[j - 1], model.jacobian_col(j, x) * z);

        x = x_next;
        z = z_next;
        detail::check_state(x, t + h, "simulate_limit");
        if (!z.all_finite())
            throw simulation_error("simulate_limit: nonfinite flow matrix");
    }

    LimitSample out;
    out.x_T = x;
    out.z_T = z;
    out.u_T = (1.0 / std::sqrt(2.0)) * (z * integral);
    out.seed = seed;
    return out;
}

struct VarianceEstimate {
    double value = 0.0;      // empirical variance (unbiased)
    double std_error = 0.0;  // standard error of the variance estimate
    double mean = 0.0;
    std::size_t reps = 0;
};

/// Empirical variance of payoff_gradient(X_T) . U_T over independent limit
/// samples. The standard error uses the moment formula
/// Var(s^2) = (m4 - s^4 (n-3)/(n-1)) / n.
inline VarianceEstimate limit_variance(const SdeModel& model, const ThetaSpec& theta,
                                       const std::function<Vec(const Vec&)>& payoff_gradient,
                                       std::size_t reps, std::size_t steps,
                                       const SeedSpec& seed, double horizon,
                                       unsigned jobs = 1) {
    if (reps < 2) throw std::invalid_argument("limit_variance: reps must be >= 2");

    std::vector<double> vals(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        const SeedSpec s{seed.master_seed, seed.replication_index + r};
        const LimitSample sample = simulate_limit(model, theta, steps, s, horizon);
        vals[r] = dot(payoff_gradient(sample.x_T), sample.u_T);
    });

    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(reps);
    double m2 = 0.0, m4 = 0.0;
    for (double v : vals) {
        const double c = v - mean;
        m2 += c * c;
        m4 += c * c * c * c;
    }
    const double n = static_cast<double>(reps);
    m2 /= n;
    m4 /= n;
    const double var = m2 * n / (n - 1.0);

    VarianceEstimate est;
    est.value = var;
    est.std_error = std::sqrt(std::max(0.0, (m4 - var * var * (n - 3.0) / (n - 1.0)) / n));
    est.mean = mean;
    est.reps = reps;
    return est;
}

}  // namespace imlmc
