#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "imlmc/mlmc.hpp"
#include "imlmc/model.hpp"
#include "imlmc/stats.hpp"

using namespace imlmc;

namespace {

MlmcConfig gbm_config(std::size_t n, std::size_t m, double alpha) {
    MlmcConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.alpha = alpha;
    cfg.horizon = 1.0;
    cfg.a_seq = make_weights("const", mlmc_level_count(n, m));
    cfg.payoff = [](const Vec& x) { return x[0]; };
    cfg.payoff_gradient = [](const Vec&) { return Vec{1.0}; };
    return cfg;
}

}  // namespace

TEST_CASE("level count requires exact powers", "[mlmc]") {
    REQUIRE(mlmc_level_count(64, 2) == 6);
    REQUIRE(mlmc_level_count(1, 2) == 0);
    REQUIRE(mlmc_level_count(27, 3) == 3);
    REQUIRE_THROWS_AS(mlmc_level_count(6, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(mlmc_level_count(8, 1), std::invalid_argument);
}

TEST_CASE("weight sequences satisfy the growth/decay conditions", "[mlmc]") {
    // constant weights: ratio is L^{1-p/2}; at p = 3, L = 40 that is 1/sqrt(40)
    const auto a40 = make_weights("const", 40);
    REQUIRE(weight_decay_ratio(a40, 3.0) ==
            Catch::Approx(1.0 / std::sqrt(40.0)).epsilon(1e-12));

    for (const char* name : {"const", "linear"}) {
        double prev_sum = 0.0;
        double prev_ratio = 1e300;
        for (std::size_t L : {10u, 20u, 40u}) {
            const auto a = make_weights(name, L);
            double sum = 0.0;
            for (std::size_t l = 1; l <= L; ++l) sum += a[l];
            REQUIRE(sum > prev_sum);  // grows without bound
            const double ratio = weight_decay_ratio(a, 3.0);
            REQUIRE(ratio < prev_ratio);  // shrinks
            prev_sum = sum;
            prev_ratio = ratio;
        }
    }
    REQUIRE_THROWS_AS(make_weights("boom", 4), std::invalid_argument);
}

TEST_CASE("allocation reproduces the hand-substituted budgets", "[mlmc]") {
    // m = 2, n = 4 (L = 2), alpha = 1/2, T = 1, a == 1: N = (8, 4, 2)
    const auto alloc = allocate_levels(gbm_config(4, 2, 0.5));
    REQUIRE(alloc == std::vector<std::size_t>{8, 4, 2});
}

TEST_CASE("allocation decreases across levels for constant weights", "[mlmc]") {
    const auto alloc = allocate_levels(gbm_config(64, 2, 0.5));
    REQUIRE(alloc.size() == 7);
    for (std::size_t l = 0; l + 1 < alloc.size(); ++l) REQUIRE(alloc[l] > alloc[l + 1]);
}

TEST_CASE("config validation rejects bad setups", "[mlmc]") {
    MlmcConfig cfg = gbm_config(4, 2, 0.5);
    cfg.alpha = 0.3;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = gbm_config(4, 2, 0.5);
    cfg.a_seq.pop_back();
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = gbm_config(4, 2, 0.5);
    cfg.a_seq[1] = -1.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("constant payoffs collapse to the constant", "[mlmc]") {
    const SdeModel model = make_gbm(0.05, 0.2, 1.0);
    MlmcConfig cfg = gbm_config(8, 2, 0.5);
    cfg.payoff = [](const Vec&) { return 3.5; };
    const MlmcEstimate est = mlmc_estimate(model, theta_constant(1.0), cfg, {1, 0});
    REQUIRE(est.q_n == 3.5);
    for (std::size_t l = 1; l < est.per_level.size(); ++l) {
        REQUIRE(est.per_level[l].mean == 0.0);
        REQUIRE(est.per_level[l].variance == 0.0);
    }
}

TEST_CASE("deterministic models telescope exactly", "[mlmc]") {
    // sigma == 0 removes all randomness; the level sums must cancel so that
    // Q_n equals the top-level scheme value bit for bit.
    const SdeModel model = make_gbm(1.0, 0.0, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    const MlmcConfig cfg = gbm_config(64, 2, 0.5);

    const MlmcEstimate est = mlmc_estimate(model, theta, cfg, {77, 0});

    const TimeGrid top = build_coarse(theta, 64, 1.0);
    const std::vector<double> none(top.intervals(), 0.0);
    const Vec x_top = euler_terminal(model, top, none);
    REQUIRE(est.q_n == x_top[0]);

    // reconstruction identity: q_n is exactly the sum of level means
    double sum = 0.0;
    for (const auto& ls : est.per_level) sum += ls.mean;
    REQUIRE(est.q_n == sum);
}

TEST_CASE("estimator mean approaches the analytic expectation", "[mlmc]") {
    const SdeModel model = make_gbm(0.05, 0.2, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    const MlmcConfig cfg = gbm_config(64, 2, 0.5);
    const double reference = std::exp(0.05);

    const std::size_t runs = 200;
    std::vector<double> q(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        const SeedSpec seed{derive_master(4242, r), 0};
        q[r] = mlmc_estimate(model, theta, cfg, seed, {}, 0).q_n;
    }
    const Moments m = compute_moments(q);
    const double se = std::sqrt(m.variance / static_cast<double>(runs));
    REQUIRE(std::abs(m.mean - reference) <= 2.0 * se);
}

TEST_CASE("level correction variance decays like 1/m per level", "[mlmc]") {
    const SdeModel model = make_gbm(0.05, 0.2, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    MlmcConfig cfg = gbm_config(64, 2, 0.5);
    cfg.allow_aborts = false;

    const std::size_t L = cfg.levels();
    std::vector<std::size_t> budget(L + 1, 10000);
    const MlmcEstimate est = mlmc_estimate(model, theta, cfg, {31337, 0}, {}, 0, budget);
    const double m = 2.0;
    for (std::size_t l = 2; l <= L; ++l) {
        const double ratio = est.per_level[l].variance / est.per_level[l - 1].variance;
        REQUIRE(ratio >= 1.0 / (2.0 * m));
        REQUIRE(ratio <= 2.0 / m);
    }
}

TEST_CASE("deterministic ensembles collapse to the scheme bias", "[mlmc]") {
    const SdeModel model = make_gbm(1.0, 0.0, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    const MlmcConfig cfg = gbm_config(8, 2, 0.5);

    const TimeGrid top = build_coarse(theta, 8, 1.0);
    const Vec x_top = euler_terminal(model, top, std::vector<double>(top.intervals(), 0.0));
    const double reference = std::exp(1.0);
    const double expected = std::sqrt(8.0) * (x_top[0] - reference);

    const auto errors = clt_ensemble(model, theta, cfg, reference, 20, {808, 0});
    for (double e : errors) REQUIRE(e == expected);
    REQUIRE(compute_moments(errors).variance == 0.0);
}

TEST_CASE("ensemble variance reaches the limit under a boosted base budget", "[mlmc]") {
    // With the canonical budgets the one-step level's statistical error
    // shrinks only like 1/sum(a_l), so at n = 64 it still dominates the
    // limit variance. Scaling N_0 by n^2 (the alpha = 1 budget) suppresses
    // it and exposes the CLT variance.
    const SdeModel model = make_gbm(0.05, 0.2, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    const MlmcConfig cfg = gbm_config(64, 2, 0.5);
    const double reference = std::exp(0.05);
    const double limit_var =
        0.5 * std::pow(0.2, 4) * std::exp((2.0 * 0.05 + 0.04) * 1.0);  // closed form

    std::vector<std::size_t> levels = allocate_levels(cfg);
    const double weight_sum = 6.0;  // constant weights, L = 6
    levels[0] = static_cast<std::size_t>(64.0 * 64.0 * 1.0 * 1.0 * weight_sum);

    const auto errors = clt_ensemble(model, theta, cfg, reference, 200, {73110, 0}, 0, levels);
    const Moments m = compute_moments(errors);
    REQUIRE(std::abs(m.variance / limit_var - 1.0) <= 0.25);
    REQUIRE(jarque_bera(errors) < kJbCritical1pct);
}

TEST_CASE("estimator is reproducible across worker counts", "[mlmc]") {
    const SdeModel model = make_gbm(0.05, 0.2, 1.0);
    const ThetaSpec theta = theta_constant(1.0);
    const MlmcConfig cfg = gbm_config(16, 2, 0.5);

    const MlmcEstimate serial = mlmc_estimate(model, theta, cfg, {606, 0}, 1.0, 1);
    const MlmcEstimate threaded = mlmc_estimate(model, theta, cfg, {606, 0}, 1.0, 8);
    REQUIRE(serial.q_n == threaded.q_n);
    REQUIRE(*serial.scaled_error == *threaded.scaled_error);
    for (std::size_t l = 0; l < serial.per_level.size(); ++l) {
        REQUIRE(serial.per_level[l].mean == threaded.per_level[l].mean);
        REQUIRE(serial.per_level[l].variance == threaded.per_level[l].variance);
    }
}

TEST_CASE("aborted replications are counted, not dropped silently", "[mlmc]") {
    SdeModel explosive;
    explosive.d = 1;
    explosive.q = 1;
    explosive.x0 = Vec{1e200};
    explosive.drift = [](const Vec& x) { return Vec{1e200 * x[0]}; };
    explosive.diffusion = [](const Vec&) { return Mat(1, 1, {0.0}); };
    explosive.jacobian_col = [](std::size_t, const Vec&) { return Mat(1, 1, {1e200}); };

    MlmcConfig cfg = gbm_config(4, 2, 0.5);
    REQUIRE_THROWS_AS(mlmc_estimate(explosive, theta_constant(1.0), cfg, {1, 0}),
                      simulation_error);

    cfg.allow_aborts = true;
    const MlmcEstimate est = mlmc_estimate(explosive, theta_constant(1.0), cfg, {1, 0});
    REQUIRE(est.abort_count > 0);
}
