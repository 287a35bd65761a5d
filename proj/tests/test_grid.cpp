#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "imlmc/grid.hpp"
#include "imlmc/model.hpp"

using namespace imlmc;

namespace {

ThetaSpec affine_theta(double a, double b, double T) {
    // theta(t) = a + b t; bound assumes monotonicity over [0, T]
    return ThetaSpec{[a, b](double t) { return a + b * t; },
                     1.0 / std::min(a, a + b * T), true};
}

// Plain-double recursion oracle: t_{k+1} = t_k + 1/(n theta(t_k)),
// clipped at T once the next point would reach it.
std::vector<double> coarse_oracle(const ThetaSpec& theta, std::size_t n, double T) {
    std::vector<double> pts{0.0};
    while (true) {
        const double t = pts.back();
        const double h = 1.0 / (static_cast<double>(n) * theta.theta(t));
        const double next = t + h;
        if (next >= T - 1e-9 * h) {
            pts.push_back(T);
            break;
        }
        pts.push_back(next);
    }
    return pts;
}

}  // namespace

TEST_CASE("coarse grid with unit intensity is the quarter grid", "[grid]") {
    const TimeGrid g = build_coarse(theta_constant(1.0), 4, 1.0);
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    REQUIRE(g.points == expected);
    REQUIRE(g.n == 4);
    REQUIRE(g.horizon == 1.0);
}

TEST_CASE("constant intensity 2 gives steps of 0.1", "[grid]") {
    const ThetaSpec theta{[](double) { return 2.0; }, 0.5, true};
    const TimeGrid g = build_coarse(theta, 5, 1.0);
    REQUIRE(g.points.size() == 11);
    for (std::size_t k = 0; k < g.points.size() - 1; ++k)
        REQUIRE(g.points[k] == static_cast<double>(k) * 0.1);  // closed-form, bit-exact
    REQUIRE(g.points.back() == 1.0);
}

TEST_CASE("increasing intensity shrinks steps per the recursion oracle", "[grid]") {
    const ThetaSpec theta = affine_theta(1.0, 1.0, 1.0);
    const TimeGrid g = build_coarse(theta, 4, 1.0);
    const std::vector<double> oracle = coarse_oracle(theta, 4, 1.0);
    REQUIRE(g.points.size() == oracle.size());
    for (std::size_t k = 0; k < g.points.size(); ++k)
        REQUIRE(std::abs(g.points[k] - oracle[k]) <= 1e-12);
    // spot values from the recursion 1/(4 (1 + tau_k))
    REQUIRE(g.points[1] == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(g.points[2] == Catch::Approx(0.45).margin(1e-15));
    REQUIRE(g.points[3] == Catch::Approx(0.6224137931034484).margin(1e-12));
    REQUIRE(g.points[4] == Catch::Approx(0.7765051852394739).margin(1e-12));
}

TEST_CASE("refine halves the unit-intensity grid exactly", "[grid]") {
    const NestedGrid g = refine(build_coarse(theta_constant(1.0), 2, 1.0),
                                theta_constant(1.0), 2);
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    REQUIRE(g.fine.points == expected);
    REQUIRE(g.m == 2);
    REQUIRE(g.fine.n == 4);
}

TEST_CASE("constant 1/T intensity reproduces the uniform grids bit for bit", "[grid]") {
    struct Case {
        double T;
        std::size_t n, m;
    };
    for (const Case c : {Case{1.0, 8, 4}, Case{2.0, 16, 2}, Case{1.0, 4, 2}}) {
        const ThetaSpec theta = theta_constant(c.T);
        const NestedGrid g = refine(build_coarse(theta, c.n, c.T), theta, c.m);
        const double hc = c.T / static_cast<double>(c.n);
        const double hf = c.T / static_cast<double>(c.n * c.m);
        REQUIRE(g.coarse.points.size() == c.n + 1);
        REQUIRE(g.fine.points.size() == c.n * c.m + 1);
        for (std::size_t k = 0; k < g.coarse.points.size(); ++k)
            REQUIRE(g.coarse.points[k] == static_cast<double>(k) * hc);
        for (std::size_t j = 0; j < g.fine.points.size(); ++j)
            REQUIRE(g.fine.points[j] == static_cast<double>(j) * hf);
    }
}

TEST_CASE("refine with increasing intensity pins coarse endpoints", "[grid]") {
    const ThetaSpec theta = affine_theta(1.0, 1.0, 1.0);
    const NestedGrid g = refine(build_coarse(theta, 2, 1.0), theta, 2);

    // first interval [0, 0.5]: interior 1/(4*1) = 0.25, then the pin
    REQUIRE(g.coarse.points[1] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(g.fine.points[1] == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(g.fine.points[2] == g.coarse.points[1]);
    // second interval [0.5, 0.8333...]: interior 0.5 + 1/(4*1.5)
    REQUIRE(g.coarse.points[2] == Catch::Approx(0.5 + 1.0 / 3.0).margin(1e-12));
    REQUIRE(g.fine.points[3] == Catch::Approx(0.5 + 1.0 / 6.0).margin(1e-12));
    REQUIRE(g.fine.points[4] == g.coarse.points[2]);

    // every coarse point appears in the fine grid exactly
    for (std::size_t k = 0; k < g.coarse.points.size(); ++k)
        REQUIRE(g.fine.points[k * g.m] == g.coarse.points[k]);
}

TEST_CASE("refine rescales proportionally when the recursion overshoots", "[grid]") {
    // sharply decreasing intensity: fine steps grow inside an interval and
    // pass the right endpoint before m-1 interior points fit
    const ThetaSpec theta{[](double t) { return std::exp(-5.0 * t); }, std::exp(5.0), true};
    const std::size_t n = 2, m = 4;
    const NestedGrid g = refine(build_coarse(theta, n, 1.0), theta, m);

    REQUIRE(g.fine.points.size() == g.coarse.intervals() * m + 1);
    for (std::size_t j = 0; j < g.fine.intervals(); ++j) REQUIRE(g.fine.step(j) > 0.0);
    for (std::size_t k = 0; k < g.coarse.points.size(); ++k)
        REQUIRE(g.fine.points[k * m] == g.coarse.points[k]);

    // rescaled substeps stay proportional to the raw recursion steps
    const double left = g.coarse.points[0];
    const double right = g.coarse.points[1];
    std::vector<double> raw(m);
    double cursor = left;
    for (std::size_t j = 0; j < m; ++j) {
        const double at = std::min(cursor, 1.0);
        raw[j] = 1.0 / (static_cast<double>(n * m) * theta.theta(at));
        cursor += raw[j];
    }
    REQUIRE(cursor > right);  // the raw recursion does overshoot here
    const double scale = (right - left) / (cursor - left);
    for (std::size_t j = 0; j < m; ++j) {
        const double actual = g.fine.step(j);
        REQUIRE(actual == Catch::Approx(raw[j] * scale).epsilon(1e-9));
    }
}

TEST_CASE("eta picks the last grid point at or before t", "[grid]") {
    const TimeGrid g = build_coarse(theta_constant(1.0), 4, 1.0);
    REQUIRE(eta(g, 0.3) == 0.25);
    REQUIRE(eta(g, 0.25) == 0.25);  // left-closed
    REQUIRE(eta(g, 0.0) == 0.0);
    REQUIRE(eta(g, 1.0) == 1.0);
    REQUIRE_THROWS_AS(eta(g, -0.1), std::out_of_range);
    REQUIRE_THROWS_AS(eta(g, 1.1), std::out_of_range);
}

TEST_CASE("grid invariants hold for generic smooth intensities", "[grid]") {
    const ThetaSpec theta{[](double t) { return 1.5 + std::sin(3.0 * t); }, 2.0, true};
    for (std::size_t n : {7u, 33u, 128u}) {
        for (std::size_t m : {2u, 3u, 5u}) {
            const NestedGrid g = refine(build_coarse(theta, n, 1.0), theta, m);

            REQUIRE(g.coarse.points.front() == 0.0);
            REQUIRE(g.coarse.points.back() == 1.0);
            for (std::size_t k = 0; k < g.coarse.intervals(); ++k) {
                REQUIRE(g.coarse.step(k) > 0.0);
                REQUIRE(g.coarse.step(k) <=
                        theta.inv_bound / static_cast<double>(n) * (1.0 + 1e-9) + 1e-15);
            }
            REQUIRE(g.fine.points.size() == g.coarse.intervals() * m + 1);
            for (std::size_t j = 0; j < g.fine.intervals(); ++j) REQUIRE(g.fine.step(j) > 0.0);
            for (std::size_t k = 0; k < g.coarse.points.size(); ++k)
                REQUIRE(g.fine.points[k * m] == g.coarse.points[k]);

            // eta idempotence at scattered times
            for (double t : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0}) {
                REQUIRE(eta(g.coarse, eta(g.coarse, t)) == eta(g.coarse, t));
                REQUIRE(eta(g.fine, eta(g.fine, t)) == eta(g.fine, t));
            }
            // parent_index maps fine points into their coarse interval
            for (std::size_t j = 0; j < g.fine.points.size(); ++j) {
                const std::size_t k = g.parent_index[j];
                REQUIRE(g.fine.points[j] >= g.coarse.points[k]);
                REQUIRE(g.fine.points[j] <= g.coarse.points[k + 1]);
            }
        }
    }
}

TEST_CASE("build_coarse rejects bad inputs", "[grid]") {
    REQUIRE_THROWS_AS(build_coarse(theta_constant(1.0), 0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_coarse(theta_constant(1.0), 4, 0.0), std::invalid_argument);
    const ThetaSpec bad{[](double) { return -1.0; }, 1.0, true};
    REQUIRE_THROWS_AS(build_coarse(bad, 4, 1.0), std::domain_error);
    REQUIRE_THROWS_AS(refine(build_coarse(theta_constant(1.0), 2, 1.0), theta_constant(1.0), 1),
                      std::invalid_argument);
}
