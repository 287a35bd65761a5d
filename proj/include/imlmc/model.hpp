#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>

#include "imlmc/linalg.hpp"

namespace imlmc {

/// An SDE  dX = b(X) dt + sigma(X) dW  with user-supplied coefficient
/// Jacobians. Column j of the coefficient family is phi_j: phi_0 = b and
/// phi_1..phi_q are the diffusion columns. jacobian_col(j, x) returns
/// grad phi_j with entry (i, k) = d phi_{i j} / d x_k.
///
/// Immutable after construction; safe to share across workers.
struct SdeModel {
    std::size_t d = 0;
    std::size_t q = 0;
    Vec x0;
    std::function<Vec(const Vec&)> drift;
    std::function<Mat(const Vec&)> diffusion;
    std::function<Mat(std::size_t, const Vec&)> jacobian_col;

    /// phi_j(x): j = 0 is the drift, j in 1..q a diffusion column.
    Vec coefficient_col(std::size_t j, const Vec& x) const {
        if (j == 0) return drift(x);
        return diffusion(x).col(j - 1);
    }
};

/// Time-step intensity: grids advance by 1 / (n * theta(t)). theta is a
/// positive function of time with 1/theta bounded by inv_bound, so every
/// step is at most inv_bound / n. State-dependent intensities are out of
/// scope.
struct ThetaSpec {
    std::function<double(double)> theta;
    double inv_bound = 0.0;
    bool integrable = true;  // 1/theta Riemann integrable on the horizon
};

/// theta == 1/T, which reduces every grid to the uniform scheme with step
/// T/n.
inline ThetaSpec theta_constant(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("theta_constant: T must be positive");
    const double value = 1.0 / T;
    return ThetaSpec{[value](double) { return value; }, T, true};
}

/// Geometric Brownian motion  dX = mu X dt + sigma X dW,  X_0 = x0 > 0.
inline SdeModel make_gbm(double mu, double sigma, double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("make_gbm: x0 must be positive");
    if (sigma < 0.0) throw std::invalid_argument("make_gbm: sigma must be nonnegative");
    if (!std::isfinite(mu) || !std::isfinite(sigma))
        throw std::invalid_argument("make_gbm: parameters must be finite");

    SdeModel m;
    m.d = 1;
    m.q = 1;
    m.x0 = Vec{x0};
    m.drift = [mu](const Vec& x) { return Vec{mu * x[0]}; };
    m.diffusion = [sigma](const Vec& x) { return Mat(1, 1, {sigma * x[0]}); };
    m.jacobian_col = [mu, sigma](std::size_t j, const Vec&) {
        return Mat(1, 1, {j == 0 ? mu : sigma});
    };
    return m;
}

/// Two-dimensional stock/bank-account model driven by one Brownian motion:
///   dX1 = mu X1 dt + sigma X1 dW,   dX2 = r X2 dt.
inline SdeModel make_bs2d(double mu, double r, double sigma, double x1_0, double x2_0) {
    if (!(x1_0 > 0.0) || !(x2_0 > 0.0))
        throw std::invalid_argument("make_bs2d: initial states must be positive");
    if (!std::isfinite(mu) || !std::isfinite(r) || !std::isfinite(sigma))
        throw std::invalid_argument("make_bs2d: rates must be finite");

    SdeModel m;
    m.d = 2;
    m.q = 1;
    m.x0 = Vec{x1_0, x2_0};
    m.drift = [mu, r](const Vec& x) { return Vec{mu * x[0], r * x[1]}; };
    m.diffusion = [sigma](const Vec& x) { return Mat(2, 1, {sigma * x[0], 0.0}); };
    m.jacobian_col = [mu, r, sigma](std::size_t j, const Vec&) {
        if (j == 0) return Mat(2, 2, {mu, 0.0, 0.0, r});
        return Mat(2, 2, {sigma, 0.0, 0.0, 0.0});
    };
    return m;
}

}  // namespace imlmc
