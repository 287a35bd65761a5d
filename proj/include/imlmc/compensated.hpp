#pragma once

#include <cmath>
#include <cstddef>

namespace imlmc {

/// Two-double compensated accumulator. Sums of same-scale terms are held
/// exactly, so value() is the correctly rounded exact sum. Used where
/// bit-level reproducibility matters: grid construction and ordered
/// estimator reductions.
class CompensatedSum {
public:
    CompensatedSum() = default;
    explicit CompensatedSum(double x) : hi_(x) {}

    CompensatedSum& add(double x) {
        const double s = hi_ + x;
        const double bb = s - hi_;
        const double err = (hi_ - (s - bb)) + (x - bb);
        const double lo = lo_ + err;
        hi_ = s + lo;
        lo_ = lo - (hi_ - s);
        return *this;
    }

    double value() const { return hi_; }

    /// Correctly rounded (sum / count); a mean of identical values returns
    /// that value exactly.
    double mean(std::size_t count) const {
        const double n = static_cast<double>(count);
        const double q = hi_ / n;
        const double rem = std::fma(-q, n, hi_);
        return q + (rem + lo_) / n;
    }

private:
    double hi_ = 0.0;
    double lo_ = 0.0;
};

}  // namespace imlmc
