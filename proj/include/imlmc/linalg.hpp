#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

#include "imlmc/errors.hpp"

namespace imlmc {

// State and Brownian dimensions stay tiny (d, q <= 4), so vectors and
// matrices live on the stack and every operation is a plain loop.
inline constexpr std::size_t kMaxDim = 4;

class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0) : n_(n) {
        check_dim(n);
        for (std::size_t i = 0; i < n_; ++i) v_[i] = fill;
    }
    Vec(std::initializer_list<double> xs) : n_(xs.size()) {
        check_dim(n_);
        std::size_t i = 0;
        for (double x : xs) v_[i++] = x;
    }

    std::size_t size() const { return n_; }
    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }

    Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < n_; ++i) v_[i] += o.v_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < n_; ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (std::size_t i = 0; i < n_; ++i) v_[i] *= s;
        return *this;
    }
    /// this += s * o
    Vec& axpy(double s, const Vec& o) {
        for (std::size_t i = 0; i < n_; ++i) v_[i] += s * o.v_[i];
        return *this;
    }

    bool all_finite() const {
        for (std::size_t i = 0; i < n_; ++i)
            if (!std::isfinite(v_[i])) return false;
        return true;
    }

private:
    static void check_dim(std::size_t n) {
        if (n > kMaxDim) throw std::invalid_argument("Vec: dimension exceeds kMaxDim");
    }
    std::array<double, kMaxDim> v_{};
    std::size_t n_ = 0;
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(double s, Vec a) { return a *= s; }

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0) : r_(rows), c_(cols) {
        if (rows > kMaxDim || cols > kMaxDim)
            throw std::invalid_argument("Mat: dimension exceeds kMaxDim");
        for (std::size_t i = 0; i < r_ * c_; ++i) a_[i] = fill;
    }
    Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> xs)
        : Mat(rows, cols) {
        if (xs.size() != rows * cols)
            throw std::invalid_argument("Mat: initializer size mismatch");
        std::size_t i = 0;
        for (double x : xs) a_[i++] = x;
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }

    Vec col(std::size_t j) const {
        Vec v(r_);
        for (std::size_t i = 0; i < r_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < r_ * c_; ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (std::size_t i = 0; i < r_ * c_; ++i) a_[i] *= s;
        return *this;
    }
    /// this += s * o
    Mat& axpy(double s, const Mat& o) {
        for (std::size_t i = 0; i < r_ * c_; ++i) a_[i] += s * o.a_[i];
        return *this;
    }

    bool all_finite() const {
        for (std::size_t i = 0; i < r_ * c_; ++i)
            if (!std::isfinite(a_[i])) return false;
        return true;
    }

private:
    std::array<double, kMaxDim * kMaxDim> a_{};
    std::size_t r_ = 0, c_ = 0;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator*(double s, Mat a) { return a *= s; }

inline Vec operator*(const Mat& m, const Vec& v) {
    Vec out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline Mat operator*(const Mat& a, const Mat& b) {
    Mat out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

inline double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

inline double max_abs(const Mat& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s = std::max(s, std::abs(m(i, j)));
    return s;
}

/// Determinant by LU with partial pivoting.
inline double determinant(const Mat& m) {
    const std::size_t n = m.rows();
    Mat a = m;
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            det = -det;
        }
        const double p = a(k, k);
        if (p == 0.0) return 0.0;
        det *= p;
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / p;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return det;
}

/// Inverse by Gauss-Jordan with partial pivoting. Near-singular inputs
/// (|det| < rel_det_floor * ||m||_F^n) are rejected.
inline Mat inverse(const Mat& m, double rel_det_floor = 1e-12) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw std::invalid_argument("inverse: matrix not square");
    const double det = determinant(m);
    double scale = 1.0;
    const double norm = frobenius_norm(m);
    for (std::size_t i = 0; i < n; ++i) scale *= norm;
    if (std::abs(det) < rel_det_floor * scale || det == 0.0)
        throw singular_matrix_error("inverse: matrix numerically singular");

    Mat a = m;
    Mat inv = Mat::identity(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (piv != k)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(k, j), a(piv, j));
                std::swap(inv(k, j), inv(piv, j));
            }
        const double p = a(k, k);
        for (std::size_t j = 0; j < n; ++j) {
            a(k, j) /= p;
            inv(k, j) /= p;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k) continue;
            const double f = a(i, k);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(k, j);
                inv(i, j) -= f * inv(k, j);
            }
        }
    }
    return inv;
}

}  // namespace imlmc
