#pragma once

#include <cassert>
#include <cmath>
#include <complex>
#include <vector>

namespace dki {

// Dense complex matrix for small ranks (bundle fibers, holonomy transport).
// Row-major. Nothing here is performance-critical beyond pointwise use.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : r_(rows), c_(cols), a_(std::size_t(rows) * cols) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return r_; }
    int cols() const { return c_; }

    std::complex<double>& operator()(int i, int j) { return a_[std::size_t(i) * c_ + j]; }
    const std::complex<double>& operator()(int i, int j) const {
        return a_[std::size_t(i) * c_ + j];
    }

    Mat operator+(const Mat& o) const {
        Mat m = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) m.a_[i] += o.a_[i];
        return m;
    }
    Mat operator-(const Mat& o) const {
        Mat m = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) m.a_[i] -= o.a_[i];
        return m;
    }
    Mat operator*(std::complex<double> s) const {
        Mat m = *this;
        for (auto& v : m.a_) v *= s;
        return m;
    }
    Mat operator*(const Mat& o) const {
        assert(c_ == o.r_);
        Mat m(r_, o.c_);
        for (int i = 0; i < r_; ++i)
            for (int k = 0; k < c_; ++k) {
                const auto aik = (*this)(i, k);
                if (aik == std::complex<double>{}) continue;
                for (int j = 0; j < o.c_; ++j) m(i, j) += aik * o(k, j);
            }
        return m;
    }

    Mat adjoint() const {
        Mat m(c_, r_);
        for (int i = 0; i < r_; ++i)
            for (int j = 0; j < c_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    std::complex<double> trace() const {
        std::complex<double> t{};
        for (int i = 0; i < r_ && i < c_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    // Determinant by partial-pivot LU; fine for the small ranks used here.
    std::complex<double> det() const {
        assert(r_ == c_);
        Mat lu = *this;
        std::complex<double> d{1.0, 0.0};
        for (int i = 0; i < r_; ++i) {
            int p = i;
            for (int k = i + 1; k < r_; ++k)
                if (std::abs(lu(k, i)) > std::abs(lu(p, i))) p = k;
            if (p != i) {
                for (int j = 0; j < c_; ++j) std::swap(lu(i, j), lu(p, j));
                d = -d;
            }
            if (std::abs(lu(i, i)) == 0.0) return {0.0, 0.0};
            d *= lu(i, i);
            for (int k = i + 1; k < r_; ++k) {
                auto f = lu(k, i) / lu(i, i);
                for (int j = i; j < c_; ++j) lu(k, j) -= f * lu(i, j);
            }
        }
        return d;
    }

    // exp(M) by scaling-and-squaring on the truncated series.
    Mat exp() const {
        assert(r_ == c_);
        double norm = 0.0;
        for (int i = 0; i < r_; ++i) {
            double row = 0.0;
            for (int j = 0; j < c_; ++j) row += std::abs((*this)(i, j));
            norm = std::max(norm, row);
        }
        int s = 0;
        while (norm > 0.5) {
            norm /= 2.0;
            ++s;
        }
        Mat x = *this * std::complex<double>(std::ldexp(1.0, -s), 0.0);
        Mat result = Mat::identity(r_);
        Mat term = Mat::identity(r_);
        for (int k = 1; k <= 16; ++k) {
            term = term * x * std::complex<double>(1.0 / k, 0.0);
            result = result + term;
            if (term.max_abs() < 1e-17) break;
        }
        for (int i = 0; i < s; ++i) result = result * result;
        return result;
    }

private:
    int r_ = 0, c_ = 0;
    std::vector<std::complex<double>> a_;
};

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

} // namespace dki
