#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <string>

namespace dki {

using Complex = std::complex<double>;

// Element of R[u,u^-1] (complexified). Keys are u-degrees: deg u = 2, so the
// key of the u^k term is 2k and every stored key is even. Zero coefficients
// are pruned on write.
class LaurentScalar {
public:
    LaurentScalar() = default;
    explicit LaurentScalar(Complex c) { set(0, c); }

    static LaurentScalar monomial(int u_degree, Complex c) {
        LaurentScalar s;
        s.set(u_degree, c);
        return s;
    }

    Complex coeff(int u_degree) const {
        auto it = terms_.find(u_degree);
        return it == terms_.end() ? Complex{0.0, 0.0} : it->second;
    }

    void set(int u_degree, Complex c);
    void add(int u_degree, Complex c) { set(u_degree, coeff(u_degree) + c); }

    bool empty() const { return terms_.empty(); }
    const std::map<int, Complex>& terms() const { return terms_; }

    LaurentScalar operator+(const LaurentScalar& o) const;
    LaurentScalar operator-(const LaurentScalar& o) const;
    LaurentScalar operator*(const LaurentScalar& o) const;
    LaurentScalar operator*(Complex c) const;
    LaurentScalar& operator+=(const LaurentScalar& o) { return *this = *this + o; }
    LaurentScalar& operator-=(const LaurentScalar& o) { return *this = *this - o; }

    // Multiplies u by 2*pi*i: the u^k term picks up (2*pi*i)^k.
    LaurentScalar r_u() const;

    // Shift by u^(k) where k = u_degree/2; u_degree must be even.
    LaurentScalar shifted(int u_degree) const;

    double max_abs() const;
    // Largest |coefficient| difference, over the union of keys.
    static double distance(const LaurentScalar& a, const LaurentScalar& b);

    // Asserts the imaginary parts are below tol and returns the real content.
    std::map<int, double> real_terms(double tol = 1e-9) const;

    std::string str() const;

private:
    std::map<int, Complex> terms_;
};

Complex ru_power(int u_degree); // (2*pi*i)^(u_degree/2)

} // namespace dki
