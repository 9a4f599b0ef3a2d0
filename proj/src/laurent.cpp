#include "dki/laurent.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dki {

namespace {
constexpr double kPruneTol = 0.0; // exact zeros only; arithmetic stays faithful
}

void LaurentScalar::set(int u_degree, Complex c) {
    if (u_degree % 2 != 0)
        throw std::invalid_argument("LaurentScalar: u-degree must be even (deg u = 2)");
    if (std::abs(c.real()) <= kPruneTol && std::abs(c.imag()) <= kPruneTol)
        terms_.erase(u_degree);
    else
        terms_[u_degree] = c;
}

LaurentScalar LaurentScalar::operator+(const LaurentScalar& o) const {
    LaurentScalar r = *this;
    for (auto& [d, c] : o.terms_) r.add(d, c);
    return r;
}

LaurentScalar LaurentScalar::operator-(const LaurentScalar& o) const {
    LaurentScalar r = *this;
    for (auto& [d, c] : o.terms_) r.add(d, -c);
    return r;
}

LaurentScalar LaurentScalar::operator*(const LaurentScalar& o) const {
    LaurentScalar r;
    for (auto& [d1, c1] : terms_)
        for (auto& [d2, c2] : o.terms_) r.add(d1 + d2, c1 * c2);
    return r;
}

LaurentScalar LaurentScalar::operator*(Complex c) const {
    LaurentScalar r;
    for (auto& [d, v] : terms_) r.set(d, v * c);
    return r;
}

Complex ru_power(int u_degree) {
    const Complex twopii{0.0, 2.0 * std::numbers::pi};
    int k = u_degree / 2;
    Complex r{1.0, 0.0};
    for (int i = 0; i < std::abs(k); ++i) r = (k > 0) ? r * twopii : r / twopii;
    return r;
}

LaurentScalar LaurentScalar::r_u() const {
    LaurentScalar r;
    for (auto& [d, c] : terms_) r.set(d, c * ru_power(d));
    return r;
}

LaurentScalar LaurentScalar::shifted(int u_degree) const {
    if (u_degree % 2 != 0)
        throw std::invalid_argument("LaurentScalar::shifted: u-degree must be even");
    LaurentScalar r;
    for (auto& [d, c] : terms_) r.set(d + u_degree, c);
    return r;
}

double LaurentScalar::max_abs() const {
    double m = 0.0;
    for (auto& [d, c] : terms_) m = std::max(m, std::abs(c));
    return m;
}

double LaurentScalar::distance(const LaurentScalar& a, const LaurentScalar& b) {
    return (a - b).max_abs();
}

std::map<int, double> LaurentScalar::real_terms(double tol) const {
    std::map<int, double> r;
    for (auto& [d, c] : terms_) {
        if (std::abs(c.imag()) > tol)
            throw std::runtime_error("LaurentScalar: imaginary residue " +
                                     std::to_string(c.imag()) + " above tolerance");
        r[d] = c.real();
    }
    return r;
}

std::string LaurentScalar::str() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (auto& [d, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.real();
        if (c.imag() != 0.0) os << (c.imag() > 0 ? "+" : "") << c.imag() << "i";
        os << ")";
        if (d != 0) os << "*u^{" << d / 2 << "}";
    }
    if (first) os << "0";
    return os.str();
}

} // namespace dki
