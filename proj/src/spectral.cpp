#include "dki/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dki {

namespace {
constexpr double kPi = std::numbers::pi;
}

double CircleSpectrum::eigenvalue(long n) const {
    return 2.0 * kPi / circumference * (double(n) + theta);
}

std::vector<double> CircleSpectrum::window(double cutoff) const {
    std::vector<double> w;
    const double scale = 2.0 * kPi / circumference;
    long nmax = static_cast<long>(std::ceil(cutoff / scale + 1.0));
    for (long n = -nmax; n <= nmax; ++n) {
        double l = eigenvalue(n);
        if (std::abs(l) <= cutoff) w.push_back(l);
    }
    return w;
}

CircleSpectrum circle_spectrum(double circumference, double theta) {
    if (circumference <= 0.0)
        throw std::invalid_argument("circle_spectrum: circumference must be positive");
    return {circumference, mod1(theta)};
}

double reduced_eta_circle(double theta) {
    // eta(0) = 1 - 2 theta for theta in (0,1); at theta = 0 the kernel is
    // one-dimensional and eta vanishes by symmetry. Both give 1/2 - theta mod 1.
    return mod1(0.5 - mod1(theta));
}

double reduced_eta_flat(const std::vector<double>& thetas) {
    if (thetas.size() % 2 == 0)
        throw std::invalid_argument("reduced_eta_flat: dimension must be odd");
    if (thetas.size() == 1) return reduced_eta_circle(thetas[0]);
    // dim >= 3: sigma.lambda has symmetric spectrum +-|lambda| and the kernel
    // (at trivial twist) has even dimension, so eta-bar = 0 mod 1.
    return 0.0;
}

double eta_flat_bundle(const Bundle& b, double spin_offset) {
    if (!b.flat_thetas)
        throw std::invalid_argument(
            "eta: bundle has no flat line decomposition (unsupported twist)");
    double v = 0.0;
    for (auto& line : *b.flat_thetas) {
        std::vector<double> t = line;
        for (auto& x : t) x = mod1(x + spin_offset);
        v += reduced_eta_flat(t);
    }
    return mod1(v);
}

std::pair<int, int> torus_kernel_dim(int flux, double theta1, double theta2) {
    if (flux > 0) return {flux, 0};
    if (flux < 0) return {0, -flux};
    const bool trivial = mod1(theta1) == 0.0 && mod1(theta2) == 0.0;
    return trivial ? std::make_pair(1, 1) : std::make_pair(0, 0);
}

EtaValue eta_class(const DKClassEven& x, double spin_offset) {
    const auto& M = x.manifold();
    for (auto& f : M->factors())
        if (!std::holds_alternative<CircleSpec>(f))
            throw std::invalid_argument("eta_class: base must be a flat torus");
    if (M->dim() % 2 == 0)
        throw std::invalid_argument("eta_class: base dimension must be odd");
    const int u_power = (x.degree() - M->dim() - 1) / 2;
    double v = 0.0;
    for (auto& g : x.gens()) {
        if (g.bundle->rank > 0)
            v += g.coeff * eta_flat_bundle(*g.bundle, spin_offset);
        // int Td ^ phi with Td = 1 on a flat base
        LaurentScalar s = integrate(g.phi);
        Complex c = s.coeff(2 * u_power);
        if (std::abs(c.imag()) > 1e-9)
            throw std::runtime_error("eta_class: non-real phi integral");
        v += g.coeff * c.real();
    }
    return EtaValue::make(u_power, v);
}

} // namespace dki
