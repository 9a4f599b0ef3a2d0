#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dki/charforms.hpp"
#include "dki/spectral.hpp"

using namespace dki;

namespace {

constexpr double kPi = std::numbers::pi;

// Gaussian-smoothed spectral asymmetry, Richardson-extrapolated t -> 0.
// E(t) = sum sign(lambda) exp(-t^2 lambda^2) is polynomial in t^2 up to
// exponentially small terms, so Neville on shrinking t nodes converges fast.
double eta_smoothed_oracle(double L, double theta) {
    auto smoothed = [&](double t) {
        double s = 0.0;
        const double scale = 2.0 * kPi / L;
        long nmax = static_cast<long>(std::ceil(8.0 / (t * scale))) + 2;
        for (long n = -nmax; n <= nmax; ++n) {
            double lam = scale * (double(n) + theta);
            if (lam == 0.0) continue;
            s += (lam > 0 ? 1.0 : -1.0) * std::exp(-t * t * lam * lam);
        }
        return s;
    };
    // nodes must sit inside the small-t asymptotic regime
    const int m = 5;
    double t0 = 0.12 * L, x[m], v[m];
    for (int j = 0; j < m; ++j) {
        double t = t0 / std::pow(2.0, j);
        x[j] = t * t;
        v[j] = smoothed(t);
    }
    for (int k = 1; k < m; ++k)
        for (int j = 0; j < m - k; ++j)
            v[j] = (0.0 - x[j + k]) * (v[j] - v[j + 1]) / (x[j] - x[j + k]) + v[j + 1];
    return v[0];
}

// Hurwitz zeta by Euler-Maclaurin and the eta continuation through s -> 0.
double hurwitz_zeta(double s, double a) {
    const int N = 40;
    double sum = 0.0;
    for (int k = 0; k < N; ++k) sum += std::pow(k + a, -s);
    const double x = N + a;
    sum += std::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(x, -s);
    double fact = s, xp = std::pow(x, -s - 1.0);
    sum += (1.0 / 6.0) / 2.0 * fact * xp;
    fact *= (s + 1.0) * (s + 2.0);
    xp /= x * x;
    sum += (-1.0 / 30.0) / 24.0 * fact * xp;
    fact *= (s + 3.0) * (s + 4.0);
    xp /= x * x;
    sum += (1.0 / 42.0) / 720.0 * fact * xp;
    return sum;
}

double eta_zeta_oracle(double theta) {
    theta = mod1(theta);
    if (theta == 0.0) return mod1(0.5);
    const int m = 8;
    double s[m], v[m];
    for (int j = 0; j < m; ++j) {
        s[j] = 0.5 * std::pow(0.5, j);
        v[j] = hurwitz_zeta(s[j], theta) - hurwitz_zeta(s[j], 1.0 - theta);
    }
    for (int k = 1; k < m; ++k)
        for (int j = 0; j < m - k; ++j)
            v[j] = (0.0 - s[j + k]) * (v[j] - v[j + 1]) / (s[j] - s[j + k]) + v[j + 1];
    return mod1(0.5 * v[0]);
}

double circ_dist(double a, double b) {
    double d = mod1(a - b);
    return std::min(d, 1.0 - d);
}

std::vector<double> jacobi_eigs(std::vector<double> a, int n) {
    auto at = [&](int i, int j) -> double& { return a[std::size_t(i) * n + j]; };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double tau = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t), sn = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - sn * akq;
                    at(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - sn * aqk;
                    at(q, k) = sn * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

// Count near-zero modes of the flux-twist chirality blocks by direct
// diagonalization of the oscillator pair.
std::pair<int, int> landau_count(int flux, double* gap_ratio = nullptr) {
    const int n = std::abs(flux);
    if (n == 0) return {0, 0};
    const double w = 2.0 * kPi * flux;
    const int per_unit = 12, halfspan = 4, m = 2 * halfspan * per_unit + 1;
    const double h = 1.0 / per_unit;
    int plus = 0, minus = 0;
    double ratio = 1e300;
    for (int r = 0; r < n; ++r)
        for (int side = 0; side < 2; ++side) {
            std::vector<double> H(std::size_t(m) * m, 0.0);
            auto add = [&](int i, int j, double v) {
                if (j >= 0 && j < m) H[std::size_t(i) * m + j] += v;
            };
            const double c0 = 30.0 / (12 * h * h), c1 = -16.0 / (12 * h * h),
                         c2 = 1.0 / (12 * h * h);
            for (int i = 0; i < m; ++i) {
                double dx = -halfspan + i * h;
                add(i, i - 2, c2);
                add(i, i - 1, c1);
                add(i, i, c0 + w * w * dx * dx + (side == 0 ? -w : w));
                add(i, i + 1, c1);
                add(i, i + 2, c2);
            }
            auto ev = jacobi_eigs(std::move(H), m);
            int zeros = 0;
            for (double e : ev)
                if (e < std::abs(w)) ++zeros;
            if (zeros > 0 && zeros < m)
                ratio = std::min(ratio, ev[zeros] / std::max(std::abs(ev[zeros - 1]),
                                                             1e-300));
            (side == 0 ? plus : minus) += zeros;
        }
    if (gap_ratio) *gap_ratio = ratio;
    return {plus, minus};
}

} // namespace

TEST_CASE("twisted circle spectrum") {
    auto s0 = circle_spectrum(1.0, 0.0);
    CHECK(s0.kernel_dim() == 1);
    CHECK(s0.eigenvalue(0) == doctest::Approx(0.0));

    auto sh = circle_spectrum(1.0, 0.5);
    CHECK(sh.kernel_dim() == 0);
    auto win = sh.window(40.0);
    double asym = 0.0;
    for (double l : win) asym += (l > 0 ? 1.0 : -1.0);
    CHECK(asym == doctest::Approx(0.0)); // symmetric spectrum at theta = 1/2

    auto sq = circle_spectrum(2.0, 0.25);
    double lmin = 1e300;
    for (double l : sq.window(20.0)) lmin = std::min(lmin, std::abs(l));
    CHECK(lmin == doctest::Approx(2.0 * kPi / 2.0 * 0.25));
    CHECK_THROWS(circle_spectrum(-1.0, 0.1));
}

TEST_CASE("reduced eta closed form against both spectral oracles") {
    double worst_zeta = 0.0, worst_smooth = 0.0, worst_reflect = 0.0;
    for (int i = 0; i < 97; ++i) {
        double theta = double(i) / 97.0;
        double engine = reduced_eta_circle(theta);
        worst_zeta = std::max(worst_zeta, circ_dist(engine, eta_zeta_oracle(theta)));
        if (theta != 0.0) {
            // smoothed-asymmetry oracle gives eta(0) before the mod-1 fold
            double eta0 = eta_smoothed_oracle(1.0, theta);
            worst_smooth =
                std::max(worst_smooth, circ_dist(engine, mod1(0.5 * eta0)));
        }
        double sum = mod1(reduced_eta_circle(theta) + reduced_eta_circle(1.0 - theta));
        worst_reflect = std::max(worst_reflect, std::min(sum, 1.0 - sum));
    }
    CHECK(worst_zeta < 1e-8);
    CHECK(worst_smooth < 1e-8);
    CHECK(worst_reflect < 1e-8);
    // scale invariance of the circumference
    CHECK(circ_dist(mod1(0.5 * eta_smoothed_oracle(2.0, 0.3)),
                    reduced_eta_circle(0.3)) < 1e-8);
}

TEST_CASE("eta variation matches the transgression period") {
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 48}});
    const double theta = 0.3, delta = 0.17;
    double deta = mod1(reduced_eta_circle(theta + delta) - reduced_eta_circle(theta));
    CHECK(circ_dist(deta, mod1(-delta)) < 1e-12);
    GradedForm cs = cs_two(Bundle::flat_line(S1, {theta}),
                           Bundle::flat_line(S1, {theta + delta}), 0, 24);
    double period = integrate(cs).coeff(-2).real();
    CHECK(std::abs(period - (-delta)) < 1e-9);
}

TEST_CASE("class-level eta on flat odd bases") {
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 48}});
    // rank-0 class: the value is the circle integral of phi
    GradedForm phi = GradedForm::coordinate(S1, 0).u_shifted(-2) * Complex{0.31, 0.0};
    EtaValue ej = eta_class(j_map(phi));
    CHECK(ej.u_power == -1);
    CHECK(ej.value_mod_1 == doctest::Approx(0.31));

    DKClassEven e(S1, 0);
    e.add_generator(1, Bundle::flat_line(S1, {0.25}));
    CHECK(eta_class(e).value_mod_1 == doctest::Approx(0.25)); // 1/2 - 1/4

    // spin offset shifts the twist
    CHECK(eta_class(e, 0.5).value_mod_1 == doctest::Approx(0.75));

    // flat T^3 has symmetric spectrum
    auto T3 = StructuredManifold::make(
        {CircleSpec{1.0, 8}, CircleSpec{1.0, 8}, CircleSpec{1.0, 8}});
    DKClassEven e3(T3, 0);
    e3.add_generator(1, Bundle::flat_line(T3, {0.2, 0.4, 0.7}));
    EtaValue v3 = eta_class(e3);
    CHECK(v3.u_power == -2);
    CHECK(v3.value_mod_1 == doctest::Approx(0.0));

    auto S2 = StructuredManifold::make({SphereSpec{1.0, 8, 16}});
    DKClassEven bad(S2, 0);
    bad.add_generator(1, Bundle::trivial(S2, 1));
    CHECK_THROWS(eta_class(bad));
}

TEST_CASE("torus kernel dimensions against the diagonalization oracle") {
    double ratio = 0.0;
    auto o1 = landau_count(1, &ratio);
    CHECK(o1 == torus_kernel_dim(1));
    CHECK(ratio > 1e3);
    auto om2 = landau_count(-2, &ratio);
    CHECK(om2 == torus_kernel_dim(-2));
    CHECK(ratio > 1e3);
    CHECK(torus_kernel_dim(-2) == std::pair<int, int>{0, 2});
    // the kernel index equals the measured c1 flux exactly
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 24}, CircleSpec{1.0, 24}});
    for (int n : {1, -2, 3}) {
        double flux = integrate(c1_form(Bundle::poincare(T2, n))).coeff(-2).real();
        auto k = torus_kernel_dim(static_cast<int>(std::lround(flux)));
        CHECK(k.first - k.second == n);
        CHECK(std::abs(flux - n) < 1e-12);
    }
    // flux 0: kernel only at the trivial twist
    CHECK(torus_kernel_dim(0, 1.0 / 3.0, 1.0 / 3.0) == std::pair<int, int>{0, 0});
    CHECK(torus_kernel_dim(0, 0.0, 0.0) == std::pair<int, int>{1, 1});
}
