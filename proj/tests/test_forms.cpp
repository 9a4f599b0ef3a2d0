#include <doctest.h>

#include <numbers>
#include <random>

#include "dki/forms.hpp"

using namespace dki;

namespace {

constexpr double kPi = std::numbers::pi;

GradedForm trig_scalar(const ManifoldPtr& M, std::mt19937_64& rng, int modes = 3) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> amp_c(M->num_coords()), amp_s(M->num_coords());
    std::vector<int> k(M->num_coords());
    std::uniform_int_distribution<int> ki(1, modes);
    for (int c = 0; c < M->num_coords(); ++c) {
        amp_c[c] = u(rng);
        amp_s[c] = u(rng);
        k[c] = ki(rng);
    }
    return GradedForm::sample(M, [=, Mp = M.get()](int, std::size_t p) {
        double v = 1.0;
        for (int c = 0; c < Mp->num_coords(); ++c) {
            double L = 1.0; // unit circles below
            double x = Mp->axis(c).nodes[Mp->coord_of_point(p, c)];
            v *= 1.0 + amp_c[c] * std::cos(2 * kPi * k[c] * x / L) +
                 amp_s[c] * std::sin(2 * kPi * k[c] * x / L);
        }
        return Complex{v, 0.0};
    });
}

} // namespace

TEST_CASE("wedge unit, antisymmetry, centrality of u") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 32}, CircleSpec{1.0, 32}});
    std::mt19937_64 rng(5);
    GradedForm f = trig_scalar(T2, rng);
    GradedForm one = GradedForm::constant(T2, {1.0, 0.0});
    CHECK((wedge(f, one) - f).max_abs() < 1e-15);

    GradedForm dx = GradedForm::coordinate(T2, 0);
    GradedForm dy = GradedForm::coordinate(T2, 1);
    CHECK((wedge(dx, dy) + wedge(dy, dx)).max_abs() < 1e-15);

    GradedForm udx = dx.u_shifted(2);
    GradedForm uinv_dy = dy.u_shifted(-2);
    GradedForm prod = wedge(udx, uinv_dy);
    CHECK(prod.total_degree() == 2);
    CHECK((prod - wedge(dx, dy)).max_abs() < 1e-15);
}

TEST_CASE("exterior derivative basics and spectral accuracy") {
    auto S1 = StructuredManifold::make({CircleSpec{2.0, 256}});
    GradedForm c = GradedForm::constant(S1, {3.0, 0.0});
    CHECK(exterior_d(c).max_abs() < 1e-10);

    // top degree on the circle
    GradedForm fdx = wedge(GradedForm::constant(S1, {2.5, 0.0}),
                           GradedForm::coordinate(S1, 0));
    CHECK(exterior_d(fdx).is_zero());

    const double L = 2.0;
    GradedForm f = GradedForm::sample(S1, [&](int, std::size_t p) {
        double x = S1->axis(0).nodes[p];
        return Complex{std::sin(2 * kPi * x / L), 0.0};
    });
    GradedForm df = exterior_d(f);
    double err = 0.0;
    const Field& comp = *df.find(0, MultiIndex{{0}});
    for (std::size_t p = 0; p < S1->npoints(); ++p) {
        double x = S1->axis(0).nodes[p];
        err = std::max(err, std::abs(comp[p] - Complex{2 * kPi / L *
                                                           std::cos(2 * kPi * x / L),
                                                       0.0}));
    }
    CHECK(err < 1e-8);
}

TEST_CASE("d o d vanishes for random trig forms on the torus at grid 256") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 256}, CircleSpec{1.0, 256}});
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 3; ++trial) {
        GradedForm w = trig_scalar(T2, rng);
        CHECK(exterior_d(exterior_d(w)).max_abs() < 1e-8);
        GradedForm w1 = wedge(trig_scalar(T2, rng), GradedForm::coordinate(T2, 0));
        CHECK(exterior_d(exterior_d(w1)).max_abs() < 1e-8);
    }
}

TEST_CASE("d o d vanishes on the sphere charts") {
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 32, 64}});
    GradedForm f = GradedForm::sample(S2, [&](int, std::size_t p) {
        double th = S2->axis(0).nodes[S2->coord_of_point(p, 0)];
        double ph = S2->axis(1).nodes[S2->coord_of_point(p, 1)];
        double s = std::sin(th);
        return Complex{std::cos(th) + 0.5 * s * s * std::cos(2 * ph), 0.0};
    });
    CHECK(exterior_d(exterior_d(f)).max_abs() < 1e-8);
}

TEST_CASE("Stokes on closed manifolds") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 64}, CircleSpec{1.0, 64}});
    std::mt19937_64 rng(23);
    GradedForm a = wedge(trig_scalar(T2, rng), GradedForm::coordinate(T2, 1));
    CHECK(integrate(exterior_d(a)).max_abs() < 1e-8);

    auto S2 = StructuredManifold::make({SphereSpec{1.0, 48, 96}});
    // a smooth cap-consistent 1-form: cos(theta) sin^2(theta) dphi
    GradedForm b = wedge(GradedForm::sample(S2,
                                            [&](int, std::size_t p) {
                                                double th =
                                                    S2->axis(0).nodes[S2->coord_of_point(p, 0)];
                                                double s = std::sin(th);
                                                return Complex{std::cos(th) * s * s, 0.0};
                                            }),
                         GradedForm::coordinate(S2, 1));
    CHECK(overlap_residual(b) < 1e-7);
    CHECK(integrate(exterior_d(b)).max_abs() < 1e-8);
}

TEST_CASE("Leibniz rule") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 64}, CircleSpec{1.0, 64}});
    std::mt19937_64 rng(31);
    GradedForm f = trig_scalar(T2, rng);
    GradedForm a = wedge(f, GradedForm::coordinate(T2, 0)); // 1-form
    GradedForm g = trig_scalar(T2, rng);
    GradedForm lhs = exterior_d(wedge(a, g));
    GradedForm rhs = wedge(exterior_d(a), g);
    // (-1)^{|a|} a ^ dg with |a| = 1
    rhs.add_scaled(wedge(a, exterior_d(g)), {-1.0, 0.0});
    CHECK((lhs - rhs).max_abs() < 1e-8);
}

TEST_CASE("integration: unit torus, sphere area, degree selection") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 32}, CircleSpec{1.0, 32}});
    GradedForm vol = wedge(GradedForm::coordinate(T2, 0), GradedForm::coordinate(T2, 1));
    CHECK(integrate(vol).coeff(-2 + 2 + 0).real() == doctest::Approx(1.0));

    const double r = 1.7;
    auto S2 = StructuredManifold::make({SphereSpec{r, 64, 128}});
    GradedForm area = wedge(GradedForm::sample(S2,
                                               [&](int, std::size_t p) {
                                                   double th = S2->axis(0).nodes
                                                       [S2->coord_of_point(p, 0)];
                                                   return Complex{r * r * std::sin(th),
                                                                  0.0};
                                               }),
                            wedge(GradedForm::coordinate(S2, 0),
                                  GradedForm::coordinate(S2, 1)));
    double got = integrate(area).coeff(0).real();
    CHECK(std::abs(got - 4 * kPi * r * r) / (4 * kPi * r * r) < 1e-10);

    // degree selection: only the top piece contributes
    GradedForm mixed = vol.u_shifted(-2);            // u^{-1} * 2-form, total 0
    GradedForm zerof = GradedForm::constant(T2, {5.0, 0.0}); // total 0, 0-form
    GradedForm sum = mixed + zerof;
    LaurentScalar s = integrate(sum);
    CHECK(s.coeff(-2).real() == doctest::Approx(1.0));
    CHECK(s.coeff(0) == Complex{0.0, 0.0});
    CHECK_THROWS(integrate(GradedForm::constant(
        StructuredManifold::make({IntervalSpec{16}}), {1.0, 0.0})));
}

TEST_CASE("fiber integration: head fibers, pullbacks, Fubini") {
    auto T2S1 = StructuredManifold::make(
        {CircleSpec{1.0, 24}, CircleSpec{1.0, 24}, CircleSpec{1.0, 24}});
    GradedForm dt12 = wedge(GradedForm::coordinate(T2S1, 0),
                            GradedForm::coordinate(T2S1, 1));
    GradedForm pushed = fiber_integrate(dt12, {0, 1});
    REQUIRE(pushed.total_degree() == 0);
    const Field* c = pushed.find(0, MultiIndex{});
    REQUIRE(c != nullptr);
    for (auto& v : *c) CHECK(std::abs(v - Complex{1.0, 0.0}) < 1e-13);

    // pullback of a base form has no fiber-top component
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 24}});
    GradedForm beta = GradedForm::coordinate(S1, 0);
    GradedForm up = pullback(beta, T2S1, {-1, -1, 0});
    CHECK(fiber_integrate(up, {0, 1}).is_zero());

    // Fubini with the fiber in head position
    std::mt19937_64 rng(41);
    GradedForm f = trig_scalar(T2S1, rng);
    GradedForm top = wedge(f, wedge(dt12, GradedForm::coordinate(T2S1, 2)));
    LaurentScalar direct = integrate(top);
    LaurentScalar via = integrate(rehome(fiber_integrate(top, {0, 1}),
                                         StructuredManifold::make({CircleSpec{1.0, 24}})));
    CHECK(LaurentScalar::distance(direct, via) < 1e-8);
}

TEST_CASE("tail-position fiber carries the reordering sign") {
    // with fiber legs contracted first, integrating f dx^dy over the tail
    // y-circle gives -(oint f dy) dx
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 32}, CircleSpec{1.0, 32}});
    GradedForm f = GradedForm::sample(T2, [&](int, std::size_t p) {
        double y = T2->axis(1).nodes[T2->coord_of_point(p, 1)];
        return Complex{1.0 + std::sin(2 * kPi * y), 0.0};
    });
    GradedForm a = wedge(f, wedge(GradedForm::coordinate(T2, 0),
                                  GradedForm::coordinate(T2, 1)));
    GradedForm pushed = fiber_integrate(a, {1});
    const Field* comp = pushed.find(0, MultiIndex{{0}});
    REQUIRE(comp != nullptr);
    for (auto& v : *comp) CHECK(std::abs(v - Complex{-1.0, 0.0}) < 1e-12);
}

TEST_CASE("r_u map scales by (2 pi i)^k per u-degree") {
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 16}});
    GradedForm w = GradedForm::coordinate(S1, 0).u_shifted(-2); // u^{-1} dx
    GradedForm r = r_u_map(w);
    const Field* c = r.find(0, MultiIndex{{0}});
    REQUIRE(c);
    CHECK((*c)[0] == Complex{0.0, -1.0 / (2 * kPi)} * Complex{1.0, 0.0} +
                         Complex{0.0, 0.0});
    GradedForm w0 = GradedForm::constant(S1, {2.0, 0.0});
    CHECK((r_u_map(w0) - w0).max_abs() < 1e-15);
    GradedForm w2 = GradedForm::constant(S1, {1.0, 0.0}, 4); // u^2
    CHECK(r_u_map(w2).find(0, MultiIndex{})->at(0).real() ==
          doctest::Approx(-4.0 * kPi * kPi));
}

TEST_CASE("chart overlap residual detects inconsistency") {
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 32, 64}});
    // consistent scalar: cos(theta) flips sign between caps... it maps to
    // cos(pi - theta) = -cos(theta), so the consistent global function is
    // cos^2(theta)
    GradedForm good = GradedForm::sample(S2, [&](int, std::size_t p) {
        double th = S2->axis(0).nodes[S2->coord_of_point(p, 0)];
        return Complex{std::cos(th) * std::cos(th), 0.0};
    });
    CHECK(overlap_residual(good) < 1e-13);
    GradedForm bad = GradedForm::sample(S2, [&](int ch, std::size_t p) {
        double th = S2->axis(0).nodes[S2->coord_of_point(p, 0)];
        return Complex{ch == 0 ? std::cos(th) : 0.5, 0.0};
    });
    CHECK(overlap_residual(bad) > 0.1);
}

TEST_CASE("delta current bookkeeping") {
    auto M = StructuredManifold::make(
        {CircleSpec{1.0, 16}, CircleSpec{1.0, 16}, CircleSpec{1.0, 16}});
    auto sub = M->submanifold({0, 2});
    GradedForm smooth = wedge(GradedForm::coordinate(sub, 0),
                              GradedForm::coordinate(sub, 1));
    DeltaCurrent d{M, {0, 2}, smooth};
    CHECK(d.total_degree() == 3); // 2-form plus codimension 1

    // base factors {2} are inside the support; fiber = {0,1}
    GradedForm pushed = fiber_integrate(d, {0, 1});
    CHECK(pushed.total_degree() == 1);
    CHECK_THROWS(fiber_integrate(d, {0})); // base factor 1 is not in the support
}

TEST_CASE("eta values reduce mod 1 and add at equal u-power") {
    EtaValue a = EtaValue::make(-1, 1.75);
    CHECK(a.value_mod_1 == doctest::Approx(0.75));
    EtaValue b = EtaValue::make(-1, 0.5);
    CHECK((a + b).value_mod_1 == doctest::Approx(0.25));
    CHECK_THROWS((void)(a + EtaValue::make(-2, 0.5)));
    CHECK(EtaValue::circle_distance(EtaValue::make(-1, 0.98),
                                    EtaValue::make(-1, 0.02)) ==
          doctest::Approx(0.04));
}
