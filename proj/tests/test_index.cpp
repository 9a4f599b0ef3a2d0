#include <doctest.h>

#include <numbers>

#include "dki/index.hpp"

using namespace dki;

namespace {
constexpr double kPi = std::numbers::pi;

DKClassEven fiber_unit(const ManifoldPtr& Z) {
    DKClassEven e(Z, Z->dim());
    e.add_generator(1, Bundle::trivial(Z, 1));
    return e;
}

DKClassEven fiber_x(const ManifoldPtr& Z) {
    DKClassEven e(Z, Z->dim());
    if (Z->num_spheres() > 0) {
        e.add_generator(1, Bundle::monopole(Z, 1));
        e.add_generator(-1, Bundle::trivial(Z, 1));
    } else {
        e.add_generator(1, Bundle::poincare(Z, 1));
        e.add_generator(-1, Bundle::trivial(Z, 1));
    }
    return e;
}

} // namespace

TEST_CASE("Todd-twisted pushforward") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 16}, CircleSpec{1.0, 16}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 16}});
    ProductFamily f = ProductFamily::make(T2, S1, nullptr, 2);

    // flat fiber: reduces to the raw fiber integral
    GradedForm phi = wedge(wedge(GradedForm::coordinate(f.total, 0),
                                 GradedForm::coordinate(f.total, 1)),
                           GradedForm::coordinate(f.total, 2));
    GradedForm pushed = todd_pushforward(f, phi);
    GradedForm raw = rehome(fiber_integrate(phi, {0, 1}), f.base);
    CHECK((pushed - raw).max_abs() < 1e-13);

    // sphere fiber with the complex spin^c: int Td = 1, so the pullback of a
    // base form returns unchanged, and p*(c1) pushes to the unit
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 16, 32}});
    ProductFamily g =
        ProductFamily::make(S2, S1, Bundle::monopole(S2, 2), 2);
    GradedForm beta = GradedForm::coordinate(S1, 0);
    std::vector<int> bm(g.total->num_factors(), -1);
    bm[1] = 0;
    GradedForm up = pullback(beta, g.total, bm);
    // the pushforward lowers the total degree by dim Z; the unit pairing
    // returns beta in the u-shifted slot
    GradedForm expect_beta = rehome(beta, g.base).u_shifted(-2);
    CHECK((todd_pushforward(g, up) - expect_beta).max_abs() < 1e-8);

    std::vector<int> fm(g.total->num_factors(), -1);
    fm[0] = 0;
    GradedForm c1up = pullback(c1_form(Bundle::monopole(S2, 1)), g.total, fm);
    GradedForm unit = todd_pushforward(g, c1up);
    const Field* cc = unit.find(0, MultiIndex{});
    REQUIRE(cc);
    for (auto& v : *cc) CHECK(std::abs(v - Complex{1.0, 0.0}) < 1e-8);
}

TEST_CASE("analytic pushforward of product families") {
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 16, 32}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 16}});
    DKClassEven eb(S1, 0);
    GradedForm phiB = GradedForm::coordinate(S1, 0).u_shifted(-2) * Complex{0.2, 0.0};
    eb.add_generator(1, Bundle::flat_line(S1, {0.3}), phiB);

    // complex spin^c sphere: indices 2 (line of flux 1) and 1 (unit)
    ProductFamily f = ProductFamily::make(S2, S1, Bundle::monopole(S2, 2), 2);
    DKClassEven mono(S2, 2);
    mono.add_generator(1, Bundle::monopole(S2, 1));
    f.terms.push_back({mono, eb});
    f.terms.push_back({fiber_unit(S2), eb});
    IndexResult res = analytic_index_product(f);
    REQUIRE(res.fiber_indices.size() == 2);
    CHECK(res.fiber_indices[0] == 2);
    CHECK(res.fiber_indices[1] == 1);
    CHECK(res.eta_form_used.max_abs() == 0.0);
    CHECK(res.cls.degree() == 0);

    // flat torus fiber: a flat line pairs to index 0, so only j-terms remain
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 16}, CircleSpec{1.0, 16}});
    ProductFamily ft = ProductFamily::make(T2, S1, nullptr, 2);
    DKClassEven flatf(T2, 2);
    flatf.add_generator(1, Bundle::flat_line(T2, {0.3, 0.8}));
    ft.terms.push_back({flatf, eb});
    IndexResult rt = analytic_index_product(ft);
    CHECK(rt.fiber_indices[0] == 0);
    Observables o = observables(rt.cls);
    CHECK(o.rank == 0);

    // a broken decomposition (non-integer pairing) is rejected: pair the
    // sphere family against half the proper characteristic line
    ProductFamily bad = ProductFamily::make(S2, S1, Bundle::monopole(S2, 1), 2);
    bad.terms.push_back({fiber_unit(S2), eb});
    CHECK_THROWS(analytic_index_product(bad));
}

TEST_CASE("basis-paired pushforward and the unit-slot drop") {
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 16, 32}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 16}});
    DKClassEven eb(S1, 0);
    eb.add_generator(1, Bundle::flat_line(S1, {0.35}));
    DKClassEven eb2(S1, 0);
    eb2.add_generator(2, Bundle::flat_line(S1, {0.1}));

    // spin structure (trivial characteristic line): the unit slot pairs to 0
    ProductFamily f = ProductFamily::make(S2, S1, nullptr, 2);
    f.terms.push_back({fiber_unit(S2), eb2});
    f.terms.push_back({fiber_x(S2), eb});
    DKClassEven top = kunneth_pushforward(f);
    CHECK(Observables::distance(observables(top), observables(eb)) < 1e-9);

    // complex spin^c: the unit slot pairs to 1 and contributes
    ProductFamily g = ProductFamily::make(S2, S1, Bundle::monopole(S2, 2), 2);
    g.terms.push_back({fiber_unit(S2), eb2});
    g.terms.push_back({fiber_x(S2), eb});
    DKClassEven top2 = kunneth_pushforward(g);
    CHECK(Observables::distance(observables(top2), observables(eb2 + eb)) < 1e-9);

    IndexResult an = analytic_index_product(g);
    CHECK(Observables::distance(observables(top2), observables(an.cls)) < 1e-9);
}

TEST_CASE("index verification harness") {
    auto T2 = StructuredManifold::make({CircleSpec{1.0, 16}, CircleSpec{1.0, 16}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 16}});
    DKClassEven eb(S1, 0);
    GradedForm phiB = GradedForm::coordinate(S1, 0).u_shifted(-2) * Complex{0.4, 0.0};
    eb.add_generator(1, Bundle::flat_line(S1, {0.2}), phiB);

    // flux-1 torus fiber class: fiber index 1, both routes give back eb
    ProductFamily f = ProductFamily::make(T2, S1, nullptr, 2);
    f.terms.push_back({fiber_x(T2), eb});
    VerifyReport rep = verify_index_theorem(f);
    CHECK(rep.max_residual < 1e-6);
    CHECK(rep.eta_checked);
    IndexResult an = analytic_index_product(f);
    CHECK(an.fiber_indices[0] == 1);
    CHECK(Observables::distance(observables(an.cls), observables(eb)) < 1e-9);
    EtaValue direct = eta_class(eb);
    EtaValue tot = eta_class_total(f);
    CHECK(EtaValue::circle_distance(direct, tot) < 1e-9);

    // pure-form class: both routes reduce to j(pi_* phi)
    ProductFamily fj = ProductFamily::make(T2, S1, nullptr, 2);
    GradedForm jphi = wedge(wedge(GradedForm::coordinate(fj.total, 0),
                                  GradedForm::coordinate(fj.total, 1)),
                            GradedForm::coordinate(fj.total, 2))
                          .u_shifted(-2) *
                      Complex{0.6, 0.0};
    fj.j_phi = jphi;
    VerifyReport repj = verify_index_theorem(fj);
    CHECK(repj.max_residual < 1e-8);
}

TEST_CASE("odd index over a point reproduces the circle eta") {
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 24}});
    for (double th : {0.15, 0.4, 0.8}) {
        DKClassEven e(S1, 0);
        GradedForm phi = GradedForm::coordinate(S1, 0).u_shifted(-2) * Complex{0.3, 0.0};
        e.add_generator(1, Bundle::flat_line(S1, {th}), phi);
        auto r = even_class_odd_fiber_index(e, 1.0, 0.0, 24);
        CHECK(r.torus_flux == 1);
        CHECK(r.torus_kernel == std::pair<int, int>{1, 0});
        CHECK(EtaValue::circle_distance(r.value, r.eta_direct) < 1e-9);
        CHECK(EtaValue::circle_distance(
                  r.value, EtaValue::make(-1, 0.5 - th + 0.3)) < 1e-9);
        // rank-0 classes reduce to the circle integral of phi
        auto rj = even_class_odd_fiber_index(j_map(phi), 1.0, 0.0, 24);
        CHECK(rj.value.value_mod_1 == doctest::Approx(0.3));
        // fiber circle length independence
        auto r2 = even_class_odd_fiber_index(e, 2.0, 0.0, 24);
        CHECK(EtaValue::circle_distance(r.value, r2.value) < 1e-9);
    }
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 8, 16}});
    DKClassEven bad(S2, 0);
    bad.add_generator(1, Bundle::trivial(S2, 1));
    CHECK_THROWS(even_class_odd_fiber_index(bad));
}

TEST_CASE("odd classes push forward through even fibers") {
    auto S2 = StructuredManifold::make({SphereSpec{1.0, 12, 24}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 24}});
    ProductFamily geom = ProductFamily::make(S2, S1, nullptr, 2);
    auto b = Bundle::trivial(S1, 1);
    DKClassOdd gb(S1, -1);
    gb.add_generator(1, b, UnitaryAutomorphism::winding(b, 0, 2), GradedForm(S1, -2));
    std::vector<OddFamilyTerm> terms;
    terms.push_back({fiber_x(S2), gb});
    DKClassOdd pushed = odd_index(geom, terms, GradedForm(geom.total, 1));
    CHECK(ObservablesOdd::distance(observables(pushed, 16), observables(gb, 16)) <
          1e-8);

    // delta-current variant of the Todd pushforward
    DeltaCurrent dc{geom.total, {1},
                    GradedForm::coordinate(S1, 0) * Complex{0.5, 0.0}};
    GradedForm out = todd_pushforward(geom, dc);
    CHECK((out - rehome(GradedForm::coordinate(S1, 0) * Complex{0.5, 0.0}, geom.base))
              .max_abs() < 1e-12);
}
