#include "dki/diffk.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dki/parallel.hpp"

namespace dki {

namespace {

constexpr double kPi = std::numbers::pi;
const Complex kI{0.0, 1.0};

int super_rank(const Bundle& b) {
    return b.grading ? b.grading->first - b.grading->second : b.rank;
}

std::string cycle_name(const std::vector<int>& fs) {
    std::string s = "c";
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (i) s += "_";
        s += std::to_string(fs[i]);
    }
    return s;
}

std::vector<std::vector<int>> factor_subsets(const StructuredManifold& M) {
    std::vector<std::vector<int>> out;
    const int n = M.num_factors();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> fs;
        for (int f = 0; f < n; ++f)
            if (mask & (1 << f)) fs.push_back(f);
        out.push_back(std::move(fs));
    }
    return out;
}

std::map<std::string, LaurentScalar> cycle_periods(const GradedForm& w) {
    std::map<std::string, LaurentScalar> periods;
    for (auto& fs : factor_subsets(*w.manifold()))
        periods[cycle_name(fs)] = integrate(restrict_to(w, fs));
    return periods;
}

} // namespace

void DKClassEven::add_generator(int coeff, BundlePtr b, GradedForm phi) {
    if (!b->manifold->same_grid_as(*m_))
        throw std::invalid_argument("DKClassEven: generator on the wrong base");
    if (phi.total_degree() != degree_ - 1)
        throw std::invalid_argument("DKClassEven: phi must have total degree r-1");
    gens_.push_back({coeff, std::move(b), std::move(phi)});
}

void DKClassEven::add_generator(int coeff, BundlePtr b) {
    GradedForm zero(m_, degree_ - 1);
    add_generator(coeff, std::move(b), std::move(zero));
}

DKClassEven DKClassEven::operator+(const DKClassEven& o) const {
    if (degree_ != o.degree_)
        throw std::invalid_argument("DKClassEven: degree mismatch");
    DKClassEven r = *this;
    for (auto& g : o.gens_) r.gens_.push_back(g);
    return r;
}

DKClassEven DKClassEven::operator-(const DKClassEven& o) const {
    DKClassEven r = *this;
    for (auto& g : o.gens_) {
        auto h = g;
        h.coeff = -h.coeff;
        r.gens_.push_back(std::move(h));
    }
    return r;
}

DKClassEven DKClassEven::operator*(int n) const {
    DKClassEven r = *this;
    for (auto& g : r.gens_) g.coeff *= n;
    return r;
}

DKClassEven DKClassEven::unit(ManifoldPtr m) {
    DKClassEven r(m, 0);
    r.add_generator(1, Bundle::trivial(m, 1));
    return r;
}

void DKClassOdd::add_generator(int coeff, BundlePtr b, UnitaryAutomorphism aut,
                               GradedForm phi) {
    if (phi.total_degree() != degree_ - 1)
        throw std::invalid_argument("DKClassOdd: phi must have total degree r-1");
    gens_.push_back({coeff, std::move(b), std::move(aut), std::move(phi)});
}

DKClassOdd DKClassOdd::operator+(const DKClassOdd& o) const {
    if (degree_ != o.degree_)
        throw std::invalid_argument("DKClassOdd: degree mismatch");
    DKClassOdd r = *this;
    for (auto& g : o.gens_) r.gens_.push_back(g);
    return r;
}

GradedForm omega_map(const DKClassEven& x) {
    GradedForm out(x.manifold(), x.degree());
    for (auto& g : x.gens()) {
        out.add_scaled(rehome(chern_form(g.bundle, x.degree()), x.manifold()),
                       Complex{double(g.coeff), 0.0});
        out.add_scaled(exterior_d(g.phi), Complex{double(g.coeff), 0.0});
    }
    out.prune(1e-300);
    return out;
}

GradedForm omega_map(const DKClassOdd& x, int t_nodes) {
    GradedForm out(x.manifold(), x.degree());
    const int shift = x.degree() + 1; // u^{(r+1)/2}
    for (auto& g : x.gens()) {
        GradedForm w = odd_chern_form(g.bundle, g.aut, t_nodes).u_shifted(shift);
        out.add_scaled(rehome(w, x.manifold()), Complex{double(g.coeff), 0.0});
        out.add_scaled(exterior_d(g.phi), Complex{double(g.coeff), 0.0});
    }
    out.prune(1e-300);
    return out;
}

DKClassEven j_map(const GradedForm& alpha) {
    if ((alpha.total_degree() + 1) % 2 != 0)
        throw std::invalid_argument("j_map: the even model needs odd-degree forms");
    DKClassEven r(alpha.manifold(), alpha.total_degree() + 1);
    r.add_generator(1, Bundle::trivial(alpha.manifold(), 0), alpha);
    return r;
}

DKClassOdd j_map_odd(const GradedForm& alpha) {
    if ((alpha.total_degree() + 1) % 2 != 1)
        throw std::invalid_argument("j_map_odd: the odd model needs even-degree forms");
    DKClassOdd r(alpha.manifold(), alpha.total_degree() + 1);
    auto b = Bundle::trivial(alpha.manifold(), 0);
    r.add_generator(1, b, UnitaryAutomorphism::identity(b), alpha);
    return r;
}

KClassObservable c_map(const DKClassEven& x) {
    KClassObservable o;
    for (auto& g : x.gens()) o.rank += g.coeff * super_rank(*g.bundle);
    o.periods = cycle_periods(omega_map(x));
    return o;
}

DKClassEven product(const DKClassEven& a, const DKClassEven& b) {
    if (!a.manifold()->same_grid_as(*b.manifold()))
        throw std::invalid_argument("product: base mismatch (pull back first)");
    DKClassEven r(a.manifold(), a.degree() + b.degree());
    for (auto& ga : a.gens()) {
        GradedForm wa = rehome(chern_form(ga.bundle, a.degree()), a.manifold());
        for (auto& gb : b.gens()) {
            GradedForm wb = rehome(chern_form(gb.bundle, b.degree()), a.manifold());
            GradedForm phi = wedge(ga.phi, wb);
            phi.add_scaled(wedge(wa, rehome(gb.phi, a.manifold())), {1.0, 0.0});
            phi.add_scaled(wedge(ga.phi, exterior_d(rehome(gb.phi, a.manifold()))),
                           {1.0, 0.0});
            r.add_generator(ga.coeff * gb.coeff,
                            Bundle::tensor(ga.bundle, gb.bundle), std::move(phi));
        }
    }
    return r;
}

DKClassEven pullback_class(const DKClassEven& a, ManifoldPtr target,
                           const std::vector<int>& source_of_target_factor) {
    DKClassEven r(target, a.degree());
    for (auto& g : a.gens())
        r.add_generator(g.coeff,
                        Bundle::pullback(g.bundle, target, source_of_target_factor),
                        pullback(g.phi, target, source_of_target_factor));
    return r;
}

HomotopyComparison homotopy_compare(const BundlePtr& v0, const GradedForm& phi0,
                                    const BundlePtr& v1, const GradedForm& phi1,
                                    int degree, int t_nodes) {
    // the certificate orientation that matches the relation rewrites: moving
    // (v0, phi0) to the v1 connection costs -cs_two(v0, v1), so
    // E1 - E0 = j(phi1 - phi0 + cs_two(v0, v1))
    GradedForm cert = cs_two(v0, v1, degree, t_nodes);
    cert.add_scaled(rehome(phi1, cert.manifold()), {1.0, 0.0});
    cert.add_scaled(rehome(phi0, cert.manifold()), {-1.0, 0.0});
    cert = rehome(cert, v0->manifold);
    DKClassEven e0(v0->manifold, degree), e1(v0->manifold, degree);
    e0.add_generator(1, v0, phi0);
    e1.add_generator(1, v1, phi1);
    DKClassEven diff = e1 - e0 - j_map(cert);
    return {std::move(diff), std::move(cert)};
}

namespace {

// U must be a phase times a constant unitary for the mapping torus to stay
// inside the structured-chart model.
void check_clutching(const UnitaryAutomorphism& U) {
    const auto& M = U.bundle->manifold;
    const int n = U.bundle->rank;
    if (n <= 1) return;
    // U(p) U(p0)^{-1} must be a scalar phase for U = e^{i alpha} V, V constant
    Mat u0inv = mat_at(U.U[0], M->basepoint(), n).adjoint();
    double res = 0.0;
    for (std::size_t p = 0; p < M->npoints();
         p += std::max<std::size_t>(1, M->npoints() / 64)) {
        Mat w = mat_at(U.U[0], p, n) * u0inv;
        Complex s = w.trace() * (1.0 / double(n));
        Mat dev = w - Mat::identity(n) * s;
        res = std::max(res, dev.max_abs());
    }
    if (res > 1e-8)
        throw std::invalid_argument(
            "suspend_odd: clutching map is not phase-times-constant; "
            "not representable on structured charts");
}

} // namespace

DKClassEven suspend_odd(const DKClassOdd& g, int circle_points) {
    std::vector<FactorSpec> fs{CircleSpec{1.0, circle_points}};
    for (auto& f : g.manifold()->factors()) fs.push_back(f);
    auto sus = StructuredManifold::make(std::move(fs));
    DKClassEven r(sus, g.degree() + 1);
    GradedForm dt = GradedForm::coordinate(sus, 0);
    std::vector<int> fmap(sus->num_factors(), -1);
    for (int f = 0; f < g.manifold()->num_factors(); ++f) fmap[f + 1] = f;
    for (auto& gen : g.gens()) {
        check_clutching(gen.aut);
        auto conj = gauge_transform(gen.bundle, gen.aut);
        auto mt = std::const_pointer_cast<Bundle>(
            family_bundle({gen.bundle, conj}, sus, 1));
        // close up the t-seam: consistency of A(1) = U A(0) U^{-1} - ... forces U^{-1}
        const int n = gen.bundle->rank;
        MatField seam(sus->npoints() * n * n);
        exec::parallel_for(sus->npoints(), [&](std::size_t p) {
            std::size_t sp = 0;
            for (int c = 0; c < g.manifold()->num_coords(); ++c)
                sp += std::size_t(sus->coord_of_point(p, c + 1)) *
                      g.manifold()->stride(c);
            set_mat(seam, p, n, mat_at(gen.aut.U[0], sp, n).adjoint());
        });
        // chart 0 field is enough: automorphisms conjugate consistently
        mt->seam_transition[0] = std::move(seam);
        GradedForm Phi = wedge(dt, pullback(gen.phi, sus, fmap)) * Complex{-1.0, 0.0};
        r.add_generator(gen.coeff, mt, std::move(Phi));
    }
    return r;
}

DKClassOdd desuspend(const DKClassEven& e, int circle_factor, int base_node,
                     int transport_steps) {
    const auto& M = e.manifold();
    std::vector<int> keep;
    for (int f = 0; f < M->num_factors(); ++f)
        if (f != circle_factor) keep.push_back(f);
    auto X = M->submanifold(keep);
    const int tc = M->coord_begin(circle_factor);
    std::map<int, int> fix{{tc, base_node}};

    DKClassOdd r(X, e.degree() - 1);
    for (auto& gen : e.gens()) {
        auto G = std::make_shared<Bundle>();
        G->manifold = X;
        G->rank = gen.bundle->rank;
        G->grading = gen.bundle->grading;
        G->potential = matform_restrict(gen.bundle->potential, keep, fix);
        G->curvature = matform_restrict(gen.bundle->curvature, keep, fix);
        G->potential_chart_smooth = gen.bundle->potential_chart_smooth;
        G->cap_transition.resize(X->num_factors());
        G->seam_transition.resize(X->num_factors());
        const int n = G->rank;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            int f = keep[i];
            auto restrict_field = [&](const MatField& src, MatField& dst) {
                if (src.empty()) return;
                const int rr = n * n;
                dst.resize(X->npoints() * rr);
                exec::parallel_for(X->npoints(), [&](std::size_t p) {
                    std::size_t sp = std::size_t(base_node) * M->stride(tc);
                    int xc = 0;
                    for (int c = 0; c < M->num_coords(); ++c) {
                        if (c == tc) continue;
                        sp += std::size_t(X->coord_of_point(p, xc)) * M->stride(c);
                        ++xc;
                    }
                    for (int ee = 0; ee < rr; ++ee) dst[p * rr + ee] = src[sp * rr + ee];
                });
            };
            restrict_field(gen.bundle->cap_transition[f], G->cap_transition[i]);
            restrict_field(gen.bundle->seam_transition[f], G->seam_transition[i]);
        }

        // monodromy around the desuspended circle, inverted (see suspend_odd)
        UnitaryAutomorphism U{G, std::vector<MatField>(X->num_charts())};
        MultiIndex Jt{{static_cast<std::uint8_t>(tc)}};
        for (int ch = 0; ch < X->num_charts(); ++ch) {
            U.U[ch].resize(X->npoints() * n * n);
            // ambient chart with matching sphere bits
            int ach = 0;
            for (std::size_t i = 0; i < keep.size(); ++i)
                if (M->sphere_bit(keep[i]) >= 0 &&
                    X->chart_south(ch, static_cast<int>(i)))
                    ach |= (1 << M->sphere_bit(keep[i]));
            const bool pure_seam = gen.bundle->potential.find(ach, Jt) == nullptr;
            exec::parallel_for(X->npoints(), [&](std::size_t p) {
                std::size_t ap = std::size_t(base_node) * M->stride(tc);
                int xc = 0;
                for (int c = 0; c < M->num_coords(); ++c) {
                    if (c == tc) continue;
                    ap += std::size_t(X->coord_of_point(p, xc)) * M->stride(c);
                    ++xc;
                }
                Mat hol;
                if (pure_seam) {
                    hol = gen.bundle->seam_transition[circle_factor].empty()
                              ? Mat::identity(n)
                              : mat_at(gen.bundle->seam_transition[circle_factor], ap, n);
                } else {
                    hol = holonomy(*gen.bundle, circle_factor, ap, transport_steps);
                }
                set_mat(U.U[ch], p, n, hol.adjoint());
            });
        }

        GradedForm phi =
            rehome(fiber_integrate(gen.phi, {circle_factor}), X) * Complex{-1.0, 0.0};
        r.add_generator(gen.coeff, G, std::move(U), std::move(phi));
    }
    return r;
}

DKClassEven double_suspend(const DKClassEven& e, double a, int circle_points) {
    std::vector<FactorSpec> fs{CircleSpec{a, circle_points},
                               CircleSpec{1.0, circle_points}};
    for (auto& f : e.manifold()->factors()) fs.push_back(f);
    auto M2 = StructuredManifold::make(std::move(fs));
    auto T2 = StructuredManifold::make(
        {CircleSpec{a, circle_points}, CircleSpec{1.0, circle_points}});
    auto P = Bundle::poincare(T2, 1);
    std::vector<int> pmap(M2->num_factors(), -1);
    pmap[0] = 0;
    pmap[1] = 1;
    std::vector<int> emap(M2->num_factors(), -1);
    for (int f = 0; f < e.manifold()->num_factors(); ++f) emap[f + 2] = f;
    auto Pup = Bundle::pullback(P, M2, pmap);
    GradedForm dt12 = wedge(GradedForm::coordinate(M2, 0), GradedForm::coordinate(M2, 1)) *
                      Complex{1.0 / a, 0.0};
    DKClassEven r(M2, e.degree() + 2);
    for (auto& gen : e.gens()) {
        auto B = Bundle::tensor(Pup, Bundle::pullback(gen.bundle, M2, emap));
        GradedForm Phi = wedge(dt12, pullback(gen.phi, M2, emap));
        r.add_generator(gen.coeff, B, std::move(Phi));
    }
    return r;
}

BundlePtr det_line(const DKClassEven& e) {
    if (e.degree() != 0)
        throw std::invalid_argument("det_line: shift to degree 0 first");
    const auto& M = e.manifold();
    auto out = std::make_shared<Bundle>();
    out->manifold = M;
    out->rank = 1;
    out->potential = MatForm(M, 1, 1);
    out->curvature = MatForm(M, 1, 2);
    out->cap_transition.resize(M->num_factors());
    out->seam_transition.resize(M->num_factors());
    // In this engine's transport orientation the determinant connection
    // shift enters with +2 pi i; the holonomy then reads
    // e^{-2 pi i oint phi_(1)} times the Lambda^max holonomy, and relation
    // rewrites leave it fixed.
    const Complex m2pii{0.0, 2.0 * kPi};
    for (auto& gen : e.gens()) {
        const Complex c{double(gen.coeff), 0.0};
        const int n = gen.bundle->rank;
        // trace of the potential and curvature
        for (int ch = 0; ch < M->num_charts(); ++ch) {
            for (auto& [J, F] : gen.bundle->potential.chart(ch)) {
                MatField& dst = out->potential.component(ch, J);
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    Complex t{};
                    for (int i = 0; i < n; ++i) t += F[(p * n + i) * n + i];
                    dst[p] += c * t;
                });
            }
            for (auto& [J, F] : gen.bundle->curvature.chart(ch)) {
                MatField& dst = out->curvature.component(ch, J);
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    Complex t{};
                    for (int i = 0; i < n; ++i) t += F[(p * n + i) * n + i];
                    dst[p] += c * t;
                });
            }
        }
        // -2 pi i phi_(1) and its differential
        GradedForm dphi = exterior_d(gen.phi);
        for (int ch = 0; ch < M->num_charts(); ++ch) {
            for (int co = 0; co < M->num_coords(); ++co) {
                MultiIndex J{{static_cast<std::uint8_t>(co)}};
                Field f = gen.phi.u_minus1_piece(ch, J);
                MatField& dst = out->potential.component(ch, J);
                exec::parallel_for(M->npoints(),
                                   [&](std::size_t p) { dst[p] += c * m2pii * f[p]; });
            }
            for (int c1 = 0; c1 < M->num_coords(); ++c1)
                for (int c2 = c1 + 1; c2 < M->num_coords(); ++c2) {
                    MultiIndex J{{static_cast<std::uint8_t>(c1),
                                  static_cast<std::uint8_t>(c2)}};
                    Field f = dphi.u_minus1_piece(ch, J);
                    MatField& dst = out->curvature.component(ch, J);
                    exec::parallel_for(M->npoints(),
                                       [&](std::size_t p) { dst[p] += c * m2pii * f[p]; });
                }
        }
        // determinant of the gluing data, to the coeff-th power
        auto fold = [&](const MatField& src, MatField& dst) {
            if (src.empty()) return;
            if (dst.empty()) dst.assign(M->npoints(), Complex{1.0, 0.0});
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Complex d = mat_at(src, p, n).det();
                Complex dk{1.0, 0.0};
                for (int k = 0; k < std::abs(gen.coeff); ++k)
                    dk *= (gen.coeff > 0) ? d : std::conj(d);
                dst[p] *= dk;
            });
        };
        for (int f = 0; f < M->num_factors(); ++f) {
            fold(gen.bundle->cap_transition[f], out->cap_transition[f]);
            fold(gen.bundle->seam_transition[f], out->seam_transition[f]);
        }
        out->potential_chart_smooth =
            out->potential_chart_smooth && gen.bundle->potential_chart_smooth;
    }
    out->potential.prune();
    out->curvature.prune();
    return out;
}

std::vector<Field> det_circle(const DKClassOdd& g) {
    const auto& M = g.manifold();
    std::vector<Field> out(M->num_charts());
    for (int ch = 0; ch < M->num_charts(); ++ch)
        out[ch].assign(M->npoints(), Complex{1.0, 0.0});
    for (auto& gen : g.gens()) {
        const int n = gen.bundle->rank;
        for (int ch = 0; ch < M->num_charts(); ++ch) {
            Field phi0 = gen.phi.u_minus1_piece(ch, MultiIndex{});
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Complex v = std::exp(2.0 * kPi * kI * phi0[p]);
                if (n > 0) v *= mat_at(gen.aut.U[ch], p, n).det();
                Complex vk{1.0, 0.0};
                for (int k = 0; k < std::abs(gen.coeff); ++k)
                    vk *= (gen.coeff > 0) ? v : std::conj(v);
                out[ch][p] *= vk;
            });
        }
    }
    return out;
}

int det_circle_winding(const DKClassOdd& g, int circle_factor) {
    const auto& M = g.manifold();
    auto fields = det_circle(g);
    const int c = M->coord_begin(circle_factor);
    const Axis& ax = M->axis(c);
    double total = 0.0;
    std::size_t base = M->basepoint();
    Complex prev = fields[0][base];
    for (int k = 1; k <= ax.size; ++k) {
        std::size_t p = base + (k % ax.size) * M->stride(c);
        Complex cur = fields[0][p];
        total += std::arg(cur / prev);
        prev = cur;
    }
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

double Observables::distance(const Observables& a, const Observables& b) {
    double d = std::abs(double(a.rank - b.rank));
    auto keys = a.periods;
    for (auto& [k, v] : b.periods) keys.try_emplace(k);
    for (auto& [k, v] : keys) {
        LaurentScalar pa = a.periods.count(k) ? a.periods.at(k) : LaurentScalar{};
        LaurentScalar pb = b.periods.count(k) ? b.periods.at(k) : LaurentScalar{};
        d = std::max(d, LaurentScalar::distance(pa, pb));
    }
    for (auto& [f, h] : a.det_holonomy)
        if (b.det_holonomy.count(f)) d = std::max(d, std::abs(h - b.det_holonomy.at(f)));
    return d;
}

Observables observables(const DKClassEven& x, bool with_det) {
    Observables o;
    for (auto& g : x.gens()) o.rank += g.coeff * super_rank(*g.bundle);
    o.periods = cycle_periods(omega_map(x));
    if (with_det && x.degree() == 0) {
        auto L = det_line(x);
        const auto& M = x.manifold();
        for (int f = 0; f < M->num_factors(); ++f)
            if (std::holds_alternative<CircleSpec>(M->factors()[f]))
                o.det_holonomy[f] = holonomy(*L, f, M->basepoint())(0, 0);
    }
    return o;
}

double ObservablesOdd::distance(const ObservablesOdd& a, const ObservablesOdd& b) {
    double d = 0.0;
    auto keys = a.periods;
    for (auto& [k, v] : b.periods) keys.try_emplace(k);
    for (auto& [k, v] : keys) {
        LaurentScalar pa = a.periods.count(k) ? a.periods.at(k) : LaurentScalar{};
        LaurentScalar pb = b.periods.count(k) ? b.periods.at(k) : LaurentScalar{};
        d = std::max(d, LaurentScalar::distance(pa, pb));
    }
    for (auto& [f, w] : a.det_winding)
        if (b.det_winding.count(f))
            d = std::max(d, std::abs(double(w - b.det_winding.at(f))));
    d = std::max(d, std::abs(a.det_at_base - b.det_at_base));
    return d;
}

ObservablesOdd observables(const DKClassOdd& x, int t_nodes) {
    ObservablesOdd o;
    o.periods = cycle_periods(omega_map(x, t_nodes));
    const auto& M = x.manifold();
    auto fields = det_circle(x);
    o.det_at_base = fields[0][M->basepoint()];
    for (int f = 0; f < M->num_factors(); ++f)
        if (std::holds_alternative<CircleSpec>(M->factors()[f]))
            o.det_winding[f] = det_circle_winding(x, f);
    return o;
}

DKClassEven rewrite_connection(const DKClassEven& e, std::size_t gen,
                               const BundlePtr& new_conn, int t_nodes) {
    DKClassEven r(e.manifold(), e.degree());
    for (std::size_t i = 0; i < e.gens().size(); ++i) {
        const auto& g = e.gens()[i];
        if (i != gen) {
            r.add_generator(g.coeff, g.bundle, g.phi);
            continue;
        }
        GradedForm phi = g.phi;
        phi.add_scaled(rehome(cs_two(g.bundle, new_conn, e.degree(), t_nodes),
                              e.manifold()),
                       {-1.0, 0.0});
        r.add_generator(g.coeff, new_conn, std::move(phi));
    }
    return r;
}

DKClassEven rewrite_split(const DKClassEven& e, std::size_t gen,
                          const BundlePtr& n1, const BundlePtr& n3, int t_nodes) {
    DKClassEven r(e.manifold(), e.degree());
    for (std::size_t i = 0; i < e.gens().size(); ++i) {
        const auto& g = e.gens()[i];
        if (i != gen) {
            r.add_generator(g.coeff, g.bundle, g.phi);
            continue;
        }
        GradedForm phi1 = g.phi;
        phi1.add_scaled(rehome(cs_three(n1, g.bundle, n3, e.degree(), t_nodes),
                               e.manifold()),
                        {1.0, 0.0});
        r.add_generator(g.coeff, n1, std::move(phi1));
        r.add_generator(g.coeff, n3);
    }
    return r;
}

DKClassOdd rewrite_split_odd(const DKClassOdd& g, std::size_t gen,
                             const BundlePtr& n1, const UnitaryAutomorphism& u1,
                             const BundlePtr& n3, const UnitaryAutomorphism& u3,
                             int t_nodes) {
    DKClassOdd r(g.manifold(), g.degree());
    for (std::size_t i = 0; i < g.gens().size(); ++i) {
        const auto& x = g.gens()[i];
        if (i != gen) {
            r.add_generator(x.coeff, x.bundle, x.aut, x.phi);
            continue;
        }
        // six-argument transgression: odd Chern form of the straight-line
        // family from the block sum to the generator connection, with the
        // (t-independent) automorphism along for the ride
        auto sum = Bundle::direct_sum(n1, n3);
        if (sum->rank != x.bundle->rank)
            throw std::invalid_argument("rewrite_split_odd: rank mismatch");
        auto cyl = cylinder_manifold(x.bundle->manifold, t_nodes);
        auto fam = segment_bundle(sum, x.bundle, cyl);
        std::vector<int> fmap(cyl->num_factors(), -1);
        for (int f = 0; f < x.bundle->manifold->num_factors(); ++f) fmap[f + 1] = f;
        const int n = x.bundle->rank;
        UnitaryAutomorphism Ucyl{fam, std::vector<MatField>(cyl->num_charts())};
        for (int ch = 0; ch < cyl->num_charts(); ++ch) {
            Ucyl.U[ch].resize(cyl->npoints() * n * n);
            exec::parallel_for(cyl->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int c = 0; c < x.bundle->manifold->num_coords(); ++c)
                    sp += std::size_t(cyl->coord_of_point(p, c + 1)) *
                          x.bundle->manifold->stride(c);
                // chart of the base with matching cap bits
                int bch = ch; // cylinder chart bits coincide with the base's
                set_mat(Ucyl.U[ch], p, n, mat_at(x.aut.U[bch], sp, n));
            });
        }
        GradedForm cs6 =
            rehome(integrate_interval_leg(
                       rehome(odd_chern_form(fam, Ucyl, t_nodes), cyl), 0),
                   g.manifold());
        GradedForm phi1 = x.phi;
        phi1.add_scaled(cs6, {1.0, 0.0});
        r.add_generator(x.coeff, n1, u1, std::move(phi1));
        GradedForm zero(g.manifold(), g.degree() - 1);
        r.add_generator(x.coeff, n3, u3, std::move(zero));
    }
    return r;
}

DKClassOdd rewrite_compose(const DKClassOdd& g, std::size_t gen,
                           const UnitaryAutomorphism& u1,
                           const UnitaryAutomorphism& u2, int t_nodes) {
    DKClassOdd r(g.manifold(), g.degree());
    for (std::size_t i = 0; i < g.gens().size(); ++i) {
        const auto& x = g.gens()[i];
        if (i != gen) {
            r.add_generator(x.coeff, x.bundle, x.aut, x.phi);
            continue;
        }
        GradedForm phi = x.phi;
        phi.add_scaled(rehome(cs_aut(x.bundle, u1, u2, t_nodes), g.manifold()),
                       {1.0, 0.0});
        r.add_generator(x.coeff, x.bundle, u1, std::move(phi));
        GradedForm zero(g.manifold(), g.degree() - 1);
        r.add_generator(x.coeff, x.bundle, u2, std::move(zero));
    }
    return r;
}

} // namespace dki
