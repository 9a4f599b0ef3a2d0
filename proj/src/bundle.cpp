#include "dki/bundle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dki/parallel.hpp"

namespace dki {

namespace {

constexpr double kPi = std::numbers::pi;
const Complex kI{0.0, 1.0};

double circle_len(const StructuredManifold& M, int factor) {
    return std::get<CircleSpec>(M.factors()[factor]).circumference;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat m(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            for (int k = 0; k < b.rows(); ++k)
                for (int l = 0; l < b.cols(); ++l)
                    m(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return m;
}

// f (x) id  or  id (x) f, summed over the components of f.
MatForm kron_forms(const MatForm& f, int f_rank, int other_rank, bool f_left) {
    const auto& M = f.manifold();
    MatForm out(M, f_rank * other_rank, f.form_degree());
    Mat id = Mat::identity(other_rank);
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [J, F] : f.chart(ch)) {
            MatField& dst = out.component(ch, J);
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Mat m = mat_at(F, p, f_rank);
                set_mat(dst, p, f_rank * other_rank, f_left ? kron(m, id) : kron(id, m));
            });
        }
    return out;
}

std::vector<MatField> identity_fields(const StructuredManifold& M, int rank) {
    std::vector<MatField> u(M.num_charts());
    Mat id = Mat::identity(rank);
    for (int ch = 0; ch < M.num_charts(); ++ch) {
        u[ch].assign(M.npoints() * rank * rank, Complex{});
        for (std::size_t p = 0; p < M.npoints(); ++p) set_mat(u[ch], p, rank, id);
    }
    return u;
}

bool all_circles(const StructuredManifold& M) {
    for (auto& f : M.factors())
        if (!std::holds_alternative<CircleSpec>(f)) return false;
    return M.num_factors() > 0;
}

} // namespace

BundlePtr Bundle::trivial(ManifoldPtr m, int rank) {
    auto b = std::make_shared<Bundle>();
    b->manifold = m;
    b->rank = rank;
    b->potential = MatForm(m, rank, 1);
    b->curvature = MatForm(m, rank, 2);
    b->cap_transition.resize(m->num_factors());
    b->seam_transition.resize(m->num_factors());
    if (all_circles(*m))
        b->flat_thetas = std::vector<std::vector<double>>(
            rank, std::vector<double>(m->num_factors(), 0.0));
    return b;
}

BundlePtr Bundle::flat_line(ManifoldPtr torus, std::vector<double> thetas) {
    if (!all_circles(*torus))
        throw std::invalid_argument("flat_line: base must be a product of circles");
    if (static_cast<int>(thetas.size()) != torus->num_factors())
        throw std::invalid_argument("flat_line: one holonomy angle per circle factor");
    auto b = std::make_shared<Bundle>();
    b->manifold = torus;
    b->rank = 1;
    b->potential = MatForm(torus, 1, 1);
    b->curvature = MatForm(torus, 1, 2);
    b->cap_transition.resize(torus->num_factors());
    b->seam_transition.resize(torus->num_factors());
    for (int f = 0; f < torus->num_factors(); ++f) {
        double th = mod1(thetas[f]);
        if (th == 0.0) continue;
        const int c = torus->coord_begin(f);
        const double L = circle_len(*torus, f);
        MultiIndex J{{static_cast<std::uint8_t>(c)}};
        // holonomy e^{2 pi i theta} under transport, spectrum (2pi/L)(n+theta)
        b->potential.component(0, J)
            .assign(torus->npoints(), Complex{0.0, -2.0 * kPi * th / L});
    }
    std::vector<double> reduced(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i) reduced[i] = mod1(thetas[i]);
    b->flat_thetas = std::vector<std::vector<double>>{reduced};
    return b;
}

BundlePtr Bundle::monopole(ManifoldPtr sphere, int n) {
    if (sphere->num_factors() != 1 ||
        !std::holds_alternative<SphereSpec>(sphere->factors()[0]))
        throw std::invalid_argument("monopole: base must be a single 2-sphere");
    auto b = std::make_shared<Bundle>();
    b->manifold = sphere;
    b->rank = 1;
    b->potential = MatForm(sphere, 1, 1);
    b->curvature = MatForm(sphere, 1, 2);
    b->cap_transition.resize(1);
    b->seam_transition.resize(1);
    if (n == 0) return b;
    const int tc = 0, pc = 1;
    MultiIndex Jphi{{static_cast<std::uint8_t>(pc)}};
    MultiIndex Jtp{{static_cast<std::uint8_t>(tc), static_cast<std::uint8_t>(pc)}};
    const Complex half{0.0, -0.5 * n};
    for (int ch = 0; ch < 2; ++ch) {
        Field theta(sphere->npoints());
        MatField& A = b->potential.component(ch, Jphi);
        MatField& F = b->curvature.component(ch, Jtp);
        exec::parallel_for(sphere->npoints(), [&](std::size_t p) {
            const double th = sphere->axis(tc).nodes[sphere->coord_of_point(p, tc)];
            A[p] = half * (1.0 - std::cos(th));
            F[p] = half * std::sin(th);
        });
    }
    // south = T * north with dlog T = A_N - A_S = -i n dphi
    b->cap_transition[0].resize(sphere->npoints());
    exec::parallel_for(sphere->npoints(), [&](std::size_t p) {
        const double phi = sphere->axis(pc).nodes[sphere->coord_of_point(p, pc)];
        b->cap_transition[0][p] = std::exp(-kI * double(n) * phi);
    });
    return b;
}

BundlePtr Bundle::poincare(ManifoldPtr torus, int flux) {
    if (torus->num_factors() != 2 || !all_circles(*torus))
        throw std::invalid_argument("poincare: base must be a 2-torus");
    auto b = std::make_shared<Bundle>();
    b->manifold = torus;
    b->rank = 1;
    b->potential = MatForm(torus, 1, 1);
    b->curvature = MatForm(torus, 1, 2);
    b->cap_transition.resize(2);
    b->seam_transition.resize(2);
    b->potential_chart_smooth = false;
    b->flux_block = FluxBlock{0, 1, flux};
    if (flux == 0) {
        b->potential_chart_smooth = true;
        b->flat_thetas = std::vector<std::vector<double>>{{0.0, 0.0}};
        return b;
    }
    const double L1 = circle_len(*torus, 0), L2 = circle_len(*torus, 1);
    MultiIndex J2{{static_cast<std::uint8_t>(1)}};
    MultiIndex J12{{0, 1}};
    MatField& A = b->potential.component(0, J2);
    exec::parallel_for(torus->npoints(), [&](std::size_t p) {
        const double x1 = torus->axis(0).nodes[torus->coord_of_point(p, 0)];
        A[p] = Complex{0.0, -2.0 * kPi * flux * x1 / (L1 * L2)};
    });
    b->curvature.component(0, J12)
        .assign(torus->npoints(), Complex{0.0, -2.0 * kPi * flux / (L1 * L2)});
    // crossing the x1 seam: s(0^+) = T s(L1^-), dlog T = -2 pi i flux x2/L2
    b->seam_transition[0].resize(torus->npoints());
    exec::parallel_for(torus->npoints(), [&](std::size_t p) {
        const double x2 = torus->axis(1).nodes[torus->coord_of_point(p, 1)];
        b->seam_transition[0][p] = std::exp(-2.0 * kPi * kI * double(flux) * x2 / L2);
    });
    return b;
}

BundlePtr Bundle::from_potential(ManifoldPtr m, int rank, MatForm potential,
                                 std::optional<std::pair<int, int>> grading) {
    auto b = std::make_shared<Bundle>();
    b->manifold = m;
    b->rank = rank;
    b->grading = grading;
    b->potential = std::move(potential);
    MatForm dA = exterior_d(b->potential);
    MatForm AA = wedge_mul(b->potential, b->potential);
    dA.add_scaled(AA, {1.0, 0.0});
    b->curvature = std::move(dA);
    b->cap_transition.resize(m->num_factors());
    b->seam_transition.resize(m->num_factors());
    return b;
}

BundlePtr Bundle::with_potential(const BundlePtr& base, MatForm potential) {
    if (!base->potential_chart_smooth)
        throw std::invalid_argument(
            "with_potential: use a tensorial delta on seam-twisted bundles");
    auto b = std::make_shared<Bundle>(*base);
    b->potential = std::move(potential);
    MatForm dA = exterior_d(b->potential);
    MatForm AA = wedge_mul(b->potential, b->potential);
    dA.add_scaled(AA, {1.0, 0.0});
    b->curvature = std::move(dA);
    b->flat_thetas.reset();
    return b;
}

BundlePtr Bundle::tensor(const BundlePtr& a, const BundlePtr& b) {
    if (!a->manifold->same_grid_as(*b->manifold))
        throw std::invalid_argument("tensor: base mismatch");
    auto r = std::make_shared<Bundle>();
    const auto& M = a->manifold;
    r->manifold = M;
    r->rank = a->rank * b->rank;
    r->potential = kron_forms(a->potential, a->rank, b->rank, true);
    r->potential.add_scaled(kron_forms(b->potential, b->rank, a->rank, false), {1.0, 0.0});
    r->curvature = kron_forms(a->curvature, a->rank, b->rank, true);
    r->curvature.add_scaled(kron_forms(b->curvature, b->rank, a->rank, false), {1.0, 0.0});
    r->cap_transition.resize(M->num_factors());
    r->seam_transition.resize(M->num_factors());
    auto combine = [&](const std::vector<MatField>& ta, const std::vector<MatField>& tb,
                       std::vector<MatField>& out) {
        for (int f = 0; f < M->num_factors(); ++f) {
            if (ta[f].empty() && tb[f].empty()) continue;
            out[f].resize(M->npoints() * r->rank * r->rank);
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Mat ma = ta[f].empty() ? Mat::identity(a->rank) : mat_at(ta[f], p, a->rank);
                Mat mb = tb[f].empty() ? Mat::identity(b->rank) : mat_at(tb[f], p, b->rank);
                set_mat(out[f], p, r->rank, kron(ma, mb));
            });
        }
    };
    combine(a->cap_transition, b->cap_transition, r->cap_transition);
    combine(a->seam_transition, b->seam_transition, r->seam_transition);
    r->potential_chart_smooth = a->potential_chart_smooth && b->potential_chart_smooth;
    if (a->flat_thetas && b->flat_thetas) {
        std::vector<std::vector<double>> lines;
        for (auto& la : *a->flat_thetas)
            for (auto& lb : *b->flat_thetas) {
                std::vector<double> l(la.size());
                for (std::size_t i = 0; i < la.size(); ++i) l[i] = mod1(la[i] + lb[i]);
                lines.push_back(std::move(l));
            }
        r->flat_thetas = std::move(lines);
    }
    if (a->flux_block && b->flat_thetas) r->flux_block = a->flux_block;
    if (b->flux_block && a->flat_thetas) r->flux_block = b->flux_block;
    if (a->pullback_of && b->pullback_of) {
        std::vector<int> fa, fb;
        bool disjoint = true;
        for (int tf = 0; tf < M->num_factors(); ++tf) {
            bool ina = a->pullback_of->second[tf] >= 0;
            bool inb = b->pullback_of->second[tf] >= 0;
            if (ina && inb) disjoint = false;
            if (ina) fa.push_back(tf);
            if (inb) fb.push_back(tf);
        }
        if (disjoint)
            r->product_split =
                ProductSplit{a->pullback_of->first, b->pullback_of->first, fa, fb};
    }
    return r;
}

BundlePtr Bundle::direct_sum(const BundlePtr& a, const BundlePtr& b) {
    if (!a->manifold->same_grid_as(*b->manifold))
        throw std::invalid_argument("direct_sum: base mismatch");
    auto r = std::make_shared<Bundle>();
    const auto& M = a->manifold;
    r->manifold = M;
    r->rank = a->rank + b->rank;
    auto embed = [&](const MatForm& fa, const MatForm& fb, int deg) {
        MatForm out(M, r->rank, deg);
        for (int ch = 0; ch < M->num_charts(); ++ch) {
            for (auto& [J, F] : fa.chart(ch)) {
                MatField& dst = out.component(ch, J);
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    Mat m = mat_at(F, p, a->rank);
                    for (int i = 0; i < a->rank; ++i)
                        for (int j = 0; j < a->rank; ++j)
                            dst[(p * r->rank + i) * r->rank + j] = m(i, j);
                });
            }
            for (auto& [J, F] : fb.chart(ch)) {
                MatField& dst = out.component(ch, J);
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    Mat m = mat_at(F, p, b->rank);
                    for (int i = 0; i < b->rank; ++i)
                        for (int j = 0; j < b->rank; ++j)
                            dst[(p * r->rank + a->rank + i) * r->rank + (a->rank + j)] =
                                m(i, j);
                });
            }
        }
        out.prune();
        return out;
    };
    r->potential = embed(a->potential, b->potential, 1);
    r->curvature = embed(a->curvature, b->curvature, 2);
    r->cap_transition.resize(M->num_factors());
    r->seam_transition.resize(M->num_factors());
    auto combine = [&](const std::vector<MatField>& ta, const std::vector<MatField>& tb,
                       std::vector<MatField>& out) {
        for (int f = 0; f < M->num_factors(); ++f) {
            if (ta[f].empty() && tb[f].empty()) continue;
            out[f].resize(M->npoints() * r->rank * r->rank);
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Mat ma = ta[f].empty() ? Mat::identity(a->rank) : mat_at(ta[f], p, a->rank);
                Mat mb = tb[f].empty() ? Mat::identity(b->rank) : mat_at(tb[f], p, b->rank);
                Mat m(r->rank, r->rank);
                for (int i = 0; i < a->rank; ++i)
                    for (int j = 0; j < a->rank; ++j) m(i, j) = ma(i, j);
                for (int i = 0; i < b->rank; ++i)
                    for (int j = 0; j < b->rank; ++j)
                        m(a->rank + i, a->rank + j) = mb(i, j);
                set_mat(out[f], p, r->rank, m);
            });
        }
    };
    combine(a->cap_transition, b->cap_transition, r->cap_transition);
    combine(a->seam_transition, b->seam_transition, r->seam_transition);
    r->potential_chart_smooth = a->potential_chart_smooth && b->potential_chart_smooth;
    if (a->flat_thetas && b->flat_thetas) {
        auto lines = *a->flat_thetas;
        lines.insert(lines.end(), b->flat_thetas->begin(), b->flat_thetas->end());
        r->flat_thetas = std::move(lines);
    }
    return r;
}

BundlePtr Bundle::direct_sum_graded(const BundlePtr& plus, const BundlePtr& minus) {
    auto r = std::const_pointer_cast<Bundle>(direct_sum(plus, minus));
    r->grading = std::make_pair(plus->rank, minus->rank);
    return r;
}

BundlePtr Bundle::dual(const BundlePtr& a) {
    auto r = std::make_shared<Bundle>();
    const auto& M = a->manifold;
    r->manifold = M;
    r->rank = a->rank;
    auto negT = [&](const MatForm& f, int deg) {
        MatForm out(M, a->rank, deg);
        for (int ch = 0; ch < M->num_charts(); ++ch)
            for (auto& [J, F] : f.chart(ch)) {
                MatField& dst = out.component(ch, J);
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    Mat m = mat_at(F, p, a->rank);
                    Mat t(a->rank, a->rank);
                    for (int i = 0; i < a->rank; ++i)
                        for (int j = 0; j < a->rank; ++j) t(i, j) = -m(j, i);
                    set_mat(dst, p, a->rank, t);
                });
            }
        return out;
    };
    r->potential = negT(a->potential, 1);
    r->curvature = negT(a->curvature, 2);
    auto conjT = [&](const std::vector<MatField>& t, std::vector<MatField>& out) {
        out.resize(M->num_factors());
        for (int f = 0; f < M->num_factors(); ++f) {
            if (t[f].empty()) continue;
            out[f].resize(t[f].size());
            for (std::size_t i = 0; i < t[f].size(); ++i) out[f][i] = std::conj(t[f][i]);
        }
    };
    conjT(a->cap_transition, r->cap_transition);
    conjT(a->seam_transition, r->seam_transition);
    r->potential_chart_smooth = a->potential_chart_smooth;
    if (a->flat_thetas) {
        auto lines = *a->flat_thetas;
        for (auto& l : lines)
            for (auto& th : l) th = mod1(-th);
        r->flat_thetas = std::move(lines);
    }
    if (a->flux_block) {
        r->flux_block = a->flux_block;
        r->flux_block->flux = -r->flux_block->flux;
    }
    return r;
}

BundlePtr Bundle::pullback(const BundlePtr& a, ManifoldPtr target,
                           const std::vector<int>& source_of_target_factor) {
    auto r = std::make_shared<Bundle>();
    r->manifold = target;
    r->rank = a->rank;
    r->grading = a->grading;
    r->potential = matform_pullback(a->potential, target, source_of_target_factor);
    r->curvature = matform_pullback(a->curvature, target, source_of_target_factor);
    r->potential_chart_smooth = a->potential_chart_smooth;
    r->cap_transition.resize(target->num_factors());
    r->seam_transition.resize(target->num_factors());
    const auto& S = a->manifold;
    for (int tf = 0; tf < target->num_factors(); ++tf) {
        int sf = source_of_target_factor[tf];
        if (sf < 0) continue;
        auto lift = [&](const MatField& src, MatField& dst) {
            if (src.empty()) return;
            const int rr = a->rank * a->rank;
            dst.resize(target->npoints() * rr);
            std::vector<int> src_coord(target->num_coords(), -1);
            for (int uf = 0; uf < target->num_factors(); ++uf) {
                int usf = source_of_target_factor[uf];
                if (usf < 0) continue;
                for (int k = 0; k < target->coord_count(uf); ++k)
                    src_coord[target->coord_begin(uf) + k] = S->coord_begin(usf) + k;
            }
            exec::parallel_for(target->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int tc = 0; tc < target->num_coords(); ++tc)
                    if (src_coord[tc] >= 0)
                        sp += std::size_t(target->coord_of_point(p, tc)) *
                              S->stride(src_coord[tc]);
                for (int e = 0; e < rr; ++e) dst[p * rr + e] = src[sp * rr + e];
            });
        };
        lift(a->cap_transition[sf], r->cap_transition[tf]);
        lift(a->seam_transition[sf], r->seam_transition[tf]);
    }
    if (a->flat_thetas) {
        std::vector<std::vector<double>> lines;
        for (auto& l : *a->flat_thetas) {
            std::vector<double> nl(target->num_factors(), 0.0);
            for (int tf = 0; tf < target->num_factors(); ++tf)
                if (source_of_target_factor[tf] >= 0)
                    nl[tf] = l[source_of_target_factor[tf]];
            lines.push_back(std::move(nl));
        }
        // only meaningful when the target is again all circles
        bool circles = true;
        for (auto& f : target->factors())
            if (!std::holds_alternative<CircleSpec>(f)) circles = false;
        if (circles) r->flat_thetas = std::move(lines);
    }
    if (a->flux_block) {
        for (int tf = 0; tf < target->num_factors(); ++tf) {
            if (source_of_target_factor[tf] == a->flux_block->factor_a)
                r->flux_block = FluxBlock{tf, -1, a->flux_block->flux};
        }
        if (r->flux_block)
            for (int tf = 0; tf < target->num_factors(); ++tf)
                if (source_of_target_factor[tf] == a->flux_block->factor_b)
                    r->flux_block->factor_b = tf;
    }
    r->pullback_of = std::make_pair(a, source_of_target_factor);
    return r;
}

UnitaryAutomorphism UnitaryAutomorphism::identity(const BundlePtr& b) {
    return {b, identity_fields(*b->manifold, b->rank)};
}

UnitaryAutomorphism UnitaryAutomorphism::phase(
    const BundlePtr& b, const std::function<double(int, std::size_t)>& alpha,
    const Mat* constant_part) {
    const auto& M = b->manifold;
    UnitaryAutomorphism u{b, std::vector<MatField>(M->num_charts())};
    Mat c = constant_part ? *constant_part : Mat::identity(b->rank);
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        u.U[ch].assign(M->npoints() * b->rank * b->rank, Complex{});
        exec::parallel_for(M->npoints(), [&](std::size_t p) {
            set_mat(u.U[ch], p, b->rank, c * std::exp(kI * alpha(ch, p)));
        });
    }
    return u;
}

UnitaryAutomorphism UnitaryAutomorphism::winding(const BundlePtr& b, int factor, int k) {
    const auto& M = b->manifold;
    const int c = M->coord_begin(factor);
    const double L = circle_len(*M, factor);
    return phase(b, [=, &Mref = *M](int, std::size_t p) {
        return 2.0 * kPi * k * Mref.axis(c).nodes[Mref.coord_of_point(p, c)] / L;
    });
}

UnitaryAutomorphism UnitaryAutomorphism::compose(const UnitaryAutomorphism& o) const {
    const auto& M = bundle->manifold;
    UnitaryAutomorphism r{bundle, std::vector<MatField>(M->num_charts())};
    const int n = bundle->rank;
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        r.U[ch].resize(M->npoints() * n * n);
        exec::parallel_for(M->npoints(), [&](std::size_t p) {
            set_mat(r.U[ch], p, n, mat_at(U[ch], p, n) * mat_at(o.U[ch], p, n));
        });
    }
    return r;
}

UnitaryAutomorphism UnitaryAutomorphism::inverse() const {
    const auto& M = bundle->manifold;
    UnitaryAutomorphism r{bundle, std::vector<MatField>(M->num_charts())};
    const int n = bundle->rank;
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        r.U[ch].resize(M->npoints() * n * n);
        exec::parallel_for(M->npoints(), [&](std::size_t p) {
            set_mat(r.U[ch], p, n, mat_at(U[ch], p, n).adjoint());
        });
    }
    return r;
}

BundlePtr gauge_transform(const BundlePtr& b, const UnitaryAutomorphism& U) {
    const auto& M = b->manifold;
    const int n = b->rank;
    auto r = std::make_shared<Bundle>(*b);
    // A' = U A U^-1 - (dU) U^-1 ; F' = U F U^-1
    MatForm u0(M, n, 0);
    for (int ch = 0; ch < M->num_charts(); ++ch) u0.component(ch, MultiIndex{}) = U.U[ch];
    MatForm du = exterior_d(u0);
    MatForm uinv(M, n, 0);
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        MatField& dst = uinv.component(ch, MultiIndex{});
        exec::parallel_for(M->npoints(), [&](std::size_t p) {
            set_mat(dst, p, n, mat_at(U.U[ch], p, n).adjoint());
        });
    }
    MatForm a2 = conjugated(b->potential, U.U);
    MatForm du_uinv = wedge_mul(du, uinv);
    a2.add_scaled(du_uinv, {-1.0, 0.0});
    r->potential = std::move(a2);
    r->curvature = conjugated(b->curvature, U.U);
    r->flat_thetas.reset();
    return r;
}

Mat holonomy(const Bundle& b, int circle_factor, std::size_t base_point, int steps) {
    const auto& M = *b.manifold;
    const int c = M.coord_begin(circle_factor);
    const double L = circle_len(M, circle_factor);
    const Axis& ax = M.axis(c);
    const int n = ax.size;
    const int rank = b.rank;
    // gather A_c along the line through base_point (chart 0 unless overridden)
    const int chart = 0;
    MultiIndex J{{static_cast<std::uint8_t>(c)}};
    const MatField* A = b.potential.find(chart, J);
    const std::size_t line0 = base_point - M.coord_of_point(base_point, c) * M.stride(c);
    std::vector<Mat> samples(n, Mat(rank, rank));
    if (A)
        for (int k = 0; k < n; ++k) samples[k] = mat_at(*A, line0 + k * M.stride(c), rank);
    // trigonometric interpolation of the potential along the circle
    auto interp = [&](double x) {
        Mat m(rank, rank);
        if (!A) return m;
        for (int j = 0; j < n; ++j) {
            double d = x - ax.nodes[j];
            double t = kPi * d / L;
            double w;
            if (std::abs(std::sin(t)) < 1e-14) {
                w = (std::abs(std::remainder(d, L)) < 1e-12) ? 1.0 : 0.0;
            } else if (n % 2 == 0) {
                w = std::sin(n * t) / (n * std::tan(t));
            } else {
                w = std::sin(n * t) / (n * std::sin(t));
            }
            if (w != 0.0) m = m + samples[j] * Complex{w, 0.0};
        }
        return m;
    };
    Mat T = Mat::identity(rank);
    const double h = L / steps;
    const double g1 = 0.5 - std::sqrt(3.0) / 6.0, g2 = 0.5 + std::sqrt(3.0) / 6.0;
    for (int s = 0; s < steps; ++s) {
        const double x0 = s * h;
        Mat B1 = interp(x0 + g1 * h) * Complex{-1.0, 0.0};
        Mat B2 = interp(x0 + g2 * h) * Complex{-1.0, 0.0};
        Mat omega = (B1 + B2) * Complex{0.5 * h, 0.0} +
                    commutator(B2, B1) * Complex{h * h * std::sqrt(3.0) / 12.0, 0.0};
        T = omega.exp() * T;
    }
    Mat closure = b.seam_transition[circle_factor].empty()
                      ? Mat::identity(rank)
                      : mat_at(b.seam_transition[circle_factor], base_point, rank);
    return closure * T;
}

double bianchi_residual(const Bundle& b) {
    if (!b.potential_chart_smooth) return 0.0;
    MatForm dF = exterior_d(b.curvature);
    MatForm FA = wedge_mul(b.curvature, b.potential);
    MatForm AF = wedge_mul(b.potential, b.curvature);
    dF.add_scaled(FA, {-1.0, 0.0});
    dF.add_scaled(AF, {1.0, 0.0});
    return dF.max_abs();
}

double cap_conjugation_residual(const Bundle& b) {
    const auto& M = *b.manifold;
    const int n = b.rank;
    double res = 0.0;
    for (int f = 0; f < M.num_factors(); ++f) {
        if (M.sphere_bit(f) < 0) continue;
        const int tc = M.coord_begin(f), pc = tc + 1;
        for (int ch = 0; ch < M.num_charts(); ++ch) {
            if (M.chart_south(ch, f)) continue;
            const int och = ch | (1 << M.sphere_bit(f));
            for (auto& [J, F] : b.curvature.chart(ch)) {
                int flips = 0;
                if (J.contains(static_cast<std::uint8_t>(tc))) ++flips;
                if (J.contains(static_cast<std::uint8_t>(pc))) ++flips;
                const Complex sgn{flips % 2 == 0 ? 1.0 : -1.0, 0.0};
                const MatField* G = b.curvature.find(och, J);
                for (std::size_t p = 0; p < M.npoints(); ++p) {
                    auto q = M.sphere_partner(f, p);
                    if (!q) continue;
                    Mat north = mat_at(F, p, n);
                    Mat south = G ? mat_at(*G, *q, n) : Mat(n, n);
                    Mat T = b.cap_transition[f].empty()
                                ? Mat::identity(n)
                                : mat_at(b.cap_transition[f], p, n);
                    Mat expect = T * north * T.adjoint() * sgn;
                    res = std::max(res, (south - expect).max_abs());
                }
            }
        }
    }
    return res;
}

double skew_hermitian_residual(const Bundle& b) {
    const auto& M = *b.manifold;
    const int n = b.rank;
    double res = 0.0;
    for (int ch = 0; ch < M.num_charts(); ++ch)
        for (auto& [J, F] : b.potential.chart(ch))
            for (std::size_t p = 0; p < M.npoints(); ++p) {
                Mat m = mat_at(F, p, n);
                res = std::max(res, (m + m.adjoint()).max_abs());
            }
    return res;
}

} // namespace dki
