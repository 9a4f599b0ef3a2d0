#include "dki/charforms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dki/parallel.hpp"

namespace dki {

namespace {

constexpr double kPi = std::numbers::pi;

// coefficient (-1/(2 pi i))^k / k!
Complex chern_coeff(int k) {
    const Complex m{0.0, 1.0 / (2.0 * kPi)}; // -1/(2 pi i) = i/(2 pi)
    Complex c{1.0, 0.0};
    for (int i = 1; i <= k; ++i) c *= m / double(i);
    return c;
}

std::vector<int> shift_map(const ManifoldPtr& base, int extra) {
    std::vector<int> m(base->num_factors() + extra, -1);
    for (int f = 0; f < base->num_factors(); ++f) m[f + extra] = f;
    return m;
}

} // namespace

GradedForm chern_form(const BundlePtr& b, int r) {
    if (r % 2 != 0) throw std::invalid_argument("chern_form: degree must be even");
    const auto& M = b->manifold;
    GradedForm out(M, r);
    const std::pair<int, int>* grading = b->grading ? &*b->grading : nullptr;
    // k = 0: (super)rank
    const double rank0 = grading ? double(grading->first - grading->second)
                                 : double(b->rank);
    if (rank0 != 0.0) {
        GradedForm c = GradedForm::constant(M, Complex{rank0, 0.0}, r);
        out.add_scaled(c, {1.0, 0.0});
    }
    const int kmax = M->dim() / 2;
    MatForm Fk = b->curvature;
    for (int k = 1; k <= kmax && !Fk.empty(); ++k) {
        add_trace(out, Fk, chern_coeff(k), grading);
        if (k < kmax) Fk = wedge_mul(Fk, b->curvature);
    }
    out.prune();
    return out;
}

GradedForm c1_form(const BundlePtr& b) {
    const auto& M = b->manifold;
    GradedForm out(M, 0);
    add_trace(out, b->curvature, chern_coeff(1), nullptr);
    out.prune();
    return out;
}

GradedForm a_hat_form(const MatForm& tangent_curvature) {
    const auto& M = tangent_curvature.manifold();
    GradedForm out = GradedForm::constant(M, {1.0, 0.0}, 0);
    if (M->dim() >= 4 && !tangent_curvature.empty()) {
        // R_u(-(1/48) u^{-2} tr(Omega^2)) = tr(Omega^2) / (192 pi^2)
        MatForm o2 = wedge_mul(tangent_curvature, tangent_curvature);
        add_trace(out, o2, Complex{1.0 / (192.0 * kPi * kPi), 0.0}, nullptr);
    }
    if (M->dim() >= 8)
        throw std::invalid_argument("a_hat_form: series truncated below form degree 8");
    out.prune();
    return out;
}

GradedForm todd_form(const MatForm* tangent_curvature, const BundlePtr& L) {
    if (L->rank != 1)
        throw std::invalid_argument("todd_form: characteristic bundle must be a line");
    const auto& M = L->manifold;
    GradedForm ahat = tangent_curvature ? a_hat_form(*tangent_curvature)
                                        : GradedForm::constant(M, {1.0, 0.0}, 0);
    GradedForm x = c1_form(L) * Complex{0.5, 0.0};
    GradedForm expx = GradedForm::constant(M, {1.0, 0.0}, 0);
    GradedForm xk = x;
    double fact = 1.0;
    for (int k = 1; 2 * k <= M->dim(); ++k) {
        fact *= k;
        expx.add_scaled(xk, Complex{1.0 / fact, 0.0});
        if (2 * (k + 1) <= M->dim()) xk = wedge(xk, x);
    }
    return wedge(ahat, expx);
}

ManifoldPtr cylinder_manifold(const ManifoldPtr& base, int t_nodes) {
    std::vector<FactorSpec> f{IntervalSpec{t_nodes}};
    for (auto& x : base->factors()) f.push_back(x);
    return StructuredManifold::make(std::move(f));
}

ManifoldPtr square_manifold(const ManifoldPtr& base, int t_nodes) {
    std::vector<FactorSpec> f{IntervalSpec{t_nodes}, IntervalSpec{t_nodes}};
    for (auto& x : base->factors()) f.push_back(x);
    return StructuredManifold::make(std::move(f));
}

namespace {

} // namespace

// Potential A(t) = sum_k lambda_k(t) A_k, curvature
// F(t) = sum_j dt_j ^ (A_{j+1} - A_0) + sum_k lambda_k (F_k - A_k^2) + A(t)^2.
BundlePtr family_bundle(const std::vector<BundlePtr>& verts,
                        const ManifoldPtr& cyl, int n_params) {
    const auto& base = verts[0]->manifold;
    const int rank = verts[0]->rank;
    for (auto& v : verts) {
        if (v->rank != rank || !v->manifold->same_grid_as(*base))
            throw std::invalid_argument("connection family: bundle mismatch");
    }
    auto fmap = shift_map(base, n_params);
    // lambda profiles on the interval axes
    std::vector<std::vector<double>> tnodes(n_params);
    for (int j = 0; j < n_params; ++j) tnodes[j] = cyl->axis(j).nodes;
    auto lambda = [&](int k, std::size_t p) {
        // barycentric weights: lambda_0 = 1 - sum t_j, lambda_j = t_j
        if (k == 0) {
            double s = 1.0;
            for (int j = 0; j < n_params; ++j)
                s -= tnodes[j][cyl->coord_of_point(p, j)];
            return s;
        }
        return tnodes[k - 1][cyl->coord_of_point(p, k - 1)];
    };

    const int nv = static_cast<int>(verts.size());
    std::vector<MatForm> A(nv), dA(nv);
    for (int k = 0; k < nv; ++k) {
        A[k] = matform_pullback(verts[k]->potential, cyl, fmap);
        MatForm AA = wedge_mul(verts[k]->potential, verts[k]->potential);
        MatForm dAk = verts[k]->curvature;
        dAk.add_scaled(AA, {-1.0, 0.0});
        dA[k] = matform_pullback(dAk, cyl, fmap);
    }

    auto r = std::make_shared<Bundle>();
    r->manifold = cyl;
    r->rank = rank;
    r->grading = verts[0]->grading;
    r->potential_chart_smooth = false; // curvature supplied analytically

    // potential: sum lambda_k A_k (no dt-legs)
    const int rr = rank * rank;
    auto scale_by_lambda = [&](MatForm& form, int k) {
        for (int ch = 0; ch < cyl->num_charts(); ++ch)
            for (auto& [J, field] : form.chart_mut(ch))
                exec::parallel_for(cyl->npoints(), [&](std::size_t p) {
                    const double s = lambda(k, p);
                    for (int e = 0; e < rr; ++e) field[p * rr + e] *= s;
                });
    };
    MatForm pot(cyl, rank, 1);
    for (int k = 0; k < nv; ++k) {
        MatForm term = A[k];
        scale_by_lambda(term, k);
        pot.add_scaled(term, {1.0, 0.0});
    }
    pot.prune();

    // curvature
    MatForm curv(cyl, rank, 2);
    for (int j = 0; j < n_params; ++j) {
        // dt_j ^ (A_{j+1} - A_0)
        MatForm diff = A[j + 1];
        diff.add_scaled(A[0], {-1.0, 0.0});
        MatForm dt(cyl, rank, 1);
        {
            MultiIndex J{{static_cast<std::uint8_t>(j)}};
            MatField& f = dt.component(0, J);
            Mat id = Mat::identity(rank);
            exec::parallel_for(cyl->npoints(), [&](std::size_t p) {
                set_mat(f, p, rank, id);
            });
            for (int ch = 1; ch < cyl->num_charts(); ++ch)
                dt.component(ch, J) = dt.component(0, J);
        }
        curv.add_scaled(wedge_mul(dt, diff), {1.0, 0.0});
    }
    for (int k = 0; k < nv; ++k) {
        MatForm term = dA[k];
        scale_by_lambda(term, k);
        curv.add_scaled(term, {1.0, 0.0});
    }
    curv.add_scaled(wedge_mul(pot, pot), {1.0, 0.0});
    curv.prune();

    r->potential = std::move(pot);
    r->curvature = std::move(curv);

    // gluing data inherited from the base bundle
    r->cap_transition.resize(cyl->num_factors());
    r->seam_transition.resize(cyl->num_factors());
    const auto& v0 = verts[0];
    for (int f = 0; f < base->num_factors(); ++f) {
        auto lift = [&](const MatField& src, MatField& dst) {
            if (src.empty()) return;
            const int rr = rank * rank;
            dst.resize(cyl->npoints() * rr);
            exec::parallel_for(cyl->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int c = 0; c < base->num_coords(); ++c)
                    sp += std::size_t(cyl->coord_of_point(p, c + n_params)) *
                          base->stride(c);
                for (int e = 0; e < rr; ++e) dst[p * rr + e] = src[sp * rr + e];
            });
        };
        lift(v0->cap_transition[f], r->cap_transition[f + n_params]);
        lift(v0->seam_transition[f], r->seam_transition[f + n_params]);
    }
    return r;
}

BundlePtr segment_bundle(const BundlePtr& from, const BundlePtr& to,
                         const ManifoldPtr& cyl) {
    return family_bundle({from, to}, cyl, 1);
}

BundlePtr simplex_bundle(const BundlePtr& v0, const BundlePtr& v1,
                         const BundlePtr& v2, const ManifoldPtr& sq) {
    return family_bundle({v0, v1, v2}, sq, 2);
}

GradedForm transgress(const BundlePtr& from, const BundlePtr& to, int r, int t_nodes) {
    auto cyl = cylinder_manifold(from->manifold, t_nodes);
    auto fam = segment_bundle(from, to, cyl);
    GradedForm ch = chern_form(fam, r);
    GradedForm tau = integrate_interval_leg(ch, 0);
    return rehome(tau, from->manifold);
}

GradedForm cs_two(const BundlePtr& a, const BundlePtr& b, int r, int t_nodes) {
    return transgress(b, a, r, t_nodes);
}

GradedForm cs_three(const BundlePtr& n1, const BundlePtr& n2, const BundlePtr& n3,
                    int r, int t_nodes) {
    auto sum = Bundle::direct_sum(n1, n3);
    if (sum->rank != n2->rank)
        throw std::invalid_argument("cs_three: rank mismatch with the splitting");
    return transgress(sum, n2, r, t_nodes);
}

GradedForm odd_chern_form(const BundlePtr& b, const UnitaryAutomorphism& U,
                          int t_nodes) {
    return transgress(b, gauge_transform(b, U), 0, t_nodes);
}

GradedForm cs_aut(const BundlePtr& b, const UnitaryAutomorphism& U1,
                  const UnitaryAutomorphism& U2, int t_nodes) {
    auto sq = square_manifold(b->manifold, t_nodes);
    auto fam = simplex_bundle(b, gauge_transform(b, U1),
                              gauge_transform(b, U1.compose(U2)), sq);
    GradedForm ch = chern_form(fam, 0);
    GradedForm tau = integrate_simplex_leg(ch, 0, 1);
    return rehome(tau, b->manifold);
}

} // namespace dki
