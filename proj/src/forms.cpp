#include "dki/forms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dki/parallel.hpp"

namespace dki {

bool MultiIndex::contains(std::uint8_t c) const {
    return std::binary_search(ids.begin(), ids.end(), c);
}

int merge_multiindex(const MultiIndex& a, const MultiIndex& b, MultiIndex& out) {
    out.ids.clear();
    out.ids.reserve(a.ids.size() + b.ids.size());
    std::size_t i = 0, j = 0;
    int inversions = 0;
    while (i < a.ids.size() && j < b.ids.size()) {
        if (a.ids[i] == b.ids[j]) return 0;
        if (a.ids[i] < b.ids[j]) {
            out.ids.push_back(a.ids[i++]);
        } else {
            // b's leg passes the remaining legs of a
            inversions += static_cast<int>(a.ids.size() - i);
            out.ids.push_back(b.ids[j++]);
        }
    }
    while (i < a.ids.size()) out.ids.push_back(a.ids[i++]);
    while (j < b.ids.size()) out.ids.push_back(b.ids[j++]);
    return (inversions % 2 == 0) ? 1 : -1;
}

GradedForm::GradedForm(ManifoldPtr m, int total_degree)
    : m_(std::move(m)), deg_(total_degree), comps_(m_->num_charts()) {}

GradedForm GradedForm::constant(ManifoldPtr m, Complex c, int u_degree) {
    GradedForm f(std::move(m), u_degree);
    if (c != Complex{}) {
        for (int ch = 0; ch < f.m_->num_charts(); ++ch)
            f.component(ch, MultiIndex{}).assign(f.m_->npoints(), c);
    }
    return f;
}

GradedForm GradedForm::coordinate(ManifoldPtr m, int coord) {
    GradedForm f(std::move(m), 1);
    MultiIndex J{{static_cast<std::uint8_t>(coord)}};
    for (int ch = 0; ch < f.m_->num_charts(); ++ch)
        f.component(ch, J).assign(f.m_->npoints(), Complex{1.0, 0.0});
    return f;
}

GradedForm GradedForm::sample(ManifoldPtr m,
                              const std::function<Complex(int, std::size_t)>& fn,
                              int u_degree) {
    GradedForm f(std::move(m), u_degree);
    for (int ch = 0; ch < f.m_->num_charts(); ++ch) {
        Field& v = f.component(ch, MultiIndex{});
        v.resize(f.m_->npoints());
        exec::parallel_for(f.m_->npoints(), [&](std::size_t p) { v[p] = fn(ch, p); });
    }
    return f;
}

bool GradedForm::is_zero() const {
    for (auto& cm : comps_)
        if (!cm.empty()) return false;
    return true;
}

Field& GradedForm::component(int chart, const MultiIndex& J) {
    const int udeg = deg_ - J.degree();
    if (udeg % 2 != 0)
        throw std::invalid_argument("GradedForm: component u-degree must be even");
    auto [it, inserted] = comps_[chart].try_emplace(J);
    if (inserted) it->second.assign(m_->npoints(), Complex{});
    return it->second;
}

const Field* GradedForm::find(int chart, const MultiIndex& J) const {
    auto it = comps_[chart].find(J);
    return it == comps_[chart].end() ? nullptr : &it->second;
}

void GradedForm::add_scaled(const GradedForm& o, Complex s) {
    if (o.deg_ != deg_ || !m_->same_grid_as(*o.m_))
        throw std::invalid_argument("GradedForm::add_scaled: mismatch");
    for (int ch = 0; ch < m_->num_charts(); ++ch)
        for (auto& [J, F] : o.comps_[ch]) {
            Field& dst = component(ch, J);
            exec::parallel_for(F.size(), [&](std::size_t p) { dst[p] += s * F[p]; });
        }
}

GradedForm GradedForm::operator+(const GradedForm& o) const {
    GradedForm r = *this;
    r.add_scaled(o, {1.0, 0.0});
    return r;
}

GradedForm GradedForm::operator-(const GradedForm& o) const {
    GradedForm r = *this;
    r.add_scaled(o, {-1.0, 0.0});
    return r;
}

GradedForm GradedForm::operator*(Complex s) const {
    GradedForm r = *this;
    for (auto& cm : r.comps_)
        for (auto& [J, F] : cm)
            for (auto& v : F) v *= s;
    return r;
}

GradedForm GradedForm::u_shifted(int u_degree) const {
    if (u_degree % 2 != 0)
        throw std::invalid_argument("GradedForm::u_shifted: u-degree must be even");
    GradedForm r = *this;
    r.deg_ += u_degree;
    return r;
}

double GradedForm::max_abs() const {
    double m = 0.0;
    for (auto& cm : comps_)
        for (auto& [J, F] : cm)
            for (auto& v : F) m = std::max(m, std::abs(v));
    return m;
}

Field GradedForm::u_minus1_piece(int chart, const MultiIndex& J) const {
    if (deg_ - J.degree() != -2)
        return Field(m_->npoints(), Complex{});
    if (const Field* f = find(chart, J)) return *f;
    return Field(m_->npoints(), Complex{});
}

void GradedForm::prune(double tol) {
    for (auto& cm : comps_)
        for (auto it = cm.begin(); it != cm.end();) {
            double m = 0.0;
            for (auto& v : it->second) m = std::max(m, std::abs(v));
            it = (m <= tol) ? cm.erase(it) : ++it;
        }
}

GradedForm wedge(const GradedForm& a, const GradedForm& b) {
    if (!a.manifold()->same_grid_as(*b.manifold()))
        throw std::invalid_argument("wedge: manifold mismatch");
    const auto& M = a.manifold();
    GradedForm r(M, a.total_degree() + b.total_degree());
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        for (auto& [Ja, Fa] : a.chart(ch))
            for (auto& [Jb, Fb] : b.chart(ch)) {
                MultiIndex J;
                int sign = merge_multiindex(Ja, Jb, J);
                if (sign == 0) continue;
                Field& dst = r.component(ch, J);
                const Complex s{static_cast<double>(sign), 0.0};
                const Field& fa = Fa;
                const Field& fb = Fb;
                exec::parallel_for(dst.size(),
                                   [&](std::size_t p) { dst[p] += s * fa[p] * fb[p]; });
            }
    }
    r.prune();
    return r;
}

namespace {

// out = D_axis * f along coordinate `coord` (dense per-line multiply).
void apply_diff_axis(const StructuredManifold& M, int coord, const Field& f,
                     Field& out) {
    const Axis& ax = M.axis(coord);
    const int n = ax.size;
    const std::size_t stride = M.stride(coord);
    const std::size_t nlines = M.npoints() / n;
    exec::parallel_for(nlines, [&](std::size_t l) {
        const std::size_t base = (l / stride) * (stride * n) + (l % stride);
        for (int i = 0; i < n; ++i) {
            Complex acc{};
            const double* row = &ax.diff[std::size_t(i) * n];
            for (int k = 0; k < n; ++k) acc += row[k] * f[base + k * stride];
            out[base + i * stride] = acc;
        }
    });
}

} // namespace

GradedForm exterior_d(const GradedForm& a) {
    const auto& M = a.manifold();
    GradedForm r(M, a.total_degree() + 1);
    Field tmp(M->npoints());
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        for (auto& [J, F] : a.chart(ch)) {
            for (int c = 0; c < M->num_coords(); ++c) {
                if (J.contains(static_cast<std::uint8_t>(c))) continue;
                apply_diff_axis(*M, c, F, tmp);
                MultiIndex Jc{{static_cast<std::uint8_t>(c)}};
                MultiIndex Jnew;
                int sign = merge_multiindex(Jc, J, Jnew);
                Field& dst = r.component(ch, Jnew);
                const Complex s{static_cast<double>(sign), 0.0};
                exec::parallel_for(dst.size(),
                                   [&](std::size_t p) { dst[p] += s * tmp[p]; });
            }
        }
    }
    r.prune();
    return r;
}

LaurentScalar integrate(const GradedForm& a) {
    const auto& M = a.manifold();
    if (!M->closed()) throw std::invalid_argument("integrate: manifold not closed");
    MultiIndex top;
    for (int c = 0; c < M->num_coords(); ++c)
        top.ids.push_back(static_cast<std::uint8_t>(c));
    LaurentScalar out;
    const int udeg = a.total_degree() - M->dim();
    Complex acc{};
    for (int ch = 0; ch < M->num_charts(); ++ch) {
        const Field* F = a.find(ch, top);
        if (!F) continue;
        acc += exec::det_sum_c(M->npoints(),
                               [&](std::size_t p) { return (*F)[p] * M->weight(p); });
    }
    if (acc != Complex{}) out.set(udeg, acc);
    return out;
}

GradedForm r_u_map(const GradedForm& a) {
    const auto& M = a.manifold();
    GradedForm r(M, a.total_degree());
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [J, F] : a.chart(ch)) {
            const Complex s = ru_power(a.total_degree() - J.degree());
            Field& dst = r.component(ch, J);
            exec::parallel_for(F.size(), [&](std::size_t p) { dst[p] = s * F[p]; });
        }
    return r;
}

namespace {

struct FiberSplit {
    std::vector<int> base_factors;
    std::vector<std::uint8_t> fiber_coords;     // ambient coordinate ids
    std::vector<int> base_coord_of_ambient;     // -1 for fiber coords
    ManifoldPtr base;
};

FiberSplit split_fibration(const StructuredManifold& M,
                           const std::vector<int>& fiber_factors) {
    FiberSplit s;
    std::vector<bool> is_fiber(M.num_factors(), false);
    for (int f : fiber_factors) {
        if (f < 0 || f >= M.num_factors())
            throw std::invalid_argument("fiber_integrate: bad factor index");
        is_fiber[f] = true;
    }
    for (int f = 0; f < M.num_factors(); ++f)
        if (!is_fiber[f]) s.base_factors.push_back(f);
    s.base_coord_of_ambient.assign(M.num_coords(), -1);
    int bc = 0;
    for (int c = 0; c < M.num_coords(); ++c) {
        if (is_fiber[M.factor_of_coord(c)])
            s.fiber_coords.push_back(static_cast<std::uint8_t>(c));
        else
            s.base_coord_of_ambient[c] = bc++;
    }
    s.base = M.submanifold(s.base_factors);
    return s;
}

// Sign of reordering dx_J into dx_{J cap fiber} ^ dx_{J minus fiber}:
// each fiber leg moves left past the base legs before it.
int fiber_first_sign(const MultiIndex& J, const std::vector<int>& base_coord_of_ambient) {
    int sign = 0, base_seen = 0;
    for (std::uint8_t c : J.ids) {
        if (base_coord_of_ambient[c] == -1)
            sign += base_seen;
        else
            ++base_seen;
    }
    return (sign % 2 == 0) ? 1 : -1;
}

} // namespace

GradedForm fiber_integrate(const GradedForm& a, const std::vector<int>& fiber_factors) {
    const auto& M = a.manifold();
    for (int f : fiber_factors)
        if (std::holds_alternative<IntervalSpec>(M->factors()[f]))
            throw std::invalid_argument("fiber_integrate: fiber must be closed");
    FiberSplit s = split_fibration(*M, fiber_factors);
    int fiber_dim = static_cast<int>(s.fiber_coords.size());
    GradedForm r(s.base, a.total_degree() - fiber_dim);

    // Enumerate fiber grid combinations once.
    std::vector<std::size_t> fiber_offsets;
    std::vector<double> fiber_weights;
    {
        fiber_offsets.push_back(0);
        fiber_weights.push_back(1.0);
        for (std::uint8_t c : s.fiber_coords) {
            const Axis& ax = M->axis(c);
            std::vector<std::size_t> off2;
            std::vector<double> w2;
            off2.reserve(fiber_offsets.size() * ax.size);
            for (std::size_t i = 0; i < fiber_offsets.size(); ++i)
                for (int k = 0; k < ax.size; ++k) {
                    off2.push_back(fiber_offsets[i] + k * M->stride(c));
                    w2.push_back(fiber_weights[i] * ax.weights[k]);
                }
            fiber_offsets = std::move(off2);
            fiber_weights = std::move(w2);
        }
    }

    // Base point -> ambient offset with fiber coords at node 0.
    std::vector<std::size_t> base_offset(s.base->npoints());
    exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
        std::size_t off = 0;
        for (int c = 0; c < M->num_coords(); ++c) {
            int bc = s.base_coord_of_ambient[c];
            if (bc >= 0) off += std::size_t(s.base->coord_of_point(pb, bc)) * M->stride(c);
        }
        base_offset[pb] = off;
    });

    for (int ch = 0; ch < M->num_charts(); ++ch) {
        // Chart of the base manifold: restrict the sphere-cap bits.
        int bch = 0, bbit = 0;
        for (std::size_t i = 0; i < s.base_factors.size(); ++i) {
            int f = s.base_factors[i];
            if (M->sphere_bit(f) >= 0) {
                if (M->chart_south(ch, f)) bch |= (1 << bbit);
                ++bbit;
            }
        }
        for (auto& [J, F] : a.chart(ch)) {
            // Contributes only with the full set of fiber legs.
            bool full = true;
            for (std::uint8_t c : s.fiber_coords)
                if (!J.contains(c)) {
                    full = false;
                    break;
                }
            if (!full) continue;
            MultiIndex Jb;
            for (std::uint8_t c : J.ids)
                if (s.base_coord_of_ambient[c] >= 0)
                    Jb.ids.push_back(static_cast<std::uint8_t>(s.base_coord_of_ambient[c]));
            const double sgn = fiber_first_sign(J, s.base_coord_of_ambient);
            Field& dst = r.component(bch, Jb);
            const Field& src = F;
            exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
                Complex acc{};
                const std::size_t b0 = base_offset[pb];
                for (std::size_t k = 0; k < fiber_offsets.size(); ++k)
                    acc += src[b0 + fiber_offsets[k]] * fiber_weights[k];
                dst[pb] += sgn * acc;
            });
        }
    }
    r.prune();
    return r;
}

GradedForm integrate_interval_leg(const GradedForm& a, int interval_factor) {
    const auto& M = a.manifold();
    if (!std::holds_alternative<IntervalSpec>(M->factors()[interval_factor]))
        throw std::invalid_argument("integrate_interval_leg: not an interval factor");
    const int tc = M->coord_begin(interval_factor);
    FiberSplit s = split_fibration(*M, {interval_factor});
    GradedForm r(s.base, a.total_degree() - 1);
    const Axis& ax = M->axis(tc);

    std::vector<std::size_t> base_offset(s.base->npoints());
    exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
        std::size_t off = 0;
        for (int c = 0; c < M->num_coords(); ++c) {
            int bc = s.base_coord_of_ambient[c];
            if (bc >= 0) off += std::size_t(s.base->coord_of_point(pb, bc)) * M->stride(c);
        }
        base_offset[pb] = off;
    });

    for (int ch = 0; ch < M->num_charts(); ++ch) {
        for (auto& [J, F] : a.chart(ch)) {
            if (!J.contains(static_cast<std::uint8_t>(tc))) continue;
            MultiIndex Jb;
            for (std::uint8_t c : J.ids)
                if (c != tc)
                    Jb.ids.push_back(static_cast<std::uint8_t>(s.base_coord_of_ambient[c]));
            const double sgn = fiber_first_sign(J, s.base_coord_of_ambient);
            Field& dst = r.component(ch, Jb);
            const Field& src = F;
            exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
                Complex acc{};
                const std::size_t b0 = base_offset[pb];
                for (int k = 0; k < ax.size; ++k)
                    acc += src[b0 + k * M->stride(tc)] * ax.weights[k];
                dst[pb] += sgn * acc;
            });
        }
    }
    r.prune();
    return r;
}

namespace {

// Quadrature weights w(i,j) with sum_{ij} w(i,j) f(x_i) g(y_j) ~
// int_{t1+t2<=1} f(t1) g(t2), for Lagrange interpolation through the two
// interval grids (Duffy-mapped Gauss rule on the triangle).
std::vector<double> simplex_weights(const Axis& ax1, const Axis& ax2) {
    const int n1 = ax1.size, n2 = ax2.size;
    std::vector<double> w(std::size_t(n1) * n2, 0.0);
    std::vector<double> gx, gw;
    const int q = std::max(n1, n2) + 8;
    gauss_legendre(q, 0.0, 1.0, gx, gw);
    auto bw1 = [&] {
        std::vector<double> v(n1, 1.0);
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n1; ++j)
                if (j != i) v[i] /= (ax1.nodes[i] - ax1.nodes[j]);
        return v;
    }();
    auto bw2 = [&] {
        std::vector<double> v(n2, 1.0);
        for (int i = 0; i < n2; ++i)
            for (int j = 0; j < n2; ++j)
                if (j != i) v[i] /= (ax2.nodes[i] - ax2.nodes[j]);
        return v;
    }();
    auto lagrange = [](const std::vector<double>& nodes, const std::vector<double>& bw,
                       double x, std::vector<double>& out) {
        const int n = static_cast<int>(nodes.size());
        out.assign(n, 0.0);
        for (int i = 0; i < n; ++i)
            if (std::abs(x - nodes[i]) < 1e-14) {
                out[i] = 1.0;
                return;
            }
        double denom = 0.0;
        for (int i = 0; i < n; ++i) denom += bw[i] / (x - nodes[i]);
        for (int i = 0; i < n; ++i) out[i] = (bw[i] / (x - nodes[i])) / denom;
    };
    std::vector<double> l1, l2;
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) {
            // Duffy map: (xi, eta) in [0,1]^2 -> (t1, t2) = (xi(1-eta), xi eta)
            const double xi = gx[a], eta = gx[b];
            const double t1 = xi * (1.0 - eta), t2 = xi * eta;
            const double jac = xi;
            lagrange(ax1.nodes, bw1, t1, l1);
            lagrange(ax2.nodes, bw2, t2, l2);
            const double ww = gw[a] * gw[b] * jac;
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) w[std::size_t(i) * n2 + j] += ww * l1[i] * l2[j];
        }
    return w;
}

} // namespace

GradedForm integrate_simplex_leg(const GradedForm& a, int f1, int f2) {
    const auto& M = a.manifold();
    const int t1 = M->coord_begin(f1), t2 = M->coord_begin(f2);
    FiberSplit s = split_fibration(*M, {f1, f2});
    GradedForm r(s.base, a.total_degree() - 2);
    const Axis& ax1 = M->axis(t1);
    const Axis& ax2 = M->axis(t2);
    const auto w = simplex_weights(ax1, ax2);

    std::vector<std::size_t> base_offset(s.base->npoints());
    exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
        std::size_t off = 0;
        for (int c = 0; c < M->num_coords(); ++c) {
            int bc = s.base_coord_of_ambient[c];
            if (bc >= 0) off += std::size_t(s.base->coord_of_point(pb, bc)) * M->stride(c);
        }
        base_offset[pb] = off;
    });

    for (int ch = 0; ch < M->num_charts(); ++ch) {
        for (auto& [J, F] : a.chart(ch)) {
            if (!J.contains(static_cast<std::uint8_t>(t1)) ||
                !J.contains(static_cast<std::uint8_t>(t2)))
                continue;
            MultiIndex Jb;
            for (std::uint8_t c : J.ids)
                if (c != t1 && c != t2)
                    Jb.ids.push_back(static_cast<std::uint8_t>(s.base_coord_of_ambient[c]));
            const double sgn = fiber_first_sign(J, s.base_coord_of_ambient);
            Field& dst = r.component(ch, Jb);
            const Field& src = F;
            exec::parallel_for(s.base->npoints(), [&](std::size_t pb) {
                Complex acc{};
                const std::size_t b0 = base_offset[pb];
                for (int i = 0; i < ax1.size; ++i)
                    for (int j = 0; j < ax2.size; ++j)
                        acc += src[b0 + i * M->stride(t1) + j * M->stride(t2)] *
                               w[std::size_t(i) * ax2.size + j];
                dst[pb] += sgn * acc;
            });
        }
    }
    r.prune();
    return r;
}

GradedForm pullback(const GradedForm& a, ManifoldPtr target,
                    const std::vector<int>& source_of_target_factor) {
    const auto& S = a.manifold();
    GradedForm r(target, a.total_degree());
    // target coordinate -> source coordinate (-1 if new)
    std::vector<int> src_coord(target->num_coords(), -1);
    std::vector<int> src_factor_chartbit(target->num_factors(), -1);
    for (int tf = 0; tf < target->num_factors(); ++tf) {
        int sf = source_of_target_factor[tf];
        if (sf < 0) continue;
        for (int k = 0; k < target->coord_count(tf); ++k)
            src_coord[target->coord_begin(tf) + k] = S->coord_begin(sf) + k;
    }
    for (int tch = 0; tch < target->num_charts(); ++tch) {
        // matching source chart
        int sch = 0;
        for (int tf = 0; tf < target->num_factors(); ++tf) {
            int sf = source_of_target_factor[tf];
            if (sf < 0 || S->sphere_bit(sf) < 0) continue;
            if (target->chart_south(tch, tf)) sch |= (1 << S->sphere_bit(sf));
        }
        for (auto& [J, F] : a.chart(sch)) {
            MultiIndex Jt;
            bool ok = true;
            for (std::uint8_t c : J.ids) {
                int found = -1;
                for (int tc = 0; tc < target->num_coords(); ++tc)
                    if (src_coord[tc] == c) {
                        found = tc;
                        break;
                    }
                if (found < 0) {
                    ok = false;
                    break;
                }
                Jt.ids.push_back(static_cast<std::uint8_t>(found));
            }
            if (!ok)
                throw std::invalid_argument("pullback: source factor not present in target");
            std::sort(Jt.ids.begin(), Jt.ids.end()); // relative order preserved
            Field& dst = r.component(tch, Jt);
            const Field& src = F;
            exec::parallel_for(target->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int tc = 0; tc < target->num_coords(); ++tc)
                    if (src_coord[tc] >= 0)
                        sp += std::size_t(target->coord_of_point(p, tc)) *
                              S->stride(src_coord[tc]);
                dst[p] = src[sp];
            });
        }
    }
    return r;
}

GradedForm restrict_to(const GradedForm& a, const std::vector<int>& keep,
                       const std::map<int, int>& fixed_node) {
    const auto& M = a.manifold();
    auto sub = M->submanifold(keep);
    GradedForm r(sub, a.total_degree());
    std::vector<int> sub_coord(M->num_coords(), -1);
    {
        int sc = 0;
        for (int kf : keep)
            for (int k = 0; k < M->coord_count(kf); ++k)
                sub_coord[M->coord_begin(kf) + k] = sc++;
    }
    std::vector<int> base_node(M->num_coords(), 0);
    for (auto& [c, n] : fixed_node) base_node[c] = n;
    // source chart: north (0-bit) for dropped spheres, matching bits for kept
    for (int sch = 0; sch < sub->num_charts(); ++sch) {
        int ach = 0;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            int f = keep[i];
            if (M->sphere_bit(f) >= 0 && sub->chart_south(sch, static_cast<int>(i)))
                ach |= (1 << M->sphere_bit(f));
        }
        for (auto& [J, F] : a.chart(ach)) {
            MultiIndex Js;
            bool ok = true;
            for (std::uint8_t c : J.ids) {
                if (sub_coord[c] < 0) {
                    ok = false;
                    break;
                }
                Js.ids.push_back(static_cast<std::uint8_t>(sub_coord[c]));
            }
            if (!ok) continue; // transverse legs restrict to zero
            Field& dst = r.component(sch, Js);
            const Field& src = F;
            exec::parallel_for(sub->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int c = 0; c < M->num_coords(); ++c)
                    sp += std::size_t(sub_coord[c] >= 0
                                          ? sub->coord_of_point(p, sub_coord[c])
                                          : base_node[c]) *
                          M->stride(c);
                dst[p] = src[sp];
            });
        }
    }
    r.prune();
    return r;
}

double overlap_residual(const GradedForm& a) {
    const auto& M = a.manifold();
    double res = 0.0;
    for (int f = 0; f < M->num_factors(); ++f) {
        if (M->sphere_bit(f) < 0) continue;
        const int tc = M->coord_begin(f), pc = tc + 1;
        for (int ch = 0; ch < M->num_charts(); ++ch) {
            if (M->chart_south(ch, f)) continue; // compare each pair once
            const int och = ch | (1 << M->sphere_bit(f));
            for (auto& [J, F] : a.chart(ch)) {
                // dtheta and dphi each flip sign under the cap transition
                int flips = 0;
                if (J.contains(static_cast<std::uint8_t>(tc))) ++flips;
                if (J.contains(static_cast<std::uint8_t>(pc))) ++flips;
                const double sgn = (flips % 2 == 0) ? 1.0 : -1.0;
                const Field* G = a.find(och, J);
                for (std::size_t p = 0; p < M->npoints(); ++p) {
                    auto q = M->sphere_partner(f, p);
                    if (!q) continue;
                    Complex other = G ? (*G)[*q] : Complex{};
                    res = std::max(res, std::abs(sgn * F[p] - other));
                }
            }
        }
    }
    return res;
}

GradedForm rehome(const GradedForm& a, ManifoldPtr m) {
    if (!a.manifold()->same_grid_as(*m))
        throw std::invalid_argument("rehome: grids differ");
    GradedForm r(m, a.total_degree());
    for (int ch = 0; ch < m->num_charts(); ++ch)
        for (auto& [J, F] : a.chart(ch)) r.component(ch, J) = F;
    return r;
}

int DeltaCurrent::total_degree() const {
    int codim = 0;
    std::vector<bool> keep(ambient->num_factors(), false);
    for (int f : support) keep[f] = true;
    for (int f = 0; f < ambient->num_factors(); ++f)
        if (!keep[f]) {
            if (std::holds_alternative<SphereSpec>(ambient->factors()[f]))
                codim += 2;
            else
                codim += 1;
        }
    return smooth_part.total_degree() + codim;
}

GradedForm fiber_integrate(const DeltaCurrent& a, const std::vector<int>& fiber_factors) {
    std::vector<bool> in_support(a.ambient->num_factors(), false);
    for (int f : a.support) in_support[f] = true;
    std::vector<bool> in_fiber(a.ambient->num_factors(), false);
    for (int f : fiber_factors) in_fiber[f] = true;
    for (int f = 0; f < a.ambient->num_factors(); ++f)
        if (!in_fiber[f] && !in_support[f])
            throw std::invalid_argument(
                "fiber_integrate(DeltaCurrent): support must contain all base factors");
    // Delta directions (fiber, not in support) integrate to 1; smooth fiber
    // directions integrate as forms. Both live on the support sub-product.
    std::vector<int> smooth_fiber;
    for (std::size_t i = 0; i < a.support.size(); ++i)
        if (in_fiber[a.support[i]]) smooth_fiber.push_back(static_cast<int>(i));
    if (smooth_fiber.empty()) return a.smooth_part;
    return fiber_integrate(a.smooth_part, smooth_fiber);
}

double mod1(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;
    if (r < 0.0) r += 1.0;
    return r;
}

EtaValue EtaValue::make(int u_power, double v) { return {u_power, mod1(v)}; }

EtaValue EtaValue::operator+(const EtaValue& o) const {
    if (u_power != o.u_power)
        throw std::invalid_argument("EtaValue: u-power mismatch in addition");
    return make(u_power, value_mod_1 + o.value_mod_1);
}

EtaValue EtaValue::operator*(int n) const { return make(u_power, value_mod_1 * n); }

double EtaValue::circle_distance(const EtaValue& a, const EtaValue& b) {
    double d = mod1(a.value_mod_1 - b.value_mod_1);
    return std::min(d, 1.0 - d);
}

} // namespace dki
