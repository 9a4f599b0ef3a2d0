#include "dki/matform.hpp"

#include <stdexcept>

#include "dki/parallel.hpp"

namespace dki {

Mat mat_at(const MatField& f, std::size_t p, int rank) {
    Mat m(rank, rank);
    const Complex* src = &f[p * rank * rank];
    for (int i = 0; i < rank; ++i)
        for (int j = 0; j < rank; ++j) m(i, j) = src[i * rank + j];
    return m;
}

void set_mat(MatField& f, std::size_t p, int rank, const Mat& m) {
    Complex* dst = &f[p * rank * rank];
    for (int i = 0; i < rank; ++i)
        for (int j = 0; j < rank; ++j) dst[i * rank + j] = m(i, j);
}

MatForm::MatForm(ManifoldPtr m, int rank, int form_degree)
    : m_(std::move(m)), rank_(rank), deg_(form_degree), comps_(m_->num_charts()) {}

MatField& MatForm::component(int chart, const MultiIndex& J) {
    auto [it, inserted] = comps_[chart].try_emplace(J);
    if (inserted) it->second.assign(m_->npoints() * rank_ * rank_, Complex{});
    return it->second;
}

const MatField* MatForm::find(int chart, const MultiIndex& J) const {
    auto it = comps_[chart].find(J);
    return it == comps_[chart].end() ? nullptr : &it->second;
}

void MatForm::add_scaled(const MatForm& o, Complex s) {
    if (deg_ != o.deg_ || rank_ != o.rank_)
        throw std::invalid_argument("MatForm::add_scaled: mismatch");
    for (int ch = 0; ch < m_->num_charts(); ++ch)
        for (auto& [J, F] : o.comps_[ch]) {
            MatField& dst = component(ch, J);
            exec::parallel_for(F.size(), [&](std::size_t i) { dst[i] += s * F[i]; });
        }
}

MatForm MatForm::operator*(Complex s) const {
    MatForm r = *this;
    for (auto& cm : r.comps_)
        for (auto& [J, F] : cm)
            for (auto& v : F) v *= s;
    return r;
}

bool MatForm::empty() const {
    for (auto& cm : comps_)
        if (!cm.empty()) return false;
    return true;
}

double MatForm::max_abs() const {
    double m = 0.0;
    for (auto& cm : comps_)
        for (auto& [J, F] : cm)
            for (auto& v : F) m = std::max(m, std::abs(v));
    return m;
}

void MatForm::prune(double tol) {
    for (auto& cm : comps_)
        for (auto it = cm.begin(); it != cm.end();) {
            double m = 0.0;
            for (auto& v : it->second) m = std::max(m, std::abs(v));
            it = (m <= tol) ? cm.erase(it) : ++it;
        }
}

MatForm wedge_mul(const MatForm& a, const MatForm& b) {
    if (a.rank() != b.rank())
        throw std::invalid_argument("wedge_mul: rank mismatch");
    const auto& M = a.manifold();
    const int r = a.rank();
    MatForm out(M, r, a.form_degree() + b.form_degree());
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [Ja, Fa] : a.chart(ch))
            for (auto& [Jb, Fb] : b.chart(ch)) {
                MultiIndex J;
                int sign = merge_multiindex(Ja, Jb, J);
                if (sign == 0) continue;
                MatField& dst = out.component(ch, J);
                const Complex s{static_cast<double>(sign), 0.0};
                const MatField& fa = Fa;
                const MatField& fb = Fb;
                exec::parallel_for(M->npoints(), [&](std::size_t p) {
                    const Complex* A = &fa[p * r * r];
                    const Complex* B = &fb[p * r * r];
                    Complex* D = &dst[p * r * r];
                    for (int i = 0; i < r; ++i)
                        for (int k = 0; k < r; ++k) {
                            const Complex aik = A[i * r + k];
                            if (aik == Complex{}) continue;
                            for (int j = 0; j < r; ++j)
                                D[i * r + j] += s * aik * B[k * r + j];
                        }
                });
            }
    out.prune();
    return out;
}

namespace {

void apply_diff_axis_mat(const StructuredManifold& M, int coord, int rank,
                         const MatField& f, MatField& out) {
    const Axis& ax = M.axis(coord);
    const int n = ax.size;
    const int rr = rank * rank;
    const std::size_t stride = M.stride(coord);
    const std::size_t nlines = M.npoints() / n;
    exec::parallel_for(nlines, [&](std::size_t l) {
        const std::size_t base = (l / stride) * (stride * n) + (l % stride);
        for (int i = 0; i < n; ++i) {
            const double* row = &ax.diff[std::size_t(i) * n];
            for (int e = 0; e < rr; ++e) {
                Complex acc{};
                for (int k = 0; k < n; ++k)
                    acc += row[k] * f[(base + k * stride) * rr + e];
                out[(base + i * stride) * rr + e] = acc;
            }
        }
    });
}

} // namespace

MatForm exterior_d(const MatForm& a) {
    const auto& M = a.manifold();
    const int r = a.rank();
    MatForm out(M, r, a.form_degree() + 1);
    MatField tmp(M->npoints() * r * r);
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [J, F] : a.chart(ch))
            for (int c = 0; c < M->num_coords(); ++c) {
                if (J.contains(static_cast<std::uint8_t>(c))) continue;
                apply_diff_axis_mat(*M, c, r, F, tmp);
                MultiIndex Jc{{static_cast<std::uint8_t>(c)}};
                MultiIndex Jnew;
                int sign = merge_multiindex(Jc, J, Jnew);
                MatField& dst = out.component(ch, Jnew);
                const Complex s{static_cast<double>(sign), 0.0};
                exec::parallel_for(tmp.size(), [&](std::size_t i) { dst[i] += s * tmp[i]; });
            }
    out.prune();
    return out;
}

void add_trace(GradedForm& out, const MatForm& a, Complex scale,
               const std::pair<int, int>* grading) {
    const auto& M = a.manifold();
    const int r = a.rank();
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [J, F] : a.chart(ch)) {
            Field& dst = out.component(ch, J);
            const MatField& src = F;
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Complex t{};
                const Complex* m = &src[p * r * r];
                if (grading) {
                    for (int i = 0; i < grading->first; ++i) t += m[i * r + i];
                    for (int i = grading->first; i < r; ++i) t -= m[i * r + i];
                } else {
                    for (int i = 0; i < r; ++i) t += m[i * r + i];
                }
                dst[p] += scale * t;
            });
        }
}

MatForm conjugated(const MatForm& a, const std::vector<MatField>& U) {
    const auto& M = a.manifold();
    const int r = a.rank();
    MatForm out(M, r, a.form_degree());
    for (int ch = 0; ch < M->num_charts(); ++ch)
        for (auto& [J, F] : a.chart(ch)) {
            MatField& dst = out.component(ch, J);
            const MatField& src = F;
            const MatField& u = U[ch];
            exec::parallel_for(M->npoints(), [&](std::size_t p) {
                Mat m = mat_at(src, p, r);
                Mat g = mat_at(u, p, r);
                set_mat(dst, p, r, g * m * g.adjoint());
            });
        }
    return out;
}

MatForm matform_pullback(const MatForm& a, ManifoldPtr target,
                         const std::vector<int>& source_of_target_factor) {
    const auto& S = a.manifold();
    const int r = a.rank();
    const int rr = r * r;
    MatForm out(target, r, a.form_degree());
    std::vector<int> src_coord(target->num_coords(), -1);
    for (int tf = 0; tf < target->num_factors(); ++tf) {
        int sf = source_of_target_factor[tf];
        if (sf < 0) continue;
        for (int k = 0; k < target->coord_count(tf); ++k)
            src_coord[target->coord_begin(tf) + k] = S->coord_begin(sf) + k;
    }
    for (int tch = 0; tch < target->num_charts(); ++tch) {
        int sch = 0;
        for (int tf = 0; tf < target->num_factors(); ++tf) {
            int sf = source_of_target_factor[tf];
            if (sf < 0 || S->sphere_bit(sf) < 0) continue;
            if (target->chart_south(tch, tf)) sch |= (1 << S->sphere_bit(sf));
        }
        for (auto& [J, F] : a.chart(sch)) {
            MultiIndex Jt;
            for (std::uint8_t c : J.ids) {
                int found = -1;
                for (int tc = 0; tc < target->num_coords(); ++tc)
                    if (src_coord[tc] == c) {
                        found = tc;
                        break;
                    }
                if (found < 0)
                    throw std::invalid_argument("matform_pullback: missing factor");
                Jt.ids.push_back(static_cast<std::uint8_t>(found));
            }
            std::sort(Jt.ids.begin(), Jt.ids.end());
            MatField& dst = out.component(tch, Jt);
            const MatField& src = F;
            exec::parallel_for(target->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int tc = 0; tc < target->num_coords(); ++tc)
                    if (src_coord[tc] >= 0)
                        sp += std::size_t(target->coord_of_point(p, tc)) *
                              S->stride(src_coord[tc]);
                for (int e = 0; e < rr; ++e) dst[p * rr + e] = src[sp * rr + e];
            });
        }
    }
    return out;
}

MatForm matform_restrict(const MatForm& a, const std::vector<int>& keep,
                         const std::map<int, int>& fixed_node) {
    const auto& M = a.manifold();
    auto sub = M->submanifold(keep);
    const int r = a.rank();
    const int rr = r * r;
    MatForm out(sub, r, a.form_degree());
    std::vector<int> sub_coord(M->num_coords(), -1);
    {
        int sc = 0;
        for (int kf : keep)
            for (int k = 0; k < M->coord_count(kf); ++k)
                sub_coord[M->coord_begin(kf) + k] = sc++;
    }
    std::vector<int> base_node(M->num_coords(), 0);
    for (auto& [c, n] : fixed_node) base_node[c] = n;
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
            if (!ok) continue;
            MatField& dst = out.component(sch, Js);
            const MatField& src = F;
            exec::parallel_for(sub->npoints(), [&](std::size_t p) {
                std::size_t sp = 0;
                for (int c = 0; c < M->num_coords(); ++c)
                    sp += std::size_t(sub_coord[c] >= 0
                                          ? sub->coord_of_point(p, sub_coord[c])
                                          : base_node[c]) *
                          M->stride(c);
                for (int e = 0; e < rr; ++e) dst[p * rr + e] = src[sp * rr + e];
            });
        }
    }
    out.prune();
    return out;
}

} // namespace dki
