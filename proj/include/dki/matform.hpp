#pragma once

#include <map>
#include <vector>

#include "dki/forms.hpp"
#include "dki/manifold.hpp"
#include "dki/smallmat.hpp"

namespace dki {

// Matrix of values per grid point, layout p*r*r + i*r + j.
using MatField = std::vector<Complex>;

Mat mat_at(const MatField& f, std::size_t p, int rank);
void set_mat(MatField& f, std::size_t p, int rank, const Mat& m);

// Matrix-valued form of homogeneous form degree (no u-bookkeeping here; the
// Chern-Weil series attaches u-powers to traces of wedge powers).
class MatForm {
public:
    MatForm() = default;
    MatForm(ManifoldPtr m, int rank, int form_degree);

    const ManifoldPtr& manifold() const { return m_; }
    int rank() const { return rank_; }
    int form_degree() const { return deg_; }

    const std::map<MultiIndex, MatField>& chart(int c) const { return comps_[c]; }
    std::map<MultiIndex, MatField>& chart_mut(int c) { return comps_[c]; }
    MatField& component(int chart, const MultiIndex& J);
    const MatField* find(int chart, const MultiIndex& J) const;

    void add_scaled(const MatForm& o, Complex s);
    MatForm operator*(Complex s) const;
    bool empty() const;
    double max_abs() const;
    void prune(double tol = 0.0);

private:
    ManifoldPtr m_;
    int rank_ = 0;
    int deg_ = 0;
    std::vector<std::map<MultiIndex, MatField>> comps_;
};

// Wedge product with pointwise matrix multiplication.
MatForm wedge_mul(const MatForm& a, const MatForm& b);

// Entrywise exterior derivative (valid for chart-smooth data only).
MatForm exterior_d(const MatForm& a);

// out += scale * tr(a) placed at the component u-degree out.total - |J|.
// With grading (p,q), uses the supertrace tr(+block) - tr(-block).
void add_trace(GradedForm& out, const MatForm& a, Complex scale,
               const std::pair<int, int>* grading = nullptr);

// Pointwise conjugation helpers used for gauge transforms.
MatForm conjugated(const MatForm& a, const std::vector<MatField>& U);

MatForm matform_pullback(const MatForm& a, ManifoldPtr target,
                         const std::vector<int>& source_of_target_factor);

// Restriction to a factor sub-product; components with transverse legs drop.
MatForm matform_restrict(const MatForm& a, const std::vector<int>& keep,
                         const std::map<int, int>& fixed_node = {});

} // namespace dki
