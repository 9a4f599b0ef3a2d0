#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "dki/laurent.hpp"
#include "dki/manifold.hpp"

namespace dki {

// Sorted list of coordinate ids labelling an antisymmetrized component.
struct MultiIndex {
    std::vector<std::uint8_t> ids;
    bool operator<(const MultiIndex& o) const { return ids < o.ids; }
    bool operator==(const MultiIndex& o) const { return ids == o.ids; }
    int degree() const { return static_cast<int>(ids.size()); }
    bool contains(std::uint8_t c) const;
};

using Field = std::vector<Complex>; // one value per chart grid point

// Merge two disjoint sorted multi-indices; returns the shuffle sign, or 0 if
// they intersect.
int merge_multiindex(const MultiIndex& a, const MultiIndex& b, MultiIndex& out);

// Chart-sampled differential form with coefficients in R[u,u^-1], homogeneous
// of a fixed total degree (u-degree + form degree). The u-degree of a stored
// component is total_degree - |J| and must be even.
class GradedForm {
public:
    GradedForm() = default;
    GradedForm(ManifoldPtr m, int total_degree);

    static GradedForm zero(ManifoldPtr m, int total_degree) { return {std::move(m), total_degree}; }
    // c * u^{u_degree/2} as a 0-form (total degree = u_degree).
    static GradedForm constant(ManifoldPtr m, Complex c, int u_degree = 0);
    // Coordinate 1-form dx_c (total degree 1).
    static GradedForm coordinate(ManifoldPtr m, int coord);
    // Scalar function sampled per chart: fn(chart, point index) -> value.
    static GradedForm sample(ManifoldPtr m,
                             const std::function<Complex(int, std::size_t)>& fn,
                             int u_degree = 0);

    const ManifoldPtr& manifold() const { return m_; }
    int total_degree() const { return deg_; }
    bool is_zero() const;

    const std::map<MultiIndex, Field>& chart(int c) const { return comps_[c]; }
    Field& component(int chart, const MultiIndex& J); // creates if missing
    const Field* find(int chart, const MultiIndex& J) const;

    void add_scaled(const GradedForm& o, Complex s); // same degree & manifold
    GradedForm operator+(const GradedForm& o) const;
    GradedForm operator-(const GradedForm& o) const;
    GradedForm operator*(Complex s) const;
    // Multiply by u^{u_degree/2}: shifts the total degree by u_degree.
    GradedForm u_shifted(int u_degree) const;

    double max_abs() const;

    // u times the u^{-1}-graded piece in the given form degree, as a plain
    // complex field on chart `chart` (used for the degree-(0) and (1)
    // components feeding the determinant maps). Missing -> zeros.
    Field u_minus1_piece(int chart, const MultiIndex& J) const;

    void prune(double tol = 0.0);

private:
    ManifoldPtr m_;
    int deg_ = 0;
    std::vector<std::map<MultiIndex, Field>> comps_;
};

GradedForm wedge(const GradedForm& a, const GradedForm& b);
GradedForm exterior_d(const GradedForm& a);
LaurentScalar integrate(const GradedForm& a);
// Multiplies u by 2*pi*i componentwise.
GradedForm r_u_map(const GradedForm& a);

// Raw de Rham pushforward over the closed sub-product spanned by
// `fiber_factors`. Orientation: fiber legs are contracted first (the ambient
// orientation is the product of factor orientations in factor order).
GradedForm fiber_integrate(const GradedForm& a, const std::vector<int>& fiber_factors);

// Transgression contraction: integrate the dt-leg of `a` over an interval
// factor; components without a dt-leg are dropped. Lowers the degree by 1.
GradedForm integrate_interval_leg(const GradedForm& a, int interval_factor);

// As above for a pair of interval factors, integrating the dt1^dt2 leg over
// the simplex {t1,t2 >= 0, t1+t2 <= 1}. Lowers the degree by 2.
GradedForm integrate_simplex_leg(const GradedForm& a, int f1, int f2);

// Pull back along the projection that forgets every factor of `target` not
// listed in `source_of_target_factor` (value -1 marks new factors; other
// entries give the source factor index, whose grid must match).
GradedForm pullback(const GradedForm& a, ManifoldPtr target,
                    const std::vector<int>& source_of_target_factor);

// Restrict to the sub-product of `keep` factors, evaluating the remaining
// coordinates at the basepoint (north caps, node 0) unless overridden by
// `fixed_node` (ambient coordinate -> node index).
GradedForm restrict_to(const GradedForm& a, const std::vector<int>& keep,
                       const std::map<int, int>& fixed_node = {});

// Largest mismatch of components across sphere cap overlaps.
double overlap_residual(const GradedForm& a);

// Re-house a form onto another manifold object with an identical grid
// (submanifold results come back on fresh instances).
GradedForm rehome(const GradedForm& a, ManifoldPtr m);

// Current supported on the sub-product spanned by `support` (the remaining
// factors are collapsed to their basepoint).
struct DeltaCurrent {
    ManifoldPtr ambient;
    std::vector<int> support;
    GradedForm smooth_part; // lives on ambient->submanifold(support)
    int total_degree() const;
};

GradedForm fiber_integrate(const DeltaCurrent& a, const std::vector<int>& fiber_factors);

// Element of u^{u_power} * (R/Z).
struct EtaValue {
    int u_power = 0;
    double value_mod_1 = 0.0;

    static EtaValue make(int u_power, double v);
    EtaValue operator+(const EtaValue& o) const;
    EtaValue operator*(int n) const;
    static double circle_distance(const EtaValue& a, const EtaValue& b);
};

double mod1(double x);

} // namespace dki
