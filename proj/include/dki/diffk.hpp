#pragma once

#include <map>
#include <string>

#include "dki/charforms.hpp"

namespace dki {

// Generators-and-relations classes. A class is a formal integer combination
// of generators; equality is decided through observables (rank, periods of
// omega over the factor-subset cycles, determinant holonomies, eta pairings),
// never through a canonical form.
struct GenEven {
    int coeff = 1;
    BundlePtr bundle;
    GradedForm phi; // total degree r-1, used modulo exact forms
};

class DKClassEven {
public:
    DKClassEven() = default;
    DKClassEven(ManifoldPtr m, int degree) : m_(std::move(m)), degree_(degree) {}

    const ManifoldPtr& manifold() const { return m_; }
    int degree() const { return degree_; }
    const std::vector<GenEven>& gens() const { return gens_; }

    void add_generator(int coeff, BundlePtr b, GradedForm phi);
    void add_generator(int coeff, BundlePtr b); // phi = 0
    DKClassEven operator+(const DKClassEven& o) const;
    DKClassEven operator-(const DKClassEven& o) const;
    DKClassEven operator*(int n) const;

    static DKClassEven unit(ManifoldPtr m); // (trivial line, phi = 0), degree 0

private:
    ManifoldPtr m_;
    int degree_ = 0;
    std::vector<GenEven> gens_;
};

struct GenOdd {
    int coeff = 1;
    BundlePtr bundle;
    UnitaryAutomorphism aut;
    GradedForm phi; // total degree r-1 (r odd)
};

class DKClassOdd {
public:
    DKClassOdd() = default;
    DKClassOdd(ManifoldPtr m, int degree) : m_(std::move(m)), degree_(degree) {}

    const ManifoldPtr& manifold() const { return m_; }
    int degree() const { return degree_; }
    const std::vector<GenOdd>& gens() const { return gens_; }
    void add_generator(int coeff, BundlePtr b, UnitaryAutomorphism aut, GradedForm phi);
    DKClassOdd operator+(const DKClassOdd& o) const;

private:
    ManifoldPtr m_;
    int degree_ = 0;
    std::vector<GenOdd> gens_;
};

// omega(E) = u^{r/2} R_u tr e^{-u^{-1} F} + d phi, summed over generators.
GradedForm omega_map(const DKClassEven& x);
// omega(G) = u^{(r+1)/2} omega(nabla, U) + d phi.
GradedForm omega_map(const DKClassOdd& x, int t_nodes = 32);

// j(alpha): rank-0 generator carrying alpha; omega(j(alpha)) = d alpha.
DKClassEven j_map(const GradedForm& alpha);
DKClassOdd j_map_odd(const GradedForm& alpha);

// Chern-character shadow of the underlying K-theory class.
struct KClassObservable {
    int rank = 0;
    std::map<std::string, LaurentScalar> periods;
};
KClassObservable c_map(const DKClassEven& x);

DKClassEven product(const DKClassEven& a, const DKClassEven& b);
DKClassEven pullback_class(const DKClassEven& a, ManifoldPtr target,
                           const std::vector<int>& source_of_target_factor);

// Endpoint comparison of a straight-line family of connections with affine
// phi: the endpoint classes differ by j of a transgression certificate, and
// the returned difference class must vanish on every observable.
struct HomotopyComparison {
    DKClassEven difference;
    GradedForm certificate;
};
HomotopyComparison homotopy_compare(const BundlePtr& v0, const GradedForm& phi0,
                                    const BundlePtr& v1, const GradedForm& phi1,
                                    int degree, int t_nodes = 32);

// Suspension to the mapping torus over a fresh unit circle (prepended as
// factor 0). Supported clutching maps: U = phase * constant unitary.
DKClassEven suspend_odd(const DKClassOdd& g, int circle_points = 64);

// Desuspension along `circle_factor`: restriction to the basepoint slice,
// fiber monodromy, and -int_{S^1} phi.
DKClassOdd desuspend(const DKClassEven& e, int circle_factor = 0,
                     int base_node = 0, int transport_steps = 1024);

// Double suspension: tensor with the flux-1 torus line bundle on two fresh
// circles (circumferences a and 1, prepended), phi -> (1/a) dt1^dt2^phi.
DKClassEven double_suspend(const DKClassEven& e, double a = 1.0,
                           int circle_points = 32);

// Determinant line with connection  nabla^{Lambda^max} - 2 pi i phi_(1).
BundlePtr det_line(const DKClassEven& e);

// x -> e^{2 pi i phi_(0)(x)} det(U(x)), sampled per chart.
std::vector<Field> det_circle(const DKClassOdd& g);
// Winding of det_circle around a circle factor (phase unwrapping).
int det_circle_winding(const DKClassOdd& g, int circle_factor);

// The observable kit used for class comparisons.
struct Observables {
    int rank = 0;
    std::map<std::string, LaurentScalar> periods;
    std::map<int, Complex> det_holonomy; // circle factor -> holonomy
    static double distance(const Observables& a, const Observables& b);
};
Observables observables(const DKClassEven& x, bool with_det = true);

// Odd classes carry no rank invariant (the composition relation adds the
// underlying bundle ranks), so the kit is periods + determinant data.
struct ObservablesOdd {
    std::map<std::string, LaurentScalar> periods;
    std::map<int, int> det_winding;
    Complex det_at_base{1.0, 0.0};
    static double distance(const ObservablesOdd& a, const ObservablesOdd& b);
};
ObservablesOdd observables(const DKClassOdd& x, int t_nodes = 32);

// Relation rewrites (observable-preserving by the theory; tested numerically).
// Replace generator `gen`'s connection: phi -> phi - cs_two(old, new).
DKClassEven rewrite_connection(const DKClassEven& e, std::size_t gen,
                               const BundlePtr& new_conn, int t_nodes = 32);
// Split generator `gen` (bundle = n1 (+) n3 as built) into two generators.
DKClassEven rewrite_split(const DKClassEven& e, std::size_t gen,
                          const BundlePtr& n1, const BundlePtr& n3,
                          int t_nodes = 32);
// Odd relation (2): (G,U1∘U2, phi) -> (G,U1,phi') + (G,U2,0) with the
// simplex correction folded into phi'.
DKClassOdd rewrite_compose(const DKClassOdd& g, std::size_t gen,
                           const UnitaryAutomorphism& u1,
                           const UnitaryAutomorphism& u2, int t_nodes = 32);
// Odd relation (1): split generator `gen` (bundle = n1 (+) n3 as built, with
// the automorphism block-diagonal over the splitting) into two generators,
// correcting phi by the six-argument transgression.
DKClassOdd rewrite_split_odd(const DKClassOdd& g, std::size_t gen,
                             const BundlePtr& n1, const UnitaryAutomorphism& u1,
                             const BundlePtr& n3, const UnitaryAutomorphism& u3,
                             int t_nodes = 32);

} // namespace dki
