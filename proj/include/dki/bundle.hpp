#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "dki/matform.hpp"

namespace dki {

class Bundle;
using BundlePtr = std::shared_ptr<const Bundle>;

// Finite-rank Hermitian bundle with a compatible connection, in orthonormal
// gauge: the metric is implicit and potentials are skew-Hermitian. Gluing
// data lives in two places:
//   cap_transition[f]  : sphere factor f, south = T * north on the band
//   seam_transition[f] : circle factor f, fiber at x=L identified with the
//                        fiber at x=0 via s(0^+) = T * s(L^-)
// Curvature is cached at construction; operations never differentiate the
// potential of a bundle whose potential is not chart-smooth (seam-twisted
// bundles provide their curvature analytically).
class Bundle {
public:
    ManifoldPtr manifold;
    int rank = 0;
    std::optional<std::pair<int, int>> grading; // (rank_plus, rank_minus)
    MatForm potential;                          // degree 1
    MatForm curvature;                          // degree 2
    std::vector<MatField> cap_transition;       // per factor; empty if trivial
    std::vector<MatField> seam_transition;      // per factor; empty if trivial
    bool potential_chart_smooth = true;

    // Flat-decomposition metadata: holonomy angles per line summand and per
    // circle factor (propagated through the constructors; validated by tests).
    std::optional<std::vector<std::vector<double>>> flat_thetas;
    // Landau block metadata for Poincare-type twists: (factor_a, factor_b, flux).
    struct FluxBlock {
        int factor_a = -1, factor_b = -1, flux = 0;
    };
    std::optional<FluxBlock> flux_block;
    // Provenance used for separation of variables on product geometries:
    // pullback_of records the source of a pulled-back bundle; tensor() of two
    // pullbacks with disjoint factor supports records a ProductSplit.
    std::optional<std::pair<BundlePtr, std::vector<int>>> pullback_of;
    struct ProductSplit {
        BundlePtr left, right;                       // live on the sub-products
        std::vector<int> left_factors, right_factors; // ambient factor indices
    };
    std::optional<ProductSplit> product_split;

    static BundlePtr trivial(ManifoldPtr m, int rank);
    static BundlePtr flat_line(ManifoldPtr torus, std::vector<double> thetas);
    static BundlePtr monopole(ManifoldPtr sphere, int n);
    static BundlePtr poincare(ManifoldPtr torus, int flux = 1);
    // General chart-smooth potential (curvature computed by differentiation).
    static BundlePtr from_potential(ManifoldPtr m, int rank, MatForm potential,
                                    std::optional<std::pair<int, int>> grading = {});
    // Same bundle, different chart-smooth connection.
    static BundlePtr with_potential(const BundlePtr& base, MatForm potential);

    static BundlePtr tensor(const BundlePtr& a, const BundlePtr& b);
    static BundlePtr direct_sum(const BundlePtr& a, const BundlePtr& b);
    static BundlePtr direct_sum_graded(const BundlePtr& plus, const BundlePtr& minus);
    static BundlePtr dual(const BundlePtr& a);
    static BundlePtr pullback(const BundlePtr& a, ManifoldPtr target,
                              const std::vector<int>& source_of_target_factor);
};

// Unitary automorphism given per chart as a matrix field.
struct UnitaryAutomorphism {
    BundlePtr bundle;
    std::vector<MatField> U; // per chart

    static UnitaryAutomorphism identity(const BundlePtr& b);
    // e^{i alpha(p)} times a constant unitary (alpha sampled per chart/point).
    static UnitaryAutomorphism phase(const BundlePtr& b,
                                     const std::function<double(int, std::size_t)>& alpha,
                                     const Mat* constant_part = nullptr);
    // e^{2 pi i k x / L} around circle factor f.
    static UnitaryAutomorphism winding(const BundlePtr& b, int factor, int k);
    UnitaryAutomorphism compose(const UnitaryAutomorphism& o) const; // this ∘ o
    UnitaryAutomorphism inverse() const;
};

// U nabla U^{-1}: potential U A U^{-1} - (dU) U^{-1}, curvature U F U^{-1}.
BundlePtr gauge_transform(const BundlePtr& b, const UnitaryAutomorphism& U);

// Straight-line (or 2-simplex) families of connections on one bundle.
struct ConnectionPath {
    std::vector<BundlePtr> vertices; // 2 = segment, 3 = simplex corner set

    const BundlePtr& base() const { return vertices.front(); }
};

// Monodromy around a circle factor through a given point: path-ordered
// transport (4th-order Magnus, trigonometric interpolation of the potential)
// closed by the seam transition.
Mat holonomy(const Bundle& b, int circle_factor, std::size_t base_point,
             int steps = 1024);

// Diagnostics.
double bianchi_residual(const Bundle& b);              // dF - (F A - A F)
double cap_conjugation_residual(const Bundle& b);      // curvature across caps
double skew_hermitian_residual(const Bundle& b);

} // namespace dki
