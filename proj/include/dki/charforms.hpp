#pragma once

#include "dki/bundle.hpp"

namespace dki {

// Chern character form of a degree-r generator:
//   u^{r/2} R_u tr e^{-u^{-1} F},
// expanded as sum_k (-1/(2 pi i))^k tr(F^k)/k! at u-degree r-2k, truncated at
// form degree <= dim. Graded bundles use the supertrace. Sign normalization is
// pinned by the flux and winding calibration tests.
GradedForm chern_form(const BundlePtr& b, int r = 0);

// -(2 pi i)^{-1} u^{-1} tr(F).
GradedForm c1_form(const BundlePtr& b);

// A-hat of a real orthogonal curvature, as the even series of
// sqrt(det(x/sinh x)) with x = u^{-1} Omega / 2, truncated at form degree 6
// (only the degree-0 and degree-4 terms are nonzero in that range).
GradedForm a_hat_form(const MatForm& tangent_curvature);

// A-hat(tangent) ^ exp(c1(L)/2); pass nullptr for a flat tangent factor.
GradedForm todd_form(const MatForm* tangent_curvature, const BundlePtr& L);

// Cylinder(s) used by the transgression integrals: the interval factor is
// prepended, so base factor i becomes factor i+1.
ManifoldPtr cylinder_manifold(const ManifoldPtr& base, int t_nodes);
ManifoldPtr square_manifold(const ManifoldPtr& base, int t_nodes);

// Barycentric family of connections over the first n_params coordinates of
// `cyl` (interval or circle axes): A = sum_k lambda_k A_k with lambda_0 =
// 1 - sum t_j, lambda_j = t_j. Gluing data is inherited from vertex 0.
BundlePtr family_bundle(const std::vector<BundlePtr>& verts, const ManifoldPtr& cyl,
                        int n_params);

// Straight-line family of connections from `from` to `to` on the cylinder.
BundlePtr segment_bundle(const BundlePtr& from, const BundlePtr& to,
                         const ManifoldPtr& cyl);
// Two-parameter convex family with corners (v0, v1, v2) on the square.
BundlePtr simplex_bundle(const BundlePtr& v0, const BundlePtr& v1,
                         const BundlePtr& v2, const ManifoldPtr& sq);

// Integral over [0,1] of the dt-leg of the cylinder Chern form. Satisfies
// d(transgress(from, to)) = chern(to) - chern(from) up to grid error.
GradedForm transgress(const BundlePtr& from, const BundlePtr& to, int r = 0,
                      int t_nodes = 32);

// Chern-Simons form of two connections on one bundle:
// d cs_two(a, b) = chern(a) - chern(b); the circle period of the abelian
// transgression is theta_a - theta_b.
GradedForm cs_two(const BundlePtr& a, const BundlePtr& b, int r = 0, int t_nodes = 32);

// Three-connection form for an orthogonal splitting E2 = E1 (+) E3:
// d cs_three = chern(n2) - chern(n1) - chern(n3).
GradedForm cs_three(const BundlePtr& n1, const BundlePtr& n2, const BundlePtr& n3,
                    int r = 0, int t_nodes = 32);

// Odd Chern form of (nabla, U): transgression along (1-t) nabla + t U nabla
// U^{-1}; closed, and the u^{-1} circle period counts the winding of det U.
GradedForm odd_chern_form(const BundlePtr& b, const UnitaryAutomorphism& U,
                          int t_nodes = 32);

// Two-automorphism form via the 2-simplex family:
// d cs_aut = odd_chern(U1 o U2) - odd_chern(U1) - odd_chern(U2).
GradedForm cs_aut(const BundlePtr& b, const UnitaryAutomorphism& U1,
                  const UnitaryAutomorphism& U2, int t_nodes = 32);

} // namespace dki
