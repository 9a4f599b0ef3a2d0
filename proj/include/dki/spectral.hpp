#pragma once

#include "dki/diffk.hpp"

namespace dki {

// Exactly solvable Dirac data on flat circle/torus geometries. The twist is
// the total flat holonomy angle (bundle plus spin-structure offset).
struct CircleSpectrum {
    double circumference = 1.0;
    double theta = 0.0; // in [0,1)

    double eigenvalue(long n) const;
    // eigenvalues with |lambda| <= cutoff, sign-ordered
    std::vector<double> window(double cutoff) const;
    int kernel_dim() const { return theta == 0.0 ? 1 : 0; }
};

CircleSpectrum circle_spectrum(double circumference, double theta);

// Reduced eta of the twisted circle operator, (eta(0) + dim ker)/2 mod 1.
// Closed form 1/2 - theta; the zeta-regularized oracle lives in the tests.
double reduced_eta_circle(double theta);

// eta-bar of a flat line twist on an odd all-circle manifold. For dim >= 3
// the spectrum is symmetric and the value is 0 mod 1.
double reduced_eta_flat(const std::vector<double>& thetas_per_factor);

// Per-bundle version: sums over the flat line decomposition; spin_offset is
// added to every circle twist. Errors when no flat decomposition is known.
double eta_flat_bundle(const Bundle& b, double spin_offset);

// Landau kernel dimensions of the flux-twisted torus operator:
// (n, 0) for n > 0, (0, -n) for n < 0; flux 0 has a (1,1) kernel exactly at
// trivial twist. Index = n in all cases.
std::pair<int, int> torus_kernel_dim(int flux, double theta1 = 0.0, double theta2 = 0.0);

// Class-level reduced eta on a flat odd-dimensional all-circle base:
//   u^{(r-dim-1)/2} eta-bar(D) + int Td ^ phi  (mod 1),
// with Td = 1 on flat bases.
EtaValue eta_class(const DKClassEven& x, double spin_offset = 0.0);

} // namespace dki
