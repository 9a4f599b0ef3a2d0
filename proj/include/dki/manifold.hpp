#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dki/laurent.hpp"

namespace dki {

// Factors of a structured product manifold. Grid layout:
//   circle   : one periodic chart, uniform nodes, spectral differentiation
//   2-sphere : two polar caps (north/south), each covering theta in
//              [0, pi/2 + band]; the theta axis is a two-panel composite
//              Gauss-Legendre grid split at the band edge, phi is uniform
//              periodic. Cap integration carries a raised-cosine partition
//              of unity supported on the band, so the two caps sum to the
//              full sphere integral.
//   interval : [0,1], Gauss-Legendre nodes (used for transgression cylinders)
struct CircleSpec {
    double circumference = 1.0;
    int points = 128;
};
struct SphereSpec {
    double radius = 1.0;
    int theta_panel_nodes = 64; // per panel; the axis has 2x this many nodes
    int phi_points = 128;
    double band = 0.4; // overlap band half-width around the equator
};
struct IntervalSpec {
    int nodes = 32;
};
using FactorSpec = std::variant<CircleSpec, SphereSpec, IntervalSpec>;

enum class CoordRole { CircleX, SphereTheta, SpherePhi, IntervalT };

struct Axis {
    std::vector<double> nodes;
    std::vector<double> weights; // integration weights, PoU folded in for theta
    std::vector<double> diff;    // dense n*n row-major differentiation matrix
    bool periodic = false;
    int size = 0;
    int band_begin = 0; // theta axis: first node index of the band panel
};

// Gauss-Legendre nodes/weights on [a,b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x,
                    std::vector<double>& w);

class StructuredManifold {
public:
    explicit StructuredManifold(std::vector<FactorSpec> factors);

    static std::shared_ptr<const StructuredManifold> make(std::vector<FactorSpec> f) {
        return std::make_shared<const StructuredManifold>(std::move(f));
    }
    static std::shared_ptr<const StructuredManifold> point() { return make({}); }

    const std::vector<FactorSpec>& factors() const { return factors_; }
    int num_factors() const { return static_cast<int>(factors_.size()); }
    int dim() const { return dim_; }
    bool closed() const { return closed_; }

    int num_coords() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int coord) const { return axes_[coord]; }
    CoordRole role(int coord) const { return roles_[coord]; }
    int factor_of_coord(int coord) const { return coord_factor_[coord]; }
    int coord_begin(int factor) const { return factor_coord_begin_[factor]; }
    int coord_count(int factor) const;

    // Charts: bit f of the chart id selects the south cap of sphere factor f
    // (bits indexed by sphere order, not factor order).
    int num_charts() const { return 1 << num_spheres_; }
    int num_spheres() const { return num_spheres_; }
    int sphere_bit(int factor) const { return sphere_bit_[factor]; } // -1 if not a sphere
    bool chart_south(int chart, int factor) const {
        int b = sphere_bit_[factor];
        return b >= 0 && ((chart >> b) & 1);
    }

    std::size_t npoints() const { return npoints_; }
    std::size_t stride(int coord) const { return strides_[coord]; }
    int coord_of_point(std::size_t p, int coord) const {
        return static_cast<int>((p / strides_[coord]) % axes_[coord].size);
    }
    std::size_t point_index(const std::vector<int>& c) const;

    // Node weight = product of axis weights (partition of unity included).
    double weight(std::size_t p) const;

    // Partner node on the other cap of `factor` under (theta,phi) ->
    // (pi - theta, -phi); empty if the node is outside the overlap band.
    std::optional<std::size_t> sphere_partner(int factor, std::size_t p) const;

    // Basepoint node (all coordinates at their first node, chart 0).
    std::size_t basepoint() const { return 0; }

    // Same factor list restricted to `keep` (order preserved). Grids coincide
    // with the parent's, so sampled data transfers node-by-node.
    std::shared_ptr<const StructuredManifold>
    submanifold(const std::vector<int>& keep) const;

    bool same_grid_as(const StructuredManifold& o) const;

    std::string describe() const;

private:
    std::vector<FactorSpec> factors_;
    std::vector<Axis> axes_;
    std::vector<CoordRole> roles_;
    std::vector<int> coord_factor_;
    std::vector<int> factor_coord_begin_;
    std::vector<int> sphere_bit_;
    std::vector<std::size_t> strides_;
    std::size_t npoints_ = 1;
    int dim_ = 0;
    int num_spheres_ = 0;
    bool closed_ = true;
};

using ManifoldPtr = std::shared_ptr<const StructuredManifold>;

} // namespace dki
