#include "dki/manifold.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dki {

namespace {

constexpr double kPi = std::numbers::pi;

void legendre_eval(int n, double x, double& p, double& dp) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
}

std::vector<double> barycentric_weights(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> w(n, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i) w[i] /= (x[i] - x[j]);
    return w;
}

// Differentiation matrix through all nodes (barycentric form).
std::vector<double> barycentric_diff(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    auto w = barycentric_weights(x);
    std::vector<double> d(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double v = (w[j] / w[i]) / (x[i] - x[j]);
            d[std::size_t(i) * n + j] = v;
            diag -= v;
        }
        d[std::size_t(i) * n + i] = diag;
    }
    return d;
}

// Periodic spectral differentiation, period L, uniform nodes.
std::vector<double> fourier_diff(int n, double L) {
    std::vector<double> d(std::size_t(n) * n, 0.0);
    const double scale = 2.0 * kPi / L;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            int k = i - j;
            double v;
            if (n % 2 == 0)
                v = 0.5 * ((k % 2 == 0) ? 1.0 : -1.0) / std::tan(kPi * k / n);
            else
                v = 0.5 * ((k % 2 == 0) ? 1.0 : -1.0) / std::sin(kPi * k / n);
            d[std::size_t(i) * n + j] = scale * v;
        }
    return d;
}

double raised_cosine(double theta, double band_begin, double band) {
    if (theta <= band_begin) return 1.0;
    double u = (theta - band_begin) / band; // in [0,2] across the band
    if (u >= 2.0) return 0.0;
    double c = std::cos(0.25 * kPi * u);
    return c * c;
}

Axis circle_axis(const CircleSpec& s) {
    if (s.points < 4) throw std::invalid_argument("circle grid too small");
    if (s.circumference <= 0) throw std::invalid_argument("circle circumference");
    Axis a;
    a.size = s.points;
    a.periodic = true;
    a.nodes.resize(s.points);
    a.weights.assign(s.points, s.circumference / s.points);
    for (int i = 0; i < s.points; ++i) a.nodes[i] = s.circumference * i / s.points;
    a.diff = fourier_diff(s.points, s.circumference);
    return a;
}

Axis interval_axis(const IntervalSpec& s) {
    Axis a;
    a.size = s.nodes;
    gauss_legendre(s.nodes, 0.0, 1.0, a.nodes, a.weights);
    a.diff = barycentric_diff(a.nodes);
    return a;
}

Axis sphere_theta_axis(const SphereSpec& s) {
    const double edge = kPi / 2.0 - s.band;
    const double top = kPi / 2.0 + s.band;
    std::vector<double> x1, w1, x2, w2;
    gauss_legendre(s.theta_panel_nodes, 0.0, edge, x1, w1);
    gauss_legendre(s.theta_panel_nodes, edge, top, x2, w2);
    Axis a;
    a.size = 2 * s.theta_panel_nodes;
    a.band_begin = s.theta_panel_nodes;
    a.nodes = x1;
    a.nodes.insert(a.nodes.end(), x2.begin(), x2.end());
    a.weights.resize(a.size);
    for (int i = 0; i < s.theta_panel_nodes; ++i) a.weights[i] = w1[i];
    for (int i = 0; i < s.theta_panel_nodes; ++i)
        a.weights[s.theta_panel_nodes + i] =
            w2[i] * raised_cosine(x2[i], edge, s.band);
    // Block-diagonal differentiation, one barycentric block per panel.
    const int n = a.size, h = s.theta_panel_nodes;
    a.diff.assign(std::size_t(n) * n, 0.0);
    auto d1 = barycentric_diff(x1);
    auto d2 = barycentric_diff(x2);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < h; ++j) {
            a.diff[std::size_t(i) * n + j] = d1[std::size_t(i) * h + j];
            a.diff[std::size_t(h + i) * n + (h + j)] = d2[std::size_t(i) * h + j];
        }
    return a;
}

Axis sphere_phi_axis(const SphereSpec& s) {
    CircleSpec c;
    c.circumference = 2.0 * kPi;
    c.points = s.phi_points;
    return circle_axis(c);
}

} // namespace

void gauss_legendre(int n, double a, double b, std::vector<double>& x,
                    std::vector<double>& w) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double p, dp;
        for (int it = 0; it < 100; ++it) {
            legendre_eval(n, z, p, dp);
            double dz = -p / dp;
            z += dz;
            if (std::abs(dz) < 1e-15) break;
        }
        legendre_eval(n, z, p, dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    // map [-1,1] -> [a,b]; nodes ascending
    for (int i = 0; i < n / 2; ++i) {
        std::swap(x[i], x[n - 1 - i]);
        std::swap(w[i], w[n - 1 - i]);
    }
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        x[i] = mid + half * x[i];
        w[i] *= half;
    }
}

StructuredManifold::StructuredManifold(std::vector<FactorSpec> factors)
    : factors_(std::move(factors)) {
    sphere_bit_.assign(factors_.size(), -1);
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        factor_coord_begin_.push_back(static_cast<int>(axes_.size()));
        if (auto* c = std::get_if<CircleSpec>(&factors_[f])) {
            axes_.push_back(circle_axis(*c));
            roles_.push_back(CoordRole::CircleX);
            coord_factor_.push_back(static_cast<int>(f));
            dim_ += 1;
        } else if (auto* s = std::get_if<SphereSpec>(&factors_[f])) {
            if (s->radius <= 0) throw std::invalid_argument("sphere radius");
            axes_.push_back(sphere_theta_axis(*s));
            axes_.push_back(sphere_phi_axis(*s));
            roles_.push_back(CoordRole::SphereTheta);
            roles_.push_back(CoordRole::SpherePhi);
            coord_factor_.push_back(static_cast<int>(f));
            coord_factor_.push_back(static_cast<int>(f));
            sphere_bit_[f] = num_spheres_++;
            dim_ += 2;
        } else {
            auto& iv = std::get<IntervalSpec>(factors_[f]);
            axes_.push_back(interval_axis(iv));
            roles_.push_back(CoordRole::IntervalT);
            coord_factor_.push_back(static_cast<int>(f));
            dim_ += 1;
            closed_ = false;
        }
    }
    strides_.assign(axes_.size(), 1);
    for (int c = static_cast<int>(axes_.size()) - 2; c >= 0; --c)
        strides_[c] = strides_[c + 1] * axes_[c + 1].size;
    npoints_ = axes_.empty() ? 1 : strides_[0] * axes_[0].size;
}

int StructuredManifold::coord_count(int factor) const {
    return std::holds_alternative<SphereSpec>(factors_[factor]) ? 2 : 1;
}

std::size_t StructuredManifold::point_index(const std::vector<int>& c) const {
    std::size_t p = 0;
    for (std::size_t i = 0; i < c.size(); ++i) p += strides_[i] * c[i];
    return p;
}

double StructuredManifold::weight(std::size_t p) const {
    double w = 1.0;
    for (int c = 0; c < num_coords(); ++c)
        w *= axes_[c].weights[coord_of_point(p, c)];
    return w;
}

std::optional<std::size_t>
StructuredManifold::sphere_partner(int factor, std::size_t p) const {
    const int tc = coord_begin(factor), pc = tc + 1;
    const Axis& th = axes_[tc];
    int it = coord_of_point(p, tc);
    if (it < th.band_begin) return std::nullopt; // outside the overlap band
    // Band panel nodes are symmetric about the equator, so theta -> pi - theta
    // reverses the panel index exactly (panel occupies [h, 2h)).
    const int h = th.band_begin;
    const int partner_t = 3 * h - 1 - it;
    const Axis& ph = axes_[pc];
    int ip = coord_of_point(p, pc);
    int partner_p = (ph.size - ip) % ph.size; // phi -> -phi
    std::size_t q = p;
    q += (std::size_t(partner_t) - it) * strides_[tc];
    q += (std::size_t(partner_p) - ip) * strides_[pc];
    return q;
}

std::shared_ptr<const StructuredManifold>
StructuredManifold::submanifold(const std::vector<int>& keep) const {
    std::vector<FactorSpec> f;
    for (int k : keep) f.push_back(factors_.at(k));
    return StructuredManifold::make(std::move(f));
}

bool StructuredManifold::same_grid_as(const StructuredManifold& o) const {
    if (factors_.size() != o.factors_.size()) return false;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        if (factors_[i].index() != o.factors_[i].index()) return false;
        if (auto* c = std::get_if<CircleSpec>(&factors_[i])) {
            auto& oc = std::get<CircleSpec>(o.factors_[i]);
            if (c->circumference != oc.circumference || c->points != oc.points)
                return false;
        } else if (auto* s = std::get_if<SphereSpec>(&factors_[i])) {
            auto& os = std::get<SphereSpec>(o.factors_[i]);
            if (s->radius != os.radius || s->theta_panel_nodes != os.theta_panel_nodes ||
                s->phi_points != os.phi_points || s->band != os.band)
                return false;
        } else {
            if (std::get<IntervalSpec>(factors_[i]).nodes !=
                std::get<IntervalSpec>(o.factors_[i]).nodes)
                return false;
        }
    }
    return true;
}

std::string StructuredManifold::describe() const {
    std::ostringstream os;
    bool first = true;
    for (auto& f : factors_) {
        if (!first) os << " x ";
        first = false;
        if (auto* c = std::get_if<CircleSpec>(&f))
            os << "S1(L=" << c->circumference << ",n=" << c->points << ")";
        else if (auto* s = std::get_if<SphereSpec>(&f))
            os << "S2(r=" << s->radius << ",q=" << s->theta_panel_nodes << ")";
        else
            os << "I(n=" << std::get<IntervalSpec>(f).nodes << ")";
    }
    if (first) os << "pt";
    return os.str();
}

} // namespace dki
