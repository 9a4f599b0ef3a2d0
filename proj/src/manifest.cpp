#include "dki/manifest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>

#include <json.hpp>

#include "dki/index.hpp"
#include "dki/parallel.hpp"

namespace dki {

using nlohmann::ordered_json;

namespace {

constexpr double kPi = std::numbers::pi;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw ValidationError(where + ": unknown field '" + k + "'");
}

int get_int(const ordered_json& j, const std::string& key, int dflt,
            const std::string& where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number_integer())
        throw ValidationError(where + "." + key + ": expected an integer");
    return j[key].get<int>();
}

double get_num(const ordered_json& j, const std::string& key, double dflt,
               const std::string& where) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number())
        throw ValidationError(where + "." + key + ": expected a number");
    return j[key].get<double>();
}

struct Defaults {
    int grid = 128;
    int quad = 64;
    int t_quad = 32;
    double tol = 1e-6;
    double spin_offset = 0.0;
};

struct Spaces {
    ManifoldPtr total, fiber, base;
    std::vector<int> fiber_factors;
};

ManifoldPtr build_manifold(const ordered_json& j, const Defaults& d, double scale,
                           const std::string& where) {
    check_keys(j, {"factors"}, where);
    if (!j.contains("factors")) throw ValidationError(where + ": missing factors");
    std::vector<FactorSpec> fs;
    auto clamp = [&](int n) { return std::max(8, int(std::lround(n * scale))); };
    for (auto& f : j["factors"]) {
        std::string type = f.value("type", "");
        if (type == "circle") {
            check_keys(f, {"type", "circumference", "points"}, where + ".circle");
            CircleSpec c;
            c.circumference = get_num(f, "circumference", 1.0, where);
            c.points = clamp(get_int(f, "points", d.grid, where));
            fs.push_back(c);
        } else if (type == "sphere") {
            check_keys(f, {"type", "radius", "theta_nodes", "phi_points"},
                       where + ".sphere");
            SphereSpec s;
            s.radius = get_num(f, "radius", 1.0, where);
            s.theta_panel_nodes = clamp(get_int(f, "theta_nodes", d.quad, where));
            s.phi_points = clamp(get_int(f, "phi_points", 2 * d.quad, where));
            fs.push_back(s);
        } else if (type == "interval") {
            check_keys(f, {"type", "nodes"}, where + ".interval");
            fs.push_back(IntervalSpec{clamp(get_int(f, "nodes", d.t_quad, where))});
        } else {
            throw ValidationError(where + ": unknown factor type '" + type + "'");
        }
    }
    return StructuredManifold::make(std::move(fs));
}

ManifoldPtr space_of(const Spaces& sp, const std::string& name,
                     const std::string& where) {
    if (name == "total") return sp.total;
    if (name == "fiber") {
        if (!sp.fiber) throw ValidationError(where + ": no fiber declared");
        return sp.fiber;
    }
    if (name == "base") {
        if (!sp.base) throw ValidationError(where + ": no fiber declared");
        return sp.base;
    }
    throw ValidationError(where + ": unknown space '" + name + "'");
}

struct Context {
    Spaces spaces;
    Defaults defaults;
    int t_quad = 32;
    double spin_offset = 0.0;
    std::map<std::string, BundlePtr> bundles;
    std::map<std::string, std::string> bundle_space;
    std::map<std::string, GradedForm> forms;
    std::map<std::string, std::string> form_space;
    std::map<std::string, DKClassEven> classes;
    std::map<std::string, std::string> class_space;
};

BundlePtr build_bundle(Context& ctx, const ordered_json& spec_root,
                       const std::string& name, std::set<std::string>& in_flight);

BundlePtr resolve_bundle(Context& ctx, const ordered_json& root,
                         const std::string& name, std::set<std::string>& in_flight) {
    auto it = ctx.bundles.find(name);
    if (it != ctx.bundles.end()) return it->second;
    if (!root.contains(name))
        throw ValidationError("bundles: dangling reference '" + name + "'");
    if (in_flight.count(name))
        throw ValidationError("bundles: cyclic definition at '" + name + "'");
    in_flight.insert(name);
    BundlePtr b = build_bundle(ctx, root, name, in_flight);
    in_flight.erase(name);
    ctx.bundles.emplace(name, b);
    return b;
}

BundlePtr build_bundle(Context& ctx, const ordered_json& root,
                       const std::string& name, std::set<std::string>& in_flight) {
    const ordered_json& j = root[name];
    const std::string where = "bundles." + name;
    std::string space = j.value("space", "total");
    ManifoldPtr M = space_of(ctx.spaces, space, where);
    ctx.bundle_space[name] = space;
    std::string kind = j.value("kind", "");
    if (kind == "trivial") {
        check_keys(j, {"kind", "space", "rank"}, where);
        return Bundle::trivial(M, get_int(j, "rank", 1, where));
    }
    if (kind == "flat_line") {
        check_keys(j, {"kind", "space", "theta"}, where);
        if (!j.contains("theta") || !j["theta"].is_array())
            throw ValidationError(where + ": flat_line needs a theta array");
        std::vector<double> th;
        for (auto& t : j["theta"]) th.push_back(t.get<double>());
        return Bundle::flat_line(M, th);
    }
    if (kind == "monopole") {
        check_keys(j, {"kind", "space", "n"}, where);
        return Bundle::monopole(M, get_int(j, "n", 1, where));
    }
    if (kind == "poincare") {
        check_keys(j, {"kind", "space", "flux"}, where);
        return Bundle::poincare(M, get_int(j, "flux", 1, where));
    }
    if (kind == "tensor" || kind == "sum") {
        check_keys(j, {"kind", "space", "of"}, where);
        if (!j.contains("of") || !j["of"].is_array() || j["of"].size() < 2)
            throw ValidationError(where + ": needs at least two operands");
        BundlePtr acc = resolve_bundle(ctx, root, j["of"][0].get<std::string>(), in_flight);
        for (std::size_t i = 1; i < j["of"].size(); ++i) {
            BundlePtr x = resolve_bundle(ctx, root, j["of"][i].get<std::string>(), in_flight);
            acc = (kind == "tensor") ? Bundle::tensor(acc, x) : Bundle::direct_sum(acc, x);
        }
        return acc;
    }
    if (kind == "dual") {
        check_keys(j, {"kind", "space", "of"}, where);
        return Bundle::dual(
            resolve_bundle(ctx, root, j["of"].get<std::string>(), in_flight));
    }
    throw ValidationError(where + ": unknown bundle kind '" + kind + "'");
}

GradedForm build_form(Context& ctx, const ordered_json& j, ManifoldPtr M,
                      const std::string& where) {
    std::string op = j.value("op", "");
    if (op == "const") {
        check_keys(j, {"op", "re", "im", "u_degree"}, where);
        int ud = get_int(j, "u_degree", 0, where);
        return GradedForm::constant(
            M, Complex{get_num(j, "re", 0.0, where), get_num(j, "im", 0.0, where)}, ud);
    }
    if (op == "dx") {
        check_keys(j, {"op", "coord"}, where);
        int c = get_int(j, "coord", 0, where);
        if (c < 0 || c >= M->num_coords())
            throw ValidationError(where + ": coordinate out of range");
        return GradedForm::coordinate(M, c);
    }
    if (op == "cos" || op == "sin") {
        check_keys(j, {"op", "coord", "harmonic"}, where);
        int c = get_int(j, "coord", 0, where);
        int k = get_int(j, "harmonic", 1, where);
        if (c < 0 || c >= M->num_coords())
            throw ValidationError(where + ": coordinate out of range");
        if (M->role(c) != CoordRole::CircleX && M->role(c) != CoordRole::SpherePhi)
            throw ValidationError(where + ": trig profiles need a periodic coordinate");
        double L = (M->role(c) == CoordRole::SpherePhi)
                       ? 2.0 * kPi
                       : std::get<CircleSpec>(M->factors()[M->factor_of_coord(c)])
                             .circumference;
        bool is_cos = (op == "cos");
        return GradedForm::sample(M, [&, c, k, L, is_cos](int, std::size_t p) {
            double x = M->axis(c).nodes[M->coord_of_point(p, c)];
            double a = 2.0 * kPi * k * x / L;
            return Complex{is_cos ? std::cos(a) : std::sin(a), 0.0};
        });
    }
    if (op == "wedge" || op == "add") {
        check_keys(j, {"op", "of"}, where);
        if (!j.contains("of") || !j["of"].is_array() || j["of"].empty())
            throw ValidationError(where + ": needs operands");
        GradedForm acc = build_form(ctx, j["of"][0], M, where + "[0]");
        for (std::size_t i = 1; i < j["of"].size(); ++i) {
            GradedForm x = build_form(ctx, j["of"][i], M, where + "[" + std::to_string(i) + "]");
            acc = (op == "wedge") ? wedge(acc, x) : acc + x;
        }
        return acc;
    }
    if (op == "d") {
        check_keys(j, {"op", "of"}, where);
        return exterior_d(build_form(ctx, j["of"], M, where + ".of"));
    }
    if (op == "scale") {
        check_keys(j, {"op", "by", "im", "of"}, where);
        return build_form(ctx, j["of"], M, where + ".of") *
               Complex{get_num(j, "by", 1.0, where), get_num(j, "im", 0.0, where)};
    }
    if (op == "u") {
        check_keys(j, {"op", "degree", "of"}, where);
        return build_form(ctx, j["of"], M, where + ".of")
            .u_shifted(get_int(j, "degree", 0, where));
    }
    throw ValidationError(where + ": unknown form op '" + op + "'");
}

DKClassEven build_class(Context& ctx, const ordered_json& j, const std::string& name) {
    const std::string where = "classes." + name;
    check_keys(j, {"space", "degree", "generators"}, where);
    std::string space = j.value("space", "total");
    ManifoldPtr M = space_of(ctx.spaces, space, where);
    ctx.class_space[name] = space;
    DKClassEven cls(M, get_int(j, "degree", 0, where));
    if (!j.contains("generators") || !j["generators"].is_array())
        throw ValidationError(where + ": missing generators");
    for (auto& g : j["generators"]) {
        check_keys(g, {"coeff", "bundle", "phi"}, where + ".generators[]");
        std::string bname = g.value("bundle", "");
        if (!ctx.bundles.count(bname))
            throw ValidationError(where + ": dangling bundle reference '" + bname + "'");
        if (ctx.bundle_space[bname] != space)
            throw ValidationError(where + ": bundle '" + bname + "' lives on another space");
        int coeff = get_int(g, "coeff", 1, where);
        if (g.contains("phi")) {
            std::string fname = g["phi"].get<std::string>();
            if (!ctx.forms.count(fname))
                throw ValidationError(where + ": dangling form reference '" + fname + "'");
            if (ctx.form_space[fname] != space)
                throw ValidationError(where + ": form '" + fname + "' lives on another space");
            cls.add_generator(coeff, ctx.bundles[bname], ctx.forms.at(fname));
        } else {
            cls.add_generator(coeff, ctx.bundles[bname]);
        }
    }
    return cls;
}

Context build_context(const ordered_json& m, const Defaults& d, double scale) {
    Context ctx;
    ctx.defaults = d;
    ctx.t_quad = std::max(8, int(std::lround(d.t_quad * scale)));
    ctx.spin_offset = d.spin_offset;
    ctx.spaces.total = build_manifold(m.at("manifold"), d, scale, "manifold");
    if (m.contains("fiber_factors")) {
        for (auto& x : m["fiber_factors"])
            ctx.spaces.fiber_factors.push_back(x.get<int>());
        std::vector<int> base;
        std::vector<bool> isf(ctx.spaces.total->num_factors(), false);
        for (int f : ctx.spaces.fiber_factors) {
            if (f < 0 || f >= ctx.spaces.total->num_factors())
                throw ValidationError("fiber_factors: index out of range");
            isf[f] = true;
        }
        for (int f = 0; f < ctx.spaces.total->num_factors(); ++f)
            if (!isf[f]) base.push_back(f);
        ctx.spaces.fiber = ctx.spaces.total->submanifold(ctx.spaces.fiber_factors);
        ctx.spaces.base = ctx.spaces.total->submanifold(base);
    }
    if (m.contains("bundles")) {
        std::set<std::string> in_flight;
        for (auto& [name, spec] : m["bundles"].items())
            resolve_bundle(ctx, m["bundles"], name, in_flight);
    }
    if (m.contains("forms")) {
        for (auto& [name, spec] : m["forms"].items()) {
            std::string space = "total";
            ordered_json expr = spec;
            if (spec.is_object() && spec.contains("space")) {
                space = spec["space"].get<std::string>();
                expr = spec;
                expr.erase("space");
            }
            ctx.form_space[name] = space;
            ctx.forms.emplace(name, build_form(ctx, expr,
                                               space_of(ctx.spaces, space, "forms." + name),
                                               "forms." + name));
        }
    }
    if (m.contains("classes"))
        for (auto& [name, spec] : m["classes"].items())
            ctx.classes.emplace(name, build_class(ctx, spec, name));
    return ctx;
}

struct RequestValue {
    ordered_json value; // raw doubles
    double residual = 0.0;
};

double laurent_imag_residual(const LaurentScalar& s) {
    double r = 0.0;
    for (auto& [d, c] : s.terms()) r = std::max(r, std::abs(c.imag()));
    return r;
}

ordered_json laurent_json(const LaurentScalar& s) {
    ordered_json out = ordered_json::object();
    for (auto& [d, c] : s.terms()) out[std::to_string(d)] = c.real();
    return out;
}

ProductFamily family_from_request(Context& ctx, const ordered_json& r,
                                  const std::string& where) {
    if (ctx.spaces.fiber_factors.empty())
        throw ValidationError(where + ": manifest declares no fiber_factors");
    BundlePtr L;
    if (r.contains("char_line")) {
        std::string ln = r["char_line"].get<std::string>();
        if (!ctx.bundles.count(ln))
            throw ValidationError(where + ": dangling bundle reference '" + ln + "'");
        if (ctx.bundle_space[ln] != "fiber")
            throw ValidationError(where + ": characteristic line must live on the fiber");
        L = ctx.bundles[ln];
    }
    int degree = 0;
    std::vector<ProductFamily::Term> terms;
    if (!r.contains("terms") || !r["terms"].is_array() || r["terms"].empty())
        throw ValidationError(where + ": needs a terms array");
    for (auto& t : r["terms"]) {
        check_keys(t, {"fiber_class", "base_class"}, where + ".terms[]");
        std::string fc = t.value("fiber_class", ""), bc = t.value("base_class", "");
        if (!ctx.classes.count(fc) || !ctx.classes.count(bc))
            throw ValidationError(where + ": dangling class reference");
        if (ctx.class_space[fc] != "fiber" || ctx.class_space[bc] != "base")
            throw ValidationError(where + ": term classes must live on fiber/base");
        terms.push_back({ctx.classes.at(fc), ctx.classes.at(bc)});
        degree = terms.back().fiber_class.degree() + terms.back().base_class.degree();
    }
    ProductFamily f = ProductFamily::make(ctx.spaces.fiber, ctx.spaces.base, L, degree);
    // rebuild total on the shared grid declared by the manifest
    f.total = ctx.spaces.total;
    f.terms = std::move(terms);
    f.j_phi = GradedForm(f.total, degree - 1);
    if (r.contains("j_phi")) {
        std::string fn = r["j_phi"].get<std::string>();
        if (!ctx.forms.count(fn))
            throw ValidationError(where + ": dangling form reference '" + fn + "'");
        if (ctx.form_space[fn] != "total")
            throw ValidationError(where + ": j_phi must live on the total space");
        f.j_phi = rehome(ctx.forms.at(fn), f.total);
    }
    return f;
}

RequestValue execute_request(Context& ctx, const ordered_json& r,
                             const std::string& where) {
    std::string op = r.value("op", "");
    RequestValue out;
    if (op == "integrate") {
        check_keys(r, {"op", "form", "output"}, where);
        std::string fn = r.value("form", "");
        if (!ctx.forms.count(fn))
            throw ValidationError(where + ": dangling form reference '" + fn + "'");
        LaurentScalar s = integrate(ctx.forms.at(fn));
        out.value["laurent"] = laurent_json(s);
        out.residual = laurent_imag_residual(s);
        return out;
    }
    if (op == "c1_flux") {
        check_keys(r, {"op", "bundle", "output"}, where);
        std::string bn = r.value("bundle", "");
        if (!ctx.bundles.count(bn))
            throw ValidationError(where + ": dangling bundle reference '" + bn + "'");
        LaurentScalar s = integrate(c1_form(ctx.bundles[bn]));
        double flux = s.coeff(-2).real();
        out.value["flux"] = flux;
        out.residual = std::abs(flux - std::lround(flux));
        return out;
    }
    if (op == "omega_periods") {
        check_keys(r, {"op", "class", "output"}, where);
        std::string cn = r.value("class", "");
        if (!ctx.classes.count(cn))
            throw ValidationError(where + ": dangling class reference '" + cn + "'");
        KClassObservable o = c_map(ctx.classes.at(cn));
        out.value["rank"] = double(o.rank);
        ordered_json periods = ordered_json::object();
        double res = 0.0;
        for (auto& [k, v] : o.periods) {
            periods[k] = laurent_json(v);
            res = std::max(res, laurent_imag_residual(v));
        }
        out.value["periods"] = periods;
        out.residual = res;
        return out;
    }
    if (op == "cs_circle") {
        check_keys(r, {"op", "theta0", "theta1", "output"}, where);
        double t0 = get_num(r, "theta0", 0.0, where);
        double t1 = get_num(r, "theta1", 0.0, where);
        ManifoldPtr M = ctx.spaces.total;
        if (M->num_factors() != 1 ||
            !std::holds_alternative<CircleSpec>(M->factors()[0]))
            throw ValidationError(where + ": cs_circle needs a single circle manifold");
        auto a = Bundle::flat_line(M, {t0});
        auto b = Bundle::flat_line(M, {t1});
        GradedForm cs = cs_two(a, b, 0, ctx.t_quad);
        LaurentScalar s = integrate(cs);
        double period = s.coeff(-2).real();
        out.value["period"] = period;
        out.residual = std::abs(period - (t0 - t1));
        return out;
    }
    if (op == "reduced_eta") {
        check_keys(r, {"op", "theta", "output"}, where);
        double theta = mod1(get_num(r, "theta", 0.0, where) + ctx.spin_offset);
        out.value["eta"] = ordered_json{{"u_power", -1.0},
                                        {"value_mod_1", reduced_eta_circle(theta)}};
        return out;
    }
    if (op == "eta_class") {
        check_keys(r, {"op", "class", "output"}, where);
        std::string cn = r.value("class", "");
        if (!ctx.classes.count(cn))
            throw ValidationError(where + ": dangling class reference '" + cn + "'");
        EtaValue e = eta_class(ctx.classes.at(cn), ctx.spin_offset);
        out.value["eta"] = ordered_json{{"u_power", double(e.u_power)},
                                        {"value_mod_1", e.value_mod_1}};
        return out;
    }
    if (op == "torus_kernel") {
        check_keys(r, {"op", "flux", "theta1", "theta2", "output"}, where);
        auto k = torus_kernel_dim(get_int(r, "flux", 0, where),
                                  get_num(r, "theta1", 0.0, where),
                                  get_num(r, "theta2", 0.0, where));
        out.value["kernel_plus"] = double(k.first);
        out.value["kernel_minus"] = double(k.second);
        out.value["index"] = double(k.first - k.second);
        return out;
    }
    if (op == "holonomy") {
        check_keys(r, {"op", "bundle", "factor", "output"}, where);
        std::string bn = r.value("bundle", "");
        if (!ctx.bundles.count(bn))
            throw ValidationError(where + ": dangling bundle reference '" + bn + "'");
        const auto& b = ctx.bundles[bn];
        int f = get_int(r, "factor", 0, where);
        if (f < 0 || f >= b->manifold->num_factors() ||
            !std::holds_alternative<CircleSpec>(b->manifold->factors()[f]))
            throw ValidationError(where + ": holonomy needs a circle factor");
        Mat h = holonomy(*b, f, b->manifold->basepoint());
        Complex d = h.det();
        out.value["re"] = d.real();
        out.value["im"] = d.imag();
        out.residual = std::abs(std::abs(d) - 1.0);
        return out;
    }
    if (op == "odd_index_point") {
        check_keys(r, {"op", "class", "fiber_circle_len", "output"}, where);
        std::string cn = r.value("class", "");
        if (!ctx.classes.count(cn))
            throw ValidationError(where + ": dangling class reference '" + cn + "'");
        auto res = even_class_odd_fiber_index(
            ctx.classes.at(cn), get_num(r, "fiber_circle_len", 1.0, where),
            ctx.spin_offset, std::max(16, ctx.t_quad));
        out.value["eta"] = ordered_json{{"u_power", double(res.value.u_power)},
                                        {"value_mod_1", res.value.value_mod_1}};
        out.value["torus_flux"] = double(res.torus_flux);
        out.residual = EtaValue::circle_distance(res.value, res.eta_direct);
        return out;
    }
    if (op == "verify_index_theorem") {
        check_keys(r, {"op", "terms", "j_phi", "char_line", "output"}, where);
        ProductFamily f = family_from_request(ctx, r, where);
        VerifyReport rep = verify_index_theorem(f, ctx.spin_offset);
        ordered_json lines = ordered_json::object();
        for (auto& [k, v] : rep.lines) lines[k] = v;
        out.value["checks"] = lines;
        out.value["eta_checked"] = rep.eta_checked ? 1.0 : 0.0;
        out.residual = rep.max_residual;
        return out;
    }
    throw ValidationError(where + ": unknown op '" + op + "'");
}

ordered_json to_strings(const ordered_json& v) {
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_object()) {
        ordered_json o = ordered_json::object();
        for (auto& [k, x] : v.items()) o[k] = to_strings(x);
        return o;
    }
    if (v.is_array()) {
        ordered_json a = ordered_json::array();
        for (auto& x : v) a.push_back(to_strings(x));
        return a;
    }
    return v;
}

ordered_json richardson(const ordered_json& fine, const ordered_json& coarse) {
    // two-level extrapolation at the documented order 4
    if (fine.is_number() && coarse.is_number()) {
        double f = fine.get<double>(), c = coarse.get<double>();
        return f + (f - c) / 15.0;
    }
    if (fine.is_object()) {
        ordered_json o = ordered_json::object();
        for (auto& [k, x] : fine.items())
            o[k] = coarse.is_object() && coarse.contains(k) ? richardson(x, coarse[k]) : x;
        return o;
    }
    return fine;
}

} // namespace

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunOutcome run_manifest(const std::string& manifest_text, const Numerics& overrides) {
    RunOutcome out;
    ordered_json m;
    try {
        m = ordered_json::parse(manifest_text);
    } catch (const std::exception& e) {
        out.exit_code = 2;
        out.error = std::string("parse error: ") + e.what();
        return out;
    }

    ordered_json report;
    try {
        check_keys(m, {"version", "numerics", "manifold", "fiber_factors", "bundles",
                       "forms", "classes", "requests"},
                   "manifest");
        std::string version = m.value("version", "");
        if (version != "dki/1")
            throw ValidationError("manifest: unsupported version '" + version + "'");

        Defaults d;
        if (m.contains("numerics")) {
            check_keys(m["numerics"],
                       {"grid", "quad", "t_quad", "tol", "threads", "spin_offset"},
                       "numerics");
            d.grid = get_int(m["numerics"], "grid", d.grid, "numerics");
            d.quad = get_int(m["numerics"], "quad", d.quad, "numerics");
            d.t_quad = get_int(m["numerics"], "t_quad", d.t_quad, "numerics");
            d.tol = get_num(m["numerics"], "tol", d.tol, "numerics");
            d.spin_offset = get_num(m["numerics"], "spin_offset", 0.0, "numerics");
            if (m["numerics"].contains("threads"))
                exec::set_threads(get_int(m["numerics"], "threads", 0, "numerics"));
        }
        if (overrides.grid > 0) d.grid = overrides.grid;
        if (overrides.quad > 0) d.quad = overrides.quad;
        if (overrides.t_quad > 0) d.t_quad = overrides.t_quad;
        if (overrides.tol > 0) d.tol = overrides.tol;
        if (overrides.spin_offset != 0.0) d.spin_offset = overrides.spin_offset;
        if (overrides.threads > 0) exec::set_threads(overrides.threads);

        report["version"] = "dki-report/1";
        report["numerics"] =
            ordered_json{{"grid", d.grid},         {"quad", d.quad},
                         {"t_quad", d.t_quad},     {"tol", format_number(d.tol)},
                         {"threads", exec::threads()},
                         {"spin_offset", format_number(d.spin_offset)}};
        report["requests"] = ordered_json::array();

        if (!m.contains("manifold")) throw ValidationError("manifest: missing manifold");

        bool breach = false;
        if (m.contains("requests")) {
            if (!m["requests"].is_array())
                throw ValidationError("requests: expected an array");
            // validate outputs unique
            std::set<std::string> outputs;
            for (auto& r : m["requests"]) {
                std::string key = r.value("output", "");
                if (key.empty())
                    throw ValidationError("requests: every request needs an output key");
                if (!outputs.insert(key).second)
                    throw ValidationError("requests: duplicate output key '" + key + "'");
            }
            Context fine = build_context(m, d, 1.0);
            Context coarse = build_context(m, d, 0.5);
            for (auto& r : m["requests"]) {
                const std::string key = r["output"].get<std::string>();
                auto t0 = std::chrono::steady_clock::now();
                RequestValue vf = execute_request(fine, r, "requests." + key);
                RequestValue vc = execute_request(coarse, r, "requests." + key);
                auto t1 = std::chrono::steady_clock::now();
                ordered_json entry;
                entry["output"] = key;
                entry["op"] = r.value("op", "");
                ordered_json inputs = r;
                inputs.erase("output");
                inputs.erase("op");
                entry["inputs"] = inputs;
                entry["value"] = to_strings(vf.value);
                entry["residual"] = format_number(vf.residual);
                entry["tolerance"] = format_number(d.tol);
                entry["convergence"] =
                    ordered_json{{"coarse", to_strings(vc.value)},
                                 {"fine", to_strings(vf.value)},
                                 {"richardson", to_strings(richardson(vf.value, vc.value))},
                                 {"coarse_residual", format_number(vc.residual)},
                                 {"order", 4}};
                entry["wall_time_s"] = format_number(
                    std::chrono::duration<double>(t1 - t0).count());
                report["requests"].push_back(entry);
                if (vf.residual > d.tol) breach = true;
            }
        }
        report["status"] = breach ? "tolerance_breach" : "ok";
        out.report_json = report.dump(2);
        out.exit_code = breach ? 5 : 0;
        return out;
    } catch (const ValidationError& e) {
        out.exit_code = 3;
        out.error = e.what();
        report["status"] = "validation_error";
        report["error"] = e.what();
        out.report_json = report.dump(2);
        return out;
    } catch (const std::exception& e) {
        out.exit_code = 4;
        out.error = e.what();
        report["status"] = "numerical_error";
        report["error"] = e.what();
        out.report_json = report.dump(2);
        return out;
    }
}

} // namespace dki
