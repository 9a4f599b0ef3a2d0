#include <doctest.h>

#include <json.hpp>

#include "dki/manifest.hpp"
#include "dki/parallel.hpp"

using namespace dki;

namespace {

const char* kFluxManifest = R"json({
  "version": "dki/1",
  "numerics": {"grid": 32, "quad": 24, "tol": 1e-6},
  "manifold": {"factors": [{"type": "sphere", "radius": 1.0}]},
  "bundles": {
    "m3": {"kind": "monopole", "n": 3},
    "m1": {"kind": "monopole", "n": 1},
    "prod": {"kind": "tensor", "of": ["m3", "m1"]}
  },
  "requests": [
    {"op": "c1_flux", "bundle": "m3", "output": "flux3"},
    {"op": "c1_flux", "bundle": "prod", "output": "flux4"}
  ]
})json";

std::string strip_volatile(const std::string& report) {
    auto j = nlohmann::ordered_json::parse(report);
    for (auto& r : j["requests"]) r.erase("wall_time_s");
    j["numerics"].erase("threads"); // the echo differs by construction
    return j.dump(2);
}

} // namespace

TEST_CASE("manifest: flux requests round-trip with convergence data") {
    RunOutcome rc = run_manifest(kFluxManifest, {});
    REQUIRE(rc.exit_code == 0);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    CHECK(j["status"] == "ok");
    REQUIRE(j["requests"].size() == 2);
    double f3 = std::stod(j["requests"][0]["value"]["flux"].get<std::string>());
    double f4 = std::stod(j["requests"][1]["value"]["flux"].get<std::string>());
    CHECK(f3 == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(f4 == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(j["requests"][0]["convergence"].contains("coarse"));
    CHECK(j["requests"][0]["convergence"].contains("richardson"));
}

TEST_CASE("manifest: empty request list is a clean run") {
    const char* m = R"json({
      "version": "dki/1",
      "manifold": {"factors": [{"type": "circle", "points": 16}]},
      "requests": []
    })json";
    RunOutcome rc = run_manifest(m, {});
    CHECK(rc.exit_code == 0);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    CHECK(j["requests"].empty());
}

TEST_CASE("manifest: validation failures carry exit code 3 and name the key") {
    const char* dangling = R"json({
      "version": "dki/1",
      "manifold": {"factors": [{"type": "sphere"}]},
      "requests": [{"op": "c1_flux", "bundle": "nope", "output": "x"}]
    })json";
    RunOutcome rc = run_manifest(dangling, {});
    CHECK(rc.exit_code == 3);
    CHECK(rc.error.find("nope") != std::string::npos);

    const char* unknown = R"json({
      "version": "dki/1",
      "manifold": {"factors": [{"type": "circle", "points": 16}]},
      "surprise": 1,
      "requests": []
    })json";
    CHECK(run_manifest(unknown, {}).exit_code == 3);

    const char* badver = R"json({"version": "dki/2", "manifold": {"factors": []}})json";
    CHECK(run_manifest(badver, {}).exit_code == 3);

    CHECK(run_manifest("{not json", {}).exit_code == 2);

    const char* dupout = R"json({
      "version": "dki/1",
      "manifold": {"factors": [{"type": "circle", "points": 16}]},
      "requests": [
        {"op": "reduced_eta", "theta": 0.25, "output": "x"},
        {"op": "reduced_eta", "theta": 0.5, "output": "x"}
      ]
    })json";
    CHECK(run_manifest(dupout, {}).exit_code == 3);
}

TEST_CASE("manifest: eta, transgression and kernel requests") {
    const char* m = R"json({
      "version": "dki/1",
      "numerics": {"grid": 48, "t_quad": 24},
      "manifold": {"factors": [{"type": "circle", "circumference": 1.0}]},
      "forms": {
        "phi": {"op": "scale", "by": 0.31,
                 "of": {"op": "u", "degree": -2, "of": {"op": "dx", "coord": 0}}}
      },
      "bundles": {"l": {"kind": "flat_line", "theta": [0.25]}},
      "classes": {
        "e": {"degree": 0, "generators": [{"coeff": 1, "bundle": "l", "phi": "phi"}]}
      },
      "requests": [
        {"op": "reduced_eta", "theta": 0.25, "output": "eta"},
        {"op": "eta_class", "class": "e", "output": "etac"},
        {"op": "cs_circle", "theta0": 0.7, "theta1": 0.2, "output": "cs"},
        {"op": "torus_kernel", "flux": -2, "output": "ker"},
        {"op": "holonomy", "bundle": "l", "factor": 0, "output": "hol"},
        {"op": "odd_index_point", "class": "e", "output": "oip"}
      ]
    })json";
    RunOutcome rc = run_manifest(m, {});
    REQUIRE(rc.exit_code == 0);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    auto leaf = [&](int i, std::vector<const char*> path) {
        nlohmann::ordered_json v = j["requests"][i]["value"];
        for (auto* k : path) v = v[k];
        return std::stod(v.get<std::string>());
    };
    CHECK(leaf(0, {"eta", "value_mod_1"}) == doctest::Approx(0.25));
    CHECK(leaf(0, {"eta", "u_power"}) == doctest::Approx(-1.0));
    CHECK(leaf(1, {"eta", "value_mod_1"}) == doctest::Approx(0.56));
    CHECK(leaf(2, {"period"}) == doctest::Approx(0.5));
    CHECK(leaf(3, {"index"}) == doctest::Approx(-2.0));
    CHECK(leaf(3, {"kernel_minus"}) == doctest::Approx(2.0));
    CHECK(leaf(4, {"im"}) == doctest::Approx(1.0)); // e^{2 pi i / 4}
    CHECK(leaf(5, {"eta", "value_mod_1"}) == doctest::Approx(0.56));
    CHECK(std::stod(j["requests"][5]["residual"].get<std::string>()) < 1e-8);
}

TEST_CASE("manifest: fibered family verification request") {
    const char* m = R"json({
      "version": "dki/1",
      "numerics": {"grid": 16, "quad": 12},
      "manifold": {"factors": [{"type": "sphere", "radius": 1.0},
                                {"type": "circle", "circumference": 1.0}]},
      "fiber_factors": [0],
      "bundles": {
        "h": {"kind": "monopole", "n": 1, "space": "fiber"},
        "one_f": {"kind": "trivial", "rank": 1, "space": "fiber"},
        "bl": {"kind": "flat_line", "theta": [0.3], "space": "base"}
      },
      "classes": {
        "x_slot": {"space": "fiber", "degree": 2,
                    "generators": [{"coeff": 1, "bundle": "h"},
                                    {"coeff": -1, "bundle": "one_f"}]},
        "bc": {"space": "base", "degree": 0,
                "generators": [{"coeff": 1, "bundle": "bl"}]}
      },
      "requests": [
        {"op": "verify_index_theorem",
         "terms": [{"fiber_class": "x_slot", "base_class": "bc"}],
         "output": "fam"}
      ]
    })json";
    RunOutcome rc = run_manifest(m, {});
    REQUIRE(rc.exit_code == 0);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    CHECK(std::stod(j["requests"][0]["residual"].get<std::string>()) < 1e-6);
    CHECK(j["requests"][0]["value"]["eta_checked"].get<std::string>() == "1");
    // a term class on the wrong space is a validation error
    std::string bad = m;
    auto pos = bad.find("\"base_class\": \"bc\"");
    bad.replace(pos, std::string("\"base_class\": \"bc\"").size(),
                "\"base_class\": \"x_slot\"");
    CHECK(run_manifest(bad, {}).exit_code == 3);
}

TEST_CASE("manifest: reports are identical across thread counts") {
    RunOutcome r1 = run_manifest(kFluxManifest, {.threads = 1});
    RunOutcome r4 = run_manifest(kFluxManifest, {.threads = 4});
    exec::set_threads(0);
    CHECK(strip_volatile(r1.report_json) == strip_volatile(r4.report_json));
}

TEST_CASE("manifest: numerical failures exit 4") {
    // eta pairing is only defined on flat odd bases; a sphere class trips the
    // engine's runtime guard
    const char* m = R"json({
      "version": "dki/1",
      "numerics": {"quad": 8},
      "manifold": {"factors": [{"type": "sphere"}]},
      "bundles": {"t": {"kind": "trivial", "rank": 1}},
      "classes": {"e": {"degree": 0, "generators": [{"coeff": 1, "bundle": "t"}]}},
      "requests": [{"op": "eta_class", "class": "e", "output": "x"}]
    })json";
    RunOutcome rc = run_manifest(m, {});
    CHECK(rc.exit_code == 4);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    CHECK(j["status"] == "numerical_error");
}

TEST_CASE("manifest: tolerance breach exits 5") {
    const char* m = R"json({
      "version": "dki/1",
      "numerics": {"tol": 1e-30},
      "manifold": {"factors": [{"type": "circle", "points": 32}]},
      "requests": [{"op": "cs_circle", "theta0": 0.256, "theta1": 0.1, "output": "x"}]
    })json";
    RunOutcome rc = run_manifest(m, {});
    // the abelian period residual cannot hit 1e-30
    CHECK(rc.exit_code == 5);
    auto j = nlohmann::ordered_json::parse(rc.report_json);
    CHECK(j["status"] == "tolerance_breach");
}
